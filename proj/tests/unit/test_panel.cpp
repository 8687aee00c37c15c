#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "fzoo/errors.h"
#include "fzoo/panel.h"

using namespace fzoo;

namespace {

PanelErrc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const PanelError& e) {
    return e.code();
  }
  FAIL("expected a PanelError");
  return PanelErrc::kIo;
}

std::string temp_file(const std::string& name, const std::string& content) {
  const auto path = std::filesystem::temp_directory_path() / ("fzoo_panel_" + name);
  std::ofstream(path) << content;
  return path.string();
}

}  // namespace

TEST_CASE("three rows, two factors") {
  const auto p = parse_panel("date,MKT,SMB\n200001,0.01,0.002\n200002,-0.02,0.001\n200003,0.03,0\n");
  CHECK(p.num_periods() == 3);
  CHECK(p.num_series() == 2);
  CHECK(p.names() == std::vector<std::string>{"MKT", "SMB"});
  CHECK(p.returns()(1, 0) == doctest::Approx(-0.02));
  CHECK(p.periods().front() == "200001");
}

TEST_CASE("load from disk handles BOM, CRLF and unsorted periods") {
  const auto path = temp_file("bom.csv", "\xEF\xBB\xBF" "date,A\r\n200002,0.5\r\n200001,0.25\r\n");
  const auto p = load_panel(path);
  CHECK(p.periods() == std::vector<std::string>{"200001", "200002"});
  CHECK(p.returns()(0, 0) == 0.25);
  std::filesystem::remove(path);
}

TEST_CASE("malformed input is rejected with a specific code") {
  CHECK(code_of([] { parse_panel("date,MKT,MKT\n1,0.1,0.2\n"); }) == PanelErrc::kDuplicateName);
  CHECK(code_of([] { parse_panel("date,MKT,\n1,0.1,0.2\n"); }) == PanelErrc::kEmptyName);
  CHECK(code_of([] { parse_panel("date,MKT\n1,0.1,0.2\n"); }) == PanelErrc::kRaggedRow);
  CHECK(code_of([] { parse_panel("date,MKT\n1,nan\n"); }) == PanelErrc::kNonFinite);
  CHECK(code_of([] { parse_panel("date,MKT\n1,0.1\n1,0.2\n"); }) == PanelErrc::kDuplicatePeriod);
  CHECK(code_of([] { parse_panel(""); }) == PanelErrc::kEmptyFile);
  CHECK(code_of([] { load_panel("/nonexistent/fzoo.csv"); }) == PanelErrc::kIo);
}

TEST_CASE("blank cell names its row and column") {
  try {
    parse_panel("date,MKT,SMB\n200001,0.01,\n");
    FAIL("no error");
  } catch (const PanelError& e) {
    CHECK(e.code() == PanelErrc::kUnparseableNumber);
    const std::string msg = e.what();
    CHECK(msg.find("SMB") != std::string::npos);
    CHECK(msg.find("200001") != std::string::npos);
  }
}

TEST_CASE("write then read reproduces every double") {
  Eigen::MatrixXd r(2, 2);
  r << 0.1 / 3.0, -1e-17, 1.0 / 7.0, 123.456789012345678;
  const ReturnPanel p({"a", "b"}, {"X", "Y"}, r);
  const auto q = parse_panel(format_panel(p));
  CHECK(q.returns() == p.returns());
  CHECK(q.names() == p.names());
}

TEST_CASE("trading costs") {
  Eigen::MatrixXd r(2, 2);
  r << 0.0050, 0.0, 0.0050, 0.0;
  const ReturnPanel p({"1", "2"}, {"F", "Z"}, r);
  CostSchedule c;
  c.bps["F"] = 12;
  c.bps["Z"] = 24;
  const auto q = adjust_costs(p, c);
  CHECK(q.returns()(0, 0) == doctest::Approx(0.0038).epsilon(1e-12));
  CHECK(q.returns()(1, 1) == doctest::Approx(-0.0024).epsilon(1e-12));

  CostSchedule zero;
  zero.bps["F"] = 0;
  CHECK(adjust_costs(p, zero).returns() == p.returns());

  CostSchedule neg;
  neg.bps["F"] = -1;
  CHECK(code_of([&] { adjust_costs(p, neg); }) == PanelErrc::kNegativeCost);
}

TEST_CASE("cost file with header") {
  const auto path = temp_file("costs.csv", "name,bps\nMKT,12\nSMB,24\n");
  const auto c = load_costs(path);
  CHECK(c.bps.at("MKT") == 12);
  CHECK(c.bps.at("SMB") == 24);
  std::filesystem::remove(path);
}

TEST_CASE("subset by name and period range") {
  const auto p = parse_panel("date,MKT,SMB,HML\n1,0.1,0.2,0.3\n2,0.4,0.5,0.6\n3,0.7,0.8,0.9\n");
  const auto m = subset(p, std::vector<std::string>{"MKT"});
  CHECK(m.num_series() == 1);
  CHECK(m.num_periods() == 3);

  const auto same = subset(p, std::nullopt, PeriodRange{"1", "3"});
  CHECK(same.returns() == p.returns());
  CHECK(same.periods() == p.periods());

  const auto mid = subset(p, std::vector<std::string>{"HML", "MKT"}, PeriodRange{"2", "2"});
  CHECK(mid.names() == std::vector<std::string>{"MKT", "HML"});
  CHECK(mid.num_periods() == 1);

  CHECK(code_of([&] { subset(p, std::vector<std::string>{"UMD"}); }) == PanelErrc::kUnknownName);
}

TEST_CASE("fold splits") {
  const auto f = split_folds(588, 3);
  REQUIRE(f.folds.size() == 3);
  for (const auto& fold : f.folds) CHECK(fold.size() == 196);

  const auto g = split_folds(5, 2);
  CHECK(g.folds[0].size() == 3);
  CHECK(g.folds[1].size() == 2);
  CHECK(g.folds[1].front() == 3);
  CHECK(g.complement(1) == std::vector<std::size_t>{0, 1, 2});

  CHECK(code_of([] { split_folds(3, 4); }) == PanelErrc::kInvalidFolds);
  CHECK(code_of([] { split_folds(10, 1); }) == PanelErrc::kInvalidFolds);
}

TEST_CASE("take_rows keeps repeats distinguishable") {
  const auto p = parse_panel("date,A\n1,0.1\n2,0.2\n");
  const auto q = take_rows(p, {1, 1, 0});
  CHECK(q.num_periods() == 3);
  CHECK(q.returns()(0, 0) == 0.2);
  CHECK(q.returns()(2, 0) == 0.1);
}
