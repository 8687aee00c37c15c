#include "fzoo/panel.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>

namespace fzoo {

const char* to_string(PanelErrc code) noexcept {
  switch (code) {
    case PanelErrc::kIo: return "io_error";
    case PanelErrc::kEmptyFile: return "empty_file";
    case PanelErrc::kDuplicateName: return "duplicate_name";
    case PanelErrc::kEmptyName: return "empty_name";
    case PanelErrc::kRaggedRow: return "ragged_row";
    case PanelErrc::kUnparseableNumber: return "unparseable_number";
    case PanelErrc::kNonFinite: return "non_finite";
    case PanelErrc::kDuplicatePeriod: return "duplicate_period";
    case PanelErrc::kUnknownName: return "unknown_name";
    case PanelErrc::kEmptyResult: return "empty_result";
    case PanelErrc::kInvalidFolds: return "invalid_folds";
    case PanelErrc::kNegativeCost: return "negative_cost";
    case PanelErrc::kDimension: return "dimension_mismatch";
  }
  return "panel_error";
}

ReturnPanel::ReturnPanel(std::vector<std::string> periods,
                         std::vector<std::string> names, MatrixXd returns)
    : periods_(std::move(periods)), names_(std::move(names)), returns_(std::move(returns)) {
  if (static_cast<std::size_t>(returns_.rows()) != periods_.size() ||
      static_cast<std::size_t>(returns_.cols()) != names_.size()) {
    throw PanelError(PanelErrc::kDimension,
                     "matrix is " + std::to_string(returns_.rows()) + "x" +
                         std::to_string(returns_.cols()) + " but labels give " +
                         std::to_string(periods_.size()) + "x" + std::to_string(names_.size()));
  }
  for (std::size_t j = 0; j < names_.size(); ++j) {
    if (names_[j].empty()) {
      throw PanelError(PanelErrc::kEmptyName, "column " + std::to_string(j + 1) + " has no name");
    }
    if (!index_.emplace(names_[j], j).second) {
      throw PanelError(PanelErrc::kDuplicateName, "'" + names_[j] + "'");
    }
  }
  if (!returns_.allFinite()) {
    for (Eigen::Index t = 0; t < returns_.rows(); ++t) {
      for (Eigen::Index j = 0; j < returns_.cols(); ++j) {
        if (!std::isfinite(returns_(t, j))) {
          throw PanelError(PanelErrc::kNonFinite, "period '" + periods_[t] + "', column '" +
                                                      names_[j] + "'");
        }
      }
    }
  }
}

bool ReturnPanel::contains(const std::string& name) const { return index_.count(name) > 0; }

std::size_t ReturnPanel::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw PanelError(PanelErrc::kUnknownName, "'" + name + "'");
  return it->second;
}

std::vector<std::size_t> ReturnPanel::indices_of(const std::vector<std::string>& names) const {
  std::vector<std::size_t> out;
  out.reserve(names.size());
  for (const auto& n : names) out.push_back(index_of(n));
  return out;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line, char delim) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      cells.push_back(trim(line.substr(start)));
      break;
    }
    cells.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return cells;
}

bool parse_double(std::string_view cell, double& out) {
  if (cell.empty()) return false;
  if (cell.front() == '+') cell.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), out);
  return ec == std::errc() && ptr == cell.data() + cell.size();
}

}  // namespace

ReturnPanel parse_panel(const std::string& text, const CsvOptions& options,
                        const std::string& source) {
  std::vector<std::string_view> lines;
  {
    std::string_view rest(text);
    // Strip a UTF-8 byte-order mark.
    if (rest.substr(0, 3) == "\xEF\xBB\xBF") rest.remove_prefix(3);
    while (!rest.empty()) {
      auto pos = rest.find('\n');
      auto line = rest.substr(0, pos);
      if (!trim(line).empty()) lines.push_back(line);
      if (pos == std::string_view::npos) break;
      rest.remove_prefix(pos + 1);
    }
  }
  if (lines.empty()) throw PanelError(PanelErrc::kEmptyFile, source);

  auto header = split(lines.front(), options.delimiter);
  std::size_t period_col = 0;
  if (!options.period_column.empty()) {
    auto it = std::find(header.begin(), header.end(), options.period_column);
    if (it == header.end()) {
      throw PanelError(PanelErrc::kUnknownName,
                       "period column '" + options.period_column + "' not in header of " + source);
    }
    period_col = static_cast<std::size_t>(it - header.begin());
  }
  std::vector<std::string> names;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (j != period_col) names.emplace_back(header[j]);
  }
  if (names.empty() || lines.size() < 2) {
    throw PanelError(PanelErrc::kEmptyFile, source + " has no data columns or rows");
  }
  {
    std::set<std::string> seen;
    for (const auto& n : names) {
      if (n.empty()) throw PanelError(PanelErrc::kEmptyName, "blank header cell in " + source);
      if (!seen.insert(n).second) {
        throw PanelError(PanelErrc::kDuplicateName, "'" + n + "' in header of " + source);
      }
    }
  }

  const std::size_t rows = lines.size() - 1;
  std::vector<std::string> periods(rows);
  MatrixXd values(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(names.size()));
  for (std::size_t r = 0; r < rows; ++r) {
    auto cells = split(lines[r + 1], options.delimiter);
    const std::size_t line_no = r + 2;
    if (cells.size() != header.size()) {
      throw PanelError(PanelErrc::kRaggedRow,
                       source + " line " + std::to_string(line_no) + " has " +
                           std::to_string(cells.size()) + " cells, header has " +
                           std::to_string(header.size()));
    }
    periods[r] = std::string(cells[period_col]);
    Eigen::Index c = 0;
    for (std::size_t j = 0; j < cells.size(); ++j) {
      if (j == period_col) continue;
      double v = 0.0;
      if (!parse_double(cells[j], v)) {
        throw PanelError(PanelErrc::kUnparseableNumber,
                         source + " line " + std::to_string(line_no) + " (period " + periods[r] + "), column '" +
                             names[static_cast<std::size_t>(c)] + "': '" + std::string(cells[j]) + "'");
      }
      if (!std::isfinite(v)) {
        throw PanelError(PanelErrc::kNonFinite,
                         source + " line " + std::to_string(line_no) + " (period " + periods[r] + "), column '" +
                             names[static_cast<std::size_t>(c)] + "'");
      }
      values(static_cast<Eigen::Index>(r), c++) = v;
    }
  }

  // Order rows by period label.
  std::vector<std::size_t> order(rows);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return periods[a] < periods[b]; });
  for (std::size_t r = 1; r < rows; ++r) {
    if (periods[order[r]] == periods[order[r - 1]]) {
      throw PanelError(PanelErrc::kDuplicatePeriod, "'" + periods[order[r]] + "' in " + source);
    }
  }
  std::vector<std::string> sorted_periods(rows);
  MatrixXd sorted(values.rows(), values.cols());
  for (std::size_t r = 0; r < rows; ++r) {
    sorted_periods[r] = periods[order[r]];
    sorted.row(static_cast<Eigen::Index>(r)) = values.row(static_cast<Eigen::Index>(order[r]));
  }
  return ReturnPanel(std::move(sorted_periods), std::move(names), std::move(sorted));
}

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PanelError(PanelErrc::kIo, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

ReturnPanel load_panel(const std::string& path, const CsvOptions& options) {
  return parse_panel(read_file(path), options, path);
}

std::string format_panel(const ReturnPanel& panel) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "period";
  for (const auto& n : panel.names()) out << ',' << n;
  out << '\n';
  const auto& r = panel.returns();
  for (Eigen::Index t = 0; t < r.rows(); ++t) {
    out << panel.periods()[static_cast<std::size_t>(t)];
    for (Eigen::Index j = 0; j < r.cols(); ++j) out << ',' << r(t, j);
    out << '\n';
  }
  return out.str();
}

void write_panel(const ReturnPanel& panel, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw PanelError(PanelErrc::kIo, "cannot write '" + path + "'");
  out << format_panel(panel);
}

CostSchedule load_costs(const std::string& path) {
  CostSchedule costs;
  std::istringstream in(read_file(path));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    auto cells = split(t, ',');
    if (cells.size() != 2) {
      throw PanelError(PanelErrc::kRaggedRow,
                       path + " line " + std::to_string(line_no) + ": expected name,bps");
    }
    double bps = 0.0;
    if (!parse_double(cells[1], bps)) {
      // Tolerate a header row.
      if (line_no == 1) continue;
      throw PanelError(PanelErrc::kUnparseableNumber,
                       path + " line " + std::to_string(line_no) + ": '" + std::string(cells[1]) + "'");
    }
    if (!costs.bps.emplace(std::string(cells[0]), bps).second) {
      throw PanelError(PanelErrc::kDuplicateName, "'" + std::string(cells[0]) + "' in " + path);
    }
  }
  return costs;
}

ReturnPanel adjust_costs(const ReturnPanel& panel, const CostSchedule& costs) {
  MatrixXd r = panel.returns();
  for (const auto& [name, bps] : costs.bps) {
    if (!(bps >= 0.0) || !std::isfinite(bps)) {
      throw PanelError(PanelErrc::kNegativeCost, "'" + name + "' has cost " + std::to_string(bps));
    }
    const auto j = static_cast<Eigen::Index>(panel.index_of(name));
    r.col(j).array() -= bps / 10000.0;
  }
  return ReturnPanel(panel.periods(), panel.names(), std::move(r));
}

ReturnPanel subset(const ReturnPanel& panel,
                   const std::optional<std::vector<std::string>>& names,
                   const PeriodRange& range) {
  std::vector<std::size_t> cols;
  if (names) {
    // Keep source column order.
    std::set<std::size_t> wanted;
    for (const auto& n : *names) wanted.insert(panel.index_of(n));
    cols.assign(wanted.begin(), wanted.end());
  } else {
    cols.resize(panel.num_series());
    std::iota(cols.begin(), cols.end(), 0);
  }
  if (range.from && std::find(panel.periods().begin(), panel.periods().end(), *range.from) ==
                        panel.periods().end()) {
    throw PanelError(PanelErrc::kUnknownName, "period '" + *range.from + "'");
  }
  if (range.to && std::find(panel.periods().begin(), panel.periods().end(), *range.to) ==
                      panel.periods().end()) {
    throw PanelError(PanelErrc::kUnknownName, "period '" + *range.to + "'");
  }
  std::vector<std::size_t> rows;
  for (std::size_t t = 0; t < panel.num_periods(); ++t) {
    const auto& p = panel.periods()[t];
    if (range.from && p < *range.from) continue;
    if (range.to && p > *range.to) continue;
    rows.push_back(t);
  }
  if (cols.empty() || rows.empty()) throw PanelError(PanelErrc::kEmptyResult, "subset is empty");

  std::vector<std::string> out_names;
  std::vector<std::string> out_periods;
  MatrixXd out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) out_names.push_back(panel.names()[cols[c]]);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out_periods.push_back(panel.periods()[rows[r]]);
    for (std::size_t c = 0; c < cols.size(); ++c) {
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          panel.returns()(static_cast<Eigen::Index>(rows[r]), static_cast<Eigen::Index>(cols[c]));
    }
  }
  return ReturnPanel(std::move(out_periods), std::move(out_names), std::move(out));
}

ReturnPanel take_rows(const ReturnPanel& panel, const std::vector<std::size_t>& rows) {
  if (rows.empty()) throw PanelError(PanelErrc::kEmptyResult, "no rows selected");
  MatrixXd out(static_cast<Eigen::Index>(rows.size()), panel.returns().cols());
  std::vector<std::string> periods;
  periods.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= panel.num_periods()) {
      throw PanelError(PanelErrc::kDimension, "row " + std::to_string(rows[r]) + " out of range");
    }
    out.row(static_cast<Eigen::Index>(r)) = panel.returns().row(static_cast<Eigen::Index>(rows[r]));
    periods.push_back(panel.periods()[rows[r]]);
  }
  // Repeated rows would collide on period labels only in display; labels are
  // disambiguated so the panel invariants still hold.
  std::map<std::string, int> seen;
  for (auto& p : periods) {
    int n = seen[p]++;
    if (n > 0) p += "#" + std::to_string(n);
  }
  return ReturnPanel(std::move(periods), panel.names(), std::move(out));
}

ReturnPanel concat_columns(const ReturnPanel& left, const ReturnPanel& right) {
  if (left.periods() != right.periods()) {
    throw PanelError(PanelErrc::kDimension, "panels cover different periods");
  }
  MatrixXd out(left.returns().rows(), left.returns().cols() + right.returns().cols());
  out << left.returns(), right.returns();
  auto names = left.names();
  names.insert(names.end(), right.names().begin(), right.names().end());
  return ReturnPanel(left.periods(), std::move(names), std::move(out));
}

std::vector<std::size_t> FoldSplit::complement(std::size_t f) const {
  std::vector<std::size_t> out;
  for (std::size_t g = 0; g < folds.size(); ++g) {
    if (g == f) continue;
    out.insert(out.end(), folds[g].begin(), folds[g].end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

FoldSplit split_folds(std::size_t num_periods, std::size_t k) {
  if (k < 2) throw PanelError(PanelErrc::kInvalidFolds, "need at least 2 folds, got " + std::to_string(k));
  if (k > num_periods) {
    throw PanelError(PanelErrc::kInvalidFolds, std::to_string(k) + " folds exceed " +
                                                   std::to_string(num_periods) + " periods");
  }
  FoldSplit split;
  split.num_periods = num_periods;
  const std::size_t base = num_periods / k;
  const std::size_t extra = num_periods % k;
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = base + (f < extra ? 1 : 0);
    std::vector<std::size_t> fold(size);
    std::iota(fold.begin(), fold.end(), pos);
    pos += size;
    split.folds.push_back(std::move(fold));
  }
  return split;
}

}  // namespace fzoo
