#include "fzoo/simlab.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "fzoo/default_calibration.h"
#include "fzoo/errors.h"
#include "fzoo/parallel.h"
#include "fzoo/pricing_tests.h"
#include "fzoo/rng.h"
#include "json.hpp"

namespace fzoo {

namespace {

using nlohmann::json;

bool symmetric(const MatrixXd& m) {
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale;
}

VectorXd read_vector(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_array()) throw ConfigError(std::string("calibration: missing array '") + key + "'");
  const auto& a = j[key];
  VectorXd v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].is_number()) throw ConfigError(std::string("calibration: non-numeric entry in '") + key + "'");
    v(static_cast<Eigen::Index>(i)) = a[i].get<double>();
  }
  return v;
}

MatrixXd read_matrix(const json& a, const char* key) {
  if (!a.is_array() || a.empty()) throw ConfigError(std::string("calibration: '") + key + "' must be a nested array");
  const std::size_t rows = a.size();
  const std::size_t cols = a[0].is_array() ? a[0].size() : 0;
  if (cols == 0) throw ConfigError(std::string("calibration: '") + key + "' must be a nested array");
  MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows; ++i) {
    if (!a[i].is_array() || a[i].size() != cols) {
      throw ConfigError(std::string("calibration: ragged row in '") + key + "'");
    }
    for (std::size_t k = 0; k < cols; ++k) {
      if (!a[i][k].is_number()) throw ConfigError(std::string("calibration: non-numeric entry in '") + key + "'");
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = a[i][k].get<double>();
    }
  }
  return m;
}

MatrixXd cholesky_or_throw(const MatrixXd& cov, const char* what) {
  Eigen::LLT<MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw NumericalError(std::string(what) + " is not positive definite");
  }
  // Also reject near-singular matrices, using the same rule as everywhere else.
  SpdSolver check(cov, what);
  return llt.matrixL();
}

std::string two_digits(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

std::string name_with_width(char prefix, std::size_t i, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%c%0*zu", prefix, width, i);
  return buf;
}

}  // namespace

void SimConfig::validate() const {
  if (k1 < 1) throw ConfigError("simulation needs at least one risk factor");
  if (t_obs < 2) throw ConfigError("simulation needs t_obs >= 2");
  const auto k1i = static_cast<Eigen::Index>(k1);
  const auto k2i = static_cast<Eigen::Index>(k2);
  if (mu1.size() != k1i) throw ConfigError("mu1 must have k1 entries");
  if (sigma1.rows() != k1i || sigma1.cols() != k1i) throw ConfigError("sigma1 must be k1 x k1");
  if (beta.rows() != k1i || beta.cols() != k2i) throw ConfigError("beta must be k1 x k2");
  if (sigma2.rows() != k2i || sigma2.cols() != k2i) throw ConfigError("sigma2 must be k2 x k2");
  if (!symmetric(sigma1)) throw ConfigError("sigma1 is not symmetric");
  if (k2 > 0 && !symmetric(sigma2)) throw ConfigError("sigma2 is not symmetric");
  if (baseline_case != 1 && baseline_case != 2) throw ConfigError("baseline case must be 1 or 2");
  if (baseline_case == 2 && k2 < 1) throw ConfigError("case 2 needs at least one unselected factor");
  if (!mu1.allFinite() || !sigma1.allFinite() || !beta.allFinite() || !sigma2.allFinite()) {
    throw ConfigError("calibration contains non-finite values");
  }
}

SimConfig parse_sim_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("calibration: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("calibration: top level must be an object");
  SimConfig cfg;
  cfg.mu1 = read_vector(j, "mu1");
  if (!j.contains("sigma1")) throw ConfigError("calibration: missing 'sigma1'");
  cfg.sigma1 = read_matrix(j["sigma1"], "sigma1");
  if (!j.contains("beta")) throw ConfigError("calibration: missing 'beta'");
  cfg.beta = read_matrix(j["beta"], "beta");
  cfg.k1 = static_cast<std::size_t>(cfg.mu1.size());
  cfg.k2 = static_cast<std::size_t>(cfg.beta.cols());
  if (!j.contains("sigma2")) throw ConfigError("calibration: missing 'sigma2'");
  const json& s2 = j["sigma2"];
  if (s2.is_array() && !s2.empty() && s2[0].is_number()) {
    const VectorXd d = read_vector(j, "sigma2");
    cfg.sigma2 = d.asDiagonal();
  } else {
    cfg.sigma2 = read_matrix(s2, "sigma2");
  }
  cfg.t_obs = j.value("t_obs", std::size_t{3000});
  cfg.validate();
  return cfg;
}

SimConfig load_sim_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open calibration file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_sim_config(ss.str());
}

SimConfig default_sim_config() { return parse_sim_config(detail::kDefaultCalibration); }

SimConfig truncate_unselected(const SimConfig& cfg, std::size_t k2) {
  if (k2 > cfg.k2) {
    throw ConfigError("calibration has only " + std::to_string(cfg.k2) + " unselected factors");
  }
  SimConfig out = cfg;
  const auto n = static_cast<Eigen::Index>(k2);
  out.k2 = k2;
  out.beta = cfg.beta.leftCols(n);
  out.sigma2 = cfg.sigma2.topLeftCorner(n, n);
  return out;
}

std::vector<std::string> risk_factor_names(std::size_t k1) {
  std::vector<std::string> out;
  const int width = k1 >= 100 ? 3 : 2;
  for (std::size_t i = 1; i <= k1; ++i) out.push_back(name_with_width('R', i, width));
  return out;
}

std::vector<std::string> unselected_names(std::size_t k2) {
  std::vector<std::string> out;
  const int width = k2 >= 1000 ? 4 : 3;
  for (std::size_t i = 1; i <= k2; ++i) out.push_back(name_with_width('U', i, width));
  return out;
}

Simulator::Simulator(SimConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  chol1_ = cholesky_or_throw(cfg_.sigma1, "sigma1");
  if (cfg_.k2 > 0) {
    const MatrixXd off = cfg_.sigma2 - MatrixXd(cfg_.sigma2.diagonal().asDiagonal());
    diagonal2_ = off.cwiseAbs().maxCoeff() == 0.0;
    if (diagonal2_) {
      if ((cfg_.sigma2.diagonal().array() <= 0.0).any()) {
        throw NumericalError("sigma2 is not positive definite");
      }
      chol2_ = cfg_.sigma2.diagonal().cwiseSqrt();
    } else {
      chol2_ = cholesky_or_throw(cfg_.sigma2, "sigma2");
    }
  }
  names_ = risk_factor_names(cfg_.k1);
  const auto u = unselected_names(cfg_.k2);
  names_.insert(names_.end(), u.begin(), u.end());
}

ModelSet Simulator::truth() const { return ModelSet(risk_factor_names(cfg_.k1)); }

ModelSet Simulator::baseline() const {
  if (cfg_.baseline_case == 2) return ModelSet{names_[0], names_[cfg_.k1]};
  return ModelSet{names_[0]};
}

SimDraw Simulator::draw(std::size_t rep) const {
  auto rng = stream_for(cfg_.seed, {0x51u, rep});
  std::normal_distribution<double> z;
  const auto t = static_cast<Eigen::Index>(cfg_.t_obs);
  const auto k1 = static_cast<Eigen::Index>(cfg_.k1);
  const auto k2 = static_cast<Eigen::Index>(cfg_.k2);

  // Draw row by row so a replication's numbers do not depend on T being a
  // multiple of anything.
  MatrixXd shocks1(t, k1);
  MatrixXd shocks2(t, k2);
  for (Eigen::Index r = 0; r < t; ++r) {
    for (Eigen::Index c = 0; c < k1; ++c) shocks1(r, c) = z(rng);
    for (Eigen::Index c = 0; c < k2; ++c) shocks2(r, c) = z(rng);
  }
  MatrixXd f1 = shocks1 * chol1_.transpose();
  f1.rowwise() += cfg_.mu1.transpose();

  MatrixXd all(t, k1 + k2);
  all.leftCols(k1) = f1;
  if (k2 > 0) {
    MatrixXd u = diagonal2_ ? MatrixXd(shocks2 * chol2_.col(0).asDiagonal())
                            : MatrixXd(shocks2 * chol2_.transpose());
    all.rightCols(k2) = f1 * cfg_.beta + u;
  }

  std::vector<std::string> periods;
  periods.reserve(cfg_.t_obs);
  const int width = static_cast<int>(std::to_string(cfg_.t_obs).size());
  for (std::size_t i = 1; i <= cfg_.t_obs; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%0*zu", width, i);
    periods.emplace_back(buf);
  }
  return SimDraw{ReturnPanel(std::move(periods), names_, std::move(all)), truth(), baseline()};
}

SimDraw simulate_panel(const SimConfig& cfg, std::size_t rep) { return Simulator(cfg).draw(rep); }

SimMethod sim_method(const std::string& name, double significance) {
  SimMethod m;
  m.selection.significance = significance;
  if (name == "hda" || name == "HDA") {
    m.label = "HDA";
  } else if (name == "grs" || name == "GRS") {
    m.label = "GRS";
    m.selection.stop_rule = StopRule::kGrs;
  } else if (name == "sr" || name == "SR") {
    m.label = "SR";
    m.selection.criterion = Criterion::kSingleSr2;
  } else {
    throw ConfigError("unknown simulation method '" + name + "' (expected hda, grs or sr)");
  }
  return m;
}

SelectionScore score_selection(const ModelSet& selected, const ModelSet& truth,
                               std::size_t num_factors) {
  SelectionScore s;
  s.size = selected.size();
  std::size_t hits = 0;
  for (const auto& f : truth) hits += selected.contains(f) ? 1 : 0;
  const std::size_t misses = selected.size() - hits;
  s.covers = hits == truth.size();
  s.exact = s.covers && misses == 0;
  s.true_rate = truth.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(truth.size());
  const std::size_t others = num_factors - truth.size();
  s.false_rate = others == 0 ? 0.0 : static_cast<double>(misses) / static_cast<double>(others);
  return s;
}

SimRow summarize_selections(const std::string& method, const std::string& pass,
                            const std::vector<ModelSet>& selections, const ModelSet& truth,
                            const std::vector<std::string>& factor_names,
                            std::size_t failures) {
  SimRow row;
  row.method = method;
  row.pass = pass;
  row.failures = failures;
  row.replications = selections.size();
  row.selection_rate.assign(factor_names.size(), 0.0);
  if (selections.empty()) return row;

  double size = 0, cp = 0, cf = 0, tr = 0, fr = 0;
  for (const auto& sel : selections) {
    const SelectionScore s = score_selection(sel, truth, factor_names.size());
    size += static_cast<double>(s.size);
    cp += s.covers ? 1.0 : 0.0;
    cf += s.exact ? 1.0 : 0.0;
    tr += s.true_rate;
    fr += s.false_rate;
    for (std::size_t i = 0; i < factor_names.size(); ++i) {
      if (sel.contains(factor_names[i])) row.selection_rate[i] += 1.0;
    }
  }
  const double n = static_cast<double>(selections.size());
  row.mean_size = size / n;
  row.cp = 100.0 * cp / n;
  row.cf = 100.0 * cf / n;
  row.tr = 100.0 * tr / n;
  row.fr = 100.0 * fr / n;
  for (auto& r : row.selection_rate) r = 100.0 * r / n;
  return row;
}

SimReport run_sim_study(const SimConfig& cfg, const std::vector<SimMethod>& methods,
                        std::size_t reps, unsigned threads) {
  if (reps < 1) throw ConfigError("reps must be at least 1");
  if (methods.empty()) throw ConfigError("at least one method is required");
  for (const auto& m : methods) m.selection.validate();
  const Simulator sim(cfg);

  struct Outcome {
    bool ok = false;
    bool converged = true;
    ModelSet expanded;
    ModelSet final_model;
    std::string error;
  };
  // outcomes[rep * methods + m]
  std::vector<Outcome> outcomes(reps * methods.size());

  parallel_for(reps, threads, [&](std::size_t rep) {
    const SimDraw d = sim.draw(rep);
    const AssetUniverse u(d.panel);
    for (std::size_t m = 0; m < methods.size(); ++m) {
      Outcome& o = outcomes[rep * methods.size() + m];
      SelectionConfig sc = methods[m].selection;
      sc.threads = 1;
      try {
        const StepwiseResult r = stepwise_select(u, d.baseline, sc);
        o.expanded = r.expanded;
        o.final_model = r.final_model;
        o.converged = r.forward.converged && r.backward.converged;
        o.ok = true;
      } catch (const Error& e) {
        o.error = "rep " + std::to_string(rep) + " " + methods[m].label + ": " + e.what();
      }
    }
  });

  SimReport report;
  report.factor_names = sim.names();
  report.truth = sim.truth();
  report.baseline = sim.baseline();
  report.t_obs = cfg.t_obs;
  report.baseline_case = cfg.baseline_case;
  report.seed = cfg.seed;
  report.reps = reps;

  for (std::size_t m = 0; m < methods.size(); ++m) {
    std::vector<ModelSet> fwd, bwd;
    std::size_t failures = 0, stalled = 0;
    for (std::size_t rep = 0; rep < reps; ++rep) {
      const Outcome& o = outcomes[rep * methods.size() + m];
      if (!o.ok) {
        ++failures;
        if (report.failure_messages.size() < 10) report.failure_messages.push_back(o.error);
        continue;
      }
      if (!o.converged) ++stalled;
      fwd.push_back(o.expanded);
      bwd.push_back(o.final_model);
    }
    auto f = summarize_selections(methods[m].label, "FSE", fwd, report.truth, report.factor_names, failures);
    auto b = summarize_selections(methods[m].label, "BSE", bwd, report.truth, report.factor_names, failures);
    f.not_converged = b.not_converged = stalled;
    report.rows.push_back(std::move(f));
    report.rows.push_back(std::move(b));
  }
  return report;
}

std::string format_sim_table(const SimReport& report) {
  std::ostringstream out;
  out << "method,pass,size,CP,CF,TR,FR,replications,failures,not_converged\n";
  for (const auto& r : report.rows) {
    out << r.method << ',' << r.pass << ',' << two_digits(r.mean_size) << ',' << two_digits(r.cp)
        << ',' << two_digits(r.cf) << ',' << two_digits(r.tr) << ',' << two_digits(r.fr) << ','
        << r.replications << ',' << r.failures << ',' << r.not_converged << '\n';
  }
  return out.str();
}

std::string format_selection_rates(const SimReport& report) {
  std::ostringstream out;
  out << "factor,true";
  for (const auto& r : report.rows) out << ',' << r.pass << '(' << r.method << ')';
  out << '\n';
  for (std::size_t i = 0; i < report.factor_names.size(); ++i) {
    out << report.factor_names[i] << ',' << (report.truth.contains(report.factor_names[i]) ? 1 : 0);
    for (const auto& r : report.rows) out << ',' << two_digits(r.selection_rate[i]);
    out << '\n';
  }
  return out.str();
}

}  // namespace fzoo
