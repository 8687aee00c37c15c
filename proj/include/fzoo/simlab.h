#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fzoo/frontier.h"
#include "fzoo/panel.h"
#include "fzoo/stepwise.h"

namespace fzoo {

/// Data-generating process for the selection study: k1 risk factors drawn
/// i.i.d. normal, and k2 unselected factors that load on them plus noise.
struct SimConfig {
  std::size_t k1 = 0;
  std::size_t k2 = 0;
  std::size_t t_obs = 0;
  VectorXd mu1;     // k1
  MatrixXd sigma1;  // k1 x k1
  MatrixXd beta;    // k1 x k2
  MatrixXd sigma2;  // k2 x k2
  int baseline_case = 1;
  std::uint64_t seed = 0;

  // Throws ConfigError on inconsistent dimensions or asymmetric covariances.
  // Positive definiteness is checked when drawing.
  void validate() const;
};

// Parses the calibration JSON: mu1, sigma1, beta (k1 x k2), sigma2 (k2 x k2,
// or a length-k2 array of variances for a diagonal), optional t_obs.
SimConfig parse_sim_config(const std::string& json_text);
SimConfig load_sim_config(const std::string& path);

// Bundled FF5-like calibration with k1 = 5, k2 = 100, t_obs = 3000.
SimConfig default_sim_config();

// Keeps only the first k2 unselected factors.
SimConfig truncate_unselected(const SimConfig& cfg, std::size_t k2);

std::vector<std::string> risk_factor_names(std::size_t k1);   // R01, R02, ...
std::vector<std::string> unselected_names(std::size_t k2);    // U001, U002, ...

struct SimDraw {
  ReturnPanel panel;  // risk factors then unselected factors
  ModelSet truth;
  ModelSet baseline;  // case 1: first risk factor; case 2: plus first unselected factor
};

/// Reusable sampler; the Cholesky factors are computed once.
class Simulator {
 public:
  explicit Simulator(SimConfig cfg);  // NumericalError if a covariance is not PD

  const SimConfig& config() const noexcept { return cfg_; }
  const std::vector<std::string>& names() const noexcept { return names_; }
  ModelSet truth() const;
  ModelSet baseline() const;

  // Deterministic in (seed, rep).
  SimDraw draw(std::size_t rep) const;

 private:
  SimConfig cfg_;
  MatrixXd chol1_;
  MatrixXd chol2_;
  bool diagonal2_ = false;
  std::vector<std::string> names_;
};

SimDraw simulate_panel(const SimConfig& cfg, std::size_t rep);

struct SimMethod {
  std::string label;  // "HDA", "GRS", "SR", ...
  SelectionConfig selection;
};

// "hda": model-SR^2 criterion, HDA stop. "grs": model-SR^2, GRS stop.
// "sr": single-factor SR^2 criterion, HDA stop.
SimMethod sim_method(const std::string& name, double significance = 0.05);

/// Accuracy of one selected set against the truth.
struct SelectionScore {
  std::size_t size = 0;
  bool covers = false;
  bool exact = false;
  double true_rate = 0.0;   // share of true factors selected
  double false_rate = 0.0;  // share of the other factors selected
};

SelectionScore score_selection(const ModelSet& selected, const ModelSet& truth,
                               std::size_t num_factors);

/// One (method, pass) row. Rates are percentages over successful replications.
struct SimRow {
  std::string method;
  std::string pass;  // "FSE" or "BSE"
  double mean_size = 0.0;
  double cp = 0.0;
  double cf = 0.0;
  double tr = 0.0;
  double fr = 0.0;
  std::size_t replications = 0;
  std::size_t failures = 0;
  std::size_t not_converged = 0;
  std::vector<double> selection_rate;  // %, per factor in SimReport::factor_names order
};

SimRow summarize_selections(const std::string& method, const std::string& pass,
                            const std::vector<ModelSet>& selections, const ModelSet& truth,
                            const std::vector<std::string>& factor_names,
                            std::size_t failures = 0);

struct SimReport {
  std::vector<std::string> factor_names;
  ModelSet truth;
  ModelSet baseline;
  std::size_t t_obs = 0;
  int baseline_case = 1;
  std::uint64_t seed = 0;
  std::size_t reps = 0;
  std::vector<SimRow> rows;
  std::vector<std::string> failure_messages;  // first few, for diagnosis
};

SimReport run_sim_study(const SimConfig& cfg, const std::vector<SimMethod>& methods,
                        std::size_t reps, unsigned threads = 1);

// Method x pass table with |S|, CP, CF, TR, FR columns.
std::string format_sim_table(const SimReport& report);
// Per-factor selection rates, one row per factor.
std::string format_selection_rates(const SimReport& report);

}  // namespace fzoo
