#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fzoo/frontier.h"
#include "fzoo/panel.h"
#include "fzoo/stepwise.h"

namespace fzoo {

struct PricingOptions {
  std::string market = "MKT";       // factor behind the CAPM benchmark terms
  bool cs_intercept = false;        // add a constant to the cross-sectional regression
};

/// Cross-section pricing performance. Percent fields are already x100.
struct PricingMetrics {
  double avg_abs_alpha = 0.0;  // %/period
  double avg_abs_t = 0.0;
  std::size_t n_sign2 = 0;     // |t| > 1.96
  double total_r2 = 0.0;       // %
  double cs_r2 = 0.0;          // %
  std::size_t n_targets = 0;
};

/// Parameters estimated on one sample and frozen for scoring another.
struct PricingFit {
  ModelSet model;
  std::vector<std::string> targets;
  MatrixXd betas;        // |model| x n
  VectorXd capm_betas;   // n
  VectorXd lambda;       // cross-sectional premia, |model| (+1 leading intercept if enabled)
  double lambda_market = 0.0;
  VectorXd alphas;
  VectorXd alpha_t;
  PricingOptions options;
};

PricingFit fit_pricing(const ReturnPanel& sample, const ModelSet& model,
                       const std::vector<std::string>& targets, const PricingOptions& options = {});

// In-sample scoring uses the regression alphas; out-of-sample scoring uses
// mean pricing errors of the frozen betas on `sample`.
PricingMetrics score_pricing(const PricingFit& fit, const ReturnPanel& sample, bool in_sample);

PricingMetrics pricing_metrics(const ReturnPanel& panel, const ModelSet& model,
                               const std::vector<std::string>& targets,
                               const PricingOptions& options = {});

struct BenchmarkAlpha {
  double alpha = 0.0;  // %/period
  double t_stat = 0.0;
};

struct InvestMetrics {
  double avg_return = 0.0;  // %/period
  double ann_sharpe = 0.0;
  std::map<std::string, BenchmarkAlpha> benchmark_alphas;
};

struct InvestOptions {
  double annualization = kDefaultAnnualization;
  double target_volatility = kDefaultTargetVolatility;
};

using NamedModel = std::pair<std::string, ModelSet>;

InvestMetrics investment_metrics(const ReturnPanel& panel, const ModelSet& model,
                                 const std::vector<NamedModel>& benchmarks,
                                 const InvestOptions& options = {});

// Realised MVE portfolio metrics for frozen weights over `sample`.
InvestMetrics score_portfolio(const TangencyPortfolio& portfolio, const ReturnPanel& sample,
                              const InvestOptions& options = {});

const char* significance_stars(double t_stat);

enum class TargetSet { kUnselected, kExtra };

struct ModelSource {
  // Fixed model when `reselect` is false; otherwise the baseline handed to
  // stepwise selection on every training sample.
  ModelSet model;
  bool reselect = false;
  SelectionConfig selection;
};

struct FoldResult {
  std::size_t fold = 0;
  std::string first_period;
  std::string last_period;
  ModelSet model;
  PricingMetrics ins_pricing;
  PricingMetrics oos_pricing;
  InvestMetrics ins_invest;
  InvestMetrics oos_invest;
};

struct OosOptions {
  TargetSet targets = TargetSet::kUnselected;
  PricingOptions pricing;
  InvestOptions invest;
};

std::vector<FoldResult> oos_evaluate(const ReturnPanel& panel, const FoldSplit& folds,
                                     const ModelSource& source, const ReturnPanel* extra = nullptr,
                                     const OosOptions& options = {});

struct BootstrapReport {
  std::vector<std::string> labels;
  std::vector<double> mean_ins_sr2;
  std::vector<double> mean_oos_sr2;  // signed: s * |s| of the OOS Sharpe ratio
  // beat[i][j]: % of runs where model i beats model j, ties counted as half.
  std::vector<std::vector<double>> beat_ins;
  std::vector<std::vector<double>> beat_oos;
  std::vector<std::vector<double>> tie_ins;  // % of runs with exactly equal Sharpe ratios
  std::vector<std::vector<double>> tie_oos;
  std::vector<double> best_ins;  // %, ties split evenly
  std::vector<double> best_oos;
  std::size_t runs = 0;
  std::uint64_t seed = 0;
  std::size_t redraws = 0;
  std::vector<std::string> warnings;
};

struct BootstrapOptions {
  std::size_t runs = 1000;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::size_t max_redraws_per_run = 100;
};

BootstrapReport bootstrap_sr(const ReturnPanel& panel, const std::vector<NamedModel>& models,
                             const BootstrapOptions& options);

// INS/OOS period positions of one bootstrap run (exposed for inspection).
struct BootstrapDraw {
  std::vector<std::size_t> ins;
  std::vector<std::size_t> oos;
};
BootstrapDraw bootstrap_draw(std::size_t num_periods, std::uint64_t seed, std::size_t run,
                             std::size_t attempt = 0);

}  // namespace fzoo
