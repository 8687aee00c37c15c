#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fzoo/frontier.h"
#include "fzoo/panel.h"

namespace fzoo {

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::string df;  // "F(d1,d2)" or "N(0,1) upper tail"
  std::size_t n_lhs = 0;

  bool rejects(double significance) const { return p_value < significance; }
};

struct Rho2Estimate {
  double value = 0.0;
  std::size_t retained_pairs = 0;
  double threshold = 0.0;
};

// Maps a residual covariance (divisor T) and T to the sparsity correction.
using Rho2Estimator = std::function<Rho2Estimate(const MatrixXd& resid_cov, std::size_t t_obs)>;

struct HdaConfig {
  double significance = 0.05;
  // Two-sided screening level for residual correlations. Unset means
  // 2 / (N1 (N1 - 1)).
  std::optional<double> screening_level;
  // Replaces the thresholded mean-squared-correlation estimator when set.
  Rho2Estimator rho2;
};

struct UniverseOptions {
  // Count extra test assets in the full-universe SR^2 and the GRS dimension N.
  bool extras_in_universe_sr2 = true;
};

/// Candidate factors plus optional extra test assets, with joint moments
/// computed once. Every model is a list of indices into the factor block.
class AssetUniverse {
 public:
  explicit AssetUniverse(const ReturnPanel& factors, const ReturnPanel* extra = nullptr,
                         UniverseOptions options = {});

  std::size_t num_factors() const noexcept { return num_factors_; }
  std::size_t num_extra() const noexcept { return moments_.size() - num_factors_; }
  std::size_t size() const noexcept { return moments_.size(); }
  std::size_t t_obs() const noexcept { return moments_.t_obs; }
  const Moments& moments() const noexcept { return moments_; }
  const std::vector<std::string>& names() const noexcept { return moments_.names; }
  const std::vector<std::string>& factor_names() const noexcept { return factor_names_; }
  const UniverseOptions& options() const noexcept { return options_; }

  std::size_t factor_index(const std::string& name) const;  // ConfigError if absent
  std::vector<std::size_t> indices(const ModelSet& model) const;
  ModelSet model_of(const std::vector<std::size_t>& idx) const;

  // Test assets for a model: everything outside it, in name order.
  std::vector<std::size_t> lhs_for(const std::vector<std::size_t>& model) const;

  double model_sr2(const std::vector<std::size_t>& model) const;
  double single_sr2(std::size_t factor) const;

  // Dimension N used by GRS, and SR^2 of that universe. Throws when T <= N or
  // the covariance is singular.
  std::size_t grs_dimension() const noexcept;
  double universe_sr2() const;
  bool universe_sr2_available() const;

  SpanningFit fit(const std::vector<std::size_t>& model) const;

 private:
  Moments moments_;
  std::size_t num_factors_ = 0;
  std::vector<std::string> factor_names_;
  std::vector<std::size_t> name_order_;
  UniverseOptions options_;
  mutable std::optional<double> universe_sr2_;
  mutable std::optional<std::string> universe_error_;
};

// GRS value from the SR^2 route, given both squared Sharpe ratios.
double grs_from_sr2(std::size_t t_obs, std::size_t n, std::size_t model_size,
                    double universe_sr2, double model_sr2);

double grs_value(const AssetUniverse& u, const std::vector<std::size_t>& model);
TestResult grs_test(const AssetUniverse& u, const std::vector<std::size_t>& model);

Rho2Estimate rho2_correction(const MatrixXd& resid_cov, std::size_t t_obs,
                             std::optional<double> screening_level = std::nullopt);
Rho2Estimate rho2_correction(const SpanningFit& fit,
                             std::optional<double> screening_level = std::nullopt);

TestResult hda_test(const SpanningFit& fit, const HdaConfig& cfg = {});
TestResult hda_test(const AssetUniverse& u, const std::vector<std::size_t>& model,
                    const HdaConfig& cfg = {});

// Panel-level conveniences: the universe is the panel columns plus `extra`.
double grs_value(const ReturnPanel& panel, const ModelSet& model,
                 const ReturnPanel* extra = nullptr, UniverseOptions options = {});
TestResult grs_test(const ReturnPanel& panel, const ModelSet& model,
                    const ReturnPanel* extra = nullptr, UniverseOptions options = {});
TestResult hda_test(const ReturnPanel& panel, const ModelSet& model,
                    const ReturnPanel* extra = nullptr, const HdaConfig& cfg = {});

double normal_upper_quantile(double significance);  // z_lambda

}  // namespace fzoo
