#include "fzoo/pricing_tests.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/normal.hpp>

#include "fzoo/errors.h"

namespace fzoo {

namespace {

ReturnPanel joined(const ReturnPanel& factors, const ReturnPanel* extra) {
  return extra ? concat_columns(factors, *extra) : factors;
}

double normal_upper_tail(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

}  // namespace

double normal_upper_quantile(double significance) {
  if (!(significance > 0.0 && significance < 1.0)) {
    throw ConfigError("significance level must lie in (0,1)");
  }
  return boost::math::quantile(boost::math::complement(boost::math::normal(), significance));
}

AssetUniverse::AssetUniverse(const ReturnPanel& factors, const ReturnPanel* extra,
                             UniverseOptions options)
    : moments_(fzoo::moments(joined(factors, extra))),
      num_factors_(factors.num_series()),
      factor_names_(factors.names()),
      options_(options) {
  name_order_.resize(moments_.size());
  std::iota(name_order_.begin(), name_order_.end(), 0);
  std::sort(name_order_.begin(), name_order_.end(), [&](std::size_t a, std::size_t b) {
    return moments_.names[a] < moments_.names[b];
  });

  const std::size_t n = grs_dimension();
  if (t_obs() <= n) {
    universe_error_ = "full-universe SR^2 needs T > N (T=" + std::to_string(t_obs()) +
                      ", N=" + std::to_string(n) + ")";
    return;
  }
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  try {
    const Moments m = moments_.select(all);
    universe_sr2_ = max_sq_sharpe(m);
  } catch (const NumericalError& e) {
    universe_error_ = std::string("full-universe SR^2: ") + e.what();
  }
}

std::size_t AssetUniverse::factor_index(const std::string& name) const {
  for (std::size_t i = 0; i < num_factors_; ++i) {
    if (factor_names_[i] == name) return i;
  }
  throw ConfigError("unknown factor '" + name + "'");
}

std::vector<std::size_t> AssetUniverse::indices(const ModelSet& model) const {
  std::vector<std::size_t> out;
  out.reserve(model.size());
  for (const auto& n : model) out.push_back(factor_index(n));
  return out;
}

ModelSet AssetUniverse::model_of(const std::vector<std::size_t>& idx) const {
  std::vector<std::string> names;
  names.reserve(idx.size());
  for (auto i : idx) names.push_back(factor_names_.at(i));
  return ModelSet(std::move(names));
}

std::vector<std::size_t> AssetUniverse::lhs_for(const std::vector<std::size_t>& model) const {
  std::vector<char> in_model(size(), 0);
  for (auto i : model) in_model.at(i) = 1;
  std::vector<std::size_t> out;
  out.reserve(size() - model.size());
  for (auto i : name_order_) {
    if (!in_model[i]) out.push_back(i);
  }
  return out;
}

double AssetUniverse::model_sr2(const std::vector<std::size_t>& model) const {
  if (model.empty()) return 0.0;
  return max_sq_sharpe(moments_.select(model));
}

double AssetUniverse::single_sr2(std::size_t factor) const {
  const double var = moments_.cov(static_cast<Eigen::Index>(factor), static_cast<Eigen::Index>(factor));
  if (!(var > 0.0)) {
    throw NumericalError("factor '" + moments_.names[factor] + "' has zero variance");
  }
  const double mu = moments_.mean(static_cast<Eigen::Index>(factor));
  return mu * mu / var;
}

std::size_t AssetUniverse::grs_dimension() const noexcept {
  return options_.extras_in_universe_sr2 ? size() : num_factors_;
}

double AssetUniverse::universe_sr2() const {
  if (!universe_sr2_) throw NumericalError(universe_error_.value_or("full-universe SR^2 unavailable"));
  return *universe_sr2_;
}

bool AssetUniverse::universe_sr2_available() const { return universe_sr2_.has_value(); }

SpanningFit AssetUniverse::fit(const std::vector<std::size_t>& model) const {
  return spanning_regression(moments_, lhs_for(model), model);
}

double grs_from_sr2(std::size_t t_obs, std::size_t n, std::size_t model_size,
                    double universe_sr2, double model_sr2) {
  if (t_obs <= n) throw NumericalError("GRS needs T > N");
  if (model_size >= n) throw ConfigError("GRS needs at least one test asset outside the model");
  const double scale = static_cast<double>(t_obs - n) / static_cast<double>(n - model_size);
  return std::max(0.0, scale * ((1.0 + universe_sr2) / (1.0 + model_sr2) - 1.0));
}

double grs_value(const AssetUniverse& u, const std::vector<std::size_t>& model) {
  return grs_from_sr2(u.t_obs(), u.grs_dimension(), model.size(), u.universe_sr2(),
                      u.model_sr2(model));
}

TestResult grs_test(const AssetUniverse& u, const std::vector<std::size_t>& model) {
  const std::size_t n = u.grs_dimension();
  TestResult r;
  r.statistic = grs_value(u, model);
  r.n_lhs = n - model.size();
  const double d1 = static_cast<double>(n - model.size());
  const double d2 = static_cast<double>(u.t_obs() - n);
  std::ostringstream df;
  df << "F(" << n - model.size() << "," << u.t_obs() - n << ")";
  r.df = df.str();
  const boost::math::fisher_f dist(d1, d2);
  r.p_value = r.statistic <= 0.0 ? 1.0 : boost::math::cdf(boost::math::complement(dist, r.statistic));
  return r;
}

namespace {

// `usable[i]` false drops asset i from every pair (an exactly spanned asset
// has no meaningful residual correlation).
Rho2Estimate screened_rho2(const MatrixXd& resid_cov, std::size_t t_obs,
                           std::optional<double> screening_level, const std::vector<bool>& usable) {
  const auto n1 = resid_cov.rows();
  Rho2Estimate est;
  if (n1 < 2) return est;
  const double pairs = 0.5 * static_cast<double>(n1) * static_cast<double>(n1 - 1);
  const double level = screening_level.value_or(1.0 / pairs);
  if (!(level > 0.0 && level <= 1.0)) throw ConfigError("screening level must lie in (0,1]");
  est.threshold = level >= 1.0 ? 0.0
                               : boost::math::quantile(boost::math::complement(
                                     boost::math::normal(), level / 2.0)) /
                                     std::sqrt(static_cast<double>(t_obs));

  VectorXd inv_sd(n1);
  for (Eigen::Index i = 0; i < n1; ++i) {
    const double v = resid_cov(i, i);
    inv_sd(i) = usable[static_cast<std::size_t>(i)] && v > 0.0 ? 1.0 / std::sqrt(v) : 0.0;
  }
  double sum = 0.0;
  for (Eigen::Index j = 1; j < n1; ++j) {
    for (Eigen::Index i = 0; i < j; ++i) {
      const double rho = resid_cov(i, j) * inv_sd(i) * inv_sd(j);
      if (inv_sd(i) > 0.0 && inv_sd(j) > 0.0 && std::abs(rho) > est.threshold) {
        sum += rho * rho;
        ++est.retained_pairs;
      }
    }
  }
  est.value = std::clamp(sum / pairs, 0.0, 1.0);
  return est;
}

}  // namespace

Rho2Estimate rho2_correction(const MatrixXd& resid_cov, std::size_t t_obs,
                             std::optional<double> screening_level) {
  return screened_rho2(resid_cov, t_obs, screening_level,
                       std::vector<bool>(static_cast<std::size_t>(resid_cov.rows()), true));
}

Rho2Estimate rho2_correction(const SpanningFit& fit, std::optional<double> screening_level) {
  std::vector<bool> usable(static_cast<std::size_t>(fit.resid_cov.rows()), true);
  for (Eigen::Index i = 0; i < fit.resid_cov.rows(); ++i) {
    const double scale = fit.lhs_var.size() ? fit.lhs_var(i) : 1.0;
    usable[static_cast<std::size_t>(i)] = fit.resid_cov(i, i) > 1e-12 * scale;
  }
  return screened_rho2(fit.resid_cov, fit.t_obs, screening_level, usable);
}

TestResult hda_test(const SpanningFit& fit, const HdaConfig& cfg) {
  const auto n1 = fit.alphas.size();
  if (n1 < 2) throw ConfigError("HDA test needs at least 2 test assets");
  if (fit.t_obs <= fit.rhs.size() + 2) throw ConfigError("HDA test needs T > |model| + 2");
  if (!(cfg.significance > 0.0 && cfg.significance < 1.0)) {
    throw ConfigError("significance level must lie in (0,1)");
  }

  double quad = 0.0;
  for (Eigen::Index i = 0; i < n1; ++i) {
    const double v = fit.resid_cov(i, i);
    const double scale = fit.lhs_var.size() ? fit.lhs_var(i) : 1.0;
    const double a2 = fit.alphas(i) * fit.alphas(i);
    if (!(v > 1e-12 * scale) || !(v > 0.0)) {
      // Exactly spanned: harmless with a zero alpha, an arbitrage otherwise.
      if (a2 <= 1e-12 * scale) continue;
      throw NumericalError("test asset '" + fit.lhs[static_cast<std::size_t>(i)] +
                           "' is spanned exactly by the model but has a nonzero alpha");
    }
    quad += a2 / v;
  }
  const Rho2Estimate rho2 =
      cfg.rho2 ? cfg.rho2(fit.resid_cov, fit.t_obs) : rho2_correction(fit, cfg.screening_level);

  const double n = static_cast<double>(n1);
  const double T = static_cast<double>(fit.t_obs);
  TestResult r;
  r.n_lhs = static_cast<std::size_t>(n1);
  r.statistic = (T * quad / (1.0 + fit.rhs_sr2) - n) / std::sqrt(2.0 * n * (1.0 + (n - 1.0) * rho2.value));
  r.p_value = std::clamp(normal_upper_tail(r.statistic), 0.0, 1.0);
  r.df = "N(0,1) upper tail";
  return r;
}

TestResult hda_test(const AssetUniverse& u, const std::vector<std::size_t>& model,
                    const HdaConfig& cfg) {
  if (model.empty()) throw ConfigError("HDA test needs a nonempty model");
  return hda_test(u.fit(model), cfg);
}

double grs_value(const ReturnPanel& panel, const ModelSet& model, const ReturnPanel* extra,
                 UniverseOptions options) {
  const AssetUniverse u(panel, extra, options);
  return grs_value(u, u.indices(model));
}

TestResult grs_test(const ReturnPanel& panel, const ModelSet& model, const ReturnPanel* extra,
                    UniverseOptions options) {
  const AssetUniverse u(panel, extra, options);
  return grs_test(u, u.indices(model));
}

TestResult hda_test(const ReturnPanel& panel, const ModelSet& model, const ReturnPanel* extra,
                    const HdaConfig& cfg) {
  const AssetUniverse u(panel, extra);
  return hda_test(u, u.indices(model), cfg);
}

}  // namespace fzoo
