#pragma once

#include <cstddef>
#include <initializer_list>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fzoo/panel.h"

namespace fzoo {

// Reject a covariance matrix whose smallest eigenvalue is below this fraction
// of its largest.
inline constexpr double kSingularTolerance = 1e-10;

// Periods per year for annualisation of monthly data.
inline constexpr double kDefaultAnnualization = 12.0;

/// Ordered set of factor names; order is inclusion order.
class ModelSet {
 public:
  ModelSet() = default;
  explicit ModelSet(std::vector<std::string> names);
  ModelSet(std::initializer_list<std::string> names)
      : ModelSet(std::vector<std::string>(names)) {}

  const std::vector<std::string>& names() const noexcept { return names_; }
  std::size_t size() const noexcept { return names_.size(); }
  bool empty() const noexcept { return names_.empty(); }
  bool contains(const std::string& name) const;

  ModelSet with(const std::string& name) const;
  ModelSet without(const std::string& name) const;

  std::set<std::string> members() const { return {names_.begin(), names_.end()}; }
  bool same_members(const ModelSet& other) const { return members() == other.members(); }
  std::string join(const std::string& sep = ",") const;

  auto begin() const noexcept { return names_.begin(); }
  auto end() const noexcept { return names_.end(); }

  friend bool operator==(const ModelSet&, const ModelSet&) = default;

 private:
  std::vector<std::string> names_;
};

// Parses "MKT,SMB" or "MKT+SMB". Throws ConfigError on empty or duplicate names.
ModelSet parse_model(const std::string& spec);

/// Sample mean and divisor-T covariance of a set of return series.
struct Moments {
  std::vector<std::string> names;
  VectorXd mean;
  MatrixXd cov;
  std::size_t t_obs = 0;

  std::size_t size() const noexcept { return names.size(); }
  Moments select(const std::vector<std::size_t>& idx) const;
};

// Column j of `returns` is series names[j]. Each covariance entry is an
// independent pairwise sum, so results do not depend on column position.
Moments moments(const MatrixXd& returns, std::vector<std::string> names);
Moments moments(const ReturnPanel& panel);
Moments moments(const ReturnPanel& panel, const std::vector<std::string>& names);

/// Symmetric positive-definite solve with an explicit singularity check.
class SpdSolver {
 public:
  explicit SpdSolver(const MatrixXd& a, const char* what = "covariance",
                     double tolerance = kSingularTolerance);

  VectorXd solve(const VectorXd& b) const;
  MatrixXd solve(const MatrixXd& b) const;
  double condition_number() const noexcept { return condition_; }

 private:
  Eigen::MatrixXd vectors_;
  Eigen::VectorXd values_;
  double condition_ = 0.0;
};

double max_sq_sharpe(const VectorXd& mean, const MatrixXd& cov);
double max_sq_sharpe(const Moments& m);

/// Time-series OLS of every LHS series on the RHS factors plus an intercept.
struct SpanningFit {
  std::vector<std::string> lhs;
  ModelSet rhs;
  VectorXd alphas;    // |lhs|
  MatrixXd betas;     // |rhs| x |lhs|
  MatrixXd resid_cov; // |lhs| x |lhs|, divisor T
  VectorXd alpha_t;   // classical OLS t-statistics, variance divisor T-|rhs|-1
  VectorXd lhs_var;   // total variance of each LHS series, divisor T
  double rhs_sr2 = 0.0;
  std::size_t t_obs = 0;
};

SpanningFit spanning_regression(const ReturnPanel& panel, const std::vector<std::string>& lhs,
                                const ModelSet& rhs);

// Same fit computed from joint moments; `lhs` and `rhs` index into `joint`.
SpanningFit spanning_regression(const Moments& joint, const std::vector<std::size_t>& lhs,
                                const std::vector<std::size_t>& rhs);

// alpha' resid_cov^-1 alpha.
double alpha_quadratic(const SpanningFit& fit);

inline constexpr double kDefaultTargetVolatility = 0.045;

struct TangencyPortfolio {
  std::vector<std::string> names;
  VectorXd weights;
  double sr2 = 0.0;
  bool zero_mean = false;  // all-zero weights; Sharpe undefined
};

// Weights proportional to cov^-1 mean, scaled to the given ex-ante volatility.
TangencyPortfolio tangency_weights(const Moments& m,
                                   double target_volatility = kDefaultTargetVolatility);

// Period-by-period portfolio returns for the named columns of `panel`.
VectorXd portfolio_returns(const ReturnPanel& panel, const TangencyPortfolio& portfolio);

// mean / standard deviation with divisor n.
double sharpe_ratio(const VectorXd& series);

}  // namespace fzoo
