#include "fzoo/frontier.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "fzoo/errors.h"

namespace fzoo {

ModelSet::ModelSet(std::vector<std::string> names) : names_(std::move(names)) {
  std::set<std::string> seen;
  for (const auto& n : names_) {
    if (n.empty()) throw ConfigError("model contains an empty factor name");
    if (!seen.insert(n).second) throw ConfigError("model lists factor '" + n + "' twice");
  }
}

bool ModelSet::contains(const std::string& name) const {
  return std::find(names_.begin(), names_.end(), name) != names_.end();
}

ModelSet ModelSet::with(const std::string& name) const {
  auto n = names_;
  n.push_back(name);
  return ModelSet(std::move(n));
}

ModelSet ModelSet::without(const std::string& name) const {
  auto n = names_;
  n.erase(std::remove(n.begin(), n.end(), name), n.end());
  return ModelSet(std::move(n));
}

std::string ModelSet::join(const std::string& sep) const {
  std::string out;
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (i) out += sep;
    out += names_[i];
  }
  return out;
}

ModelSet parse_model(const std::string& spec) {
  std::vector<std::string> names;
  std::string cur;
  auto flush = [&] {
    auto b = cur.find_first_not_of(" \t");
    auto e = cur.find_last_not_of(" \t");
    if (b == std::string::npos) throw ConfigError("empty factor name in model '" + spec + "'");
    names.push_back(cur.substr(b, e - b + 1));
    cur.clear();
  };
  for (char c : spec) {
    if (c == ',' || c == '+') {
      flush();
    } else {
      cur += c;
    }
  }
  flush();
  return ModelSet(std::move(names));
}

Moments Moments::select(const std::vector<std::size_t>& idx) const {
  Moments out;
  out.t_obs = t_obs;
  const auto k = static_cast<Eigen::Index>(idx.size());
  out.mean.resize(k);
  out.cov.resize(k, k);
  out.names.reserve(idx.size());
  for (Eigen::Index a = 0; a < k; ++a) {
    const auto ia = static_cast<Eigen::Index>(idx[static_cast<std::size_t>(a)]);
    out.names.push_back(names[static_cast<std::size_t>(ia)]);
    out.mean(a) = mean(ia);
    for (Eigen::Index b = 0; b < k; ++b) {
      out.cov(a, b) = cov(ia, static_cast<Eigen::Index>(idx[static_cast<std::size_t>(b)]));
    }
  }
  return out;
}

Moments moments(const MatrixXd& returns, std::vector<std::string> names) {
  const Eigen::Index T = returns.rows();
  const Eigen::Index n = returns.cols();
  if (static_cast<std::size_t>(n) != names.size()) {
    throw PanelError(PanelErrc::kDimension, "moments: name count does not match columns");
  }
  if (T < 2) throw PanelError(PanelErrc::kDimension, "moments: need at least 2 periods");

  Moments m;
  m.names = std::move(names);
  m.t_obs = static_cast<std::size_t>(T);
  m.mean.resize(n);
  MatrixXd centered(T, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double* col = returns.col(j).data();
    double s = 0.0;
    for (Eigen::Index t = 0; t < T; ++t) s += col[t];
    const double mu = s / static_cast<double>(T);
    m.mean(j) = mu;
    double* out = centered.col(j).data();
    for (Eigen::Index t = 0; t < T; ++t) out[t] = col[t] - mu;
  }
  m.cov.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double* a = centered.col(i).data();
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double* b = centered.col(j).data();
      double s = 0.0;
      for (Eigen::Index t = 0; t < T; ++t) s += a[t] * b[t];
      m.cov(i, j) = m.cov(j, i) = s / static_cast<double>(T);
    }
  }
  return m;
}

Moments moments(const ReturnPanel& panel) { return moments(panel.returns(), panel.names()); }

Moments moments(const ReturnPanel& panel, const std::vector<std::string>& names) {
  const auto idx = panel.indices_of(names);
  MatrixXd cols(panel.returns().rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) {
    cols.col(static_cast<Eigen::Index>(j)) = panel.returns().col(static_cast<Eigen::Index>(idx[j]));
  }
  return moments(cols, names);
}

SpdSolver::SpdSolver(const MatrixXd& a, const char* what, double tolerance) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(a);
  if (eig.info() != Eigen::Success) {
    throw NumericalError(std::string(what) + ": eigendecomposition failed");
  }
  values_ = eig.eigenvalues();
  vectors_ = eig.eigenvectors();
  const double hi = values_.size() ? values_.maxCoeff() : 0.0;
  const double lo = values_.size() ? values_.minCoeff() : 0.0;
  condition_ = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  if (!(hi > 0.0) || !(lo > tolerance * hi)) {
    std::ostringstream msg;
    msg << what << " is singular (" << a.rows() << "x" << a.cols() << ", condition number "
        << condition_ << ", smallest/largest eigenvalue " << lo << "/" << hi << ")";
    throw NumericalError(msg.str());
  }
}

VectorXd SpdSolver::solve(const VectorXd& b) const {
  return vectors_ * ((vectors_.transpose() * b).array() / values_.array()).matrix();
}

MatrixXd SpdSolver::solve(const MatrixXd& b) const {
  MatrixXd y = vectors_.transpose() * b;
  y.array().colwise() /= values_.array();
  return vectors_ * y;
}

double max_sq_sharpe(const VectorXd& mean, const MatrixXd& cov) {
  if (mean.size() == 0) return 0.0;
  SpdSolver solver(cov, "covariance");
  return std::max(0.0, mean.dot(solver.solve(mean)));
}

double max_sq_sharpe(const Moments& m) { return max_sq_sharpe(m.mean, m.cov); }

SpanningFit spanning_regression(const Moments& joint, const std::vector<std::size_t>& lhs,
                                const std::vector<std::size_t>& rhs) {
  const auto nl = static_cast<Eigen::Index>(lhs.size());
  const auto nr = static_cast<Eigen::Index>(rhs.size());
  const std::size_t T = joint.t_obs;
  if (lhs.empty()) throw ConfigError("spanning regression needs at least one LHS series");
  if (T <= rhs.size() + 1) {
    throw ConfigError("spanning regression needs T > |rhs| + 1 (T=" + std::to_string(T) +
                      ", |rhs|=" + std::to_string(rhs.size()) + ")");
  }

  SpanningFit fit;
  fit.t_obs = T;
  std::vector<std::string> rhs_names;
  for (auto i : rhs) rhs_names.push_back(joint.names[i]);
  for (auto i : lhs) fit.lhs.push_back(joint.names[i]);
  fit.rhs = ModelSet(std::move(rhs_names));

  VectorXd mu_l(nl), mu_r(nr);
  MatrixXd s_ll(nl, nl), s_lr(nl, nr), s_rr(nr, nr);
  for (Eigen::Index a = 0; a < nl; ++a) {
    const auto ia = static_cast<Eigen::Index>(lhs[static_cast<std::size_t>(a)]);
    mu_l(a) = joint.mean(ia);
    for (Eigen::Index b = 0; b < nl; ++b) {
      s_ll(a, b) = joint.cov(ia, static_cast<Eigen::Index>(lhs[static_cast<std::size_t>(b)]));
    }
    for (Eigen::Index b = 0; b < nr; ++b) {
      s_lr(a, b) = joint.cov(ia, static_cast<Eigen::Index>(rhs[static_cast<std::size_t>(b)]));
    }
  }
  for (Eigen::Index a = 0; a < nr; ++a) {
    const auto ia = static_cast<Eigen::Index>(rhs[static_cast<std::size_t>(a)]);
    mu_r(a) = joint.mean(ia);
    for (Eigen::Index b = 0; b < nr; ++b) {
      s_rr(a, b) = joint.cov(ia, static_cast<Eigen::Index>(rhs[static_cast<std::size_t>(b)]));
    }
  }

  if (nr == 0) {
    fit.betas.resize(0, nl);
    fit.alphas = mu_l;
    fit.resid_cov = s_ll;
    fit.rhs_sr2 = 0.0;
  } else {
    SpdSolver solver(s_rr, "RHS factor covariance (collinear factors)");
    fit.betas = solver.solve(MatrixXd(s_lr.transpose()));
    fit.alphas = mu_l - fit.betas.transpose() * mu_r;
    fit.resid_cov = s_ll - s_lr * fit.betas;
    fit.resid_cov = 0.5 * (fit.resid_cov + fit.resid_cov.transpose()).eval();
    fit.rhs_sr2 = std::max(0.0, mu_r.dot(solver.solve(mu_r)));
  }

  // Var(alpha_i) = s_i^2 (1 + f'S^-1 f) / T with s_i^2 on T-|rhs|-1 degrees of freedom.
  fit.lhs_var = s_ll.diagonal();
  const double dof = static_cast<double>(T - rhs.size() - 1);
  fit.alpha_t.resize(nl);
  for (Eigen::Index i = 0; i < nl; ++i) {
    const double resid = std::max(0.0, fit.resid_cov(i, i));
    // A series the RHS spans exactly has no pricing error to test.
    if (resid <= 1e-14 * std::max(s_ll(i, i), 1e-300)) {
      fit.alpha_t(i) = 0.0;
      continue;
    }
    const double s2 = resid * static_cast<double>(T) / dof;
    const double se = std::sqrt(s2 * (1.0 + fit.rhs_sr2) / static_cast<double>(T));
    fit.alpha_t(i) = fit.alphas(i) / se;
  }
  return fit;
}

SpanningFit spanning_regression(const ReturnPanel& panel, const std::vector<std::string>& lhs,
                                const ModelSet& rhs) {
  for (const auto& n : lhs) {
    if (rhs.contains(n)) throw ConfigError("'" + n + "' is on both sides of the regression");
  }
  std::vector<std::string> all = lhs;
  all.insert(all.end(), rhs.begin(), rhs.end());
  const Moments joint = moments(panel, all);
  std::vector<std::size_t> li(lhs.size()), ri(rhs.size());
  for (std::size_t i = 0; i < lhs.size(); ++i) li[i] = i;
  for (std::size_t i = 0; i < rhs.size(); ++i) ri[i] = lhs.size() + i;
  return spanning_regression(joint, li, ri);
}

double alpha_quadratic(const SpanningFit& fit) {
  if (fit.alphas.size() == 0) return 0.0;
  SpdSolver solver(fit.resid_cov, "residual covariance");
  return fit.alphas.dot(solver.solve(fit.alphas));
}

TangencyPortfolio tangency_weights(const Moments& m, double target_volatility) {
  if (!(target_volatility > 0.0)) throw ConfigError("target volatility must be positive");
  TangencyPortfolio p;
  p.names = m.names;
  SpdSolver solver(m.cov, "covariance");
  VectorXd w = solver.solve(m.mean);
  p.sr2 = std::max(0.0, m.mean.dot(w));
  const double var = w.dot(m.cov * w);
  if (!(var > 0.0) || m.mean.isZero(0.0)) {
    p.weights = VectorXd::Zero(m.mean.size());
    p.zero_mean = true;
    return p;
  }
  p.weights = w * (target_volatility / std::sqrt(var));
  return p;
}

VectorXd portfolio_returns(const ReturnPanel& panel, const TangencyPortfolio& portfolio) {
  VectorXd out = VectorXd::Zero(panel.returns().rows());
  for (std::size_t j = 0; j < portfolio.names.size(); ++j) {
    out += portfolio.weights(static_cast<Eigen::Index>(j)) * panel.column(portfolio.names[j]);
  }
  return out;
}

double sharpe_ratio(const VectorXd& series) {
  const auto n = static_cast<double>(series.size());
  if (series.size() < 2) throw ConfigError("Sharpe ratio needs at least 2 observations");
  const double mu = series.mean();
  const double var = (series.array() - mu).square().sum() / n;
  if (!(var > 0.0)) throw NumericalError("Sharpe ratio of a constant series is undefined");
  return mu / std::sqrt(var);
}

}  // namespace fzoo
