#pragma once

// Reference computations for tests. Everything here is computed by a route
// different from the library: explicit OLS via QR on the data matrix, moment
// matrices from centred products, LU solves, brute-force searches.

#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fzoo/panel.h"

namespace oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline VectorXd col_mean(const MatrixXd& r) { return r.colwise().mean().transpose(); }

// Divisor-T covariance from the centred data matrix.
inline MatrixXd cov_mle(const MatrixXd& r) {
  const MatrixXd c = r.rowwise() - r.colwise().mean();
  return c.transpose() * c / static_cast<double>(r.rows());
}

inline double sr2(const MatrixXd& r) {
  const VectorXd m = col_mean(r);
  return m.dot(cov_mle(r).fullPivLu().solve(m));
}

struct Ols {
  VectorXd alpha;
  MatrixXd beta;       // k x n
  MatrixXd resid;      // T x n
  MatrixXd resid_cov;  // divisor T
  VectorXd alpha_t;    // classical, divisor T-k-1
};

// Regress every column of y on [1, x] by Householder QR.
inline Ols ols(const MatrixXd& y, const MatrixXd& x) {
  const auto t = x.rows();
  const auto k = x.cols();
  MatrixXd design(t, k + 1);
  design.col(0).setOnes();
  design.rightCols(k) = x;
  const Eigen::ColPivHouseholderQR<MatrixXd> qr(design);
  const MatrixXd coef = qr.solve(y);
  Ols o;
  o.alpha = coef.row(0).transpose();
  o.beta = coef.bottomRows(k);
  o.resid = y - design * coef;
  o.resid_cov = o.resid.transpose() * o.resid / static_cast<double>(t);
  const MatrixXd xtx_inv = (design.transpose() * design).inverse();
  o.alpha_t.resize(y.cols());
  for (Eigen::Index i = 0; i < y.cols(); ++i) {
    const double s2 = o.resid.col(i).squaredNorm() / static_cast<double>(t - k - 1);
    o.alpha_t(i) = o.alpha(i) / std::sqrt(s2 * xtx_inv(0, 0));
  }
  return o;
}

// Classical GRS: (T-N-L)/N * a' S^-1 a / (1 + m' O^-1 m), MLE covariances.
inline double grs(const MatrixXd& y, const MatrixXd& x) {
  const Ols o = ols(y, x);
  const double t = static_cast<double>(y.rows());
  const double n = static_cast<double>(y.cols());
  const double l = static_cast<double>(x.cols());
  const double q = o.alpha.dot(o.resid_cov.fullPivLu().solve(o.alpha));
  return (t - n - l) / n * q / (1.0 + sr2(x));
}

inline double normal_quantile_upper(double p) {
  // Bisection on erfc; good to ~1e-12 and independent of Boost.
  double lo = -10, hi = 10;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double tail = 0.5 * std::erfc(mid / std::sqrt(2.0));
    (tail > p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// HDA statistic straight from OLS output.
inline double hda(const MatrixXd& y, const MatrixXd& x, double screening_level = -1) {
  const Ols o = ols(y, x);
  const double t = static_cast<double>(y.rows());
  const auto n1 = y.cols();
  const double n = static_cast<double>(n1);
  double quad = 0;
  for (Eigen::Index i = 0; i < n1; ++i) quad += o.alpha(i) * o.alpha(i) / o.resid_cov(i, i);
  const double pairs = n * (n - 1) / 2;
  const double level = screening_level > 0 ? screening_level : 1.0 / pairs;
  const double theta = level >= 1.0 ? 0.0 : normal_quantile_upper(level / 2) / std::sqrt(t);
  double sum = 0;
  for (Eigen::Index i = 0; i < n1; ++i) {
    for (Eigen::Index j = i + 1; j < n1; ++j) {
      const double r = o.resid_cov(i, j) / std::sqrt(o.resid_cov(i, i) * o.resid_cov(j, j));
      if (std::abs(r) > theta) sum += r * r;
    }
  }
  const double rho2 = sum / pairs;
  return (t * quad / (1 + sr2(x)) - n) / std::sqrt(2 * n * (1 + (n - 1) * rho2));
}

// Max Sharpe^2 of two assets by scanning portfolio directions.
inline double grid_sr2_two(const VectorXd& mu, const MatrixXd& cov, int steps = 200000) {
  double best = 0;
  const double pi = std::acos(-1.0);
  for (int s = 0; s < steps; ++s) {
    const double a = pi * s / steps;
    VectorXd w(2);
    w << std::cos(a), std::sin(a);
    const double m = w.dot(mu);
    best = std::max(best, m * m / w.dot(cov * w));
  }
  return best;
}

inline MatrixXd random_pd(std::mt19937_64& rng, int n, double scale = 0.03) {
  std::normal_distribution<double> z;
  MatrixXd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = z(rng);
  MatrixXd c = a * a.transpose() / n + 0.5 * MatrixXd::Identity(n, n);
  return scale * scale * c;
}

inline MatrixXd normal_draws(std::mt19937_64& rng, int t, const VectorXd& mu, const MatrixXd& cov) {
  std::normal_distribution<double> z;
  const MatrixXd l = cov.llt().matrixL();
  MatrixXd out(t, mu.size());
  for (int r = 0; r < t; ++r) {
    VectorXd e(mu.size());
    for (int c = 0; c < mu.size(); ++c) e(c) = z(rng);
    out.row(r) = (mu + l * e).transpose();
  }
  return out;
}

inline std::vector<std::string> names(const std::string& prefix, int n) {
  std::vector<std::string> v;
  for (int i = 0; i < n; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%02d", prefix.c_str(), i + 1);
    v.emplace_back(buf);
  }
  return v;
}

inline std::vector<std::string> periods(int t) {
  std::vector<std::string> v;
  for (int i = 0; i < t; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%06d", i + 1);
    v.emplace_back(buf);
  }
  return v;
}

inline fzoo::ReturnPanel panel(const MatrixXd& r, const std::vector<std::string>& n) {
  return fzoo::ReturnPanel(periods(static_cast<int>(r.rows())), n, r);
}

inline fzoo::ReturnPanel panel(const MatrixXd& r, const char* prefix = "F") {
  return panel(r, names(prefix, static_cast<int>(r.cols())));
}

// Random factor panel with random PD covariance and modest means.
inline MatrixXd random_returns(std::mt19937_64& rng, int t, int n, double mean_scale = 0.004) {
  std::normal_distribution<double> z;
  VectorXd mu(n);
  for (int i = 0; i < n; ++i) mu(i) = mean_scale * z(rng);
  return normal_draws(rng, t, mu, random_pd(rng, n));
}

// Columns of `rows` picked from `r`.
inline MatrixXd cols(const MatrixXd& r, const std::vector<int>& idx) {
  MatrixXd out(r.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = r.col(idx[i]);
  return out;
}

}  // namespace oracle
