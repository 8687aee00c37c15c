#include <random>

#include "doctest.h"
#include "fzoo/errors.h"
#include "fzoo/frontier.h"
#include "oracle.h"

using namespace fzoo;
using Eigen::MatrixXd;
using Eigen::VectorXd;

TEST_CASE("model sets") {
  const ModelSet m = parse_model("MKT+SMB");
  CHECK(m.names() == std::vector<std::string>{"MKT", "SMB"});
  CHECK(parse_model("MKT, SMB") == m);
  CHECK(m.with("HML").join() == "MKT,SMB,HML");
  CHECK(m.without("MKT").join() == "SMB");
  CHECK(ModelSet{"SMB", "MKT"}.same_members(m));
  CHECK_THROWS_AS(parse_model("MKT,MKT"), ConfigError);
  CHECK_THROWS_AS(parse_model(""), ConfigError);
}

TEST_CASE("hand-computed moments") {
  MatrixXd r(2, 1);
  r << 0.01, 0.03;
  const Moments m = moments(r, {"A"});
  CHECK(m.mean(0) == doctest::Approx(0.02));
  CHECK(m.cov(0, 0) == doctest::Approx(0.0001));
  CHECK(m.t_obs == 2);
}

TEST_CASE("moments agree with the centred-product formula and follow name order") {
  std::mt19937_64 rng(11);
  const MatrixXd r = oracle::random_returns(rng, 150, 5);
  const auto p = oracle::panel(r);
  const Moments m = moments(p);
  CHECK((m.cov - oracle::cov_mle(r)).cwiseAbs().maxCoeff() < 1e-15);

  const Moments s = moments(p, {"F04", "F02"});
  CHECK(s.mean(0) == m.mean(3));
  CHECK(s.cov(0, 1) == m.cov(3, 1));
  CHECK(s.cov(1, 1) == m.cov(1, 1));
}

TEST_CASE("constant column is singular downstream") {
  MatrixXd r(4, 2);
  r << 0.01, 0.02, 0.01, -0.01, 0.01, 0.03, 0.01, 0.00;
  const Moments m = moments(r, {"C", "X"});
  CHECK(m.cov(0, 0) == 0.0);
  CHECK_THROWS_AS(max_sq_sharpe(m), NumericalError);
}

TEST_CASE("singular covariance reports a condition number") {
  MatrixXd c(2, 2);
  c << 1, 1, 1, 1;
  try {
    SpdSolver s(c);
    FAIL("no error");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("condition") != std::string::npos);
  }
}

TEST_CASE("diagonal closed form matches a grid search") {
  VectorXd mu(2);
  mu << 0.01, 0.02;
  MatrixXd cov = MatrixXd::Identity(2, 2) * 0.01;
  CHECK(max_sq_sharpe(mu, cov) == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(oracle::grid_sr2_two(mu, cov) == doctest::Approx(0.05).epsilon(1e-6));

  MatrixXd c2(2, 2);
  c2 << 0.0016, -0.0004, -0.0004, 0.0009;
  VectorXd m2(2);
  m2 << 0.005, 0.002;
  CHECK(max_sq_sharpe(m2, c2) == doctest::Approx(oracle::grid_sr2_two(m2, c2)).epsilon(1e-6));

  CHECK(max_sq_sharpe(VectorXd::Zero(3), MatrixXd::Identity(3, 3)) == 0.0);
}

TEST_CASE("exact linear span") {
  std::mt19937_64 rng(3);
  MatrixXd r = oracle::random_returns(rng, 120, 2);
  r.col(1) = 2.0 * r.col(0);
  const auto p = oracle::panel(r, {"MKT", "TWICE"});
  const SpanningFit f = spanning_regression(p, {"TWICE"}, ModelSet{"MKT"});
  CHECK(std::abs(f.alphas(0)) < 1e-15);
  CHECK(f.betas(0, 0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(f.resid_cov(0, 0) < 1e-18);
  CHECK(f.alpha_t(0) == 0.0);
}

TEST_CASE("spanning regression matches OLS") {
  std::mt19937_64 rng(5);
  const MatrixXd r = oracle::random_returns(rng, 200, 7);
  const auto p = oracle::panel(r);
  const SpanningFit f = spanning_regression(p, {"F01", "F02", "F03", "F04"}, ModelSet{"F05", "F06", "F07"});
  const auto o = oracle::ols(oracle::cols(r, {0, 1, 2, 3}), oracle::cols(r, {4, 5, 6}));
  CHECK((f.alphas - o.alpha).cwiseAbs().maxCoeff() < 1e-13);
  CHECK((f.betas - o.beta).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((f.resid_cov - o.resid_cov).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((f.alpha_t - o.alpha_t).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(f.rhs_sr2 == doctest::Approx(oracle::sr2(oracle::cols(r, {4, 5, 6}))).epsilon(1e-10));
  CHECK_THROWS_AS(spanning_regression(p, {"F01"}, ModelSet{"F01"}), ConfigError);
}

TEST_CASE("null alphas stay within four standard errors") {
  std::mt19937_64 rng(8);
  VectorXd mu = VectorXd::Zero(3);
  mu(0) = 0.005;
  int outside = 0;
  for (int rep = 0; rep < 200; ++rep) {
    MatrixXd r = oracle::normal_draws(rng, 240, mu, MatrixXd::Identity(3, 3) * 0.0009);
    const auto f = spanning_regression(oracle::panel(r), {"F02", "F03"}, ModelSet{"F01"});
    for (int i = 0; i < 2; ++i) outside += std::abs(f.alpha_t(i)) > 4.0;
  }
  CHECK(outside == 0);
}

TEST_CASE("alpha quadratic identity") {
  std::mt19937_64 rng(21);
  for (int rep = 0; rep < 20; ++rep) {
    const MatrixXd r = oracle::random_returns(rng, 120, 6);
    const auto p = oracle::panel(r);
    const auto f = spanning_regression(p, {"F01", "F02", "F03"}, ModelSet{"F04", "F05", "F06"});
    const double lhs = alpha_quadratic(f);
    const double rhs = oracle::sr2(r) - oracle::sr2(oracle::cols(r, {3, 4, 5}));
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-8));
  }
  SpanningFit zero;
  zero.alphas = VectorXd::Zero(2);
  zero.resid_cov = MatrixXd::Identity(2, 2);
  CHECK(alpha_quadratic(zero) == 0.0);
}

TEST_CASE("orthogonal single asset: quadratic equals its own SR^2") {
  std::mt19937_64 rng(4);
  MatrixXd r = oracle::random_returns(rng, 300, 2);
  // Make column 1 exactly orthogonal to column 0 in sample.
  const VectorXd x = r.col(0).array() - r.col(0).mean();
  const VectorXd y = r.col(1).array() - r.col(1).mean();
  r.col(1) = (y - x * (x.dot(y) / x.squaredNorm())).array() + 0.004;
  const auto f = spanning_regression(oracle::panel(r), {"F02"}, ModelSet{"F01"});
  const double sr2_lhs = oracle::sr2(oracle::cols(r, {1}));
  CHECK(alpha_quadratic(f) == doctest::Approx(sr2_lhs).epsilon(1e-10));
}

TEST_CASE("tangency weights") {
  Moments m;
  m.names = {"A", "B"};
  m.mean = VectorXd(2);
  m.mean << 0.01, 0.02;
  m.cov = MatrixXd::Zero(2, 2);
  m.cov(0, 0) = 0.01;
  m.cov(1, 1) = 0.04;
  m.t_obs = 100;
  const auto w = tangency_weights(m);
  CHECK(w.weights(1) / w.weights(0) == doctest::Approx(0.5));
  CHECK(std::sqrt(w.weights.dot(m.cov * w.weights)) == doctest::Approx(kDefaultTargetVolatility));

  std::mt19937_64 rng(12);
  const MatrixXd r = oracle::random_returns(rng, 200, 4);
  const auto p = oracle::panel(r);
  Moments mm = moments(p);
  const auto t1 = tangency_weights(mm);
  const double s1 = sharpe_ratio(portfolio_returns(p, t1));
  CHECK(s1 * s1 == doctest::Approx(max_sq_sharpe(mm)).epsilon(1e-10));
  mm.mean *= 3.7;
  const auto t2 = tangency_weights(mm);
  CHECK(((t2.weights - t1.weights).cwiseAbs().maxCoeff()) < 1e-12);

  mm.mean.setZero();
  CHECK(tangency_weights(mm).zero_mean);
}
