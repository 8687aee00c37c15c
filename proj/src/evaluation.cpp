#include "fzoo/evaluation.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "fzoo/errors.h"
#include "fzoo/parallel.h"
#include "fzoo/rng.h"

namespace fzoo {

namespace {

MatrixXd columns(const ReturnPanel& panel, const std::vector<std::string>& names) {
  MatrixXd out(panel.returns().rows(), static_cast<Eigen::Index>(names.size()));
  for (std::size_t j = 0; j < names.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = panel.column(names[j]);
  return out;
}

}  // namespace

const char* significance_stars(double t_stat) {
  const double a = std::abs(t_stat);
  if (a > 2.576) return "***";
  if (a > 1.960) return "**";
  if (a > 1.645) return "*";
  return "";
}

PricingFit fit_pricing(const ReturnPanel& sample, const ModelSet& model,
                       const std::vector<std::string>& targets, const PricingOptions& options) {
  if (targets.empty()) throw ConfigError("pricing metrics need at least one target asset");
  if (model.empty()) throw ConfigError("pricing metrics need a nonempty model");
  for (const auto& t : targets) {
    if (model.contains(t)) throw ConfigError("target '" + t + "' is also a model factor");
  }
  if (!sample.contains(options.market)) {
    throw ConfigError("market factor '" + options.market +
                      "' is required for the CAPM benchmark but is not in the panel");
  }

  PricingFit fit;
  fit.model = model;
  fit.targets = targets;
  fit.options = options;

  const SpanningFit reg = spanning_regression(sample, targets, model);
  fit.betas = reg.betas;
  fit.alphas = reg.alphas;
  fit.alpha_t = reg.alpha_t;

  // CAPM betas; a target that is the market itself has beta 1.
  const VectorXd mkt = sample.column(options.market);
  const double mkt_mean = mkt.mean();
  const double mkt_var = (mkt.array() - mkt_mean).square().mean();
  if (!(mkt_var > 0.0)) throw NumericalError("market factor has zero variance");
  fit.capm_betas.resize(static_cast<Eigen::Index>(targets.size()));
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const VectorXd r = sample.column(targets[i]);
    const double cov = ((r.array() - r.mean()) * (mkt.array() - mkt_mean)).mean();
    fit.capm_betas(static_cast<Eigen::Index>(i)) = cov / mkt_var;
  }
  fit.lambda_market = mkt_mean;

  // Cross-sectional regression of mean returns on betas.
  const auto n = static_cast<Eigen::Index>(targets.size());
  const Eigen::Index k = fit.betas.rows() + (options.cs_intercept ? 1 : 0);
  if (n < k) {
    throw ConfigError("cross-sectional regression needs at least " + std::to_string(k) +
                      " targets, got " + std::to_string(n));
  }
  MatrixXd x(n, k);
  if (options.cs_intercept) {
    x.col(0).setOnes();
    x.rightCols(fit.betas.rows()) = fit.betas.transpose();
  } else {
    x = fit.betas.transpose();
  }
  VectorXd mean_ret(n);
  for (Eigen::Index i = 0; i < n; ++i) mean_ret(i) = sample.column(targets[static_cast<std::size_t>(i)]).mean();
  Eigen::ColPivHouseholderQR<MatrixXd> qr(x);
  if (qr.rank() < k) throw NumericalError("cross-sectional regression is rank deficient");
  fit.lambda = qr.solve(mean_ret);
  return fit;
}

PricingMetrics score_pricing(const PricingFit& fit, const ReturnPanel& sample, bool in_sample) {
  const auto n = static_cast<Eigen::Index>(fit.targets.size());
  const MatrixXd r = columns(sample, fit.targets);
  const MatrixXd f = columns(sample, fit.model.names());
  const VectorXd mkt = sample.column(fit.options.market);
  const auto T = r.rows();

  PricingMetrics m;
  m.n_targets = static_cast<std::size_t>(n);

  const MatrixXd fitted = f * fit.betas;                         // T x n, no intercept
  const MatrixXd capm_fitted = mkt * fit.capm_betas.transpose();  // T x n
  const double sse = (r - fitted).squaredNorm();
  const double sse_capm = (r - capm_fitted).squaredNorm();
  m.total_r2 = sse_capm > 0.0 ? 100.0 * (1.0 - sse / sse_capm) : 0.0;

  const VectorXd mean_ret = r.colwise().mean().transpose();
  VectorXd predicted;
  if (fit.options.cs_intercept) {
    predicted = fit.lambda(0) + (fit.betas.transpose() * fit.lambda.tail(fit.betas.rows())).array();
  } else {
    predicted = fit.betas.transpose() * fit.lambda;
  }
  const double cs_sse = (mean_ret - predicted).squaredNorm();
  const double cs_capm = (mean_ret - fit.capm_betas * fit.lambda_market).squaredNorm();
  m.cs_r2 = cs_capm > 0.0 ? 100.0 * (1.0 - cs_sse / cs_capm) : 0.0;

  VectorXd alphas, tstats;
  if (in_sample) {
    alphas = fit.alphas;
    tstats = fit.alpha_t;
  } else {
    // Mean pricing error of the frozen betas and its plain standard error.
    const MatrixXd errors = r - fitted;
    alphas = errors.colwise().mean().transpose();
    tstats.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double var =
          (errors.col(i).array() - alphas(i)).square().sum() / static_cast<double>(std::max<Eigen::Index>(T - 1, 1));
      tstats(i) = var > 0.0 ? alphas(i) / std::sqrt(var / static_cast<double>(T)) : 0.0;
    }
  }
  m.avg_abs_alpha = 100.0 * alphas.cwiseAbs().mean();
  m.avg_abs_t = tstats.cwiseAbs().mean();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(tstats(i)) > 1.96) ++m.n_sign2;
  }
  return m;
}

PricingMetrics pricing_metrics(const ReturnPanel& panel, const ModelSet& model,
                               const std::vector<std::string>& targets,
                               const PricingOptions& options) {
  return score_pricing(fit_pricing(panel, model, targets, options), panel, true);
}

InvestMetrics score_portfolio(const TangencyPortfolio& portfolio, const ReturnPanel& sample,
                              const InvestOptions& options) {
  if (portfolio.zero_mean) throw NumericalError("tangency portfolio is degenerate (zero mean returns)");
  const VectorXd series = portfolio_returns(sample, portfolio);
  InvestMetrics m;
  m.avg_return = 100.0 * series.mean();
  m.ann_sharpe = std::sqrt(options.annualization) * sharpe_ratio(series);
  return m;
}

InvestMetrics investment_metrics(const ReturnPanel& panel, const ModelSet& model,
                                 const std::vector<NamedModel>& benchmarks,
                                 const InvestOptions& options) {
  if (model.empty()) throw ConfigError("investment metrics need a nonempty model");
  const TangencyPortfolio portfolio =
      tangency_weights(moments(panel, model.names()), options.target_volatility);
  InvestMetrics m = score_portfolio(portfolio, panel, options);

  const VectorXd series = portfolio_returns(panel, portfolio);
  static const std::string kSeries = "__mve__";
  for (const auto& [label, bench] : benchmarks) {
    std::vector<std::string> names{kSeries};
    names.insert(names.end(), bench.begin(), bench.end());
    MatrixXd data(series.size(), static_cast<Eigen::Index>(names.size()));
    data.col(0) = series;
    for (std::size_t j = 0; j < bench.size(); ++j) {
      data.col(static_cast<Eigen::Index>(j + 1)) = panel.column(bench.names()[j]);
    }
    const ReturnPanel joint(panel.periods(), names, std::move(data));
    const SpanningFit fit = spanning_regression(joint, {kSeries}, bench);
    m.benchmark_alphas[label] = {100.0 * fit.alphas(0), fit.alpha_t(0)};
  }
  return m;
}

std::vector<FoldResult> oos_evaluate(const ReturnPanel& panel, const FoldSplit& folds,
                                     const ModelSource& source, const ReturnPanel* extra,
                                     const OosOptions& options) {
  if (folds.folds.size() < 2) throw ConfigError("out-of-sample evaluation needs at least 2 folds");
  if (folds.num_periods != panel.num_periods()) {
    throw ConfigError("fold split covers " + std::to_string(folds.num_periods) +
                      " periods but the panel has " + std::to_string(panel.num_periods()));
  }
  if (options.targets == TargetSet::kExtra && !extra) {
    throw ConfigError("extra-asset targets requested without an asset panel");
  }
  const ReturnPanel all = extra ? concat_columns(panel, *extra) : panel;

  std::vector<FoldResult> results;
  for (std::size_t f = 0; f < folds.folds.size(); ++f) {
    const auto train_rows = folds.complement(f);
    const auto& test_rows = folds.folds[f];
    if (train_rows.empty() || test_rows.empty()) throw ConfigError("empty fold");
    const ReturnPanel train = take_rows(all, train_rows);
    const ReturnPanel test = take_rows(all, test_rows);

    FoldResult r;
    r.fold = f;
    r.first_period = panel.periods()[test_rows.front()];
    r.last_period = panel.periods()[test_rows.back()];
    if (source.reselect) {
      const ReturnPanel train_factors = take_rows(panel, train_rows);
      std::optional<ReturnPanel> train_extra;
      if (extra) train_extra = take_rows(*extra, train_rows);
      r.model = stepwise_select(train_factors, source.model, train_extra ? &*train_extra : nullptr,
                                source.selection)
                    .final_model;
    } else {
      r.model = source.model;
    }

    std::vector<std::string> targets;
    if (options.targets == TargetSet::kExtra) {
      targets = extra->names();
    } else {
      for (const auto& n : panel.names()) {
        if (!r.model.contains(n)) targets.push_back(n);
      }
    }

    const PricingFit fit = fit_pricing(train, r.model, targets, options.pricing);
    r.ins_pricing = score_pricing(fit, train, true);
    r.oos_pricing = score_pricing(fit, test, false);

    const TangencyPortfolio portfolio =
        tangency_weights(moments(train, r.model.names()), options.invest.target_volatility);
    r.ins_invest = score_portfolio(portfolio, train, options.invest);
    r.oos_invest = score_portfolio(portfolio, test, options.invest);
    results.push_back(std::move(r));
  }
  return results;
}

BootstrapDraw bootstrap_draw(std::size_t num_periods, std::uint64_t seed, std::size_t run,
                             std::size_t attempt) {
  const std::size_t pairs = num_periods / 2;
  if (pairs == 0) throw ConfigError("bootstrap needs at least 2 periods");
  auto rng = stream_for(seed, {0xB007ull, run, attempt});
  std::uniform_int_distribution<std::size_t> pick(0, pairs - 1);
  BootstrapDraw d;
  d.ins.reserve(pairs);
  d.oos.reserve(pairs);
  for (std::size_t p = 0; p < pairs; ++p) {
    const std::size_t pair = pick(rng);
    const bool first_in = (rng() >> 63) == 0;
    d.ins.push_back(2 * pair + (first_in ? 0 : 1));
    d.oos.push_back(2 * pair + (first_in ? 1 : 0));
  }
  return d;
}

namespace {

struct RunOutcome {
  std::vector<double> ins_sharpe;  // sqrt of INS SR^2
  std::vector<double> oos_sharpe;
  std::size_t redraws = 0;
};

Moments moments_of_rows(const MatrixXd& data, const std::vector<std::size_t>& rows,
                        const std::vector<std::string>& names) {
  MatrixXd sub(static_cast<Eigen::Index>(rows.size()), data.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) sub.row(static_cast<Eigen::Index>(r)) = data.row(static_cast<Eigen::Index>(rows[r]));
  return moments(sub, names);
}

}  // namespace

BootstrapReport bootstrap_sr(const ReturnPanel& panel, const std::vector<NamedModel>& models,
                             const BootstrapOptions& options) {
  if (options.runs < 1) throw ConfigError("bootstrap needs at least one run");
  if (models.empty()) throw ConfigError("bootstrap needs at least one model");
  BootstrapReport rep;
  rep.runs = options.runs;
  rep.seed = options.seed;
  std::size_t T = panel.num_periods();
  if (T % 2 == 1) {
    rep.warnings.push_back("odd number of periods; dropping the last period '" +
                           panel.periods().back() + "'");
    --T;
  }
  if (T < 4) throw ConfigError("bootstrap needs at least 4 periods");

  std::vector<MatrixXd> data;
  for (const auto& [label, model] : models) {
    if (model.empty()) throw ConfigError("model '" + label + "' is empty");
    rep.labels.push_back(label);
    MatrixXd cols(static_cast<Eigen::Index>(T), static_cast<Eigen::Index>(model.size()));
    for (std::size_t j = 0; j < model.size(); ++j) {
      cols.col(static_cast<Eigen::Index>(j)) = panel.column(model.names()[j]).head(static_cast<Eigen::Index>(T));
    }
    data.push_back(std::move(cols));
  }
  const std::size_t k = models.size();

  std::vector<RunOutcome> outcomes(options.runs);
  parallel_for(options.runs, options.threads, [&](std::size_t run) {
    RunOutcome& out = outcomes[run];
    for (std::size_t attempt = 0;; ++attempt) {
      if (attempt > options.max_redraws_per_run) {
        throw NumericalError("bootstrap run " + std::to_string(run) + " stayed singular after " +
                             std::to_string(options.max_redraws_per_run) + " redraws");
      }
      const BootstrapDraw draw = bootstrap_draw(T, options.seed, run, attempt);
      try {
        out.ins_sharpe.assign(k, 0.0);
        out.oos_sharpe.assign(k, 0.0);
        for (std::size_t m = 0; m < k; ++m) {
          const Moments ins = moments_of_rows(data[m], draw.ins, models[m].second.names());
          const TangencyPortfolio w = tangency_weights(ins);
          if (w.zero_mean) throw NumericalError("zero-mean resample");
          VectorXd oos(static_cast<Eigen::Index>(draw.oos.size()));
          for (std::size_t r = 0; r < draw.oos.size(); ++r) {
            oos(static_cast<Eigen::Index>(r)) = data[m].row(static_cast<Eigen::Index>(draw.oos[r])).dot(w.weights);
          }
          out.ins_sharpe[m] = std::sqrt(w.sr2);
          out.oos_sharpe[m] = sharpe_ratio(oos);
        }
        out.redraws = attempt;
        return;
      } catch (const NumericalError&) {
        continue;
      }
    }
  });

  for (auto* mat : {&rep.beat_ins, &rep.beat_oos, &rep.tie_ins, &rep.tie_oos}) {
    mat->assign(k, std::vector<double>(k, 0.0));
  }
  rep.mean_ins_sr2.assign(k, 0.0);
  rep.mean_oos_sr2.assign(k, 0.0);
  rep.best_ins.assign(k, 0.0);
  rep.best_oos.assign(k, 0.0);

  auto tally = [k](const std::vector<double>& s, std::vector<std::vector<double>>& beat,
                   std::vector<std::vector<double>>& tie, std::vector<double>& best) {
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        if (i == j) continue;
        if (s[i] > s[j]) {
          beat[i][j] += 1.0;
        } else if (s[i] == s[j]) {
          beat[i][j] += 0.5;
          tie[i][j] += 1.0;
        }
      }
    }
    const double top = *std::max_element(s.begin(), s.end());
    const auto winners = static_cast<double>(std::count(s.begin(), s.end(), top));
    for (std::size_t i = 0; i < k; ++i) {
      if (s[i] == top) best[i] += 1.0 / winners;
    }
  };

  for (const auto& out : outcomes) {
    rep.redraws += out.redraws;
    for (std::size_t m = 0; m < k; ++m) {
      rep.mean_ins_sr2[m] += out.ins_sharpe[m] * out.ins_sharpe[m];
      rep.mean_oos_sr2[m] += out.oos_sharpe[m] * std::abs(out.oos_sharpe[m]);
    }
    tally(out.ins_sharpe, rep.beat_ins, rep.tie_ins, rep.best_ins);
    tally(out.oos_sharpe, rep.beat_oos, rep.tie_oos, rep.best_oos);
  }
  const double runs = static_cast<double>(options.runs);
  for (std::size_t i = 0; i < k; ++i) {
    rep.mean_ins_sr2[i] /= runs;
    rep.mean_oos_sr2[i] /= runs;
    rep.best_ins[i] *= 100.0 / runs;
    rep.best_oos[i] *= 100.0 / runs;
    for (std::size_t j = 0; j < k; ++j) {
      for (auto* mat : {&rep.beat_ins, &rep.beat_oos, &rep.tie_ins, &rep.tie_oos}) {
        (*mat)[i][j] *= 100.0 / runs;
      }
    }
  }
  return rep;
}

}  // namespace fzoo
