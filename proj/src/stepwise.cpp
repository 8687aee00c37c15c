#include "fzoo/stepwise.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fzoo/errors.h"
#include "fzoo/parallel.h"

namespace fzoo {

const char* to_string(StopRule rule) noexcept {
  return rule == StopRule::kHda ? "hda" : "grs";
}

const char* to_string(Criterion criterion) noexcept {
  return criterion == Criterion::kModelSr2 ? "model-sr2" : "single-sr2";
}

const char* to_string(StepAction action) noexcept {
  switch (action) {
    case StepAction::kStart: return "start";
    case StepAction::kAdd: return "add";
    case StepAction::kRemove: return "remove";
  }
  return "?";
}

StopRule parse_stop_rule(const std::string& s) {
  if (s == "hda" || s == "HDA") return StopRule::kHda;
  if (s == "grs" || s == "GRS") return StopRule::kGrs;
  throw ConfigError("unknown stop rule '" + s + "' (expected hda or grs)");
}

Criterion parse_criterion(const std::string& s) {
  if (s == "model-sr2") return Criterion::kModelSr2;
  if (s == "single-sr2" || s == "sr") return Criterion::kSingleSr2;
  throw ConfigError("unknown criterion '" + s + "' (expected model-sr2 or single-sr2)");
}

void SelectionConfig::validate() const {
  if (!(significance > 0.0 && significance < 1.0)) {
    throw ConfigError("significance level must lie in (0,1)");
  }
  if (max_steps && *max_steps < 1) throw ConfigError("max_steps must be at least 1");
}

std::vector<StepRecord> StepwiseResult::path() const {
  auto out = forward.steps;
  out.insert(out.end(), backward.steps.begin(), backward.steps.end());
  return out;
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct ModelEvaluation {
  double sr2 = 0.0;
  double grs = kNaN;
  double grs_p = kNaN;
  double hda_stat = kNaN;
  double hda_p = kNaN;
  bool rejected = false;
};

ModelEvaluation evaluate_model(const AssetUniverse& u, const std::vector<std::size_t>& model,
                               const SelectionConfig& cfg) {
  ModelEvaluation e;
  e.sr2 = u.model_sr2(model);

  const bool grs_possible = u.universe_sr2_available() && model.size() < u.grs_dimension();
  if (grs_possible) {
    const TestResult g = grs_test(u, model);
    e.grs = g.statistic;
    e.grs_p = g.p_value;
  } else if (cfg.stop_rule == StopRule::kGrs) {
    if (!u.universe_sr2_available()) u.universe_sr2();  // throws with the reason
    throw ConfigError("GRS stop rule needs at least one test asset outside the model");
  }

  const std::size_t n_lhs = u.size() - model.size();
  const bool hda_possible = n_lhs >= 2 && u.t_obs() > model.size() + 2;
  if (hda_possible) {
    HdaConfig hda = cfg.hda;
    hda.significance = cfg.significance;
    try {
      const TestResult h = hda_test(u, model, hda);
      e.hda_stat = h.statistic;
      e.hda_p = h.p_value;
    } catch (const NumericalError&) {
      if (cfg.stop_rule == StopRule::kHda) throw;
    }
  } else if (cfg.stop_rule == StopRule::kHda) {
    throw ConfigError("HDA stop rule needs at least 2 test assets outside the model");
  }

  e.rejected = cfg.stop_rule == StopRule::kHda ? e.hda_p < cfg.significance
                                               : e.grs_p < cfg.significance;
  return e;
}

StepRecord make_record(const AssetUniverse& u, std::size_t step, StepAction action,
                       std::string factor, const std::vector<std::size_t>& model,
                       const ModelEvaluation& e) {
  StepRecord r;
  r.step = step;
  r.action = action;
  r.factor = std::move(factor);
  r.model = u.model_of(model);
  r.sr2 = e.sr2;
  r.grs = e.grs;
  r.grs_p = e.grs_p;
  r.hda_stat = e.hda_stat;
  r.hda_p = e.hda_p;
  r.rejected = e.rejected;
  return r;
}

// Larger key wins; equal keys go to the lexicographically smaller name.
bool better(double key, const std::string& name, double best_key, const std::string& best_name) {
  if (key != best_key) return key > best_key;
  return name < best_name;
}

std::size_t default_max_steps(const AssetUniverse& u) {
  const std::size_t n = u.num_factors();
  const std::size_t by_n = n > 2 ? n - 2 : 1;
  return std::max<std::size_t>(1, std::min(by_n, u.t_obs() / 3));
}

std::size_t min_test_assets(const SelectionConfig& cfg) {
  return cfg.stop_rule == StopRule::kHda ? 2 : 1;
}

double grs_for(const AssetUniverse& u, std::size_t model_size, double sr2) {
  if (!u.universe_sr2_available() || model_size >= u.grs_dimension()) return kNaN;
  return grs_from_sr2(u.t_obs(), u.grs_dimension(), model_size, u.universe_sr2(), sr2);
}

}  // namespace

SelectionPath fse(const AssetUniverse& u, const ModelSet& baseline, const SelectionConfig& cfg) {
  cfg.validate();
  if (baseline.empty()) throw ConfigError("forward evaluation needs a nonempty baseline");
  std::vector<std::size_t> current = u.indices(baseline);

  SelectionPath path;
  {
    const ModelEvaluation e = evaluate_model(u, current, cfg);
    path.steps.push_back(make_record(u, 0, StepAction::kStart, "", current, e));
    if (!e.rejected) {
      path.steps.back().stopped = true;
      path.model = baseline;
      return path;
    }
  }

  const std::size_t max_steps = cfg.max_steps.value_or(default_max_steps(u));
  for (std::size_t k = 1;; ++k) {
    std::vector<char> in_model(u.num_factors(), 0);
    for (auto i : current) in_model[i] = 1;
    std::vector<std::size_t> candidates;
    for (std::size_t j = 0; j < u.num_factors(); ++j) {
      if (!in_model[j]) candidates.push_back(j);
    }
    const bool room = u.size() >= current.size() + 1 + min_test_assets(cfg);
    if (k > max_steps || candidates.empty() || !room) {
      path.converged = false;
      path.warnings.push_back("forward evaluation stopped after " + std::to_string(k - 1) +
                              " additions without passing the stop test");
      break;
    }

    std::vector<CandidateScore> scores(candidates.size());
    parallel_for(candidates.size(), cfg.threads, [&](std::size_t c) {
      const std::size_t j = candidates[c];
      CandidateScore& s = scores[c];
      s.factor = u.factor_names()[j];
      try {
        auto trial = current;
        trial.push_back(j);
        s.single_sr2 = u.single_sr2(j);
        s.sr2 = u.model_sr2(trial);
        s.grs = grs_for(u, trial.size(), s.sr2);
      } catch (const NumericalError& e) {
        s.failed = true;
        s.reason = e.what();
      }
    });

    std::size_t best = candidates.size();
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      const auto& s = scores[c];
      if (s.failed) {
        path.warnings.push_back("step " + std::to_string(k) + ": skipped '" + s.factor + "': " + s.reason);
        continue;
      }
      const double key = cfg.criterion == Criterion::kModelSr2 ? s.sr2 : s.single_sr2;
      if (best == candidates.size()) {
        best = c;
        continue;
      }
      const auto& b = scores[best];
      const double best_key = cfg.criterion == Criterion::kModelSr2 ? b.sr2 : b.single_sr2;
      if (better(key, s.factor, best_key, b.factor)) best = c;
    }
    if (best == candidates.size()) {
      throw NumericalError("forward step " + std::to_string(k) + ": every candidate failed");
    }

    current.push_back(candidates[best]);
    const ModelEvaluation e = evaluate_model(u, current, cfg);
    StepRecord rec = make_record(u, k, StepAction::kAdd, scores[best].factor, current, e);
    rec.scanned = std::move(scores);
    path.steps.push_back(std::move(rec));
    if (!e.rejected) {
      path.steps.back().stopped = true;
      break;
    }
  }
  if (!path.converged) path.steps.back().stopped = true;
  path.model = u.model_of(current);
  return path;
}

SelectionPath bse(const AssetUniverse& u, const ModelSet& model, const SelectionConfig& cfg) {
  cfg.validate();
  if (model.size() < 2) throw ConfigError("backward evaluation needs a model with at least 2 factors");
  std::vector<std::size_t> current = u.indices(model);

  SelectionPath path;
  {
    const ModelEvaluation e = evaluate_model(u, current, cfg);
    path.steps.push_back(make_record(u, 0, StepAction::kStart, "", current, e));
    if (e.rejected) {
      path.warnings.push_back("input model " + model.join("+") +
                              " is rejected by the stop test; pruning anyway");
    }
  }

  for (std::size_t m = 1; current.size() >= 2; ++m) {
    std::vector<CandidateScore> scores(current.size());
    parallel_for(current.size(), cfg.threads, [&](std::size_t c) {
      const std::size_t j = current[c];
      CandidateScore& s = scores[c];
      s.factor = u.factor_names()[j];
      try {
        std::vector<std::size_t> trial;
        for (auto i : current) {
          if (i != j) trial.push_back(i);
        }
        s.single_sr2 = u.single_sr2(j);
        s.sr2 = u.model_sr2(trial);
        s.grs = grs_for(u, trial.size(), s.sr2);
      } catch (const NumericalError& e) {
        s.failed = true;
        s.reason = e.what();
      }
    });

    std::size_t worst = current.size();
    for (std::size_t c = 0; c < current.size(); ++c) {
      const auto& s = scores[c];
      if (s.failed) {
        path.warnings.push_back("step " + std::to_string(m) + ": skipped '" + s.factor + "': " + s.reason);
        continue;
      }
      // Model criterion: keep the reduced model with the largest SR^2.
      // Single criterion: drop the factor with the smallest own SR^2.
      const double key = cfg.criterion == Criterion::kModelSr2 ? s.sr2 : -s.single_sr2;
      if (worst == current.size()) {
        worst = c;
        continue;
      }
      const auto& b = scores[worst];
      const double best_key = cfg.criterion == Criterion::kModelSr2 ? b.sr2 : -b.single_sr2;
      if (better(key, s.factor, best_key, b.factor)) worst = c;
    }
    if (worst == current.size()) {
      throw NumericalError("backward step " + std::to_string(m) + ": every candidate failed");
    }

    std::vector<std::size_t> reduced;
    for (std::size_t c = 0; c < current.size(); ++c) {
      if (c != worst) reduced.push_back(current[c]);
    }
    const ModelEvaluation e = evaluate_model(u, reduced, cfg);
    StepRecord rec = make_record(u, m, StepAction::kRemove, scores[worst].factor, reduced, e);
    rec.scanned = std::move(scores);
    if (e.rejected) {
      rec.applied = false;
      rec.stopped = true;
      path.steps.push_back(std::move(rec));
      break;
    }
    current = std::move(reduced);
    path.steps.push_back(std::move(rec));
  }
  if (!path.steps.back().stopped) path.steps.back().stopped = true;
  path.model = u.model_of(current);
  return path;
}

StepwiseResult stepwise_select(const AssetUniverse& u, const ModelSet& baseline,
                               const SelectionConfig& cfg) {
  StepwiseResult r;
  r.forward = fse(u, baseline, cfg);
  r.expanded = r.forward.model;
  if (r.expanded.size() >= 2) {
    r.backward = bse(u, r.expanded, cfg);
  } else {
    r.backward.model = r.expanded;
  }
  r.final_model = r.backward.model;
  return r;
}

FactorVerdict evaluate_factor(const AssetUniverse& u, const std::string& factor,
                              const ModelSet& core, const SelectionConfig& cfg) {
  if (core.contains(factor)) {
    throw ConfigError("factor '" + factor + "' is already in the core model");
  }
  FactorVerdict v;
  v.factor = factor;
  v.final_model = stepwise_select(u, core.with(factor), cfg).final_model;
  v.selected = v.final_model.contains(factor);
  return v;
}

SelectionPath fse(const ReturnPanel& panel, const ModelSet& baseline, const ReturnPanel* extra,
                  const SelectionConfig& cfg) {
  return fse(AssetUniverse(panel, extra), baseline, cfg);
}

SelectionPath bse(const ReturnPanel& panel, const ModelSet& model, const ReturnPanel* extra,
                  const SelectionConfig& cfg) {
  return bse(AssetUniverse(panel, extra), model, cfg);
}

StepwiseResult stepwise_select(const ReturnPanel& panel, const ModelSet& baseline,
                               const ReturnPanel* extra, const SelectionConfig& cfg) {
  return stepwise_select(AssetUniverse(panel, extra), baseline, cfg);
}

}  // namespace fzoo
