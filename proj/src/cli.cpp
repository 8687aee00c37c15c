#include "fzoo/cli.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include <openssl/evp.h>

#include "CLI11.hpp"
#include "fzoo/errors.h"
#include "fzoo/evaluation.h"
#include "fzoo/panel.h"
#include "fzoo/parallel.h"
#include "fzoo/simlab.h"
#include "json.hpp"

#ifndef FZOO_VERSION
#define FZOO_VERSION "0.0.0"
#endif

namespace fzoo {

namespace fs = std::filesystem;
using nlohmann::json;

FactorEvalTable factor_eval_batch(const AssetUniverse& u, const ModelSet& core,
                                  const SelectionConfig& cfg,
                                  const std::optional<ModelSet>& reference) {
  cfg.validate();
  for (const auto& f : core) u.factor_index(f);

  FactorEvalTable table;
  table.core = core;
  table.reference = reference ? *reference : stepwise_select(u, core, cfg).final_model;

  std::vector<std::string> candidates;
  for (const auto& f : u.factor_names()) {
    if (!core.contains(f)) candidates.push_back(f);
  }
  table.rows.resize(candidates.size());
  SelectionConfig inner = cfg;
  inner.threads = 1;
  parallel_for(candidates.size(), cfg.threads, [&](std::size_t i) {
    const FactorVerdict v = evaluate_factor(u, candidates[i], core, inner);
    table.rows[i].factor = candidates[i];
    table.rows[i].selected = v.selected;
    table.rows[i].final_model = v.final_model;
    table.rows[i].same = v.final_model.same_members(table.reference);
  });

  // Inclusion frequency of every factor across all runs.
  std::map<std::string, std::size_t> hits;
  for (const auto& r : table.rows) {
    for (const auto& f : r.final_model) ++hits[f];
  }
  const double runs = static_cast<double>(table.rows.size());
  for (auto& r : table.rows) {
    r.rate = runs > 0 ? static_cast<double>(hits[r.factor]) / runs : 0.0;
  }
  return table;
}

std::string format_factor_eval(const FactorEvalTable& table) {
  std::ostringstream out;
  out << "id,factor,selected,same,rate,reduced_model\n";
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& r = table.rows[i];
    char rate[32];
    std::snprintf(rate, sizeof rate, "%.2f", r.rate);
    out << (i + 1) << ',' << r.factor << ',' << (r.selected ? 1 : 0) << ',' << (r.same ? 1 : 0)
        << ',' << rate << ",\"" << r.final_model.join("+") << "\"\n";
  }
  return out.str();
}

namespace {

// ---------------------------------------------------------------- helpers

std::string hex(const unsigned char* p, unsigned n) {
  static const char* digits = "0123456789abcdef";
  std::string s;
  s.reserve(2 * n);
  for (unsigned i = 0; i < n; ++i) {
    s.push_back(digits[p[i] >> 4]);
    s.push_back(digits[p[i] & 15]);
  }
  return s;
}

std::string sha256(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx, md, &len) != 1) {
    EVP_MD_CTX_free(ctx);
    throw std::runtime_error("SHA-256 digest failed");
  }
  EVP_MD_CTX_free(ctx);
  return hex(md, len);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PanelError(PanelErrc::kIo, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string num(double x) {
  if (!std::isfinite(x)) return "NA";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

std::string quoted(const std::string& s) { return "\"" + s + "\""; }

json finite_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

// "NAME=A+B" -> (NAME, {A, B}); a bare spec is named by itself.
NamedModel parse_named_model(const std::string& arg) {
  const auto eq = arg.find('=');
  if (eq == std::string::npos) {
    const ModelSet m = parse_model(arg);
    return {m.join("+"), m};
  }
  const std::string name = arg.substr(0, eq);
  if (name.empty()) throw ConfigError("model '" + arg + "' has an empty name");
  return {name, parse_model(arg.substr(eq + 1))};
}

// ---------------------------------------------------------------- run state

struct Settings {
  std::string data;
  std::string assets;
  std::string costs;
  std::string from;
  std::string to;
  std::string out = "fzoo-out";
  std::optional<std::uint64_t> seed;
  unsigned threads = default_threads();

  // selection
  std::string baseline = "MKT";
  double alpha_level = 0.05;
  std::string stop = "hda";
  std::string criterion = "model-sr2";
  std::optional<std::size_t> max_steps;
  std::optional<double> screening_level;
  bool fse_only = false;
  bool bse_only = false;
  bool extras_in_universe = true;

  // test / metrics / oos / bootstrap
  std::string model;
  std::vector<std::string> models;
  std::vector<std::string> benchmarks;
  std::string targets = "unselected";
  std::string market = "MKT";
  bool cs_intercept = false;
  double annualization = kDefaultAnnualization;
  double target_vol = kDefaultTargetVolatility;
  std::size_t folds = 10;
  bool reselect = false;
  std::size_t runs = 1000;

  // simulate
  std::string calibration;
  std::size_t reps = 1000;
  std::string methods = "hda,grs,sr";
  int sim_case = 1;
  std::optional<std::size_t> t_obs;
  std::optional<std::size_t> k2;

  // factor-eval
  std::string core = "MKT";
  std::string reference;
};

struct Manifest {
  std::string command;
  std::vector<std::string> argv;
  json config = json::object();
  json inputs = json::array();
  json outputs = json::array();
  std::uint64_t seed = 0;
  bool seed_generated = false;
  bool uses_seed = false;
};

class Run {
 public:
  Run(Settings s, Manifest& m) : s_(std::move(s)), m_(m) {}

  const Settings& settings() const { return s_; }

  void record_input(const std::string& role, const std::string& path) {
    const std::string bytes = read_file(path);
    m_.inputs.push_back({{"role", role}, {"path", path}, {"bytes", bytes.size()}, {"sha256", sha256(bytes)}});
  }

  void write(const std::string& name, const std::string& content) {
    const fs::path dir(s_.out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw PanelError(PanelErrc::kIo, "cannot create output directory '" + s_.out + "': " + ec.message());
    const fs::path path = dir / name;
    std::ofstream f(path, std::ios::binary);
    f << content;
    if (!f) throw PanelError(PanelErrc::kIo, "cannot write '" + path.string() + "'");
    m_.outputs.push_back({{"file", name}, {"bytes", content.size()}, {"sha256", sha256(content)}});
  }

  void write_json(const std::string& name, const json& j) { write(name, j.dump(2) + "\n"); }

  // Factors and optional extra assets after costs and the period window.
  struct Data {
    ReturnPanel factors;
    std::optional<ReturnPanel> extra;
  };

  Data load_data() {
    if (s_.data.empty()) throw ConfigError("--data is required for this command");
    record_input("factors", s_.data);
    ReturnPanel factors = load_panel(s_.data);
    std::optional<ReturnPanel> extra;
    if (!s_.assets.empty()) {
      record_input("assets", s_.assets);
      extra = load_panel(s_.assets);
    }
    if (!s_.costs.empty()) {
      record_input("costs", s_.costs);
      const CostSchedule all = load_costs(s_.costs);
      CostSchedule on_factors, on_assets;
      for (const auto& [name, bps] : all.bps) {
        if (factors.contains(name)) {
          on_factors.bps[name] = bps;
        } else if (extra && extra->contains(name)) {
          on_assets.bps[name] = bps;
        } else {
          throw PanelError(PanelErrc::kUnknownName, "cost schedule names unknown series '" + name + "'");
        }
      }
      factors = adjust_costs(factors, on_factors);
      if (extra) extra = adjust_costs(*extra, on_assets);
    }
    PeriodRange range;
    if (!s_.from.empty()) range.from = s_.from;
    if (!s_.to.empty()) range.to = s_.to;
    if (range.from || range.to) {
      factors = subset(factors, std::nullopt, range);
      if (extra) extra = subset(*extra, std::nullopt, range);
    }
    if (extra && extra->periods() != factors.periods()) {
      throw PanelError(PanelErrc::kDimension, "asset and factor panels cover different periods");
    }
    return {std::move(factors), std::move(extra)};
  }

  SelectionConfig selection() const {
    SelectionConfig c;
    c.significance = s_.alpha_level;
    c.stop_rule = parse_stop_rule(s_.stop);
    c.criterion = parse_criterion(s_.criterion);
    c.max_steps = s_.max_steps;
    c.hda.screening_level = s_.screening_level;
    c.threads = s_.threads;
    c.validate();
    return c;
  }

  UniverseOptions universe_options() const {
    UniverseOptions o;
    o.extras_in_universe_sr2 = s_.extras_in_universe;
    return o;
  }

  std::uint64_t seed() {
    m_.uses_seed = true;
    return m_.seed;
  }

 private:
  Settings s_;
  Manifest& m_;
};

// ---------------------------------------------------------------- commands

json step_json(const StepRecord& r) {
  return {{"step", r.step},         {"action", to_string(r.action)},
          {"factor", r.factor},     {"model", r.model.names()},
          {"sr2", r.sr2},           {"grs", finite_or_null(r.grs)},
          {"grs_p", finite_or_null(r.grs_p)}, {"hda", finite_or_null(r.hda_stat)},
          {"hda_p", finite_or_null(r.hda_p)}, {"rejected", r.rejected},
          {"stopped", r.stopped},   {"applied", r.applied}};
}

void append_path_csv(std::ostringstream& out, const char* pass, const SelectionPath& p) {
  for (const auto& r : p.steps) {
    out << pass << ',' << r.step << ',' << to_string(r.action) << ',' << r.factor << ','
        << quoted(r.model.join("+")) << ',' << num(r.sr2) << ',' << num(r.grs) << ',' << num(r.grs_p)
        << ',' << num(r.hda_stat) << ',' << num(r.hda_p) << ',' << (r.rejected ? 1 : 0) << ','
        << (r.stopped ? 1 : 0) << ',' << (r.applied ? 1 : 0) << '\n';
  }
}

void append_scan_csv(std::ostringstream& out, const char* pass, const SelectionPath& p) {
  for (const auto& r : p.steps) {
    for (const auto& c : r.scanned) {
      out << pass << ',' << r.step << ',' << c.factor << ',' << num(c.sr2) << ',' << num(c.grs) << ','
          << num(c.single_sr2) << ',' << (c.failed ? 1 : 0) << ',' << quoted(c.reason) << '\n';
    }
  }
}

json path_json(const SelectionPath& p) {
  json steps = json::array();
  for (const auto& r : p.steps) steps.push_back(step_json(r));
  return {{"model", p.model.names()}, {"converged", p.converged}, {"warnings", p.warnings}, {"steps", steps}};
}

void cmd_select(Run& run) {
  const auto& s = run.settings();
  if (s.fse_only && s.bse_only) throw ConfigError("--fse-only and --bse-only are mutually exclusive");
  auto data = run.load_data();
  const AssetUniverse u(data.factors, data.extra ? &*data.extra : nullptr, run.universe_options());
  const SelectionConfig cfg = run.selection();
  const ModelSet baseline = parse_model(s.baseline);

  std::optional<SelectionPath> forward, backward;
  if (s.bse_only) {
    backward = bse(u, baseline, cfg);
  } else if (s.fse_only) {
    forward = fse(u, baseline, cfg);
  } else {
    StepwiseResult r = stepwise_select(u, baseline, cfg);
    forward = std::move(r.forward);
    backward = std::move(r.backward);
  }

  std::ostringstream path, scan;
  path << "pass,step,action,factor,model,sr2,grs,grs_p,hda,hda_p,rejected,stopped,applied\n";
  scan << "pass,step,candidate,sr2,grs,single_sr2,failed,reason\n";
  if (forward) {
    append_path_csv(path, "FSE", *forward);
    append_scan_csv(scan, "FSE", *forward);
  }
  if (backward) {
    append_path_csv(path, "BSE", *backward);
    append_scan_csv(scan, "BSE", *backward);
  }
  run.write("path.csv", path.str());
  run.write("candidates.csv", scan.str());

  const ModelSet final_model = backward ? backward->model : forward->model;
  json j = {{"baseline", baseline.names()}, {"final_model", final_model.names()}};
  if (forward) {
    j["expanded_model"] = forward->model.names();
    j["forward"] = path_json(*forward);
  }
  if (backward) j["backward"] = path_json(*backward);
  run.write_json("model.json", j);
}

json test_json(const TestResult& t, double significance) {
  return {{"statistic", t.statistic}, {"p_value", t.p_value}, {"distribution", t.df},
          {"n_test_assets", t.n_lhs}, {"rejects", t.rejects(significance)}};
}

void cmd_test(Run& run) {
  const auto& s = run.settings();
  if (s.model.empty()) throw ConfigError("--model is required");
  auto data = run.load_data();
  const AssetUniverse u(data.factors, data.extra ? &*data.extra : nullptr, run.universe_options());
  const SelectionConfig cfg = run.selection();
  const ModelSet model = parse_model(s.model);
  const auto idx = u.indices(model);

  const SpanningFit fit = u.fit(idx);
  json j = {{"model", model.names()}, {"sr2", u.model_sr2(idx)}, {"significance", cfg.significance},
            {"t_obs", u.t_obs()}};
  try {
    j["grs"] = test_json(grs_test(u, idx), cfg.significance);
  } catch (const Error& e) {
    j["grs"] = {{"error", e.what()}};
  }
  HdaConfig h = cfg.hda;
  h.significance = cfg.significance;
  try {
    j["hda"] = test_json(hda_test(fit, h), cfg.significance);
    const Rho2Estimate rho = rho2_correction(fit, h.screening_level);
    j["hda"]["rho2"] = rho.value;
    j["hda"]["rho2_pairs"] = rho.retained_pairs;
    j["hda"]["rho2_threshold"] = rho.threshold;
  } catch (const Error& e) {
    j["hda"] = {{"error", e.what()}};
  }
  run.write_json("test.json", j);

  std::ostringstream csv;
  csv << "asset,alpha,alpha_t,resid_vol\n";
  for (std::size_t i = 0; i < fit.lhs.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    csv << fit.lhs[i] << ',' << num(fit.alphas(k)) << ',' << num(fit.alpha_t(k)) << ','
        << num(std::sqrt(std::max(0.0, fit.resid_cov(k, k)))) << '\n';
  }
  run.write("alphas.csv", csv.str());
}

std::vector<NamedModel> named_models(const std::vector<std::string>& specs) {
  std::vector<NamedModel> out;
  for (const auto& a : specs) {
    auto m = parse_named_model(a);
    for (const auto& prev : out) {
      if (prev.first == m.first) throw ConfigError("duplicate model name '" + m.first + "'");
    }
    out.push_back(std::move(m));
  }
  return out;
}

TargetSet parse_targets(const std::string& s) {
  if (s == "unselected") return TargetSet::kUnselected;
  if (s == "extra" || s == "assets") return TargetSet::kExtra;
  throw ConfigError("unknown target set '" + s + "' (expected unselected or extra)");
}

json pricing_json(const PricingMetrics& m) {
  return {{"avg_abs_alpha_pct", m.avg_abs_alpha}, {"avg_abs_t", m.avg_abs_t}, {"n_sign2", m.n_sign2},
          {"total_r2_pct", m.total_r2}, {"cs_r2_pct", m.cs_r2}, {"n_targets", m.n_targets}};
}

json invest_json(const InvestMetrics& m) {
  json b = json::object();
  for (const auto& [name, a] : m.benchmark_alphas) {
    b[name] = {{"alpha_pct", a.alpha}, {"t", a.t_stat}, {"stars", significance_stars(a.t_stat)}};
  }
  return {{"avg_return_pct", m.avg_return}, {"ann_sharpe", m.ann_sharpe}, {"benchmark_alphas", b}};
}

void cmd_metrics(Run& run) {
  const auto& s = run.settings();
  if (s.models.empty()) throw ConfigError("at least one --model is required");
  auto data = run.load_data();
  const auto models = named_models(s.models);
  const auto benchmarks = named_models(s.benchmarks);
  const TargetSet targets = parse_targets(s.targets);
  if (targets == TargetSet::kExtra && !data.extra) throw ConfigError("--targets extra needs --assets");
  const ReturnPanel all = data.extra ? concat_columns(data.factors, *data.extra) : data.factors;
  PricingOptions po;
  po.market = s.market;
  po.cs_intercept = s.cs_intercept;
  InvestOptions io;
  io.annualization = s.annualization;
  io.target_volatility = s.target_vol;

  std::ostringstream csv;
  csv << "model,factors,n_targets,avg_abs_alpha,avg_abs_t,n_sign2,total_r2,cs_r2,avg_return,ann_sharpe";
  for (const auto& b : benchmarks) csv << ",alpha_vs_" << b.first << ",t_vs_" << b.first;
  csv << '\n';
  json j = json::array();
  for (const auto& [name, model] : models) {
    std::vector<std::string> t;
    if (targets == TargetSet::kExtra) {
      t = data.extra->names();
    } else {
      for (const auto& n : data.factors.names()) {
        if (!model.contains(n)) t.push_back(n);
      }
    }
    const PricingMetrics p = pricing_metrics(all, model, t, po);
    const InvestMetrics inv = investment_metrics(data.factors, model, benchmarks, io);
    csv << name << ',' << quoted(model.join("+")) << ',' << p.n_targets << ',' << num(p.avg_abs_alpha)
        << ',' << num(p.avg_abs_t) << ',' << p.n_sign2 << ',' << num(p.total_r2) << ',' << num(p.cs_r2)
        << ',' << num(inv.avg_return) << ',' << num(inv.ann_sharpe);
    for (const auto& b : benchmarks) {
      const auto& a = inv.benchmark_alphas.at(b.first);
      csv << ',' << num(a.alpha) << ',' << num(a.t_stat);
    }
    csv << '\n';
    j.push_back({{"name", name}, {"model", model.names()}, {"pricing", pricing_json(p)}, {"investment", invest_json(inv)}});
  }
  run.write("metrics.csv", csv.str());
  run.write_json("metrics.json", j);
}

void cmd_oos(Run& run) {
  const auto& s = run.settings();
  if (s.model.empty() == !s.reselect) {
    throw ConfigError("give exactly one of --model or --reselect");
  }
  auto data = run.load_data();
  ModelSource source;
  if (s.reselect) {
    source.reselect = true;
    source.model = parse_model(s.baseline);
    source.selection = run.selection();
  } else {
    source.model = parse_model(s.model);
  }
  OosOptions o;
  o.targets = parse_targets(s.targets);
  o.pricing.market = s.market;
  o.pricing.cs_intercept = s.cs_intercept;
  o.invest.annualization = s.annualization;
  o.invest.target_volatility = s.target_vol;

  const FoldSplit folds = split_folds(data.factors, s.folds);
  const auto results = oos_evaluate(data.factors, folds, source, data.extra ? &*data.extra : nullptr, o);

  std::ostringstream csv;
  csv << "fold,first_period,last_period,model,sample,avg_abs_alpha,avg_abs_t,n_sign2,total_r2,cs_r2,"
         "avg_return,ann_sharpe\n";
  json j = json::array();
  for (const auto& r : results) {
    auto line = [&](const char* sample, const PricingMetrics& p, const InvestMetrics& inv) {
      csv << r.fold << ',' << r.first_period << ',' << r.last_period << ',' << quoted(r.model.join("+"))
          << ',' << sample << ',' << num(p.avg_abs_alpha) << ',' << num(p.avg_abs_t) << ',' << p.n_sign2
          << ',' << num(p.total_r2) << ',' << num(p.cs_r2) << ',' << num(inv.avg_return) << ','
          << num(inv.ann_sharpe) << '\n';
    };
    line("INS", r.ins_pricing, r.ins_invest);
    line("OOS", r.oos_pricing, r.oos_invest);
    j.push_back({{"fold", r.fold},
                 {"first_period", r.first_period},
                 {"last_period", r.last_period},
                 {"model", r.model.names()},
                 {"ins", {{"pricing", pricing_json(r.ins_pricing)}, {"investment", invest_json(r.ins_invest)}}},
                 {"oos", {{"pricing", pricing_json(r.oos_pricing)}, {"investment", invest_json(r.oos_invest)}}}});
  }
  run.write("oos_folds.csv", csv.str());
  run.write_json("oos.json", j);
}

void cmd_bootstrap(Run& run) {
  const auto& s = run.settings();
  const auto models = named_models(s.models);
  if (models.size() < 2) throw ConfigError("bootstrap needs at least two --model entries");
  auto data = run.load_data();
  BootstrapOptions o;
  o.runs = s.runs;
  o.seed = run.seed();
  o.threads = s.threads;
  const BootstrapReport rep = bootstrap_sr(data.factors, models, o);

  std::ostringstream summary;
  summary << "model,factors,mean_ins_sr2,mean_oos_sr2,best_ins,best_oos\n";
  for (std::size_t i = 0; i < rep.labels.size(); ++i) {
    summary << rep.labels[i] << ',' << quoted(models[i].second.join("+")) << ',' << num(rep.mean_ins_sr2[i])
            << ',' << num(rep.mean_oos_sr2[i]) << ',' << num(rep.best_ins[i]) << ',' << num(rep.best_oos[i])
            << '\n';
  }
  std::ostringstream beat;
  beat << "model,versus,beat_ins,beat_oos,tie_ins,tie_oos\n";
  for (std::size_t i = 0; i < rep.labels.size(); ++i) {
    for (std::size_t k = 0; k < rep.labels.size(); ++k) {
      if (i == k) continue;
      beat << rep.labels[i] << ',' << rep.labels[k] << ',' << num(rep.beat_ins[i][k]) << ','
           << num(rep.beat_oos[i][k]) << ',' << num(rep.tie_ins[i][k]) << ',' << num(rep.tie_oos[i][k])
           << '\n';
    }
  }
  run.write("bootstrap_summary.csv", summary.str());
  run.write("bootstrap_beat.csv", beat.str());
  run.write_json("bootstrap.json", {{"labels", rep.labels},
                                    {"mean_ins_sr2", rep.mean_ins_sr2},
                                    {"mean_oos_sr2", rep.mean_oos_sr2},
                                    {"beat_ins", rep.beat_ins},
                                    {"beat_oos", rep.beat_oos},
                                    {"tie_ins", rep.tie_ins},
                                    {"tie_oos", rep.tie_oos},
                                    {"best_ins", rep.best_ins},
                                    {"best_oos", rep.best_oos},
                                    {"runs", rep.runs},
                                    {"seed", rep.seed},
                                    {"redraws", rep.redraws},
                                    {"warnings", rep.warnings}});
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, ',')) {
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

void cmd_simulate(Run& run) {
  const auto& s = run.settings();
  SimConfig cfg;
  if (s.calibration.empty()) {
    cfg = default_sim_config();
  } else {
    run.record_input("calibration", s.calibration);
    cfg = load_sim_config(s.calibration);
  }
  if (s.k2) cfg = truncate_unselected(cfg, *s.k2);
  if (s.t_obs) cfg.t_obs = *s.t_obs;
  cfg.baseline_case = s.sim_case;
  cfg.seed = run.seed();

  std::vector<SimMethod> methods;
  for (const auto& name : split_list(s.methods)) {
    SimMethod m = sim_method(name, s.alpha_level);
    m.selection.max_steps = s.max_steps;
    m.selection.hda.screening_level = s.screening_level;
    methods.push_back(std::move(m));
  }
  if (methods.empty()) throw ConfigError("--methods is empty");

  const SimReport rep = run_sim_study(cfg, methods, s.reps, s.threads);
  run.write("sim_table.csv", format_sim_table(rep));
  run.write("sim_rates.csv", format_selection_rates(rep));

  json rows = json::array();
  for (const auto& r : rep.rows) {
    rows.push_back({{"method", r.method}, {"pass", r.pass}, {"size", r.mean_size}, {"cp", r.cp}, {"cf", r.cf},
                    {"tr", r.tr}, {"fr", r.fr}, {"replications", r.replications}, {"failures", r.failures},
                    {"not_converged", r.not_converged}});
  }
  run.write_json("sim.json", {{"k1", cfg.k1},
                              {"k2", cfg.k2},
                              {"t_obs", rep.t_obs},
                              {"case", rep.baseline_case},
                              {"baseline", rep.baseline.names()},
                              {"truth", rep.truth.names()},
                              {"reps", rep.reps},
                              {"seed", rep.seed},
                              {"rows", rows},
                              {"failure_messages", rep.failure_messages}});
}

void cmd_factor_eval(Run& run) {
  const auto& s = run.settings();
  auto data = run.load_data();
  const AssetUniverse u(data.factors, data.extra ? &*data.extra : nullptr, run.universe_options());
  std::optional<ModelSet> reference;
  if (!s.reference.empty()) reference = parse_model(s.reference);
  const FactorEvalTable t = factor_eval_batch(u, parse_model(s.core), run.selection(), reference);
  run.write("factor_eval.csv", format_factor_eval(t));
  json rows = json::array();
  for (const auto& r : t.rows) {
    rows.push_back({{"factor", r.factor}, {"selected", r.selected}, {"same", r.same}, {"rate", r.rate},
                    {"reduced_model", r.final_model.names()}});
  }
  run.write_json("factor_eval.json", {{"core", t.core.names()}, {"reference", t.reference.names()}, {"rows", rows}});
}

// ---------------------------------------------------------------- parsing

std::string env_name(const std::string& long_name) {
  std::string e = "FZOO_";
  for (char c : long_name) e.push_back(c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  return e;
}

// Every long option gets an FZOO_ environment override.
void add_env_names(CLI::App* app) {
  for (CLI::Option* opt : app->get_options()) {
    const auto& names = opt->get_lnames();
    if (names.empty() || names.front() == "help" || names.front() == "settings") continue;
    opt->envname(env_name(names.front()));
  }
}

void data_options(CLI::App* c, Settings& s) {
  c->add_option("--data", s.data, "Factor returns CSV (period column + one column per factor)")
      ->check(CLI::ExistingFile);
  c->add_option("--assets", s.assets, "Extra test-asset returns CSV")->check(CLI::ExistingFile);
  c->add_option("--costs", s.costs, "Trading costs CSV: name,bps per period")->check(CLI::ExistingFile);
  c->add_option("--from", s.from, "First period label to keep");
  c->add_option("--to", s.to, "Last period label to keep");
}

void selection_options(CLI::App* c, Settings& s) {
  c->add_option("--alpha-level", s.alpha_level, "Significance level of the stopping test")
      ->check(CLI::Range(0.0, 1.0));
  c->add_option("--stop", s.stop, "Stopping test: hda or grs");
  c->add_option("--criterion", s.criterion, "Candidate ranking: model-sr2 or single-sr2");
  c->add_option("--max-steps", s.max_steps, "Cap on forward steps");
  c->add_option("--screening-level", s.screening_level, "Two-sided level for residual-correlation screening");
  c->add_flag("!--exclude-assets-from-grs", s.extras_in_universe,
              "Leave extra assets out of the GRS universe");
}

void common_options(CLI::App* c, Settings& s) {
  c->add_option("--out", s.out, "Output directory")->capture_default_str();
  c->add_option("--seed", s.seed, "Random seed (drawn and recorded when absent)");
  c->add_option("--threads", s.threads, "Worker threads")->check(CLI::PositiveNumber);
}

int error_exit(std::ostream& err, int code, const char* cls, const std::string& message,
               const std::string& command) {
  json e = {{"error", {{"class", cls}, {"message", message}, {"exit_code", code}, {"command", command}}}};
  err << e.dump() << '\n';
  return code;
}

}  // namespace

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::string started = utc_now();

  Settings s;
  CLI::App app{"Factor-zoo model selection toolkit", "fzoo"};
  app.set_version_flag("--version", FZOO_VERSION);
  app.require_subcommand(1);
  // Settings file sections are named after subcommands: [select], [simulate], ...
  app.set_config("--settings", "", "INI/TOML settings file, one [command] section per subcommand");
  app.fallthrough();

  std::map<std::string, CLI::App*> cmds;
  auto* select = app.add_subcommand("select", "Stepwise selection from a baseline model");
  data_options(select, s);
  selection_options(select, s);
  select->add_option("--baseline", s.baseline, "Baseline model, e.g. MKT or MKT+SMB")->capture_default_str();
  select->add_flag("--fse-only", s.fse_only, "Run the forward pass only");
  select->add_flag("--bse-only", s.bse_only, "Run the backward pass only, starting from --baseline");
  cmds["select"] = select;

  auto* test = app.add_subcommand("test", "GRS and HDA tests of one model");
  data_options(test, s);
  selection_options(test, s);
  test->add_option("--model", s.model, "Model to test")->required();
  cmds["test"] = test;

  auto* metrics = app.add_subcommand("metrics", "In-sample pricing and investment metrics");
  data_options(metrics, s);
  metrics->add_option("--model", s.models, "NAME=A+B or A+B (repeatable)")->required();
  metrics->add_option("--benchmark", s.benchmarks, "Benchmark model for alphas, NAME=A+B (repeatable)");
  cmds["metrics"] = metrics;

  auto* oos = app.add_subcommand("oos", "K-fold out-of-sample evaluation");
  data_options(oos, s);
  selection_options(oos, s);
  oos->add_option("--model", s.model, "Fixed model");
  oos->add_flag("--reselect", s.reselect, "Re-run selection from --baseline on every training sample");
  oos->add_option("--baseline", s.baseline, "Baseline for --reselect")->capture_default_str();
  oos->add_option("--folds", s.folds, "Number of folds")->capture_default_str();
  cmds["oos"] = oos;

  for (auto* c : {metrics, oos}) {
    c->add_option("--targets", s.targets, "Test assets: unselected or extra")->capture_default_str();
    c->add_option("--market", s.market, "Market factor for CAPM benchmark terms")->capture_default_str();
    c->add_flag("--cs-intercept", s.cs_intercept, "Add an intercept to the cross-sectional regression");
    c->add_option("--annualization", s.annualization, "Periods per year")->capture_default_str();
    c->add_option("--target-vol", s.target_vol, "Per-period volatility target of the MVE portfolio")
        ->capture_default_str();
  }

  auto* boot = app.add_subcommand("bootstrap", "Paired-month bootstrap comparison of model Sharpe ratios");
  data_options(boot, s);
  boot->add_option("--model", s.models, "NAME=A+B or A+B (repeatable, at least two)")->required();
  boot->add_option("--runs", s.runs, "Bootstrap runs")->capture_default_str()->check(CLI::PositiveNumber);
  cmds["bootstrap"] = boot;

  auto* sim = app.add_subcommand("simulate", "Monte Carlo selection-accuracy study");
  sim->add_option("--config", s.calibration, "Calibration JSON (default: bundled)")->check(CLI::ExistingFile);
  sim->add_option("--reps", s.reps, "Replications")->capture_default_str()->check(CLI::PositiveNumber);
  sim->add_option("--methods", s.methods, "Comma list of hda, grs, sr")->capture_default_str();
  sim->add_option("--case", s.sim_case, "Baseline case 1 or 2")->capture_default_str()->check(CLI::IsMember({1, 2}));
  sim->add_option("--t-obs", s.t_obs, "Override the sample length");
  sim->add_option("--k2", s.k2, "Use only the first k2 unselected factors");
  sim->add_option("--alpha-level", s.alpha_level, "Significance level")->check(CLI::Range(0.0, 1.0));
  sim->add_option("--max-steps", s.max_steps, "Cap on forward steps");
  sim->add_option("--screening-level", s.screening_level, "Two-sided residual-correlation screening level");
  cmds["simulate"] = sim;

  auto* fe = app.add_subcommand("factor-eval", "Evaluate every factor against a core model");
  data_options(fe, s);
  selection_options(fe, s);
  fe->add_option("--core", s.core, "Core model")->capture_default_str();
  fe->add_option("--reference", s.reference, "Reference model for the Same column");
  cmds["factor-eval"] = fe;

  for (auto& [name, c] : cmds) {
    common_options(c, s);
    add_env_names(c);
  }

  std::string command;
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    for (const auto& [name, c] : cmds) {
      if (c->parsed()) command = name;
    }
    return error_exit(err, kExitUsage, "usage", e.what(), command);
  }
  for (const auto& [name, c] : cmds) {
    if (c->parsed()) command = name;
  }

  Manifest manifest;
  manifest.command = command;
  for (int i = 0; i < argc; ++i) manifest.argv.emplace_back(argv[i]);
  if (s.seed) {
    manifest.seed = *s.seed;
  } else {
    std::random_device rd;
    manifest.seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    manifest.seed_generated = true;
  }

  try {
    Run run(s, manifest);
    if (command == "select") cmd_select(run);
    else if (command == "test") cmd_test(run);
    else if (command == "metrics") cmd_metrics(run);
    else if (command == "oos") cmd_oos(run);
    else if (command == "bootstrap") cmd_bootstrap(run);
    else if (command == "simulate") cmd_simulate(run);
    else if (command == "factor-eval") cmd_factor_eval(run);

    // Resolved settings of the invoked command, enough to re-run it.
    CLI::App* c = cmds.at(command);
    json config = json::object();
    for (CLI::Option* opt : c->get_options()) {
      const auto& names = opt->get_lnames();
      if (names.empty() || names.front() == "help" || names.front() == "settings") continue;
      const auto results = opt->results();
      if (!results.empty()) {
        config[names.front()] = results.size() == 1 ? json(results.front()) : json(results);
      } else if (!opt->get_default_str().empty()) {
        config[names.front()] = opt->get_default_str();
      }
    }
    if (manifest.uses_seed) config["seed"] = std::to_string(manifest.seed);
    config["threads"] = std::to_string(s.threads);

    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    json m = {{"tool", "fzoo"},
              {"version", FZOO_VERSION},
              {"command", command},
              {"argv", manifest.argv},
              {"config", config},
              {"inputs", manifest.inputs},
              {"outputs", manifest.outputs},
              {"started_utc", started},
              {"wall_clock_seconds", wall}};
    if (manifest.uses_seed) {
      m["seed"] = manifest.seed;
      m["seed_source"] = manifest.seed_generated ? "generated" : "flag";
    }
    std::string rerun = "fzoo " + command;
    for (const auto& [k, v] : config.items()) {
      if (v.is_array()) {
        for (const auto& x : v) rerun += " --" + k + "=" + x.get<std::string>();
      } else {
        rerun += " --" + k + "=" + v.get<std::string>();
      }
    }
    m["rerun"] = rerun;
    const fs::path mpath = fs::path(s.out) / "manifest.json";
    std::ofstream f(mpath, std::ios::binary);
    f << m.dump(2) << '\n';
    if (!f) throw PanelError(PanelErrc::kIo, "cannot write '" + mpath.string() + "'");

    out << "wrote " << manifest.outputs.size() + 1 << " files to " << s.out << '\n';
    return kExitOk;
  } catch (const Error& e) {
    switch (e.error_class()) {
      case ErrorClass::kConfig: return error_exit(err, kExitUsage, "config", e.what(), command);
      case ErrorClass::kData: return error_exit(err, kExitData, "data", e.what(), command);
      case ErrorClass::kNumerical: return error_exit(err, kExitNumerical, "numerical", e.what(), command);
    }
  } catch (const std::exception& e) {
    return error_exit(err, kExitNumerical, "internal", e.what(), command);
  }
  return kExitNumerical;
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  argv.push_back("fzoo");
  for (const auto& a : args) argv.push_back(a.c_str());
  return dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace fzoo
