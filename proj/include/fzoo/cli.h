#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fzoo/frontier.h"
#include "fzoo/pricing_tests.h"
#include "fzoo/stepwise.h"

namespace fzoo {

// Exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 2,
  kExitData = 3,
  kExitNumerical = 4,
};

struct FactorEvalRow {
  std::string factor;
  bool selected = false;  // factor survives in its own reduced model
  bool same = false;      // reduced model has the reference model's members
  double rate = 0.0;      // share of all runs whose reduced model includes this factor
  ModelSet final_model;
};

struct FactorEvalTable {
  ModelSet core;
  ModelSet reference;
  std::vector<FactorEvalRow> rows;  // one per non-core factor, in panel order
};

// Runs evaluate_factor for every factor outside `core`. Without an explicit
// reference, the reference model is stepwise selection started from `core`.
FactorEvalTable factor_eval_batch(const AssetUniverse& u, const ModelSet& core,
                                  const SelectionConfig& cfg,
                                  const std::optional<ModelSet>& reference = std::nullopt);

// Selected / Same / Rate layout.
std::string format_factor_eval(const FactorEvalTable& table);

// Entry point of the `fzoo` tool. Errors are reported on `err` as a single
// JSON object and mapped onto ExitCode.
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fzoo
