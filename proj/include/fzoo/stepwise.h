#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "fzoo/frontier.h"
#include "fzoo/panel.h"
#include "fzoo/pricing_tests.h"

namespace fzoo {

enum class StopRule { kHda, kGrs };
enum class Criterion { kModelSr2, kSingleSr2 };

const char* to_string(StopRule rule) noexcept;
const char* to_string(Criterion criterion) noexcept;
StopRule parse_stop_rule(const std::string& s);
Criterion parse_criterion(const std::string& s);

struct SelectionConfig {
  double significance = 0.05;
  StopRule stop_rule = StopRule::kHda;
  Criterion criterion = Criterion::kModelSr2;
  // Unset means min(N - 2, floor(T / 3)) with N the number of candidate factors.
  std::optional<std::size_t> max_steps;
  HdaConfig hda;  // screening settings; its significance is overridden by `significance`
  unsigned threads = 1;

  void validate() const;
};

enum class StepAction { kStart, kAdd, kRemove };
const char* to_string(StepAction action) noexcept;

struct CandidateScore {
  std::string factor;
  double sr2 = 0.0;   // SR^2 of the candidate model
  double grs = 0.0;   // GRS value of the candidate model (NaN when undefined)
  double single_sr2 = 0.0;
  bool failed = false;
  std::string reason;
};

/// One evaluated model along a selection path.
struct StepRecord {
  std::size_t step = 0;
  StepAction action = StepAction::kStart;
  std::string factor;     // empty for kStart
  ModelSet model;         // RHS model that was tested
  double grs = 0.0;       // NaN when T <= N
  double grs_p = 1.0;
  double sr2 = 0.0;
  double hda_stat = 0.0;  // NaN when fewer than 2 test assets remain
  double hda_p = 1.0;
  bool rejected = false;  // stop-rule verdict on `model`
  bool stopped = false;   // path ended at this record
  bool applied = true;    // false for the BSE removal that was undone
  std::vector<CandidateScore> scanned;
};

struct SelectionPath {
  ModelSet model;
  std::vector<StepRecord> steps;
  bool converged = true;
  std::vector<std::string> warnings;
};

SelectionPath fse(const AssetUniverse& u, const ModelSet& baseline, const SelectionConfig& cfg);
SelectionPath bse(const AssetUniverse& u, const ModelSet& model, const SelectionConfig& cfg);

struct StepwiseResult {
  ModelSet expanded;     // output of the forward pass
  ModelSet final_model;  // output of the backward pass
  SelectionPath forward;
  SelectionPath backward;

  std::vector<StepRecord> path() const;  // forward records then backward records
};

StepwiseResult stepwise_select(const AssetUniverse& u, const ModelSet& baseline,
                               const SelectionConfig& cfg);

struct FactorVerdict {
  std::string factor;
  bool selected = false;
  ModelSet final_model;
};

FactorVerdict evaluate_factor(const AssetUniverse& u, const std::string& factor,
                              const ModelSet& core, const SelectionConfig& cfg);

// Panel-level conveniences.
SelectionPath fse(const ReturnPanel& panel, const ModelSet& baseline, const ReturnPanel* extra,
                  const SelectionConfig& cfg);
SelectionPath bse(const ReturnPanel& panel, const ModelSet& model, const ReturnPanel* extra,
                  const SelectionConfig& cfg);
StepwiseResult stepwise_select(const ReturnPanel& panel, const ModelSet& baseline,
                               const ReturnPanel* extra, const SelectionConfig& cfg);

}  // namespace fzoo
