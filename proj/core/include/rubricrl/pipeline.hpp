#ifndef RUBRICRL_PIPELINE_HPP_
#define RUBRICRL_PIPELINE_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rubricrl/env.hpp"
#include "rubricrl/policy.hpp"

namespace rubricrl {

enum class JudgeMode : std::uint8_t {
  DeltaRubric,
  NoRubric,
  StaticRubric,
  TextOnlyPlanner,
  // Same pathway as DeltaRubric; names runs whose planner was never trained.
  FrozenPlannerCheckpoint,
};

std::string_view to_string(JudgeMode mode);
std::optional<JudgeMode> parse_judge_mode(std::string_view text);

enum class FilterReason : std::uint8_t { NamesResponse, ExpressesPreference, Size };

std::string_view to_string(FilterReason reason);

struct FilterResult {
  bool accepted = true;
  std::optional<FilterReason> reason;

  static FilterResult accept() { return {}; }
  static FilterResult reject(FilterReason r) { return {false, r}; }
};

// Rejects checklists whose size is outside [2, 4], or with an item that names
// a response ("Response A" / "Response B", any case) or states a preference
// ("better", "correct answer is").
FilterResult neutrality_filter(std::span<const std::string> items);
FilterResult neutrality_filter(const Checklist& checklist, std::span<const std::string> rendered_items);

// Canonical text of a synthetic checklist item.
std::string render_checklist_item(std::size_t attribute);
std::vector<std::string> render_checklist(const Checklist& checklist);

struct JudgeOptions {
  // Roots the per-instance perception streams, which are keyed by instance
  // id, so every mode sees the same draws for the same instance.
  std::uint64_t perception_seed = 0;
};

struct Judgment {
  Label verdict = Label::A;
  Checklist checklist;
  std::vector<Finding> findings;
  bool fallback = false;
  std::optional<FilterReason> filter_reason;
};

// Greedy plan-and-execute judgment. Deterministic in (params, instance, mode,
// options).
Judgment judge_instance(const PolicyParams& params, const PreferenceInstance& instance, JudgeMode mode,
                        const JudgeOptions& options = {});

struct CategoryStats {
  std::size_t correct = 0;
  std::size_t total = 0;
  double accuracy = 0.0;
};

struct InstanceRecord {
  std::string id;
  std::string category;
  // Empty when the judge produced no parseable verdict (counted incorrect).
  std::optional<Label> predicted;
  Label gold = Label::A;
  std::string mode;
  bool fallback = false;

  bool correct() const { return predicted && *predicted == gold; }
};

inline constexpr std::string_view kUncategorized = "uncategorized";

struct EvalReport {
  std::map<std::string, CategoryStats> per_category;
  double overall = 0.0;
  double macro = 0.0;
  std::vector<InstanceRecord> per_instance;

  // Builds category stats, overall (count-weighted) and macro (unweighted
  // mean of category accuracies) from per-instance records.
  static EvalReport aggregate(std::vector<InstanceRecord> records);

  // Structured form (JSON) with the config digest, and the flat per-instance
  // CSV: id,category,predicted,gold,correct,mode,fallback.
  std::string to_json(std::string_view config_digest) const;
  std::string to_csv() const;
  // "overall=<x> macro=<y>" in percent, rounded half-up to one decimal.
  std::string summary() const;
};

double macro_average(std::span<const double> accuracies);

// Half-up rounding to `decimals` places (report boundary only).
double round_half_up(double value, int decimals);

EvalReport evaluate(const PolicyParams& params, std::span<const PreferenceInstance> dataset, JudgeMode mode,
                    const JudgeOptions& options = {});

}  // namespace rubricrl

#endif  // RUBRICRL_PIPELINE_HPP_
