#include "rubricrl/pipeline.hpp"

#include <cmath>
#include <nlohmann/json.hpp>
#include <numeric>
#include <regex>
#include <sstream>

#include "rubricrl/errors.hpp"
#include "rubricrl/io.hpp"
#include "rubricrl/rng.hpp"

namespace rubricrl {

namespace {

constexpr std::pair<JudgeMode, std::string_view> kJudgeModeNames[] = {
    {JudgeMode::DeltaRubric, "delta_rubric"},
    {JudgeMode::NoRubric, "no_rubric"},
    {JudgeMode::StaticRubric, "static_rubric"},
    {JudgeMode::TextOnlyPlanner, "text_only_planner"},
    {JudgeMode::FrozenPlannerCheckpoint, "frozen_planner_checkpoint"},
};

Checklist all_masked(const PreferenceInstance& inst) {
  Checklist c;
  for (std::size_t j = 0; j < inst.num_attributes(); ++j) {
    if (inst.question_mask[j]) c.push_back(j);
  }
  return c;
}

Judgment execute(const PolicyParams& params, const PreferenceInstance& inst, Checklist checklist, Rng rng) {
  Judgment j;
  auto t = sample_trajectory(params, inst, checklist, rng, 0.0);
  j.verdict = t.verdict;
  j.findings = std::move(t.findings);
  j.checklist = std::move(checklist);
  return j;
}

}  // namespace

std::string_view to_string(JudgeMode mode) {
  for (const auto& [m, name] : kJudgeModeNames) {
    if (m == mode) return name;
  }
  return "unknown";
}

std::optional<JudgeMode> parse_judge_mode(std::string_view text) {
  for (const auto& [m, name] : kJudgeModeNames) {
    if (name == text) return m;
  }
  return std::nullopt;
}

std::string_view to_string(FilterReason reason) {
  switch (reason) {
    case FilterReason::NamesResponse:
      return "names-response";
    case FilterReason::ExpressesPreference:
      return "expresses-preference";
    case FilterReason::Size:
      return "size";
  }
  return "unknown";
}

FilterResult neutrality_filter(std::span<const std::string> items) {
  static const std::regex kNamesResponse(R"(\bresponse\s*[ab]\b)", std::regex::icase);
  static const std::regex kPreference(R"(\bbetter\b|\bcorrect\s+answer\s+is\b)", std::regex::icase);
  for (const auto& item : items) {
    if (std::regex_search(item, kNamesResponse)) return FilterResult::reject(FilterReason::NamesResponse);
    if (std::regex_search(item, kPreference)) return FilterResult::reject(FilterReason::ExpressesPreference);
  }
  if (items.size() < kMinChecklistSize || items.size() > kMaxChecklistSize) {
    return FilterResult::reject(FilterReason::Size);
  }
  return FilterResult::accept();
}

FilterResult neutrality_filter(const Checklist& checklist, std::span<const std::string> rendered_items) {
  if (checklist.size() != rendered_items.size()) throw InvalidArgument("one rendered item per checklist entry expected");
  return neutrality_filter(rendered_items);
}

std::string render_checklist_item(std::size_t attribute) {
  return "Check in the image whether attribute " + std::to_string(attribute) + " is present.";
}

std::vector<std::string> render_checklist(const Checklist& checklist) {
  std::vector<std::string> items;
  items.reserve(checklist.size());
  for (std::size_t a : checklist) items.push_back(render_checklist_item(a));
  return items;
}

Judgment judge_instance(const PolicyParams& params, const PreferenceInstance& inst, JudgeMode mode,
                        const JudgeOptions& options) {
  const Rng rng(derive_seed(options.perception_seed, {hash_string(inst.id)}));
  switch (mode) {
    case JudgeMode::NoRubric:
      return execute(params, inst, {}, rng);
    case JudgeMode::StaticRubric:
      return execute(params, inst, all_masked(inst), rng);
    case JudgeMode::DeltaRubric:
    case JudgeMode::TextOnlyPlanner:
    case JudgeMode::FrozenPlannerCheckpoint:
      break;
  }
  const FeatureView view = mode == JudgeMode::TextOnlyPlanner ? FeatureView::TextOnly : FeatureView::Full;
  auto checklist = greedy_checklist(params, inst, view);
  const auto filter = neutrality_filter(checklist, render_checklist(checklist));
  if (!filter.accepted) {
    auto j = execute(params, inst, {}, rng);
    j.fallback = true;
    j.filter_reason = filter.reason;
    return j;
  }
  return execute(params, inst, std::move(checklist), rng);
}

double macro_average(std::span<const double> accuracies) {
  if (accuracies.empty()) return 0.0;
  return std::accumulate(accuracies.begin(), accuracies.end(), 0.0) / static_cast<double>(accuracies.size());
}

double round_half_up(double value, int decimals) {
  const double scale = std::pow(10.0, decimals);
  return std::floor(value * scale + 0.5) / scale;
}

EvalReport EvalReport::aggregate(std::vector<InstanceRecord> records) {
  EvalReport report;
  std::size_t correct = 0;
  for (const auto& r : records) {
    auto& stats = report.per_category[r.category.empty() ? std::string(kUncategorized) : r.category];
    ++stats.total;
    if (r.correct()) {
      ++stats.correct;
      ++correct;
    }
  }
  std::vector<double> accuracies;
  for (auto& [name, stats] : report.per_category) {
    stats.accuracy = static_cast<double>(stats.correct) / static_cast<double>(stats.total);
    accuracies.push_back(stats.accuracy);
  }
  report.overall = records.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(records.size());
  report.macro = macro_average(accuracies);
  report.per_instance = std::move(records);
  return report;
}

std::string EvalReport::to_json(std::string_view config_digest) const {
  nlohmann::ordered_json obj;
  obj["config_digest"] = config_digest;
  obj["overall"] = overall;
  obj["macro"] = macro;
  obj["per_category"] = nlohmann::ordered_json::object();
  for (const auto& [name, stats] : per_category) {
    obj["per_category"][name] = {{"correct", stats.correct}, {"total", stats.total}, {"accuracy", stats.accuracy}};
  }
  obj["per_instance"] = nlohmann::ordered_json::array();
  for (const auto& r : per_instance) {
    nlohmann::ordered_json rec;
    rec["id"] = r.id;
    rec["category"] = r.category;
    rec["predicted"] = r.predicted ? nlohmann::ordered_json(std::string(1, to_char(*r.predicted))) : nlohmann::ordered_json();
    rec["gold"] = std::string(1, to_char(r.gold));
    rec["mode"] = r.mode;
    rec["fallback"] = r.fallback;
    obj["per_instance"].push_back(std::move(rec));
  }
  return obj.dump(2) + "\n";
}

std::string EvalReport::to_csv() const {
  std::ostringstream out;
  out << "id,category,predicted,gold,correct,mode,fallback\n";
  for (const auto& r : per_instance) {
    out << r.id << ',' << r.category << ',' << (r.predicted ? std::string(1, to_char(*r.predicted)) : std::string())
        << ',' << to_char(r.gold) << ',' << (r.correct() ? 1 : 0) << ',' << r.mode << ',' << (r.fallback ? 1 : 0)
        << '\n';
  }
  return out.str();
}

std::string EvalReport::summary() const {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(1);
  out << "overall=" << round_half_up(100.0 * overall, 1) << " macro=" << round_half_up(100.0 * macro, 1);
  return out.str();
}

EvalReport evaluate(const PolicyParams& params, std::span<const PreferenceInstance> dataset, JudgeMode mode,
                    const JudgeOptions& options) {
  if (dataset.empty()) throw InvalidArgument("evaluation dataset is empty");
  std::vector<InstanceRecord> records;
  records.reserve(dataset.size());
  for (const auto& inst : dataset) {
    const auto j = judge_instance(params, inst, mode, options);
    records.push_back({inst.id, inst.category.value_or(std::string(kUncategorized)), j.verdict, inst.gold_winner,
                       std::string(to_string(mode)), j.fallback});
  }
  return EvalReport::aggregate(std::move(records));
}

}  // namespace rubricrl
