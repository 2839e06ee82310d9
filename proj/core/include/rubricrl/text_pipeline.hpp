#ifndef RUBRICRL_TEXT_PIPELINE_HPP_
#define RUBRICRL_TEXT_PIPELINE_HPP_

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rubricrl/backend.hpp"
#include "rubricrl/env.hpp"
#include "rubricrl/pipeline.hpp"
#include "rubricrl/prompts.hpp"

namespace rubricrl {

// A preference item over real text, for driving generative backends.
// Record fields: id, question, response_a, response_b, winner ("A"/"B"),
// optional category, optional image (file path).
struct TextInstance {
  std::string id;
  std::string question;
  std::string response_a;
  std::string response_b;
  Label winner = Label::A;
  std::optional<std::string> category;
  std::optional<std::string> image_path;
  std::size_t source_line = 0;
};

std::vector<TextInstance> parse_text_records(std::istream& in);
std::vector<TextInstance> load_text_records(const std::filesystem::path& path);

struct GenerationOptions {
  double temperature = 0.0;
  std::size_t judge_max_tokens = 1024;
  std::size_t planner_max_tokens = 512;
  std::size_t probe_max_tokens = 16;
};

// One user message holding the rendered template, with the image attached
// when `with_image` is set and the instance has one.
BackendRequest build_request(const TextInstance& instance, TemplateName name, const Bindings& extra,
                             std::size_t max_tokens, double temperature, bool with_image = true);

struct TextJudgment {
  std::optional<Label> verdict;
  std::vector<std::string> checklist;
  bool fallback = false;
  std::optional<FilterReason> filter_reason;
  std::string output;
};

// Planner -> neutrality filter -> checklist-guided judge for the rubric
// modes; a single judge call otherwise. A planner output without a usable
// checklist falls back to the no-rubric judge. An unparseable verdict leaves
// `verdict` empty.
TextJudgment judge_text(Backend& backend, const TextInstance& instance, JudgeMode mode,
                        const GenerationOptions& options = {});

// Cheap probes: the no-checklist baseline and the checklist-conditioned
// verdict. Empty optionals mark unparseable outputs.
struct ProbeResult {
  std::optional<Label> baseline;
  std::optional<Label> probed;
};
ProbeResult probe_text(Backend& backend, const TextInstance& instance, std::span<const std::string> checklist,
                       const GenerationOptions& options = {});

EvalReport evaluate_text(Backend& backend, std::span<const TextInstance> dataset, JudgeMode mode,
                         const GenerationOptions& options = {}, std::size_t max_in_flight = 4);

}  // namespace rubricrl

#endif  // RUBRICRL_TEXT_PIPELINE_HPP_
