#ifndef RUBRICRL_TOOLS_COMMANDS_HPP_
#define RUBRICRL_TOOLS_COMMANDS_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rubricrl/backend.hpp"
#include "rubricrl/pipeline.hpp"
#include "rubricrl/policy.hpp"
#include "rubricrl/rl.hpp"
#include "rubricrl_tools/config.hpp"

namespace rubricrl::tools {

struct Datasets {
  std::vector<PreferenceInstance> train;
  std::vector<PreferenceInstance> heldout;
};

// Records files when configured, otherwise the generated split: train is
// indices [0, num_instances), held-out the next heldout_instances indices.
// Throws SchemaError on an empty records file.
Datasets load_datasets(const RunConfig& config);

struct ValidationPoint {
  std::uint64_t step = 0;
  double overall = 0.0;
  double macro = 0.0;
};

struct TrainOutcome {
  PolicyParams initial;
  PolicyParams final_params;
  std::vector<StepReport> steps;
  std::vector<ValidationPoint> validation;
};

// The training loop without file output. Deterministic in (config, data).
TrainOutcome train_run(const RunConfig& config, const Datasets& data);

std::string steps_csv(const std::vector<StepReport>& steps);
std::string validation_csv(const std::vector<ValidationPoint>& points);
std::string manifest_json(const RunConfig& config, std::string_view command);

// File names inside a run directory.
inline constexpr const char* kStepsFile = "train_steps.csv";
inline constexpr const char* kValidationFile = "validation.csv";
inline constexpr const char* kCheckpointFile = "checkpoint.txt";
inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kAblationFile = "ablation.csv";

// Throws ConfigError when any target exists and `overwrite` is false.
void guard_outputs(const std::filesystem::path& dir, const std::vector<std::string>& names, bool overwrite);

TrainOutcome cmd_train(const RunConfig& config, bool overwrite, std::ostream& out);

struct BackendOptions {
  std::string kind;  // "scripted" or "remote"
  std::string transcript;
  RemoteConfig remote;
  std::string record_transcript;
  std::string text_records;
};

// Judges the held-out split with a checkpoint, or text records through a
// backend, and writes eval_<mode>.json / eval_<mode>.csv to the output
// directory.
EvalReport cmd_eval(const RunConfig& config, const std::optional<std::filesystem::path>& checkpoint, JudgeMode mode,
                    const std::optional<BackendOptions>& backend, bool overwrite, std::ostream& out);

struct AblationRow {
  std::string name;
  AblationMode mode = AblationMode::DeltaRubric;
  double lambda = 0.4;
};

// The six modes at the configured lambda.
std::vector<AblationRow> default_ablation_rows(const RunConfig& config);
// delta_rubric at lambda 0.0, 0.2, 0.4, 0.6.
std::vector<AblationRow> lambda_grid_rows();

struct AblationResult {
  AblationRow row;
  std::uint64_t seed = 0;
  JudgeMode judge_mode = JudgeMode::DeltaRubric;
  TrainOutcome outcome;
  EvalReport report;
};

std::string ablation_csv(const std::vector<AblationResult>& results);

std::vector<AblationResult> cmd_ablate(const RunConfig& config, const std::vector<AblationRow>& rows, bool overwrite,
                                       std::ostream& out);

enum class Split { Train, Heldout };
std::size_t cmd_gen_data(const RunConfig& config, Split split, const std::filesystem::path& path, bool overwrite);

// Writes each template body (<key>.txt) and the static rubric; with bindings,
// also the rendered templates under rendered/.
std::size_t cmd_render_prompts(const std::filesystem::path& dir, const std::optional<std::filesystem::path>& bindings,
                               bool overwrite);

}  // namespace rubricrl::tools

#endif  // RUBRICRL_TOOLS_COMMANDS_HPP_
