#ifndef RUBRICRL_TOOLS_CONFIG_HPP_
#define RUBRICRL_TOOLS_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rubricrl/env.hpp"
#include "rubricrl/pipeline.hpp"
#include "rubricrl/rl.hpp"

namespace rubricrl::tools {

// Run configuration, loaded from an INI file (sections data, train, clip,
// eval, run) and then overridden key by key.
struct RunConfig {
  // [data]
  std::string records;       // training records; generated when empty
  std::string eval_records;  // held-out records; generated when empty
  DatasetSpec dataset;
  std::size_t heldout_instances = 256;

  // [train]
  AblationMode mode = AblationMode::DeltaRubric;
  std::size_t steps = 120;
  std::size_t batch_size = 32;
  std::size_t num_checklists = 5;
  std::size_t num_trajectories = 5;
  double lambda = 0.4;
  double rollout_temperature = 1.0;
  std::size_t inner_epochs = 1;
  OptimizerKind optimizer = OptimizerKind::GradientDescent;
  double learning_rate = 2.0;
  std::size_t eval_every = 5;
  double planner_init_scale = 0.1;
  double noise_reduction = kDefaultNoiseReduction;

  // [clip]
  double clip_low = 0.2;
  double clip_high = 0.2;
  bool dapo_mode = false;
  double degenerate_epsilon = 1e-8;

  // [eval]
  std::optional<JudgeMode> judge_mode;  // defaults from the training mode
  std::uint64_t perception_seed = 0;

  // [run]
  std::uint64_t seed = 7;
  std::string output_dir = "runs/default";

  // Throws ConfigError.
  void validate() const;

  TrainConfig train_config() const;
  JudgeMode effective_judge_mode() const;

  // Sorted "section.key=value" lines for every key, one per line.
  std::string canonical() const;
  // SHA-256 over canonical() and the bytes of any referenced record files.
  std::string digest() const;

  // Recognized keys, in canonical order.
  static const std::vector<std::string>& keys();
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
};

// Judge mode matching a training mode (used for held-out validation).
JudgeMode judge_mode_for(AblationMode mode);

RunConfig load_config(const std::filesystem::path& path);
// "section.key=value"
void apply_override(RunConfig& config, const std::string& assignment);

}  // namespace rubricrl::tools

#endif  // RUBRICRL_TOOLS_CONFIG_HPP_
