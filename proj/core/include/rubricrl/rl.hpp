#ifndef RUBRICRL_RL_HPP_
#define RUBRICRL_RL_HPP_

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rubricrl/env.hpp"
#include "rubricrl/policy.hpp"
#include "rubricrl/rewards.hpp"
#include "rubricrl/rng.hpp"

namespace rubricrl {

enum class Role : std::uint8_t { Planner, Verifier };

// Training-time variants. DeltaRubric is the full method; the rest are the
// ablations and the no-rubric reference.
enum class AblationMode : std::uint8_t {
  DeltaRubric,
  NoRubric,
  StaticRubric,
  FrozenPlanner,
  AbsoluteReward,
  TextOnlyPlanner,
};

std::string_view to_string(AblationMode mode);
std::optional<AblationMode> parse_ablation_mode(std::string_view text);

// Whether the mode samples and scores planner checklists at all.
bool samples_planner(AblationMode mode);
// Whether planner parameters receive updates.
bool trains_planner(AblationMode mode);

struct ClipConfig {
  double clip_low = 0.2;
  double clip_high = 0.2;
  // Decoupled clip bounds and dynamic sampling of zero-variance groups.
  bool dapo_mode = false;
  double degenerate_epsilon = 1e-8;
  double learning_rate = 2.0;

  void validate() const;
};

// (r - mean) / population_std, or all zeros when std < epsilon.
std::vector<double> normalize_group(std::span<const double> rewards, double epsilon);

// min(ratio * A, clip(ratio, 1 - clip_low, 1 + clip_high) * A), to be maximized.
double clipped_surrogate(double ratio, double advantage, const ClipConfig& clip);
// d clipped_surrogate / d ratio (zero on the clipped branch).
double clipped_surrogate_slope(double ratio, double advantage, const ClipConfig& clip);

// -(mean(planner_terms) + mean(verifier_terms)). Both spans must be non-empty.
double joint_loss(std::span<const double> planner_terms, std::span<const double> verifier_terms);

struct TaskGroup {
  Role role = Role::Planner;
  std::vector<double> rewards;
  double mean = 0.0;
  double std = 0.0;
  std::vector<double> advantages;
  bool degenerate = false;
  // False when the group is absent from the loss (untrained role, or dropped
  // by dynamic sampling).
  bool included = false;

  static TaskGroup build(Role role, std::vector<double> rewards, double epsilon);
  bool empty() const { return rewards.empty(); }
};

struct InstanceRollout {
  // Non-owning; the batch (or pool) the rollout was collected from must
  // outlive it.
  const PreferenceInstance* instance = nullptr;
  std::size_t slot = 0;
  Label baseline = Label::A;
  std::vector<ChecklistSample> checklists;
  std::vector<VerdictTriple> probes;
  TaskGroup planner;
  Checklist greedy;
  std::vector<TrajectorySample> trajectories;
  TaskGroup verifier;

  bool contributes() const { return planner.included || verifier.included; }
};

struct RolloutBatch {
  std::vector<InstanceRollout> rollouts;
  std::size_t resampled = 0;
  std::size_t degenerate_groups = 0;
  std::size_t dropped_groups = 0;
};

struct TrainConfig {
  std::size_t num_checklists = 5;    // N
  std::size_t num_trajectories = 5;  // M
  RewardConfig reward;
  ClipConfig clip;
  AblationMode mode = AblationMode::DeltaRubric;
  double rollout_temperature = 1.0;
  std::size_t inner_epochs = 1;

  void validate() const;
};

// Replacement instances for dynamic sampling, handed out in order.
class InstancePool {
 public:
  InstancePool() = default;
  explicit InstancePool(std::vector<const PreferenceInstance*> instances) : instances_(std::move(instances)) {}

  const PreferenceInstance* next() { return cursor_ < instances_.size() ? instances_[cursor_++] : nullptr; }
  std::size_t remaining() const { return instances_.size() - cursor_; }

 private:
  std::vector<const PreferenceInstance*> instances_;
  std::size_t cursor_ = 0;
};

// Rollout of one instance. Every random draw comes from streams derived from
// (stream_seed, slot), so results do not depend on collection order.
InstanceRollout collect_instance(const PolicyParams& params, const PreferenceInstance& instance,
                                 const TrainConfig& config, std::uint64_t stream_seed, std::size_t slot);

// Collects the batch. In DAPO mode zero-variance groups are dropped and
// replacement instances are drawn from `pool` until each trained role has
// batch.size() groups or the pool is empty; throws PoolExhausted if no group
// survives.
RolloutBatch collect_rollouts(const PolicyParams& params, std::span<const PreferenceInstance> batch,
                              const TrainConfig& config, std::uint64_t stream_seed,
                              InstancePool* pool = nullptr);

// Joint clipped-surrogate loss over the batch, using the stored old-policy
// log-probabilities for the ratios. Averaged over contributing instances.
double surrogate_loss(const PolicyParams& params, const RolloutBatch& batch, const ClipConfig& clip);
// Exact gradient of surrogate_loss; planner terms only write the planner
// block and verifier terms only the verifier block. Throws NonFiniteGradient.
std::vector<double> surrogate_loss_gradient(const PolicyParams& params, const RolloutBatch& batch,
                                            const ClipConfig& clip);

enum class OptimizerKind : std::uint8_t { GradientDescent, AdamW };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::GradientDescent;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;
};

class Optimizer {
 public:
  virtual ~Optimizer() = default;
  // Updates `flat` in place; coordinates with frozen[i] != 0 are untouched.
  virtual void step(std::vector<double>& flat, std::span<const double> grad,
                    std::span<const std::uint8_t> frozen) = 0;
};

std::unique_ptr<Optimizer> make_optimizer(const OptimizerConfig& config, double learning_rate);

// Smallest beta after an update.
inline constexpr double kBetaFloor = 1e-3;

struct StepReport {
  std::uint64_t step = 0;
  double mean_planner_reward = 0.0;
  double mean_verifier_reward = 0.0;
  // Fraction of sampled checklists whose probe verdict matched gold; NaN when
  // the mode samples no checklists.
  double planner_probe_accuracy = 0.0;
  double verifier_accuracy = 0.0;
  std::size_t degenerate_group_count = 0;
  double loss = 0.0;
  std::size_t resampled = 0;
  bool all_degenerate = false;

  static std::string csv_header();
  std::string csv_row() const;
};

struct StepResult {
  PolicyParams params;
  StepReport report;
};

// One joint update of the shared policy. Draws one value from `rng` to seed
// the step's rollout streams. Parameters are returned with version + 1.
StepResult train_step(const PolicyParams& params, std::span<const PreferenceInstance> batch,
                      const TrainConfig& config, Rng& rng, Optimizer& optimizer, InstancePool* pool = nullptr);

// Frozen-coordinate mask for a mode (planner block frozen when untrained).
std::vector<std::uint8_t> frozen_mask(const PolicyParams& params, AblationMode mode);

}  // namespace rubricrl

#endif  // RUBRICRL_RL_HPP_
