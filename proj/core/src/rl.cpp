#include "rubricrl/rl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "rubricrl/errors.hpp"
#include "rubricrl/io.hpp"

namespace rubricrl {

namespace {

constexpr std::pair<AblationMode, std::string_view> kModeNames[] = {
    {AblationMode::DeltaRubric, "delta_rubric"},       {AblationMode::NoRubric, "no_rubric"},
    {AblationMode::StaticRubric, "static_rubric"},     {AblationMode::FrozenPlanner, "frozen_planner"},
    {AblationMode::AbsoluteReward, "absolute_reward"}, {AblationMode::TextOnlyPlanner, "text_only_planner"},
};

FeatureView planner_view(AblationMode mode) {
  return mode == AblationMode::TextOnlyPlanner ? FeatureView::TextOnly : FeatureView::Full;
}

Checklist all_masked(const PreferenceInstance& inst) {
  Checklist c;
  for (std::size_t j = 0; j < inst.num_attributes(); ++j) {
    if (inst.question_mask[j]) c.push_back(j);
  }
  return c;
}

bool has_signal(const TaskGroup& g) {
  return g.included && std::any_of(g.advantages.begin(), g.advantages.end(), [](double a) { return a != 0.0; });
}

// Adds the objective of one group to `objective` and, when `grad` is given,
// scale * d(objective)/d(theta) restricted to [block_begin, block_end).
template <typename Sample>
double group_objective(const PolicyParams& params, const PreferenceInstance& inst, const std::vector<Sample>& samples,
                       const TaskGroup& group, const ClipConfig& clip, std::vector<double>* grad, double scale,
                       std::size_t block_begin, std::size_t block_end) {
  const double n = static_cast<double>(samples.size());
  double objective = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double a = group.advantages[i];
    const double lp = log_prob(params, inst, samples[i]);
    const double ratio = std::exp(lp - samples[i].log_prob);
    objective += clipped_surrogate(ratio, a, clip) / n;
    if (!grad) continue;
    const double coef = clipped_surrogate_slope(ratio, a, clip) * ratio / n;
    if (coef == 0.0) continue;
    const auto g = log_prob_gradient(params, inst, samples[i]);
    for (std::size_t p = block_begin; p < block_end; ++p) (*grad)[p] += scale * coef * g[p];
  }
  return objective;
}

double batch_objective(const PolicyParams& params, const RolloutBatch& batch, const ClipConfig& clip,
                       std::vector<double>* grad) {
  const auto contributing = static_cast<double>(
      std::count_if(batch.rollouts.begin(), batch.rollouts.end(), [](const InstanceRollout& r) { return r.contributes(); }));
  if (contributing == 0.0) return 0.0;
  // Gradient of the loss, i.e. of -objective / contributing.
  const double scale = -1.0 / contributing;
  double total = 0.0;
  for (const auto& r : batch.rollouts) {
    if (r.planner.included) {
      total += group_objective(params, *r.instance, r.checklists, r.planner, clip, grad, scale, 0, params.planner_size());
    }
    if (r.verifier.included) {
      total += group_objective(params, *r.instance, r.trajectories, r.verifier, clip, grad, scale,
                               params.planner_size(), params.size());
    }
  }
  return total / contributing;
}

class GradientDescent final : public Optimizer {
 public:
  explicit GradientDescent(double lr) : lr_(lr) {}

  void step(std::vector<double>& flat, std::span<const double> grad, std::span<const std::uint8_t> frozen) override {
    for (std::size_t i = 0; i < flat.size(); ++i) {
      if (!frozen[i]) flat[i] -= lr_ * grad[i];
    }
  }

 private:
  double lr_;
};

class AdamW final : public Optimizer {
 public:
  AdamW(const OptimizerConfig& config, double lr) : config_(config), lr_(lr) {}

  void step(std::vector<double>& flat, std::span<const double> grad, std::span<const std::uint8_t> frozen) override {
    if (m_.size() != flat.size()) {
      m_.assign(flat.size(), 0.0);
      v_.assign(flat.size(), 0.0);
    }
    ++t_;
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < flat.size(); ++i) {
      if (frozen[i]) continue;
      m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * grad[i];
      v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * grad[i] * grad[i];
      const double m_hat = m_[i] / c1;
      const double v_hat = v_[i] / c2;
      flat[i] -= lr_ * (m_hat / (std::sqrt(v_hat) + config_.epsilon) + config_.weight_decay * flat[i]);
    }
  }

 private:
  OptimizerConfig config_;
  double lr_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::uint64_t t_ = 0;
};

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

std::string_view to_string(AblationMode mode) {
  for (const auto& [m, name] : kModeNames) {
    if (m == mode) return name;
  }
  return "unknown";
}

std::optional<AblationMode> parse_ablation_mode(std::string_view text) {
  for (const auto& [m, name] : kModeNames) {
    if (name == text) return m;
  }
  return std::nullopt;
}

bool samples_planner(AblationMode mode) {
  return mode != AblationMode::NoRubric && mode != AblationMode::StaticRubric;
}

bool trains_planner(AblationMode mode) { return samples_planner(mode) && mode != AblationMode::FrozenPlanner; }

void ClipConfig::validate() const {
  if (!(clip_low > 0.0 && clip_low <= clip_high && clip_high < 1.0)) {
    throw InvalidArgument("clip bounds must satisfy 0 < clip_low <= clip_high < 1");
  }
  if (!dapo_mode && clip_low != clip_high) throw InvalidArgument("decoupled clip bounds require dapo_mode");
  if (!(learning_rate > 0.0)) throw InvalidArgument("learning_rate must be > 0");
  if (!(degenerate_epsilon > 0.0)) throw InvalidArgument("degenerate_epsilon must be > 0");
}

void TrainConfig::validate() const {
  if (num_checklists < 2 || num_trajectories < 2) throw InvalidArgument("group sizes N and M must be >= 2");
  if (!(rollout_temperature >= 0.0)) throw InvalidArgument("rollout_temperature must be >= 0");
  if (inner_epochs < 1) throw InvalidArgument("inner_epochs must be >= 1");
  reward.validate();
  clip.validate();
}

std::vector<double> normalize_group(std::span<const double> rewards, double epsilon) {
  if (rewards.empty()) throw InvalidArgument("cannot normalize an empty group");
  const double n = static_cast<double>(rewards.size());
  const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  const double sd = std::sqrt(var / n);
  std::vector<double> out(rewards.size(), 0.0);
  if (sd < epsilon) return out;
  for (std::size_t i = 0; i < rewards.size(); ++i) out[i] = (rewards[i] - mean) / sd;
  return out;
}

TaskGroup TaskGroup::build(Role role, std::vector<double> rewards, double epsilon) {
  TaskGroup g;
  g.role = role;
  g.rewards = std::move(rewards);
  const double n = static_cast<double>(g.rewards.size());
  g.mean = mean_of(g.rewards);
  double var = 0.0;
  for (double r : g.rewards) var += (r - g.mean) * (r - g.mean);
  g.std = std::sqrt(var / n);
  g.degenerate = g.std < epsilon;
  g.advantages = normalize_group(g.rewards, epsilon);
  return g;
}

double clipped_surrogate(double ratio, double advantage, const ClipConfig& clip) {
  const double clipped = std::clamp(ratio, 1.0 - clip.clip_low, 1.0 + clip.clip_high);
  return std::min(ratio * advantage, clipped * advantage);
}

double clipped_surrogate_slope(double ratio, double advantage, const ClipConfig& clip) {
  if (advantage > 0.0) return ratio <= 1.0 + clip.clip_high ? advantage : 0.0;
  if (advantage < 0.0) return ratio >= 1.0 - clip.clip_low ? advantage : 0.0;
  return 0.0;
}

double joint_loss(std::span<const double> planner_terms, std::span<const double> verifier_terms) {
  if (planner_terms.empty() || verifier_terms.empty()) throw InvalidArgument("joint_loss needs both groups");
  const double p = std::accumulate(planner_terms.begin(), planner_terms.end(), 0.0) / static_cast<double>(planner_terms.size());
  const double v = std::accumulate(verifier_terms.begin(), verifier_terms.end(), 0.0) / static_cast<double>(verifier_terms.size());
  return -(p + v);
}

InstanceRollout collect_instance(const PolicyParams& params, const PreferenceInstance& inst, const TrainConfig& config,
                                 std::uint64_t stream_seed, std::size_t slot) {
  const std::uint64_t base = derive_seed(stream_seed, {slot});
  const AblationMode mode = config.mode;
  const FeatureView view = planner_view(mode);
  const double eps = config.clip.degenerate_epsilon;

  InstanceRollout r;
  r.instance = &inst;
  r.slot = slot;

  // One probe stream per instance: the baseline and every checklist probe
  // start from the same state.
  const Rng probe_rng(derive_seed(base, {1}));
  r.baseline = baseline_verdict(params, inst, config.reward, probe_rng);

  if (samples_planner(mode)) {
    Rng plan_rng(derive_seed(base, {2}));
    std::vector<double> rewards;
    for (std::size_t i = 0; i < config.num_checklists; ++i) {
      r.checklists.push_back(sample_checklist(params, inst, plan_rng, view));
      const auto triple = score_checklist(params, inst, r.checklists.back().items, config.reward, probe_rng);
      r.probes.push_back(triple);
      rewards.push_back(mode == AblationMode::AbsoluteReward ? planner_reward_absolute(triple) : planner_reward(triple));
    }
    r.planner = TaskGroup::build(Role::Planner, std::move(rewards), eps);
    r.planner.included = trains_planner(mode);
  }

  switch (mode) {
    case AblationMode::NoRubric:
      break;
    case AblationMode::StaticRubric:
      r.greedy = all_masked(inst);
      break;
    default:
      r.greedy = greedy_checklist(params, inst, view);
      break;
  }

  std::vector<double> rewards;
  for (std::size_t j = 0; j < config.num_trajectories; ++j) {
    Rng traj_rng(derive_seed(base, {3, j}));
    r.trajectories.push_back(sample_trajectory(params, inst, r.greedy, traj_rng, config.rollout_temperature));
    const VerdictTriple triple{r.baseline, r.trajectories.back().verdict, inst.gold_winner};
    // The no-rubric reference is trained on plain accuracy.
    rewards.push_back(mode == AblationMode::NoRubric ? indicator(triple.probed == triple.gold)
                                                     : verifier_reward(triple, config.reward));
  }
  r.verifier = TaskGroup::build(Role::Verifier, std::move(rewards), eps);
  r.verifier.included = true;
  return r;
}

RolloutBatch collect_rollouts(const PolicyParams& params, std::span<const PreferenceInstance> batch,
                              const TrainConfig& config, std::uint64_t stream_seed, InstancePool* pool) {
  RolloutBatch out;
  const bool dapo = config.clip.dapo_mode;
  const std::size_t planner_quota = trains_planner(config.mode) ? batch.size() : 0;
  const std::size_t verifier_quota = batch.size();
  std::size_t planner_kept = 0;
  std::size_t verifier_kept = 0;

  auto admit = [&](InstanceRollout r) {
    for (TaskGroup* g : {&r.planner, &r.verifier}) {
      if (g->empty()) continue;
      if (g->degenerate) ++out.degenerate_groups;
      if (dapo && g->included && g->degenerate) {
        g->included = false;
        ++out.dropped_groups;
      }
    }
    if (r.planner.included) {
      if (planner_kept < planner_quota) ++planner_kept;
      else r.planner.included = false;
    }
    if (r.verifier.included) {
      if (verifier_kept < verifier_quota) ++verifier_kept;
      else r.verifier.included = false;
    }
    out.rollouts.push_back(std::move(r));
  };

  std::size_t slot = 0;
  for (const auto& inst : batch) admit(collect_instance(params, inst, config, stream_seed, slot++));

  if (dapo) {
    while ((planner_kept < planner_quota || verifier_kept < verifier_quota) && pool) {
      const PreferenceInstance* inst = pool->next();
      if (!inst) break;
      ++out.resampled;
      admit(collect_instance(params, *inst, config, stream_seed, slot++));
    }
    if (planner_kept + verifier_kept == 0) throw PoolExhausted("no non-degenerate group available for the batch");
  }
  return out;
}

double surrogate_loss(const PolicyParams& params, const RolloutBatch& batch, const ClipConfig& clip) {
  return -batch_objective(params, batch, clip, nullptr);
}

std::vector<double> surrogate_loss_gradient(const PolicyParams& params, const RolloutBatch& batch,
                                            const ClipConfig& clip) {
  std::vector<double> grad(params.size(), 0.0);
  batch_objective(params, batch, clip, &grad);
  for (double g : grad) {
    if (!std::isfinite(g)) throw NonFiniteGradient("joint loss gradient has a non-finite component");
  }
  return grad;
}

std::unique_ptr<Optimizer> make_optimizer(const OptimizerConfig& config, double learning_rate) {
  if (config.kind == OptimizerKind::AdamW) return std::make_unique<AdamW>(config, learning_rate);
  return std::make_unique<GradientDescent>(learning_rate);
}

std::vector<std::uint8_t> frozen_mask(const PolicyParams& params, AblationMode mode) {
  std::vector<std::uint8_t> frozen(params.size(), 0);
  if (!trains_planner(mode)) std::fill(frozen.begin(), frozen.begin() + static_cast<std::ptrdiff_t>(params.planner_size()), 1);
  return frozen;
}

std::string StepReport::csv_header() {
  return "step,mean_planner_reward,mean_verifier_reward,planner_probe_accuracy,verifier_accuracy,"
         "degenerate_group_count,loss";
}

std::string StepReport::csv_row() const {
  std::string row = std::to_string(step);
  for (double v : {mean_planner_reward, mean_verifier_reward, planner_probe_accuracy, verifier_accuracy}) {
    row += ',' + format_double(v);
  }
  row += ',' + std::to_string(degenerate_group_count);
  row += ',' + format_double(loss);
  return row;
}

StepResult train_step(const PolicyParams& params, std::span<const PreferenceInstance> batch, const TrainConfig& config,
                      Rng& rng, Optimizer& optimizer, InstancePool* pool) {
  params.validate();
  config.validate();
  if (batch.empty()) throw InvalidArgument("train_step needs a non-empty batch");

  const std::uint64_t stream_seed = rng.next();
  const RolloutBatch rollouts = collect_rollouts(params, batch, config, stream_seed, pool);

  StepReport report;
  std::vector<double> planner_rewards;
  std::vector<double> verifier_rewards;
  std::size_t probes = 0;
  std::size_t probes_correct = 0;
  std::size_t trajectories_correct = 0;
  for (const auto& r : rollouts.rollouts) {
    planner_rewards.insert(planner_rewards.end(), r.planner.rewards.begin(), r.planner.rewards.end());
    verifier_rewards.insert(verifier_rewards.end(), r.verifier.rewards.begin(), r.verifier.rewards.end());
    for (const auto& p : r.probes) {
      ++probes;
      if (p.probed == p.gold) ++probes_correct;
    }
    for (const auto& t : r.trajectories) {
      if (t.verdict == r.instance->gold_winner) ++trajectories_correct;
    }
  }
  report.mean_planner_reward = mean_of(planner_rewards);
  report.mean_verifier_reward = mean_of(verifier_rewards);
  report.planner_probe_accuracy = probes == 0 ? std::numeric_limits<double>::quiet_NaN()
                                              : static_cast<double>(probes_correct) / static_cast<double>(probes);
  report.verifier_accuracy = verifier_rewards.empty()
                                 ? 0.0
                                 : static_cast<double>(trajectories_correct) / static_cast<double>(verifier_rewards.size());
  report.degenerate_group_count = rollouts.degenerate_groups;
  report.resampled = rollouts.resampled;
  report.loss = surrogate_loss(params, rollouts, config.clip);
  report.all_degenerate = std::none_of(rollouts.rollouts.begin(), rollouts.rollouts.end(), [](const InstanceRollout& r) {
    return has_signal(r.planner) || has_signal(r.verifier);
  });

  PolicyParams next = params;
  if (!report.all_degenerate) {
    const auto frozen = frozen_mask(params, config.mode);
    for (std::size_t epoch = 0; epoch < config.inner_epochs; ++epoch) {
      const auto grad = surrogate_loss_gradient(next, rollouts, config.clip);
      auto flat = next.flatten();
      optimizer.step(flat, grad, frozen);
      flat[next.beta_offset()] = std::max(flat[next.beta_offset()], kBetaFloor);
      for (double v : flat) {
        if (!std::isfinite(v)) throw NonFiniteGradient("update produced non-finite parameters");
      }
      next.assign(flat);
    }
  }
  next.version = params.version + 1;
  report.step = next.version;
  return {std::move(next), report};
}

}  // namespace rubricrl
