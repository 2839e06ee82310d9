#include "rubricrl/rewards.hpp"

#include <algorithm>

#include "rubricrl/errors.hpp"

namespace rubricrl {

void RewardConfig::validate() const {
  if (!(lambda >= 0.0)) throw InvalidArgument("lambda must be >= 0");
  if (!(probe_temperature >= 0.0)) throw InvalidArgument("probe_temperature must be >= 0");
}

double planner_reward(const VerdictTriple& t) {
  return indicator(t.probed == t.gold) - indicator(t.baseline == t.gold);
}

double planner_reward_absolute(const VerdictTriple& t) { return indicator(t.probed == t.gold); }

double verifier_reward(const VerdictTriple& t, const RewardConfig& config) {
  const double correct = indicator(t.probed == t.gold);
  return correct + config.lambda * std::max(0.0, correct - indicator(t.baseline == t.gold));
}

Label baseline_verdict(const PolicyParams& params, const PreferenceInstance& instance,
                       const RewardConfig& config, Rng rng) {
  return sample_trajectory(params, instance, {}, rng, config.probe_temperature).verdict;
}

VerdictTriple score_checklist(const PolicyParams& params, const PreferenceInstance& instance,
                              const Checklist& checklist, const RewardConfig& config, Rng rng) {
  VerdictTriple t;
  t.baseline = baseline_verdict(params, instance, config, rng);
  Rng probe = rng;
  t.probed = sample_trajectory(params, instance, checklist, probe, config.probe_temperature).verdict;
  t.gold = instance.gold_winner;
  return t;
}

}  // namespace rubricrl
