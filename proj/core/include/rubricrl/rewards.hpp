#ifndef RUBRICRL_REWARDS_HPP_
#define RUBRICRL_REWARDS_HPP_

#include "rubricrl/env.hpp"
#include "rubricrl/policy.hpp"
#include "rubricrl/rng.hpp"

namespace rubricrl {

struct RewardConfig {
  // Guidance-bonus coefficient of the verifier reward.
  double lambda = 0.4;
  // Decoding temperature of the cheap probe; 0 is greedy.
  double probe_temperature = 0.0;

  void validate() const;
};

// z_0 (no checklist), the probed or final verdict, and the gold label z*.
struct VerdictTriple {
  Label baseline = Label::A;
  Label probed = Label::A;
  Label gold = Label::A;
};

inline double indicator(bool b) { return b ? 1.0 : 0.0; }

// 1(probed == gold) - 1(baseline == gold).
double planner_reward(const VerdictTriple& t);

// 1(probed == gold); the unbaselined ablation.
double planner_reward_absolute(const VerdictTriple& t);

// 1(final == gold) + lambda * max(0, 1(final == gold) - 1(baseline == gold)).
double verifier_reward(const VerdictTriple& t, const RewardConfig& config);

// No-checklist probe verdict z_0.
Label baseline_verdict(const PolicyParams& params, const PreferenceInstance& instance,
                       const RewardConfig& config, Rng rng);

// Runs the baseline probe and the checklist probe from the same stream state
// (rng is taken by value and copied for each), so the two pathways see the
// same perception draws and differ only through the checklist.
VerdictTriple score_checklist(const PolicyParams& params, const PreferenceInstance& instance,
                              const Checklist& checklist, const RewardConfig& config, Rng rng);

}  // namespace rubricrl

#endif  // RUBRICRL_REWARDS_HPP_
