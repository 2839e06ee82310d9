#ifndef RUBRICRL_POLICY_HPP_
#define RUBRICRL_POLICY_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "rubricrl/env.hpp"
#include "rubricrl/rng.hpp"

namespace rubricrl {

// Per-attribute planner features: [responses differ, masked, noise floor,
// truth as +/-1]. The last two are derived from the latent truth ("image")
// and are zeroed in the text-only view. A trailing bias feature is shared.
inline constexpr std::size_t kFeaturesPerAttribute = 4;
inline constexpr std::size_t kMinChecklistSize = 2;
inline constexpr std::size_t kMaxChecklistSize = 4;
inline constexpr double kTemperatureFloor = 1e-6;
inline constexpr double kDefaultNoiseReduction = 0.25;

enum class FeatureView : std::uint8_t { Full, TextOnly };

// Shared parameters for both roles.
//
// Flat layout (used by gradients, optimizers and checkpoints):
//   [0, K*F)          planner_weights, row-major, row k produces logit k
//   [K*F, K*F + K)    verifier_weights (per-attribute trust)
//   [K*F + K]         beta
// where F = kFeaturesPerAttribute * K + 1.
struct PolicyParams {
  std::size_t num_attributes = 0;
  std::vector<double> planner_weights;
  std::vector<double> verifier_weights;
  double beta = 1.0;
  std::uint64_t version = 0;
  // Multiplier applied to the misperception probability of checked
  // attributes. Fixed configuration, not learned.
  double noise_reduction = kDefaultNoiseReduction;

  static std::size_t feature_dim(std::size_t k) { return kFeaturesPerAttribute * k + 1; }
  std::size_t feature_dim() const { return feature_dim(num_attributes); }
  std::size_t planner_size() const { return num_attributes * feature_dim(); }
  std::size_t size() const { return planner_size() + num_attributes + 1; }
  std::size_t beta_offset() const { return planner_size() + num_attributes; }

  std::vector<double> flatten() const;
  void assign(std::span<const double> flat);
  void validate() const;
};

struct PolicyInit {
  double planner_scale = 0.1;
  double verifier_weight = 1.0;
  double beta = 1.0;
  double noise_reduction = kDefaultNoiseReduction;
};

// Planner weights ~ N(0, planner_scale^2) from the seed; verifier weights and
// beta constant.
PolicyParams initial_params(std::size_t num_attributes, std::uint64_t seed, const PolicyInit& init = {});

// Sorted attribute indices.
using Checklist = std::vector<std::size_t>;

struct ChecklistSample {
  Checklist items;
  double log_prob = 0.0;
  std::uint64_t params_version = 0;
  FeatureView view = FeatureView::Full;
};

enum class Finding : std::uint8_t { FavorsA, FavorsB, Neutral };

struct TrajectorySample {
  Checklist checklist;
  // Perceived attribute values (all K entries; only masked ones are scored).
  std::vector<std::uint8_t> perceived;
  // One entry per checklist item.
  std::vector<Finding> findings;
  Label verdict = Label::A;
  double log_prob = 0.0;
  double temperature = 0.0;
  std::uint64_t params_version = 0;
};

std::vector<double> planner_features(const PreferenceInstance& instance, FeatureView view);
std::vector<double> planner_logits(const PolicyParams& params, const PreferenceInstance& instance,
                                   FeatureView view);

// --- checklist distribution over logits -------------------------------------
// Independent Bernoulli(sigmoid(logit_k)) inclusion, truncated to sizes
// [kMinChecklistSize, kMaxChecklistSize]. Infinite logits are allowed.

// log of the untruncated mass of sizes 2..4; -inf when that mass is zero.
double checklist_log_mass(std::span<const double> logits);
double checklist_log_prob(std::span<const double> logits, const Checklist& items);
// d log P(items) / d logit_k.
std::vector<double> checklist_logit_gradient(std::span<const double> logits, const Checklist& items);
// Exact draw from the size-truncated distribution, one uniform per attribute
// in index order. Throws SamplingExhausted if no legal size has mass.
Checklist sample_checklist_items(std::span<const double> logits, Rng& rng);
// min(4, #positive logits) highest logits, at least 2, ties to lower index.
Checklist greedy_checklist_items(std::span<const double> logits);

ChecklistSample sample_checklist(const PolicyParams& params, const PreferenceInstance& instance, Rng& rng,
                                 FeatureView view = FeatureView::Full);
Checklist greedy_checklist(const PolicyParams& params, const PreferenceInstance& instance,
                           FeatureView view = FeatureView::Full);

// --- verifier ---------------------------------------------------------------

// Trust-weighted agreement of A's claims minus B's with the perceived values.
double score_difference(const PolicyParams& params, const PreferenceInstance& instance,
                        std::span<const std::uint8_t> perceived);
double verdict_logit(const PolicyParams& params, double score_diff, double temperature);

// Draws K perception uniforms then one verdict uniform from rng, in that
// order. Temperature 0 decodes greedily (log_prob 0); an exact score tie is
// broken by the verdict uniform.
TrajectorySample sample_trajectory(const PolicyParams& params, const PreferenceInstance& instance,
                                   const Checklist& checklist, Rng& rng, double temperature);

// --- log-probabilities under (possibly newer) params ------------------------

double log_prob(const PolicyParams& params, const PreferenceInstance& instance, const ChecklistSample& sample);
double log_prob(const PolicyParams& params, const PreferenceInstance& instance, const TrajectorySample& sample);

// Exact gradient of the sample's log-probability in the flat layout above.
// Throws NonFiniteGradient.
std::vector<double> log_prob_gradient(const PolicyParams& params, const PreferenceInstance& instance,
                                      const ChecklistSample& sample);
std::vector<double> log_prob_gradient(const PolicyParams& params, const PreferenceInstance& instance,
                                      const TrajectorySample& sample);

// Numerically stable helpers.
double sigmoid(double x);
double log_sigmoid(double x);

}  // namespace rubricrl

#endif  // RUBRICRL_POLICY_HPP_
