#include "rubricrl/policy.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

#include "rubricrl/errors.hpp"

namespace rubricrl {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// P(count = s) for s in [0, 4] over independent Bernoulli(p_j), j != skip.
// Bins above kMaxChecklistSize are dropped, which leaves bins 0..4 exact.
std::array<double, kMaxChecklistSize + 1> count_distribution(std::span<const double> probs,
                                                             std::size_t skip) {
  std::array<double, kMaxChecklistSize + 1> dist{};
  dist[0] = 1.0;
  for (std::size_t j = 0; j < probs.size(); ++j) {
    if (j == skip) continue;
    const double p = probs[j];
    for (std::size_t s = kMaxChecklistSize; s > 0; --s) dist[s] = dist[s] * (1.0 - p) + dist[s - 1] * p;
    dist[0] *= 1.0 - p;
  }
  return dist;
}

double truncated_mass(const std::array<double, kMaxChecklistSize + 1>& dist) {
  double z = 0.0;
  for (std::size_t s = kMinChecklistSize; s <= kMaxChecklistSize; ++s) z += dist[s];
  return z;
}

std::vector<double> probabilities(std::span<const double> logits) {
  std::vector<double> p(logits.size());
  std::transform(logits.begin(), logits.end(), p.begin(), sigmoid);
  return p;
}

std::vector<std::uint8_t> membership(std::size_t k, const Checklist& items) {
  std::vector<std::uint8_t> in(k, 0);
  for (std::size_t j : items) {
    if (j >= k) throw InvalidArgument("checklist item out of range");
    in[j] = 1;
  }
  return in;
}

int agreement(Mark claim, std::uint8_t perceived) {
  if (claim == Mark::Silent) return 0;
  const bool asserts = claim == Mark::AssertsTrue;
  return asserts == (perceived != 0) ? 1 : -1;
}

int claim_delta(const PreferenceInstance& inst, std::span<const std::uint8_t> perceived, std::size_t j) {
  if (!inst.question_mask[j]) return 0;
  return agreement(inst.response_a.claims[j], perceived[j]) - agreement(inst.response_b.claims[j], perceived[j]);
}

void check_finite(const std::vector<double>& g) {
  for (double v : g) {
    if (!std::isfinite(v)) throw NonFiniteGradient("log-probability gradient has a non-finite component");
  }
}

}  // namespace

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log_sigmoid(double x) {
  // -softplus(-x)
  const double y = -x;
  if (y == std::numeric_limits<double>::infinity()) return kNegInf;
  return -(std::max(y, 0.0) + std::log1p(std::exp(-std::abs(y))));
}

std::vector<double> PolicyParams::flatten() const {
  std::vector<double> flat;
  flat.reserve(size());
  flat.insert(flat.end(), planner_weights.begin(), planner_weights.end());
  flat.insert(flat.end(), verifier_weights.begin(), verifier_weights.end());
  flat.push_back(beta);
  return flat;
}

void PolicyParams::assign(std::span<const double> flat) {
  if (flat.size() != size()) throw InvalidArgument("flat parameter vector has wrong length");
  const auto p = static_cast<std::ptrdiff_t>(planner_size());
  const auto k = static_cast<std::ptrdiff_t>(num_attributes);
  planner_weights.assign(flat.begin(), flat.begin() + p);
  verifier_weights.assign(flat.begin() + p, flat.begin() + p + k);
  beta = flat[beta_offset()];
}

void PolicyParams::validate() const {
  if (num_attributes < 2) throw InvalidArgument("policy needs K >= 2");
  if (planner_weights.size() != planner_size() || verifier_weights.size() != num_attributes) {
    throw InvalidArgument("parameter blocks do not match K");
  }
  if (!(beta > 0.0) || !std::isfinite(beta)) throw InvalidArgument("beta must be finite and > 0");
  auto finite = [](double v) { return std::isfinite(v); };
  if (!std::all_of(planner_weights.begin(), planner_weights.end(), finite) ||
      !std::all_of(verifier_weights.begin(), verifier_weights.end(), finite)) {
    throw InvalidArgument("weights must be finite");
  }
  if (!(noise_reduction >= 0.0 && noise_reduction <= 1.0)) {
    throw InvalidArgument("noise_reduction must lie in [0, 1]");
  }
}

PolicyParams initial_params(std::size_t num_attributes, std::uint64_t seed, const PolicyInit& init) {
  PolicyParams params;
  params.num_attributes = num_attributes;
  params.planner_weights.resize(params.planner_size());
  Rng rng(derive_seed(seed, {0x706c616e6e6572ULL}));
  for (double& w : params.planner_weights) w = init.planner_scale * rng.normal();
  params.verifier_weights.assign(num_attributes, init.verifier_weight);
  params.beta = init.beta;
  params.noise_reduction = init.noise_reduction;
  params.validate();
  return params;
}

std::vector<double> planner_features(const PreferenceInstance& inst, FeatureView view) {
  const std::size_t k = inst.num_attributes();
  std::vector<double> phi(PolicyParams::feature_dim(k), 0.0);
  for (std::size_t j = 0; j < k; ++j) {
    double* f = phi.data() + kFeaturesPerAttribute * j;
    f[0] = inst.response_a.claims[j] != inst.response_b.claims[j] ? 1.0 : 0.0;
    f[1] = inst.question_mask[j] ? 1.0 : 0.0;
    if (view == FeatureView::Full) {
      f[2] = inst.truth.noise_floor[j];
      f[3] = inst.truth.values[j] ? 1.0 : -1.0;
    }
  }
  phi.back() = 1.0;
  return phi;
}

std::vector<double> planner_logits(const PolicyParams& params, const PreferenceInstance& inst, FeatureView view) {
  if (inst.num_attributes() != params.num_attributes) throw InvalidArgument("instance K does not match policy K");
  const auto phi = planner_features(inst, view);
  const std::size_t f = phi.size();
  std::vector<double> logits(params.num_attributes);
  for (std::size_t k = 0; k < params.num_attributes; ++k) {
    const double* row = params.planner_weights.data() + k * f;
    logits[k] = std::inner_product(phi.begin(), phi.end(), row, 0.0);
  }
  return logits;
}

double checklist_log_mass(std::span<const double> logits) {
  const auto probs = probabilities(logits);
  const double z = truncated_mass(count_distribution(probs, probs.size()));
  return z > 0.0 ? std::log(z) : kNegInf;
}

double checklist_log_prob(std::span<const double> logits, const Checklist& items) {
  if (items.size() < kMinChecklistSize || items.size() > kMaxChecklistSize) return kNegInf;
  const auto in = membership(logits.size(), items);
  double lp = 0.0;
  for (std::size_t j = 0; j < logits.size(); ++j) lp += in[j] ? log_sigmoid(logits[j]) : log_sigmoid(-logits[j]);
  const double log_z = checklist_log_mass(logits);
  if (lp == kNegInf || log_z == kNegInf) return kNegInf;
  return lp - log_z;
}

std::vector<double> checklist_logit_gradient(std::span<const double> logits, const Checklist& items) {
  const std::size_t k = logits.size();
  const auto in = membership(k, items);
  const auto probs = probabilities(logits);
  const double z = truncated_mass(count_distribution(probs, k));
  std::vector<double> g(k);
  for (std::size_t j = 0; j < k; ++j) {
    const double own = in[j] ? sigmoid(-logits[j]) : -sigmoid(logits[j]);
    // dZ/dp_j = P_{-j}(count = 1) - P_{-j}(count = 4)
    const auto rest = count_distribution(probs, j);
    const double dz_dp = rest[kMinChecklistSize - 1] - rest[kMaxChecklistSize];
    g[j] = own - probs[j] * (1.0 - probs[j]) * dz_dp / z;
  }
  return g;
}

Checklist sample_checklist_items(std::span<const double> logits, Rng& rng) {
  const std::size_t k = logits.size();
  if (k < kMinChecklistSize) throw InvalidArgument("need at least 2 attributes to form a checklist");
  // suffix[j][c]: probability that attributes j..k-1 contribute exactly c items.
  using Counts = std::array<double, kMaxChecklistSize + 1>;
  std::vector<Counts> suffix(k + 1, Counts{});
  suffix[k][0] = 1.0;
  for (std::size_t j = k; j-- > 0;) {
    const double on = sigmoid(logits[j]);
    const double off = sigmoid(-logits[j]);
    for (std::size_t c = 0; c <= kMaxChecklistSize; ++c) {
      suffix[j][c] = off * suffix[j + 1][c] + (c > 0 ? on * suffix[j + 1][c - 1] : 0.0);
    }
  }
  // Mass of completions from position j that end with a legal size, given c items so far.
  auto feasible = [&](std::size_t j, std::size_t c) {
    double m = 0.0;
    for (std::size_t t = c >= kMinChecklistSize ? 0 : kMinChecklistSize - c; c + t <= kMaxChecklistSize; ++t) {
      m += suffix[j][t];
    }
    return m;
  };

  Checklist items;
  for (std::size_t j = 0; j < k; ++j) {
    const std::size_t c = items.size();
    const double w_on = c < kMaxChecklistSize ? sigmoid(logits[j]) * feasible(j + 1, c + 1) : 0.0;
    const double w_off = sigmoid(-logits[j]) * feasible(j + 1, c);
    const double total = w_on + w_off;
    if (!(total > 0.0)) throw SamplingExhausted("checklist distribution has no mass on sizes 2-4");
    if (rng.uniform() * total < w_on) items.push_back(j);
  }
  return items;
}

Checklist greedy_checklist_items(std::span<const double> logits) {
  std::vector<std::size_t> order(logits.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return logits[a] > logits[b]; });
  const auto positive = static_cast<std::size_t>(std::count_if(logits.begin(), logits.end(), [](double l) { return l > 0.0; }));
  const std::size_t take = std::min(logits.size(), std::max(kMinChecklistSize, std::min(kMaxChecklistSize, positive)));
  Checklist items(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take));
  std::sort(items.begin(), items.end());
  return items;
}

ChecklistSample sample_checklist(const PolicyParams& params, const PreferenceInstance& inst, Rng& rng,
                                 FeatureView view) {
  const auto logits = planner_logits(params, inst, view);
  ChecklistSample s;
  s.items = sample_checklist_items(logits, rng);
  s.log_prob = checklist_log_prob(logits, s.items);
  s.params_version = params.version;
  s.view = view;
  return s;
}

Checklist greedy_checklist(const PolicyParams& params, const PreferenceInstance& inst, FeatureView view) {
  return greedy_checklist_items(planner_logits(params, inst, view));
}

double score_difference(const PolicyParams& params, const PreferenceInstance& inst,
                        std::span<const std::uint8_t> perceived) {
  double d = 0.0;
  for (std::size_t j = 0; j < inst.num_attributes(); ++j) d += params.verifier_weights[j] * claim_delta(inst, perceived, j);
  return d;
}

double verdict_logit(const PolicyParams& params, double score_diff, double temperature) {
  return params.beta * score_diff / std::max(temperature, kTemperatureFloor);
}

TrajectorySample sample_trajectory(const PolicyParams& params, const PreferenceInstance& inst,
                                   const Checklist& checklist, Rng& rng, double temperature) {
  if (!(temperature >= 0.0)) throw InvalidArgument("temperature must be >= 0");
  const std::size_t k = inst.num_attributes();
  if (k != params.num_attributes) throw InvalidArgument("instance K does not match policy K");
  const auto checked = membership(k, checklist);

  TrajectorySample t;
  t.checklist = checklist;
  t.temperature = temperature;
  t.params_version = params.version;
  t.perceived.resize(k);
  for (std::size_t j = 0; j < k; ++j) {
    const double flip = inst.truth.noise_floor[j] * (checked[j] ? params.noise_reduction : 1.0);
    const bool flipped = rng.uniform() < flip;
    t.perceived[j] = static_cast<std::uint8_t>((inst.truth.values[j] != 0) != flipped);
  }
  for (std::size_t j : checklist) {
    const int delta = claim_delta(inst, t.perceived, j);
    t.findings.push_back(delta > 0 ? Finding::FavorsA : delta < 0 ? Finding::FavorsB : Finding::Neutral);
  }

  const double d = score_difference(params, inst, t.perceived);
  const double u = rng.uniform();
  if (temperature == 0.0) {
    t.verdict = d > 0 ? Label::A : d < 0 ? Label::B : (u < 0.5 ? Label::A : Label::B);
    t.log_prob = 0.0;
    return t;
  }
  const double logit = verdict_logit(params, d, temperature);
  t.verdict = u < sigmoid(logit) ? Label::A : Label::B;
  t.log_prob = t.verdict == Label::A ? log_sigmoid(logit) : log_sigmoid(-logit);
  return t;
}

double log_prob(const PolicyParams& params, const PreferenceInstance& inst, const ChecklistSample& sample) {
  return checklist_log_prob(planner_logits(params, inst, sample.view), sample.items);
}

double log_prob(const PolicyParams& params, const PreferenceInstance& inst, const TrajectorySample& sample) {
  if (sample.temperature == 0.0) return 0.0;
  const double logit = verdict_logit(params, score_difference(params, inst, sample.perceived), sample.temperature);
  return sample.verdict == Label::A ? log_sigmoid(logit) : log_sigmoid(-logit);
}

std::vector<double> log_prob_gradient(const PolicyParams& params, const PreferenceInstance& inst,
                                      const ChecklistSample& sample) {
  const auto phi = planner_features(inst, sample.view);
  const auto logits = planner_logits(params, inst, sample.view);
  if (checklist_log_prob(logits, sample.items) == kNegInf) {
    throw NonFiniteGradient("checklist has zero probability under these parameters");
  }
  const auto g_logit = checklist_logit_gradient(logits, sample.items);
  std::vector<double> g(params.size(), 0.0);
  const std::size_t f = phi.size();
  for (std::size_t k = 0; k < params.num_attributes; ++k) {
    for (std::size_t c = 0; c < f; ++c) g[k * f + c] = g_logit[k] * phi[c];
  }
  check_finite(g);
  return g;
}

std::vector<double> log_prob_gradient(const PolicyParams& params, const PreferenceInstance& inst,
                                      const TrajectorySample& sample) {
  std::vector<double> g(params.size(), 0.0);
  if (sample.temperature == 0.0) return g;
  const double t = std::max(sample.temperature, kTemperatureFloor);
  const double d = score_difference(params, inst, sample.perceived);
  const double logit = params.beta * d / t;
  const double dlogit = sample.verdict == Label::A ? sigmoid(-logit) : -sigmoid(logit);
  const std::size_t offset = params.planner_size();
  for (std::size_t j = 0; j < params.num_attributes; ++j) {
    g[offset + j] = dlogit * params.beta * claim_delta(inst, sample.perceived, j) / t;
  }
  g[params.beta_offset()] = dlogit * d / t;
  check_finite(g);
  return g;
}

}  // namespace rubricrl
