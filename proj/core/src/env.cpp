#include "rubricrl/env.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <nlohmann/json.hpp>

#include "rubricrl/errors.hpp"
#include "rubricrl/io.hpp"
#include "rubricrl/rng.hpp"

namespace rubricrl {

namespace {

constexpr int kMaxGenerationRetries = 64;

bool is_correct(Mark m, std::uint8_t truth) {
  return (m == Mark::AssertsTrue && truth) || (m == Mark::AssertsFalse && !truth);
}

Mark claim_for(bool value) { return value ? Mark::AssertsTrue : Mark::AssertsFalse; }

// Shared (non-disagreement) mark: mostly correct, sometimes a shared mistake.
Mark shared_mark(Rng& rng, std::uint8_t truth) {
  const double u = rng.uniform();
  if (u < 0.55) return claim_for(truth != 0);
  if (u < 0.70) return claim_for(truth == 0);
  return Mark::Silent;
}

std::vector<std::size_t> choose_subset(Rng& rng, std::vector<std::size_t> pool, std::size_t count) {
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + rng.below(pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(count);
  std::sort(pool.begin(), pool.end());
  return pool;
}

std::optional<PreferenceInstance> try_generate(const DatasetSpec& spec, std::size_t index,
                                               std::uint64_t sub_seed) {
  Rng rng(sub_seed);
  const std::size_t k = spec.num_attributes;
  const std::size_t d = spec.planted_disagreements;

  PreferenceInstance inst;
  inst.id = "syn-" + std::to_string(spec.seed) + "-" + std::to_string(index);

  static constexpr std::string_view kCategories[] = {kCategoryGeneral, kCategoryHallucination,
                                                     kCategoryReasoning};
  const std::string_view category = kCategories[rng.below(3)];
  inst.category = std::string(category);

  double lo = spec.noise_low;
  const double hi = spec.noise_high;
  if (category == kCategoryReasoning) lo = 0.5 * (spec.noise_low + spec.noise_high);

  inst.truth.values.resize(k);
  inst.truth.noise_floor.resize(k);
  for (std::size_t j = 0; j < k; ++j) {
    inst.truth.values[j] = static_cast<std::uint8_t>(rng.below(2));
    inst.truth.noise_floor[j] = lo + (hi - lo) * rng.uniform();
  }

  std::vector<std::size_t> all(k);
  std::iota(all.begin(), all.end(), 0);
  const std::size_t mask_size = d + rng.below(k - d + 1);
  const auto masked = choose_subset(rng, all, mask_size);
  const auto disagreements = choose_subset(rng, masked, d);

  inst.question_mask.assign(k, 0);
  for (std::size_t j : masked) inst.question_mask[j] = 1;

  inst.response_a.claims.resize(k);
  inst.response_b.claims.resize(k);
  for (std::size_t j = 0; j < k; ++j) {
    const std::uint8_t t = inst.truth.values[j];
    const bool disagrees = std::binary_search(disagreements.begin(), disagreements.end(), j);
    if (!disagrees) {
      const Mark m = shared_mark(rng, t);
      inst.response_a.claims[j] = m;
      inst.response_b.claims[j] = m;
      continue;
    }
    const bool a_side = rng.below(2) == 0;
    Mark first;
    Mark second;
    if (category == kCategoryHallucination) {
      // One response volunteers a claim the other omits; the claim may be wrong.
      first = claim_for(rng.bernoulli(0.5) ? t != 0 : t == 0);
      second = Mark::Silent;
    } else {
      first = claim_for(t != 0);
      second = claim_for(t == 0);
    }
    inst.response_a.claims[j] = a_side ? first : second;
    inst.response_b.claims[j] = a_side ? second : first;
  }

  const auto has_claim = [](const ResponseClaims& r) {
    return std::any_of(r.claims.begin(), r.claims.end(), [](Mark m) { return m != Mark::Silent; });
  };
  if (!has_claim(inst.response_a) || !has_claim(inst.response_b)) return std::nullopt;

  const auto ea = error_count(inst.truth, inst.question_mask, inst.response_a);
  const auto eb = error_count(inst.truth, inst.question_mask, inst.response_b);
  if (ea == eb) return std::nullopt;
  inst.gold_winner = ea < eb ? Label::A : Label::B;
  return inst;
}

Mark parse_mark(const std::string& s, std::size_t line) {
  if (s == "T") return Mark::AssertsTrue;
  if (s == "F") return Mark::AssertsFalse;
  if (s == "-") return Mark::Silent;
  throw SchemaError(line, "claim mark must be \"T\", \"F\" or \"-\", got \"" + s + "\"");
}

const char* mark_text(Mark m) {
  switch (m) {
    case Mark::AssertsTrue:
      return "T";
    case Mark::AssertsFalse:
      return "F";
    case Mark::Silent:
      return "-";
  }
  return "-";
}

const nlohmann::json& require(const nlohmann::json& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(line, std::string("missing field \"") + key + "\"");
  return *it;
}

std::vector<std::uint8_t> parse_flags(const nlohmann::json& v, const char* key, std::size_t line) {
  if (!v.is_array()) throw SchemaError(line, std::string("\"") + key + "\" must be an array");
  std::vector<std::uint8_t> out;
  out.reserve(v.size());
  for (const auto& e : v) {
    if (!e.is_number_integer() || (e.get<long long>() != 0 && e.get<long long>() != 1)) {
      throw SchemaError(line, std::string("\"") + key + "\" entries must be 0 or 1");
    }
    out.push_back(static_cast<std::uint8_t>(e.get<int>()));
  }
  return out;
}

ResponseClaims parse_claims(const nlohmann::json& v, const char* key, std::size_t line) {
  if (!v.is_array()) throw SchemaError(line, std::string("\"") + key + "\" must be an array");
  ResponseClaims r;
  for (const auto& e : v) {
    if (!e.is_string()) throw SchemaError(line, std::string("\"") + key + "\" entries must be strings");
    r.claims.push_back(parse_mark(e.get<std::string>(), line));
  }
  return r;
}

PreferenceInstance parse_record(std::string_view text, std::size_t line) {
  nlohmann::json obj;
  try {
    obj = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError(line, std::string("invalid JSON: ") + e.what());
  }
  if (!obj.is_object()) throw SchemaError(line, "record must be a JSON object");

  PreferenceInstance inst;
  inst.source_line = line;
  const auto& id = require(obj, "id", line);
  if (!id.is_string()) throw SchemaError(line, "\"id\" must be a string");
  inst.id = id.get<std::string>();

  inst.truth.values = parse_flags(require(obj, "truth", line), "truth", line);
  const auto& noise = require(obj, "noise_floor", line);
  if (!noise.is_array()) throw SchemaError(line, "\"noise_floor\" must be an array");
  for (const auto& e : noise) {
    if (!e.is_number()) throw SchemaError(line, "\"noise_floor\" entries must be numbers");
    inst.truth.noise_floor.push_back(e.get<double>());
  }
  inst.question_mask = parse_flags(require(obj, "mask", line), "mask", line);
  inst.response_a = parse_claims(require(obj, "response_a", line), "response_a", line);
  inst.response_b = parse_claims(require(obj, "response_b", line), "response_b", line);

  const auto& winner = require(obj, "winner", line);
  if (!winner.is_string() || (winner != "A" && winner != "B")) {
    throw SchemaError(line, "\"winner\" must be \"A\" or \"B\"");
  }
  inst.gold_winner = winner == "A" ? Label::A : Label::B;

  if (auto it = obj.find("category"); it != obj.end() && !it->is_null()) {
    if (!it->is_string()) throw SchemaError(line, "\"category\" must be a string");
    inst.category = it->get<std::string>();
  }

  try {
    inst.validate();
  } catch (const Error& e) {
    throw SchemaError(line, e.what());
  }
  return inst;
}

}  // namespace

void AttributeTruth::validate() const {
  if (values.size() < 2) throw InvalidArgument("need at least 2 attributes");
  if (noise_floor.size() != values.size()) throw InvalidArgument("noise_floor length must equal K");
  for (double p : noise_floor) {
    if (!(p >= 0.0 && p < 0.5)) throw InvalidArgument("noise_floor entries must lie in [0, 0.5)");
  }
}

void ResponseClaims::validate(std::size_t num_attributes) const {
  if (claims.size() != num_attributes) throw InvalidArgument("claims length must equal K");
  if (std::all_of(claims.begin(), claims.end(), [](Mark m) { return m == Mark::Silent; })) {
    throw InvalidArgument("response has no non-silent claim");
  }
}

void PreferenceInstance::validate() const {
  truth.validate();
  const std::size_t k = truth.size();
  if (question_mask.size() != k) throw InvalidArgument("mask length must equal K");
  response_a.validate(k);
  response_b.validate(k);
  bool differs = false;
  for (std::size_t j = 0; j < k; ++j) {
    if (question_mask[j] && response_a.claims[j] != response_b.claims[j]) differs = true;
  }
  if (!differs) throw InvalidArgument("responses must differ on at least one masked attribute");
  const Label winner = determine_winner(truth, question_mask, response_a, response_b);
  if (winner != gold_winner) throw InvalidArgument("gold winner does not have fewer claim errors");
}

void DatasetSpec::validate() const {
  if (num_attributes < 2) throw InvalidArgument("num_attributes must be >= 2");
  if (planted_disagreements < 1 || planted_disagreements > num_attributes) {
    throw InvalidArgument("planted_disagreements must lie in [1, K]");
  }
  if (!(noise_low >= 0.0 && noise_low <= noise_high && noise_high < 0.5)) {
    throw InvalidArgument("noise range must satisfy 0 <= low <= high < 0.5");
  }
}

std::size_t error_count(const AttributeTruth& truth, std::span<const std::uint8_t> mask,
                        const ResponseClaims& response) {
  std::size_t errors = 0;
  for (std::size_t j = 0; j < truth.size(); ++j) {
    const Mark m = response.claims[j];
    if (mask[j] && m != Mark::Silent && !is_correct(m, truth.values[j])) ++errors;
  }
  return errors;
}

Label determine_winner(const AttributeTruth& truth, std::span<const std::uint8_t> mask,
                       const ResponseClaims& a, const ResponseClaims& b) {
  if (std::none_of(mask.begin(), mask.end(), [](std::uint8_t m) { return m != 0; })) {
    throw InvalidArgument("mask selects no attribute");
  }
  const auto ea = error_count(truth, mask, a);
  const auto eb = error_count(truth, mask, b);
  if (ea == eb) throw TieError("both responses have " + std::to_string(ea) + " masked errors");
  return ea < eb ? Label::A : Label::B;
}

PreferenceInstance generate_instance(const DatasetSpec& spec, std::size_t index) {
  spec.validate();
  if (index >= spec.num_instances) throw InvalidArgument("index out of range");
  for (int attempt = 0; attempt < kMaxGenerationRetries; ++attempt) {
    const auto sub_seed = derive_seed(spec.seed, {index, static_cast<std::uint64_t>(attempt)});
    if (auto inst = try_generate(spec, index, sub_seed)) return std::move(*inst);
  }
  throw GenerationExhausted("no tie-free instance for index " + std::to_string(index) + " after " +
                            std::to_string(kMaxGenerationRetries) + " retries");
}

std::vector<PreferenceInstance> generate_range(const DatasetSpec& spec, std::size_t first,
                                               std::size_t count) {
  DatasetSpec extended = spec;
  extended.num_instances = std::max(spec.num_instances, first + count);
  std::vector<PreferenceInstance> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(generate_instance(extended, first + i));
  return out;
}

std::vector<PreferenceInstance> parse_records(std::istream& in) {
  std::vector<PreferenceInstance> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (number == 1 && line.starts_with("\xEF\xBB\xBF")) {
      throw SchemaError(1, "byte-order mark is not allowed");
    }
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    out.push_back(parse_record(line, number));
  }
  return out;
}

std::vector<PreferenceInstance> load_records(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return parse_records(in);
}

std::string to_record(const PreferenceInstance& inst) {
  nlohmann::ordered_json obj;
  obj["id"] = inst.id;
  obj["truth"] = inst.truth.values;
  obj["noise_floor"] = inst.truth.noise_floor;
  obj["mask"] = inst.question_mask;
  auto claims = [](const ResponseClaims& r) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (Mark m : r.claims) arr.push_back(mark_text(m));
    return arr;
  };
  obj["response_a"] = claims(inst.response_a);
  obj["response_b"] = claims(inst.response_b);
  obj["winner"] = std::string(1, to_char(inst.gold_winner));
  if (inst.category) obj["category"] = *inst.category;
  return obj.dump();
}

void write_records(const std::filesystem::path& path, std::span<const PreferenceInstance> instances) {
  std::string out;
  for (const auto& inst : instances) {
    out += to_record(inst);
    out += '\n';
  }
  atomic_write(path, out);
}

}  // namespace rubricrl
