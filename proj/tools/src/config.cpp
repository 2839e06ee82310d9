#include "rubricrl_tools/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <functional>
#include <map>

#include "rubricrl/errors.hpp"
#include "rubricrl/io.hpp"

namespace rubricrl::tools {

namespace {

template <typename T>
T parse_integer(const std::string& key, const std::string& text) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) throw ConfigError(key + ": expected a non-negative integer, got \"" + text + "\"");
  return value;
}

double parse_real(const std::string& key, const std::string& text) {
  double value = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) throw ConfigError(key + ": expected a number, got \"" + text + "\"");
  return value;
}

bool parse_flag(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw ConfigError(key + ": expected true or false, got \"" + text + "\"");
}

struct Field {
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

Field size_field(std::size_t RunConfig::*member) {
  return {[member](RunConfig& c, const std::string& k, const std::string& v) { c.*member = parse_integer<std::size_t>(k, v); },
          [member](const RunConfig& c) { return std::to_string(c.*member); }};
}

Field real_field(double RunConfig::*member) {
  return {[member](RunConfig& c, const std::string& k, const std::string& v) { c.*member = parse_real(k, v); },
          [member](const RunConfig& c) { return format_double(c.*member); }};
}

Field string_field(std::string RunConfig::*member) {
  return {[member](RunConfig& c, const std::string&, const std::string& v) { c.*member = v; },
          [member](const RunConfig& c) { return c.*member; }};
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = [] {
    std::map<std::string, Field> t;
    t["data.records"] = string_field(&RunConfig::records);
    t["data.eval_records"] = string_field(&RunConfig::eval_records);
    t["data.num_instances"] = {
        [](RunConfig& c, const std::string& k, const std::string& v) { c.dataset.num_instances = parse_integer<std::size_t>(k, v); },
        [](const RunConfig& c) { return std::to_string(c.dataset.num_instances); }};
    t["data.num_attributes"] = {
        [](RunConfig& c, const std::string& k, const std::string& v) { c.dataset.num_attributes = parse_integer<std::size_t>(k, v); },
        [](const RunConfig& c) { return std::to_string(c.dataset.num_attributes); }};
    t["data.planted_disagreements"] = {
        [](RunConfig& c, const std::string& k, const std::string& v) {
          c.dataset.planted_disagreements = parse_integer<std::size_t>(k, v);
        },
        [](const RunConfig& c) { return std::to_string(c.dataset.planted_disagreements); }};
    t["data.seed"] = {
        [](RunConfig& c, const std::string& k, const std::string& v) { c.dataset.seed = parse_integer<std::uint64_t>(k, v); },
        [](const RunConfig& c) { return std::to_string(c.dataset.seed); }};
    t["data.noise_low"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.dataset.noise_low = parse_real(k, v); },
                           [](const RunConfig& c) { return format_double(c.dataset.noise_low); }};
    t["data.noise_high"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.dataset.noise_high = parse_real(k, v); },
                            [](const RunConfig& c) { return format_double(c.dataset.noise_high); }};
    t["data.heldout_instances"] = size_field(&RunConfig::heldout_instances);

    t["train.mode"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                         auto m = parse_ablation_mode(v);
                         if (!m) throw ConfigError(k + ": unknown mode \"" + v + "\"");
                         c.mode = *m;
                       },
                       [](const RunConfig& c) { return std::string(to_string(c.mode)); }};
    t["train.steps"] = size_field(&RunConfig::steps);
    t["train.batch_size"] = size_field(&RunConfig::batch_size);
    t["train.num_checklists"] = size_field(&RunConfig::num_checklists);
    t["train.num_trajectories"] = size_field(&RunConfig::num_trajectories);
    t["train.lambda"] = real_field(&RunConfig::lambda);
    t["train.rollout_temperature"] = real_field(&RunConfig::rollout_temperature);
    t["train.inner_epochs"] = size_field(&RunConfig::inner_epochs);
    t["train.optimizer"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                              if (v == "sgd") {
                                c.optimizer = OptimizerKind::GradientDescent;
                              } else if (v == "adamw") {
                                c.optimizer = OptimizerKind::AdamW;
                              } else {
                                throw ConfigError(k + ": expected sgd or adamw, got \"" + v + "\"");
                              }
                            },
                            [](const RunConfig& c) {
                              return std::string(c.optimizer == OptimizerKind::AdamW ? "adamw" : "sgd");
                            }};
    t["train.learning_rate"] = real_field(&RunConfig::learning_rate);
    t["train.eval_every"] = size_field(&RunConfig::eval_every);
    t["train.planner_init_scale"] = real_field(&RunConfig::planner_init_scale);
    t["train.noise_reduction"] = real_field(&RunConfig::noise_reduction);

    t["clip.clip_low"] = real_field(&RunConfig::clip_low);
    t["clip.clip_high"] = real_field(&RunConfig::clip_high);
    t["clip.dapo_mode"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.dapo_mode = parse_flag(k, v); },
                           [](const RunConfig& c) { return std::string(c.dapo_mode ? "true" : "false"); }};
    t["clip.degenerate_epsilon"] = real_field(&RunConfig::degenerate_epsilon);

    t["eval.judge_mode"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                              if (v.empty() || v == "auto") {
                                c.judge_mode.reset();
                                return;
                              }
                              auto m = parse_judge_mode(v);
                              if (!m) throw ConfigError(k + ": unknown judge mode \"" + v + "\"");
                              c.judge_mode = *m;
                            },
                            [](const RunConfig& c) {
                              return c.judge_mode ? std::string(to_string(*c.judge_mode)) : std::string("auto");
                            }};
    t["eval.perception_seed"] = {
        [](RunConfig& c, const std::string& k, const std::string& v) { c.perception_seed = parse_integer<std::uint64_t>(k, v); },
        [](const RunConfig& c) { return std::to_string(c.perception_seed); }};

    t["run.seed"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.seed = parse_integer<std::uint64_t>(k, v); },
                     [](const RunConfig& c) { return std::to_string(c.seed); }};
    t["run.output_dir"] = string_field(&RunConfig::output_dir);
    return t;
  }();
  return table;
}

// Output location does not change artifact bytes.
bool affects_outputs(const std::string& key) { return key != "run.output_dir"; }

}  // namespace

JudgeMode judge_mode_for(AblationMode mode) {
  switch (mode) {
    case AblationMode::NoRubric:
      return JudgeMode::NoRubric;
    case AblationMode::StaticRubric:
      return JudgeMode::StaticRubric;
    case AblationMode::FrozenPlanner:
      return JudgeMode::FrozenPlannerCheckpoint;
    case AblationMode::TextOnlyPlanner:
      return JudgeMode::TextOnlyPlanner;
    case AblationMode::DeltaRubric:
    case AblationMode::AbsoluteReward:
      break;
  }
  return JudgeMode::DeltaRubric;
}

void RunConfig::validate() const {
  if (steps < 1) throw ConfigError("train.steps must be >= 1");
  if (eval_every < 1) throw ConfigError("train.eval_every must be >= 1");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (heldout_instances < 1 && eval_records.empty()) throw ConfigError("data.heldout_instances must be >= 1");
  if (!(planner_init_scale >= 0.0)) throw ConfigError("train.planner_init_scale must be >= 0");
  if (!(noise_reduction >= 0.0 && noise_reduction <= 1.0)) throw ConfigError("train.noise_reduction must be in [0, 1]");
  for (const auto* path : {&records, &eval_records}) {
    if (!path->empty() && !std::filesystem::is_regular_file(*path)) {
      throw ConfigError("records file not found: " + *path);
    }
  }
  if (output_dir.empty()) throw ConfigError("run.output_dir must not be empty");
  try {
    if (records.empty()) dataset.validate();
    train_config().validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t;
  t.num_checklists = num_checklists;
  t.num_trajectories = num_trajectories;
  t.reward.lambda = lambda;
  t.clip.clip_low = clip_low;
  t.clip.clip_high = clip_high;
  t.clip.dapo_mode = dapo_mode;
  t.clip.degenerate_epsilon = degenerate_epsilon;
  t.clip.learning_rate = learning_rate;
  t.mode = mode;
  t.rollout_temperature = rollout_temperature;
  t.inner_epochs = inner_epochs;
  return t;
}

JudgeMode RunConfig::effective_judge_mode() const { return judge_mode.value_or(judge_mode_for(mode)); }

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> k = [] {
    std::vector<std::string> out;
    for (const auto& [name, field] : fields()) out.push_back(name);
    return out;
  }();
  return k;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto it = fields().find(key);
  if (it == fields().end()) throw ConfigError("unknown configuration key \"" + key + "\"");
  it->second.set(*this, key, value);
}

std::string RunConfig::get(const std::string& key) const {
  const auto it = fields().find(key);
  if (it == fields().end()) throw ConfigError("unknown configuration key \"" + key + "\"");
  return it->second.get(*this);
}

std::string RunConfig::canonical() const {
  std::string out;
  for (const auto& [name, field] : fields()) out += name + "=" + field.get(*this) + "\n";
  return out;
}

std::string RunConfig::digest() const {
  std::string material;
  for (const auto& [name, field] : fields()) {
    if (affects_outputs(name)) material += name + "=" + field.get(*this) + "\n";
  }
  for (const auto* path : {&records, &eval_records}) {
    if (!path->empty()) material += "sha256(" + *path + ")=" + sha256_hex(read_file(*path)) + "\n";
  }
  return sha256_hex(material);
}

RunConfig load_config(const std::filesystem::path& path) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(path.string(), tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("cannot read config: ") + e.what());
  }
  RunConfig config;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError("key \"" + section + "\" must be inside a section");
    for (const auto& [key, value] : body) config.set(section + "." + key, value.get_value<std::string>());
  }
  return config;
}

void apply_override(RunConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like section.key=value: " + assignment);
  config.set(assignment.substr(0, eq), assignment.substr(eq + 1));
}

}  // namespace rubricrl::tools
