#include "rubricrl_tools/commands.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <ostream>
#include <sstream>

#include "rubricrl/checkpoint.hpp"
#include "rubricrl/errors.hpp"
#include "rubricrl/io.hpp"
#include "rubricrl/prompts.hpp"
#include "rubricrl/text_pipeline.hpp"

namespace rubricrl::tools {

namespace {

// Stream tags under the run seed.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kTrainStream = 2;
constexpr std::uint64_t kBatchStream = 3;

std::vector<PreferenceInstance> load_nonempty(const std::string& path) {
  auto records = load_records(path);
  if (records.empty()) throw SchemaError(0, "dataset " + path + " contains no records");
  return records;
}

// Batch for one step: a seeded shuffle of the training indices; the first
// batch_size go in the batch and the remainder backs dynamic sampling.
std::vector<std::size_t> step_order(std::size_t n, std::uint64_t seed, std::uint64_t step) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(derive_seed(seed, {kBatchStream, step}));
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  return order;
}

std::string mode_file(JudgeMode mode, const char* ext) { return "eval_" + std::string(to_string(mode)) + ext; }

void write_report(const std::filesystem::path& dir, JudgeMode mode, const EvalReport& report, const std::string& digest) {
  atomic_write(dir / mode_file(mode, ".json"), report.to_json(digest));
  atomic_write(dir / mode_file(mode, ".csv"), report.to_csv());
}

std::vector<TextInstance> load_text_nonempty(const std::string& path) {
  auto records = load_text_records(path);
  if (records.empty()) throw SchemaError(0, "dataset " + path + " contains no records");
  return records;
}

EvalReport eval_with_backend(const BackendOptions& options, JudgeMode mode) {
  if (options.text_records.empty()) throw ConfigError("backend evaluation needs --text-records");
  const auto dataset = load_text_nonempty(options.text_records);
  std::unique_ptr<Backend> inner;
  if (options.kind == "scripted") {
    if (options.transcript.empty()) throw ConfigError("scripted backend needs --transcript");
    inner = std::make_unique<ScriptedBackend>(ScriptedBackend::from_file(options.transcript));
  } else if (options.kind == "remote") {
    inner = std::make_unique<RemoteBackend>(options.remote);
  } else {
    throw ConfigError("backend must be scripted or remote, got \"" + options.kind + "\"");
  }
  const std::size_t in_flight = options.kind == "remote" ? options.remote.max_in_flight : 1;
  if (options.record_transcript.empty()) return evaluate_text(*inner, dataset, mode, {}, in_flight);

  RecordingBackend recorder(*inner);
  auto report = evaluate_text(recorder, dataset, mode, {}, in_flight);
  auto records = recorder.records();
  std::sort(records.begin(), records.end(),
            [](const TranscriptRecord& a, const TranscriptRecord& b) { return a.digest < b.digest; });
  records.erase(std::unique(records.begin(), records.end(),
                            [](const TranscriptRecord& a, const TranscriptRecord& b) { return a.digest == b.digest; }),
                records.end());
  write_transcript(options.record_transcript, records);
  return report;
}

}  // namespace

Datasets load_datasets(const RunConfig& config) {
  Datasets d;
  if (config.records.empty()) {
    d.train = generate_range(config.dataset, 0, config.dataset.num_instances);
  } else {
    d.train = load_nonempty(config.records);
  }
  if (config.eval_records.empty()) {
    d.heldout = generate_range(config.dataset, config.dataset.num_instances, config.heldout_instances);
  } else {
    d.heldout = load_nonempty(config.eval_records);
  }
  const std::size_t k = d.train.front().num_attributes();
  for (const auto* split : {&d.train, &d.heldout}) {
    for (const auto& inst : *split) {
      if (inst.num_attributes() != k) throw SchemaError(inst.source_line, "instance " + inst.id + " has a different K");
    }
  }
  return d;
}

TrainOutcome train_run(const RunConfig& config, const Datasets& data) {
  config.validate();
  const TrainConfig tc = config.train_config();
  const std::size_t k = data.train.front().num_attributes();

  PolicyInit init;
  init.planner_scale = config.planner_init_scale;
  init.noise_reduction = config.noise_reduction;
  TrainOutcome outcome;
  outcome.initial = initial_params(k, derive_seed(config.seed, {kInitStream}), init);
  PolicyParams params = outcome.initial;

  OptimizerConfig oc;
  oc.kind = config.optimizer;
  auto optimizer = make_optimizer(oc, config.learning_rate);
  Rng rng(derive_seed(config.seed, {kTrainStream}));
  const JudgeMode judge = config.effective_judge_mode();
  JudgeOptions judge_options;
  judge_options.perception_seed = config.perception_seed;

  const std::size_t batch_size = std::min(config.batch_size, data.train.size());
  std::vector<PreferenceInstance> batch;
  for (std::size_t step = 1; step <= config.steps; ++step) {
    const auto order = step_order(data.train.size(), config.seed, step);
    batch.clear();
    for (std::size_t i = 0; i < batch_size; ++i) batch.push_back(data.train[order[i]]);
    std::vector<const PreferenceInstance*> reserve;
    for (std::size_t i = batch_size; i < order.size(); ++i) reserve.push_back(&data.train[order[i]]);
    InstancePool pool(std::move(reserve));

    auto result = train_step(params, batch, tc, rng, *optimizer, &pool);
    params = std::move(result.params);
    outcome.steps.push_back(result.report);

    if (step % config.eval_every == 0 || step == config.steps) {
      const auto report = evaluate(params, data.heldout, judge, judge_options);
      outcome.validation.push_back({step, report.overall, report.macro});
    }
  }
  outcome.final_params = std::move(params);
  return outcome;
}

std::string steps_csv(const std::vector<StepReport>& steps) {
  std::string out = StepReport::csv_header() + "\n";
  for (const auto& s : steps) out += s.csv_row() + "\n";
  return out;
}

std::string validation_csv(const std::vector<ValidationPoint>& points) {
  std::string out = "step,overall,macro\n";
  for (const auto& p : points) {
    out += std::to_string(p.step) + "," + format_double(p.overall) + "," + format_double(p.macro) + "\n";
  }
  return out;
}

std::string manifest_json(const RunConfig& config, std::string_view command) {
  nlohmann::ordered_json obj;
  obj["command"] = command;
  obj["config_digest"] = config.digest();
  obj["seed"] = config.seed;
  obj["config"] = nlohmann::ordered_json::object();
  for (const auto& key : RunConfig::keys()) obj["config"][key] = config.get(key);
  return obj.dump(2) + "\n";
}

void guard_outputs(const std::filesystem::path& dir, const std::vector<std::string>& names, bool overwrite) {
  if (overwrite) return;
  for (const auto& name : names) {
    if (std::filesystem::exists(dir / name)) {
      throw ConfigError((dir / name).string() + " already exists; pass --overwrite to replace it");
    }
  }
}

TrainOutcome cmd_train(const RunConfig& config, bool overwrite, std::ostream& out) {
  config.validate();
  const std::filesystem::path dir(config.output_dir);
  guard_outputs(dir, {kStepsFile, kValidationFile, kCheckpointFile, kManifestFile}, overwrite);
  const auto data = load_datasets(config);
  auto outcome = train_run(config, data);

  std::filesystem::create_directories(dir);
  atomic_write(dir / kStepsFile, steps_csv(outcome.steps));
  atomic_write(dir / kValidationFile, validation_csv(outcome.validation));
  save_checkpoint(dir / kCheckpointFile, outcome.final_params);
  atomic_write(dir / kManifestFile, manifest_json(config, "train"));

  const auto& last = outcome.validation.back();
  std::ostringstream line;
  line.setf(std::ios::fixed);
  line.precision(1);
  line << "steps=" << outcome.steps.size() << " mode=" << to_string(config.mode)
       << " overall=" << round_half_up(100.0 * last.overall, 1) << " macro=" << round_half_up(100.0 * last.macro, 1);
  out << line.str() << "\n";
  return outcome;
}

EvalReport cmd_eval(const RunConfig& config, const std::optional<std::filesystem::path>& checkpoint, JudgeMode mode,
                    const std::optional<BackendOptions>& backend, bool overwrite, std::ostream& out) {
  const std::filesystem::path dir(config.output_dir);
  guard_outputs(dir, {mode_file(mode, ".json"), mode_file(mode, ".csv")}, overwrite);
  EvalReport report;
  if (backend) {
    report = eval_with_backend(*backend, mode);
  } else {
    if (!checkpoint) throw ConfigError("eval needs --checkpoint (or a backend)");
    if (!std::filesystem::is_regular_file(*checkpoint)) throw ConfigError("checkpoint not found: " + checkpoint->string());
    config.validate();
    const auto params = load_checkpoint(*checkpoint);
    const auto data = load_datasets(config);
    JudgeOptions options;
    options.perception_seed = config.perception_seed;
    report = evaluate(params, data.heldout, mode, options);
  }
  std::filesystem::create_directories(dir);
  write_report(dir, mode, report, config.digest());
  out << "mode=" << to_string(mode) << " " << report.summary() << "\n";
  return report;
}

std::vector<AblationRow> default_ablation_rows(const RunConfig& config) {
  std::vector<AblationRow> rows;
  for (auto mode : {AblationMode::DeltaRubric, AblationMode::NoRubric, AblationMode::StaticRubric,
                    AblationMode::FrozenPlanner, AblationMode::AbsoluteReward, AblationMode::TextOnlyPlanner}) {
    rows.push_back({std::string(to_string(mode)), mode, config.lambda});
  }
  return rows;
}

std::vector<AblationRow> lambda_grid_rows() {
  std::vector<AblationRow> rows;
  for (double lambda : {0.0, 0.2, 0.4, 0.6}) {
    rows.push_back({"delta_rubric_lambda_" + format_double(lambda), AblationMode::DeltaRubric, lambda});
  }
  return rows;
}

std::string ablation_csv(const std::vector<AblationResult>& results) {
  std::string out =
      "row,mode,lambda,seed,judge_mode,overall,macro,final_probe_accuracy,mean_planner_reward_first,"
      "mean_planner_reward_last,mean_planner_reward_avg,planner_weights_changed\n";
  for (const auto& r : results) {
    const auto& steps = r.outcome.steps;
    double avg = 0.0;
    for (const auto& s : steps) avg += s.mean_planner_reward;
    avg /= static_cast<double>(steps.size());
    const bool changed = r.outcome.final_params.planner_weights != r.outcome.initial.planner_weights;
    out += r.row.name + "," + std::string(to_string(r.row.mode)) + "," + format_double(r.row.lambda) + "," +
           std::to_string(r.seed) + "," + std::string(to_string(r.judge_mode)) + "," + format_double(r.report.overall) +
           "," + format_double(r.report.macro) + "," + format_double(steps.back().planner_probe_accuracy) + "," +
           format_double(steps.front().mean_planner_reward) + "," + format_double(steps.back().mean_planner_reward) +
           "," + format_double(avg) + "," + (changed ? "1" : "0") + "\n";
  }
  return out;
}

std::vector<AblationResult> cmd_ablate(const RunConfig& config, const std::vector<AblationRow>& rows, bool overwrite,
                                       std::ostream& out) {
  if (rows.empty()) throw ConfigError("ablation matrix is empty");
  config.validate();
  const std::filesystem::path dir(config.output_dir);
  guard_outputs(dir, {kAblationFile, kManifestFile}, overwrite);
  for (const auto& row : rows) guard_outputs(dir / row.name, {kStepsFile, kCheckpointFile}, overwrite);
  const auto data = load_datasets(config);

  std::vector<AblationResult> results;
  for (const auto& row : rows) {
    RunConfig rc = config;
    rc.mode = row.mode;
    rc.lambda = row.lambda;
    rc.judge_mode.reset();
    rc.seed = derive_seed(config.seed, {hash_string(row.name)});
    rc.output_dir = (dir / row.name).string();
    rc.validate();

    AblationResult r;
    r.row = row;
    r.seed = rc.seed;
    r.judge_mode = rc.effective_judge_mode();
    r.outcome = train_run(rc, data);
    JudgeOptions options;
    options.perception_seed = rc.perception_seed;
    r.report = evaluate(r.outcome.final_params, data.heldout, r.judge_mode, options);

    const std::filesystem::path row_dir(rc.output_dir);
    std::filesystem::create_directories(row_dir);
    atomic_write(row_dir / kStepsFile, steps_csv(r.outcome.steps));
    atomic_write(row_dir / kValidationFile, validation_csv(r.outcome.validation));
    save_checkpoint(row_dir / kCheckpointFile, r.outcome.final_params);
    atomic_write(row_dir / kManifestFile, manifest_json(rc, "train"));
    out << "row=" << row.name << " " << r.report.summary() << "\n";
    results.push_back(std::move(r));
  }
  std::filesystem::create_directories(dir);
  atomic_write(dir / kAblationFile, ablation_csv(results));
  atomic_write(dir / kManifestFile, manifest_json(config, "ablate"));
  return results;
}

std::size_t cmd_gen_data(const RunConfig& config, Split split, const std::filesystem::path& path, bool overwrite) {
  try {
    config.dataset.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  if (!overwrite && std::filesystem::exists(path)) {
    throw ConfigError(path.string() + " already exists; pass --overwrite to replace it");
  }
  const auto instances = split == Split::Train
                             ? generate_range(config.dataset, 0, config.dataset.num_instances)
                             : generate_range(config.dataset, config.dataset.num_instances, config.heldout_instances);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  write_records(path, instances);
  return instances.size();
}

std::size_t cmd_render_prompts(const std::filesystem::path& dir, const std::optional<std::filesystem::path>& bindings,
                               bool overwrite) {
  std::vector<std::string> names;
  for (const auto& t : all_templates()) names.push_back(std::string(t.key) + ".txt");
  names.push_back("static_rubric.txt");
  guard_outputs(dir, names, overwrite);

  Bindings values;
  if (bindings) {
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(read_file(*bindings));
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(std::string("bindings file is not valid JSON: ") + e.what());
    }
    if (!obj.is_object()) throw ConfigError("bindings file must hold a JSON object");
    for (const auto& [key, value] : obj.items()) {
      if (!value.is_string()) throw ConfigError("binding \"" + key + "\" must be a string");
      values[key] = value.get<std::string>();
    }
    guard_outputs(dir / "rendered", names, overwrite);
  }

  std::filesystem::create_directories(dir);
  std::size_t written = 0;
  for (const auto& t : all_templates()) {
    atomic_write(dir / (std::string(t.key) + ".txt"), t.body);
    ++written;
    if (bindings) {
      std::filesystem::create_directories(dir / "rendered");
      atomic_write(dir / "rendered" / (std::string(t.key) + ".txt"), render(t, values));
      ++written;
    }
  }
  atomic_write(dir / "static_rubric.txt", static_rubric_text());
  return written + 1;
}

}  // namespace rubricrl::tools
