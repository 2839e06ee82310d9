// rubricrl: train, evaluate and ablate the checklist judge; materialize data
// and prompt fixtures.
//
// Exit codes: 0 success, 2 configuration error, 3 runtime error. Failures
// print one JSON error record on stderr.

#include <CLI11.hpp>

#include <iostream>
#include <nlohmann/json.hpp>

#include "rubricrl/errors.hpp"
#include "rubricrl_tools/commands.hpp"
#include "rubricrl_tools/config.hpp"

namespace {

using namespace rubricrl;
using namespace rubricrl::tools;

constexpr int kConfigExit = 2;
constexpr int kRuntimeExit = 3;

int report_error(const std::string& kind, const std::string& message, int code, std::optional<std::size_t> line = {}) {
  nlohmann::ordered_json rec;
  rec["error"] = kind;
  rec["message"] = message;
  if (line) rec["line"] = *line;
  rec["exit_code"] = code;
  std::cerr << rec.dump() << "\n";
  return code;
}

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string output_dir;
  std::optional<std::uint64_t> seed;
  bool overwrite = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("-c,--config", config_path, "INI run configuration")->check(CLI::ExistingFile);
    cmd->add_option("--set", overrides, "Override a key, e.g. --set train.steps=10 (repeatable)");
    cmd->add_option("-o,--output-dir", output_dir, "Output directory (run.output_dir)");
    cmd->add_option("--seed", seed, "Run seed (run.seed)");
    cmd->add_flag("--overwrite", overwrite, "Replace existing outputs");
  }

  RunConfig resolve() const {
    RunConfig config = config_path.empty() ? RunConfig{} : load_config(config_path);
    for (const auto& o : overrides) apply_override(config, o);
    if (!output_dir.empty()) config.output_dir = output_dir;
    if (seed) config.seed = *seed;
    return config;
  }
};

int run(int argc, char** argv) {
  CLI::App app{"Checklist-guided pairwise judge: training, evaluation and ablations"};
  app.require_subcommand(1);

  CommonOptions train_opts;
  std::optional<std::size_t> train_steps;
  std::string train_mode;
  auto* train = app.add_subcommand("train", "Train a policy and write step/validation CSVs, checkpoint, manifest");
  train_opts.attach(train);
  train->add_option("--steps", train_steps, "Training steps (train.steps)");
  train->add_option("--mode", train_mode, "Training mode (train.mode)");

  CommonOptions eval_opts;
  std::string checkpoint;
  std::string eval_mode = "delta_rubric";
  BackendOptions backend;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint (or a generation backend) on held-out data");
  eval_opts.attach(eval);
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file from train");
  eval->add_option("--mode", eval_mode, "Judge mode")
      ->check(CLI::IsMember({"delta_rubric", "no_rubric", "static_rubric", "text_only_planner",
                             "frozen_planner_checkpoint"}));
  eval->add_option("--backend", backend.kind, "Generation backend: scripted or remote")
      ->check(CLI::IsMember({"scripted", "remote"}));
  eval->add_option("--text-records", backend.text_records, "Text preference records for backend evaluation");
  eval->add_option("--transcript", backend.transcript, "Transcript file for the scripted backend");
  eval->add_option("--record-transcript", backend.record_transcript, "Write exchanged requests as a transcript");
  eval->add_option("--url", backend.remote.url, "Chat-completions endpoint URL");
  eval->add_option("--model", backend.remote.model, "Model name sent to the endpoint");
  eval->add_option("--api-key-env", backend.remote.api_key_env, "Environment variable holding the bearer credential");
  eval->add_option("--max-in-flight", backend.remote.max_in_flight, "Concurrent remote requests")
      ->check(CLI::PositiveNumber);

  CommonOptions ablate_opts;
  bool lambda_grid = false;
  std::vector<std::string> ablate_modes;
  auto* ablate = app.add_subcommand("ablate", "Train and evaluate the ablation matrix and write ablation.csv");
  ablate_opts.attach(ablate);
  ablate->add_flag("--lambda-grid", lambda_grid, "Run delta_rubric at lambda 0.0, 0.2, 0.4, 0.6 instead");
  ablate->add_option("--modes", ablate_modes, "Subset of training modes")->delimiter(',');

  CommonOptions gen_opts;
  std::string split = "train";
  std::string gen_out;
  auto* gen = app.add_subcommand("gen-data", "Write a synthetic split as newline-delimited records");
  gen_opts.attach(gen);
  gen->add_option("--split", split, "train or heldout")->check(CLI::IsMember({"train", "heldout"}));
  gen->add_option("--out", gen_out, "Output records file")->required();

  std::string prompts_out;
  std::string bindings;
  bool prompts_overwrite = false;
  auto* prompts = app.add_subcommand("render-prompts", "Dump the prompt templates (and renderings) as fixtures");
  prompts->add_option("--out", prompts_out, "Output directory")->required();
  prompts->add_option("--bindings", bindings, "JSON object of placeholder bindings")->check(CLI::ExistingFile);
  prompts->add_flag("--overwrite", prompts_overwrite, "Replace existing outputs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigExit;
  }

  try {
    if (*train) {
      RunConfig config = train_opts.resolve();
      if (train_steps) config.steps = *train_steps;
      if (!train_mode.empty()) config.set("train.mode", train_mode);
      cmd_train(config, train_opts.overwrite, std::cout);
    } else if (*eval) {
      const RunConfig config = eval_opts.resolve();
      const auto mode = *parse_judge_mode(eval_mode);
      std::optional<std::filesystem::path> ckpt;
      if (!checkpoint.empty()) ckpt = checkpoint;
      std::optional<BackendOptions> b;
      if (!backend.kind.empty()) b = backend;
      cmd_eval(config, ckpt, mode, b, eval_opts.overwrite, std::cout);
    } else if (*ablate) {
      const RunConfig config = ablate_opts.resolve();
      std::vector<AblationRow> rows;
      if (lambda_grid) {
        rows = lambda_grid_rows();
      } else {
        rows = default_ablation_rows(config);
        if (!ablate_modes.empty()) {
          std::vector<AblationRow> subset;
          for (const auto& name : ablate_modes) {
            const auto mode = parse_ablation_mode(name);
            if (!mode) throw ConfigError("unknown training mode \"" + name + "\"");
            subset.push_back({name, *mode, config.lambda});
          }
          rows = std::move(subset);
        }
      }
      cmd_ablate(config, rows, ablate_opts.overwrite, std::cout);
    } else if (*gen) {
      const RunConfig config = gen_opts.resolve();
      const auto n = cmd_gen_data(config, split == "train" ? Split::Train : Split::Heldout, gen_out, gen_opts.overwrite);
      std::cout << "wrote " << n << " records to " << gen_out << "\n";
    } else if (*prompts) {
      std::optional<std::filesystem::path> b;
      if (!bindings.empty()) b = bindings;
      const auto n = cmd_render_prompts(prompts_out, b, prompts_overwrite);
      std::cout << "wrote " << n << " files to " << prompts_out << "\n";
    }
  } catch (const ConfigError& e) {
    return report_error(e.kind(), e.what(), kConfigExit);
  } catch (const SchemaError& e) {
    return report_error(e.kind(), e.what(), kRuntimeExit, e.line());
  } catch (const Error& e) {
    return report_error(e.kind(), e.what(), kRuntimeExit);
  } catch (const std::exception& e) {
    return report_error("InternalError", e.what(), kRuntimeExit);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
