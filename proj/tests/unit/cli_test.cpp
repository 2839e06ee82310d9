#include <gtest/gtest.h>
#include <sys/wait.h>

#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "rubricrl/checkpoint.hpp"
#include "rubricrl/errors.hpp"
#include "rubricrl/io.hpp"
#include "rubricrl_tools/commands.hpp"
#include "rubricrl_tools/config.hpp"
#include "test_support.hpp"

namespace {

using namespace rubricrl;
using namespace rubricrl::tools;
using test_support::TempDir;

const std::filesystem::path kConfigs = RUBRICRL_CONFIG_DIR;
const std::filesystem::path kFixtures = RUBRICRL_FIXTURE_DIR;

struct Run {
  int code = -1;
  std::string err;
  std::string out;
};

// Runs the command-line binary with the given arguments.
Run cli(const std::string& args, const TempDir& dir) {
  const auto out = dir / "stdout.txt";
  const auto err = dir / "stderr.txt";
  const std::string cmd =
      std::string(RUBRICRL_CLI_PATH) + " " + args + " >" + out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_file(out);
  r.err = read_file(err);
  return r;
}

// A small, fast run configuration.
std::string small_args(const TempDir& dir) {
  return "--set data.num_instances=32 --set data.heldout_instances=16 --set train.batch_size=8 --set train.steps=3 "
         "--set train.eval_every=2 -o " +
         (dir / "run").string();
}

RunConfig small_config(const TempDir& dir) {
  RunConfig c;
  apply_override(c, "data.num_instances=32");
  apply_override(c, "data.heldout_instances=16");
  apply_override(c, "train.batch_size=8");
  apply_override(c, "train.steps=3");
  c.output_dir = (dir / "run").string();
  return c;
}

TEST(Config, ReferenceFileMatchesDefaults) {
  const auto c = load_config(kConfigs / "reference.ini");
  EXPECT_EQ(c.dataset.num_instances, 512u);
  EXPECT_EQ(c.heldout_instances, 256u);
  EXPECT_EQ(c.dataset.num_attributes, 6u);
  EXPECT_EQ(c.num_checklists, 5u);
  EXPECT_EQ(c.num_trajectories, 5u);
  EXPECT_EQ(c.lambda, 0.4);
  EXPECT_EQ(c.steps, 120u);
  EXPECT_FALSE(c.judge_mode.has_value());
  EXPECT_EQ(c.output_dir, "runs/reference");
  RunConfig defaults;
  defaults.output_dir = c.output_dir;
  EXPECT_EQ(c.canonical(), defaults.canonical());
}

TEST(Config, DapoFileEnablesDecoupledClip) {
  const auto c = load_config(kConfigs / "dapo.ini");
  EXPECT_TRUE(c.dapo_mode);
  EXPECT_EQ(c.clip_high, 0.28);
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, OverridesAndErrors) {
  RunConfig c;
  apply_override(c, "train.lambda=0.6");
  EXPECT_EQ(c.lambda, 0.6);
  EXPECT_EQ(c.get("train.lambda"), "0.6");
  EXPECT_THROW(apply_override(c, "train.lamda=0.6"), ConfigError);
  EXPECT_THROW(apply_override(c, "train.steps=ten"), ConfigError);
  EXPECT_THROW(apply_override(c, "no-equals"), ConfigError);
  EXPECT_THROW(apply_override(c, "train.mode=best"), ConfigError);
  RunConfig bad;
  bad.clip_high = 0.3;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = {};
  bad.records = "/nonexistent/records.jsonl";
  EXPECT_THROW(bad.validate(), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/config.ini"), ConfigError);
}

TEST(Config, UnknownIniKeyIsRejected) {
  TempDir dir;
  std::ofstream(dir / "c.ini") << "[train]\nsteps = 3\nlearning_rat = 1\n";
  EXPECT_THROW(load_config(dir / "c.ini"), ConfigError);
}

TEST(Config, DigestIgnoresOutputDirectoryOnly) {
  RunConfig a;
  RunConfig b;
  b.output_dir = "elsewhere";
  EXPECT_EQ(a.digest(), b.digest());
  b.lambda = 0.2;
  EXPECT_NE(a.digest(), b.digest());
  EXPECT_EQ(a.digest().size(), 64u);
}

TEST(Config, JudgeModeFollowsTrainingMode) {
  RunConfig c;
  c.mode = AblationMode::FrozenPlanner;
  EXPECT_EQ(c.effective_judge_mode(), JudgeMode::FrozenPlannerCheckpoint);
  c.mode = AblationMode::TextOnlyPlanner;
  EXPECT_EQ(c.effective_judge_mode(), JudgeMode::TextOnlyPlanner);
  c.mode = AblationMode::AbsoluteReward;
  EXPECT_EQ(c.effective_judge_mode(), JudgeMode::DeltaRubric);
  c.judge_mode = JudgeMode::NoRubric;
  EXPECT_EQ(c.effective_judge_mode(), JudgeMode::NoRubric);
}

TEST(TrainRun, FrozenPlannerCheckpointKeepsInitialPlanner) {
  TempDir dir;
  auto c = small_config(dir);
  c.mode = AblationMode::FrozenPlanner;
  const auto outcome = train_run(c, load_datasets(c));
  EXPECT_EQ(outcome.final_params.planner_weights, outcome.initial.planner_weights);
  EXPECT_NE(outcome.final_params.verifier_weights, outcome.initial.verifier_weights);
  EXPECT_EQ(outcome.steps.size(), 3u);
}

TEST(TrainRun, AllDegenerateSingleStepLeavesParameters) {
  TempDir dir;
  auto c = small_config(dir);
  c.steps = 1;
  c.dataset.noise_low = 0.0;
  c.dataset.noise_high = 0.0;
  c.rollout_temperature = 0.0;
  const auto outcome = train_run(c, load_datasets(c));
  ASSERT_EQ(outcome.steps.size(), 1u);
  EXPECT_TRUE(outcome.steps[0].all_degenerate);
  EXPECT_EQ(outcome.final_params.flatten(), outcome.initial.flatten());
  EXPECT_EQ(outcome.final_params.version, 1u);
}

TEST(TrainRun, ValidationScheduleIncludesTheFinalStep) {
  TempDir dir;
  auto c = small_config(dir);
  c.steps = 5;
  c.eval_every = 2;
  const auto outcome = train_run(c, load_datasets(c));
  std::vector<std::uint64_t> steps;
  for (const auto& v : outcome.validation) steps.push_back(v.step);
  EXPECT_EQ(steps, (std::vector<std::uint64_t>{2, 4, 5}));
}

TEST(Datasets, EmptyRecordsFileIsSchemaError) {
  TempDir dir;
  std::ofstream(dir / "empty.jsonl").close();
  RunConfig c;
  c.records = (dir / "empty.jsonl").string();
  EXPECT_THROW(load_datasets(c), SchemaError);
}

TEST(Cli, HelpAndUsageErrors) {
  TempDir dir;
  EXPECT_EQ(cli("--help", dir).code, 0);
  EXPECT_EQ(cli("", dir).code, 2);
  EXPECT_EQ(cli("train --no-such-flag", dir).code, 2);
  EXPECT_EQ(cli("train -c /nonexistent.ini", dir).code, 2);
  const auto bad_key = cli("train --set train.bogus=1 -o " + (dir / "x").string(), dir);
  EXPECT_EQ(bad_key.code, 2);
  const auto record = nlohmann::json::parse(bad_key.err);
  EXPECT_EQ(record["error"], "ConfigError");
  EXPECT_EQ(record["exit_code"], 2);
}

TEST(Cli, EmptyDatasetIsARuntimeError) {
  TempDir dir;
  std::ofstream(dir / "empty.jsonl").close();
  const auto r = cli("train --set data.records=" + (dir / "empty.jsonl").string() + " -o " + (dir / "run").string(), dir);
  EXPECT_EQ(r.code, 3);
  EXPECT_EQ(nlohmann::json::parse(r.err)["error"], "SchemaError");
}

TEST(Cli, TrainWritesOutputsAndGuardsThem) {
  TempDir dir;
  const auto r = cli("train " + small_args(dir), dir);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("steps=3"), std::string::npos);
  for (const char* f : {kStepsFile, kValidationFile, kCheckpointFile, kManifestFile}) {
    EXPECT_TRUE(std::filesystem::exists(dir / "run" / f)) << f;
  }
  const auto steps = read_file(dir / "run" / kStepsFile);
  EXPECT_TRUE(steps.starts_with(StepReport::csv_header() + "\n"));
  EXPECT_NO_THROW(load_checkpoint(dir / "run" / kCheckpointFile));
  const auto manifest = nlohmann::json::parse(read_file(dir / "run" / kManifestFile));
  EXPECT_EQ(manifest["command"], "train");

  EXPECT_EQ(cli("train " + small_args(dir), dir).code, 2);
  EXPECT_EQ(cli("train --overwrite " + small_args(dir), dir).code, 0);
  EXPECT_EQ(read_file(dir / "run" / kStepsFile), steps);

  const auto ckpt = (dir / "run" / kCheckpointFile).string();
  const auto e = cli("eval --checkpoint " + ckpt + " --mode no_rubric " + small_args(dir), dir);
  ASSERT_EQ(e.code, 0) << e.err;
  EXPECT_NE(e.out.find("mode=no_rubric"), std::string::npos);
  const auto report = nlohmann::json::parse(read_file(dir / "run" / "eval_no_rubric.json"));
  EXPECT_EQ(report["per_instance"].size(), 16u);
  EXPECT_EQ(report["config_digest"].get<std::string>().size(), 64u);
}

TEST(Cli, ScriptedBackendWithoutTranscriptEntriesFails) {
  TempDir dir;
  std::ofstream(dir / "text.jsonl")
      << R"({"id":"q1","question":"Q","response_a":"a","response_b":"b","winner":"A"})" << "\n";
  std::ofstream(dir / "transcript.jsonl").close();
  const auto r = cli("eval --backend scripted --transcript " + (dir / "transcript.jsonl").string() +
                         " --text-records " + (dir / "text.jsonl").string() + " --mode no_rubric -o " +
                         (dir / "run").string(),
                     dir);
  EXPECT_EQ(r.code, 3);
  EXPECT_EQ(nlohmann::json::parse(r.err)["error"], "TranscriptMiss");
}

TEST(Cli, GenDataWritesLoadableRecords) {
  TempDir dir;
  const auto path = dir / "heldout.jsonl";
  const auto r = cli("gen-data --split heldout --set data.num_instances=20 --set data.heldout_instances=7 --out " +
                         path.string(),
                     dir);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto records = load_records(path);
  ASSERT_EQ(records.size(), 7u);
  DatasetSpec spec;
  spec.num_instances = 27;
  EXPECT_EQ(to_record(records[0]), to_record(generate_instance(spec, 20)));
  EXPECT_EQ(cli("gen-data --out " + path.string(), dir).code, 2);
}

TEST(Cli, RenderPromptsReproducesFixtures) {
  TempDir dir;
  const auto r = cli("render-prompts --out " + (dir / "p").string() + " --bindings " +
                         (kFixtures / "rendered" / "bindings.json").string(),
                     dir);
  ASSERT_EQ(r.code, 0) << r.err;
  for (const auto& entry : std::filesystem::directory_iterator(kFixtures / "prompts")) {
    EXPECT_EQ(read_file(dir / "p" / entry.path().filename()), read_file(entry.path())) << entry.path();
  }
  for (const auto& entry : std::filesystem::directory_iterator(kFixtures / "rendered")) {
    if (entry.path().extension() != ".txt") continue;
    EXPECT_EQ(read_file(dir / "p" / "rendered" / entry.path().filename()), read_file(entry.path())) << entry.path();
  }
}

TEST(Ablation, RowsAndSeeds) {
  RunConfig c;
  const auto rows = default_ablation_rows(c);
  ASSERT_EQ(rows.size(), 6u);
  EXPECT_EQ(rows[0].mode, AblationMode::DeltaRubric);
  const auto grid = lambda_grid_rows();
  ASSERT_EQ(grid.size(), 4u);
  EXPECT_EQ(grid[0].lambda, 0.0);
  EXPECT_EQ(grid[3].lambda, 0.6);
  TempDir dir;
  auto small = small_config(dir);
  small.steps = 2;
  std::ostringstream out;
  const auto results = cmd_ablate(small, {rows[0], rows[1]}, false, out);
  ASSERT_EQ(results.size(), 2u);
  EXPECT_NE(results[0].seed, results[1].seed);
  const auto csv = read_file(dir / "run" / kAblationFile);
  EXPECT_TRUE(csv.starts_with("row,mode,lambda,seed,judge_mode,overall,macro"));
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
}

}  // namespace
