#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <json.hpp>

#include "softq/softq.hpp"

using namespace softq;
using Catch::Matchers::ContainsSubstring;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code = -1;
  std::string output;
};

CliResult run_cli(const std::string& args) {
  static int n = 0;
  fs::create_directories("test_tmp");
  const std::string cap = "test_tmp/cli_cap_" + std::to_string(n++) + ".txt";
  const std::string cmd = std::string("\"") + SOFTQ_CLI_PATH + "\" " + args + " > " + cap + " 2>&1";
  const int rc = std::system(cmd.c_str());
  CliResult res;
  if (WIFEXITED(rc)) res.code = WEXITSTATUS(rc);
  std::ifstream f(cap);
  std::ostringstream ss;
  ss << f.rdbuf();
  res.output = ss.str();
  return res;
}

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  REQUIRE(f.good());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

int data_rows(const std::string& csv_text) {
  std::istringstream is(csv_text);
  std::string line;
  int rows = -1;  // skip header
  while (std::getline(is, line))
    if (!line.empty()) ++rows;
  return rows;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  f << text;
}

}  // namespace

TEST_CASE("default configuration is valid and fully keyed") {
  const RunConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  const std::string text = serialize_config(cfg);
  CHECK(text.rfind("[plant]\n", 0) == 0);
  CHECK_THAT(text, ContainsSubstring("\nsample_time = "));
  CHECK_THAT(text, ContainsSubstring("[sac]\n"));
  CHECK_THAT(text, ContainsSubstring("[run]\n"));
  CHECK_THAT(text, ContainsSubstring("seed = 0\n"));
  // The tracking slope is derived from v_ref, never stored.
  CHECK(text.find("eps2") == std::string::npos);
}

TEST_CASE("serialization round-trips byte for byte") {
  RunConfig cfg;
  cfg.seed = 77;
  cfg.plant.sample_time = 0.025;
  cfg.sac.batch_size = 128;
  cfg.reward.v_ref = 0.35;
  cfg.val_ratio = 0.3;
  const std::string text = serialize_config(cfg);

  RunConfig parsed;
  apply_config_text(parsed, text, "mem");
  CHECK(serialize_config(parsed) == text);
  CHECK(parsed.seed == 77);
  CHECK(parsed.plant.sample_time == 0.025);
  CHECK(parsed.sac.batch_size == 128);
  CHECK(parsed.val_ratio == 0.3);
}

TEST_CASE("unknown and malformed keys are named in errors") {
  RunConfig cfg;
  CHECK_THROWS_WITH(apply_config_value(cfg, "foo.bar", "1"), ContainsSubstring("foo.bar"));
  CHECK_THROWS_WITH(apply_config_value(cfg, "plant.mass", "abc"), ContainsSubstring("plant.mass"));
  CHECK_THROWS_WITH(apply_config_value(cfg, "sac.batch_size", "12.5"),
                    ContainsSubstring("sac.batch_size"));
}

TEST_CASE("the actuator threshold key broadcasts to all four components") {
  RunConfig cfg;
  apply_config_value(cfg, "reward.sigma_threshold", "0.25");
  for (double s : cfg.reward.sigma_threshold) CHECK(s == 0.25);
}

TEST_CASE("sectioned text parses with comments and precise line numbers") {
  RunConfig cfg;
  apply_config_text(cfg,
                    "# tuned for the small rig\n"
                    "[plant]\n"
                    "mass = 2.5\n"
                    "gait.period = 1.0\n"
                    "\n"
                    "[run]\n"
                    "seed = 9\n",
                    "mem");
  CHECK(cfg.plant.mass == 2.5);
  CHECK(cfg.gait.period == 1.0);  // already qualified, section prefix skipped
  CHECK(cfg.seed == 9);

  RunConfig c2;
  CHECK_THROWS_WITH(apply_config_text(c2, "# a\n[plant\n", "mem"), ContainsSubstring("mem:2"));
  CHECK_THROWS_WITH(apply_config_text(c2, "\n\nnoise 0.5\n", "mem"), ContainsSubstring("mem:3"));
}

TEST_CASE("later assignments override earlier ones") {
  RunConfig cfg;
  apply_config_text(cfg, "plant.mass = 2\n", "a");
  apply_config_text(cfg, "plant.mass = 3\n", "b");
  CHECK(cfg.plant.mass == 3.0);
}

TEST_CASE("stage options derive the tracking slope and refinement overrides") {
  RunConfig cfg;
  cfg.plant.sample_time = 0.02;

  const TrainOptions mb = cfg.options_for(TrainMode::mbrl);
  CHECK(mb.reward.v_ref == 0.2);
  CHECK(mb.reward.eps2 == 1.0 / 0.2);
  CHECK(mb.reward.eps4 == 10.0);
  CHECK(mb.reward.sample_time == 0.02);
  CHECK(mb.max_episodes == cfg.mbrl_max_episodes);
  CHECK(mb.warm_start_steps == 0);

  const TrainOptions pt = cfg.options_for(TrainMode::post_training);
  CHECK(pt.reward.v_ref == 0.3);
  CHECK(pt.reward.eps2 == 1.0 / 0.3);
  CHECK(pt.reward.eps4 == 100.0);
  CHECK(pt.sac.critic_lr == 0.001);
  CHECK(pt.sac.actor_lr == 0.0005);
  CHECK(pt.warm_start_steps == 32);
  CHECK(pt.max_episodes == cfg.pt_max_episodes);

  const TrainOptions mf = cfg.options_for(TrainMode::mfrl);
  CHECK(mf.max_episodes == cfg.mfrl_max_episodes);
  CHECK(mf.reward.eps4 == 10.0);

  cfg.gait.period = 1.2;
  CHECK(cfg.collect_options().gait.period == 1.2);
}

TEST_CASE("validation failures name the offending key") {
  RunConfig cfg;
  cfg.val_ratio = 0.0;
  CHECK_THROWS_WITH(cfg.validate(), ContainsSubstring("val_ratio"));
  cfg = RunConfig{};
  cfg.gait.transition_fraction = 0.3;
  CHECK_THROWS_WITH(cfg.validate(), ContainsSubstring("transition_fraction"));
  cfg = RunConfig{};
  cfg.sac.gamma = 2.0;
  CHECK_THROWS_WITH(cfg.validate(), ContainsSubstring("sac"));
  cfg = RunConfig{};
  cfg.pt_warm_start_steps = cfg.max_steps + 1;
  CHECK_THROWS_WITH(cfg.validate(), ContainsSubstring("warm_start_steps"));
}

TEST_CASE("the command line pipeline runs end to end") {
  unsetenv("SOFTQ_OUT");
  const std::string root = "test_tmp/cli_chain";
  std::error_code ec;
  fs::remove_all(root, ec);
  fs::create_directories(root);
  const std::string tiny =
      " --set dataset.n_sequences=30 --set dataset.steps_per_sequence=40"
      " --set surrogate.epochs=20 --set surrogate.batch_size=64"
      " --set sac.batch_size=32 --set sac.replay_capacity=4096"
      " --set train.max_steps=25 --set mbrl.max_episodes=3"
      " --set pt.max_episodes=2 --set pt.warm_start_steps=5";

  auto c = run_cli("collect --out " + root + "/data.csv --seed 3" + tiny);
  INFO(c.output);
  REQUIRE(c.code == 0);
  CHECK_THAT(c.output, ContainsSubstring("collected 30 sequences"));
  CHECK(fs::exists(root + "/data.csv"));
  CHECK(fs::exists(root + "/data.csv.stats.json"));

  c = run_cli("train-surrogate --data " + root + "/data.csv --out " + root + "/sur.bin --seed 3" + tiny);
  INFO(c.output);
  REQUIRE(c.code == 0);
  CHECK(fs::exists(root + "/sur.bin"));
  CHECK(fs::exists(root + "/sur.bin.curve.csv"));
  CHECK(data_rows(slurp(root + "/sur.bin.curve.csv")) == 20);

  c = run_cli("validate-surrogate --model " + root + "/sur.bin --data " + root +
              "/data.csv --horizon 5 --out " + root + "/val.csv --seed 3" + tiny);
  INFO(c.output);
  REQUIRE(c.code == 0);
  const std::string val = slurp(root + "/val.csv");
  CHECK(val.rfind("horizon,r,nrmse,rho_step,starts\n", 0) == 0);
  CHECK(data_rows(val) == 5);
  {
    std::istringstream is(val);
    std::string line;
    std::getline(is, line);
    while (std::getline(is, line)) {
      const auto fields = split_csv_line(line);
      REQUIRE(fields.size() == 5);
      const double r = parse_double_field(fields[1], "val.csv", 0);
      const double nrmse = parse_double_field(fields[2], "val.csv", 0);
      CHECK(r <= 1.0 + 1e-12);
      CHECK(r >= -1.0 - 1e-12);
      CHECK(nrmse >= 0.0);
    }
  }

  c = run_cli("train mbrl --model " + root + "/sur.bin --out " + root + "/runm --seed 5" + tiny);
  INFO(c.output);
  REQUIRE(c.code == 0);
  CHECK(fs::exists(root + "/runm/checkpoint.bin"));
  CHECK(fs::exists(root + "/runm/episodes.csv"));
  CHECK(fs::exists(root + "/runm/config.snapshot"));
  const auto runm = nlohmann::json::parse(slurp(root + "/runm/run.json"));
  CHECK(runm.at("mode") == "mbrl");
  CHECK(runm.at("plant_steps").get<long>() == 0);
  CHECK(runm.at("surrogate_steps").get<long>() > 0);
  REQUIRE(runm.contains("checkpoint_eval"));

  c = run_cli("post-train --checkpoint " + root + "/runm/checkpoint.bin --model " + root +
              "/sur.bin --out " + root + "/runp --seed 5" + tiny);
  INFO(c.output);
  REQUIRE(c.code == 0);
  const auto runp = nlohmann::json::parse(slurp(root + "/runp/run.json"));
  CHECK(runp.at("mode") == "post-training");
  CHECK(runp.at("plant_steps").get<long>() == runp.at("env_steps").get<long>());
  CHECK(runp.at("surrogate_steps").get<long>() == 0);
  // Loading the checkpoint must reproduce the producing run's policy score.
  REQUIRE(runp.contains("initial_eval"));
  CHECK(runp.at("initial_eval").get<double>() == runm.at("checkpoint_eval").get<double>());

  c = run_cli("evaluate --checkpoint " + root + "/runp/checkpoint.bin --out " + root +
              "/rune --duration 2 --seed 5" + tiny);
  INFO(c.output);
  REQUIRE(c.code == 0);
  const std::string rep1 = slurp(root + "/rune/evalreport.csv");
  CHECK(rep1.rfind("stability,cot,avg_speed,duration,distance,energy,fallen\n", 0) == 0);
  CHECK(data_rows(rep1) == 1);
  CHECK(fs::exists(root + "/rune/trace.csv"));
  CHECK(fs::exists(root + "/rune/feet.csv"));

  c = run_cli("evaluate --checkpoint " + root + "/runp/checkpoint.bin --out " + root +
              "/rune2 --duration 2 --seed 5" + tiny);
  INFO(c.output);
  REQUIRE(c.code == 0);
  CHECK(slurp(root + "/rune2/evalreport.csv") == rep1);

  c = run_cli("report --out " + root + "/report.csv " + root + "/rune " + root + "/rune2");
  INFO(c.output);
  REQUIRE(c.code == 0);
  const std::string agg = slurp(root + "/report.csv");
  CHECK(agg.rfind("metric,min,max,avg\n", 0) == 0);
  CHECK(data_rows(agg) == 7);
  {
    std::istringstream is(agg);
    std::string line;
    std::getline(is, line);
    while (std::getline(is, line)) {
      const auto fields = split_csv_line(line);
      REQUIRE(fields.size() == 4);
      // Two identical runs: min == max == avg.
      CHECK(fields[1] == fields[2]);
      CHECK(fields[2] == fields[3]);
    }
  }
}

TEST_CASE("gait export covers two periods with coherent tendon sums") {
  const std::string root = "test_tmp/cli_gait";
  std::error_code ec;
  fs::remove_all(root, ec);
  fs::create_directories(root);
  const auto c = run_cli("export-gait --out " + root + "/gait.csv");
  INFO(c.output);
  REQUIRE(c.code == 0);
  const std::string text = slurp(root + "/gait.csv");
  CHECK(text.rfind("t,alpha_b1,z_l1,alpha_b2,z_l2,d_fl_a", 0) == 0);
  REQUIRE(data_rows(text) == 33);  // two 0.8 s periods at 20 Hz, inclusive

  const ActionLimits limits;
  std::istringstream is(text);
  std::string line;
  std::getline(is, line);
  while (std::getline(is, line)) {
    const auto f = split_csv_line(line);
    REQUIRE(f.size() == 17);
    const double zl1 = parse_double_field(f[2], "gait.csv", 0);
    const double zl2 = parse_double_field(f[4], "gait.csv", 0);
    const double pair_z[4] = {zl1, zl2, zl1, zl2};  // FL, FR, RR, RL
    for (int leg = 0; leg < 4; ++leg) {
      double sum = 0.0;
      for (int k = 0; k < 3; ++k) sum += parse_double_field(f[5 + 3 * leg + k], "gait.csv", 0);
      CHECK(std::abs(sum - 3.0 * pair_z[leg] * limits.z_l_max) < 1e-9);
    }
  }
}

TEST_CASE("usage and config errors exit with code one, runtime faults with two") {
  const std::string root = "test_tmp/cli_err";
  std::error_code ec;
  fs::remove_all(root, ec);
  fs::create_directories(root);

  CHECK(run_cli("").code == 1);                                  // missing subcommand
  CHECK(run_cli("no-such-command").code == 1);
  CHECK(run_cli("train-surrogate").code == 1);                   // missing required --data
  CHECK(run_cli("train mbrl --out " + root + "/x").code == 1);   // mbrl without --model
  CHECK(run_cli("collect --set foo.bar=1").code == 1);           // unknown key
  CHECK(run_cli("collect --set dataset.n_sequences=0 --out " + root + "/d.csv").code == 1);
  CHECK(run_cli("evaluate --checkpoint " + root + "/missing.bin --out " + root + "/e").code == 1);
  CHECK(run_cli("report --out " + root + "/r.csv").code == 1);   // no runs given

  write_file(root + "/garbage.bin", "not a model");
  const auto c = run_cli("validate-surrogate --model " + root + "/garbage.bin --data " + root +
                         "/nope.csv --out " + root + "/v.csv");
  CHECK(c.code == 2);
}

TEST_CASE("the output root variable relocates relative paths") {
  const std::string root = "test_tmp/cli_outroot";
  std::error_code ec;
  fs::remove_all(root, ec);
  fs::create_directories(root);
  setenv("SOFTQ_OUT", root.c_str(), 1);
  const auto c = run_cli("export-gait --out sub/gait.csv");
  unsetenv("SOFTQ_OUT");
  INFO(c.output);
  REQUIRE(c.code == 0);
  CHECK(fs::exists(root + "/sub/gait.csv"));
}

TEST_CASE("run snapshots capture the effective configuration with full precedence") {
  const std::string root = "test_tmp/cli_snap";
  std::error_code ec;
  fs::remove_all(root, ec);
  fs::create_directories(root);
  write_file(root + "/cfg.ini",
             "[run]\n"
             "seed = 5\n"
             "eval_duration = 4\n"
             "[plant]\n"
             "mass = 2.5\n");
  const auto c = run_cli("train mfrl --config " + root + "/cfg.ini --set run.seed=6 --set plant.mass=3.5"
                         " --seed 7 --out " + root + "/run"
                         " --set mfrl.max_episodes=1 --set train.max_steps=5"
                         " --set pt.warm_start_steps=3"
                         " --set sac.batch_size=4 --set sac.replay_capacity=64");
  INFO(c.output);
  REQUIRE(c.code == 0);

  const std::string snap = slurp(root + "/run/config.snapshot");
  CHECK_THAT(snap, ContainsSubstring("seed = 7\n"));          // --seed beats --set beats file
  CHECK_THAT(snap, ContainsSubstring("mass = 3.5\n"));        // --set beats file
  CHECK_THAT(snap, ContainsSubstring("eval_duration = 4\n")); // file beats default
  CHECK_THAT(snap, ContainsSubstring("max_episodes = 1\n"));

  // The snapshot is itself a loadable config that reserializes to the same bytes.
  const RunConfig cfg = load_config(root + "/run/config.snapshot");
  CHECK(serialize_config(cfg) == snap);
  CHECK(cfg.seed == 7);
  CHECK(cfg.plant.mass == 3.5);
}
