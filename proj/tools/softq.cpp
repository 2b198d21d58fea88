// Command-line driver for the gait-learning pipeline: dataset collection,
// surrogate training/validation, the three RL regimes, evaluation, and
// report aggregation.  Exit codes: 0 success, 1 usage/config error,
// 2 runtime failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "softq/softq.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonOpts {
  std::string config_path;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "Config file (ini-style sections)");
  cmd->add_option("--set", opts.sets, "Override a config key, e.g. --set sac.batch_size=256")
      ->take_all();
  cmd->add_option("--seed", opts.seed, "Override run.seed");
}

softq::RunConfig make_config(const CommonOpts& opts) {
  softq::RunConfig cfg;
  if (!opts.config_path.empty()) cfg = softq::load_config(opts.config_path);
  for (const auto& kv : opts.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
    softq::apply_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (opts.seed) cfg.seed = *opts.seed;
  cfg.validate();
  return cfg;
}

// Relative output paths resolve against $SOFTQ_OUT when it is set.
std::string resolve_out(const std::string& path) {
  const char* root = std::getenv("SOFTQ_OUT");
  if (!root || *root == '\0' || fs::path(path).is_absolute()) return path;
  return (fs::path(root) / path).string();
}

void write_snapshot(const softq::RunConfig& cfg, const fs::path& dir) {
  auto f = softq::open_out((dir / "config.snapshot").string());
  f << softq::serialize_config(cfg);
}

fs::path make_run_dir(const std::string& out, const softq::RunConfig& cfg) {
  const fs::path dir(resolve_out(out));
  fs::create_directories(dir);
  write_snapshot(cfg, dir);
  return dir;
}

std::ofstream open_episode_csv(const fs::path& dir) {
  auto f = softq::open_out((dir / "episodes.csv").string());
  f << "episode,cum_reward,entropy,temperature,env_steps\n";
  return f;
}

void append_episode(std::ofstream& f, const softq::EpisodeRecord& e) {
  f << e.episode << ',' << softq::format_double(e.cum_reward) << ','
    << softq::format_double(e.entropy) << ',' << softq::format_double(e.temperature) << ','
    << e.env_steps << '\n';
  f.flush();
}

void write_run_json(const fs::path& dir, const softq::TrainingRun& run,
                    std::optional<double> initial_eval = std::nullopt) {
  json j;
  j["mode"] = softq::to_string(run.mode);
  j["episodes"] = run.episodes.size();
  j["env_steps"] = run.env_steps;
  j["plant_steps"] = run.plant_steps();
  j["surrogate_steps"] = run.surrogate_steps();
  j["updates"] = run.updates;
  j["converged_episode"] = run.converged_episode;
  j["env_steps_to_convergence"] = run.env_steps_to_convergence();
  j["wall_seconds"] = run.wall_seconds;
  if (std::isfinite(run.checkpoint_eval)) j["checkpoint_eval"] = run.checkpoint_eval;
  if (initial_eval) j["initial_eval"] = *initial_eval;
  auto f = softq::open_out((dir / "run.json").string());
  f << j.dump(2) << '\n';
}

void save_checkpoint(softq::SacAgent& agent, const fs::path& dir) {
  std::ofstream f(dir / "checkpoint.bin", std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + (dir / "checkpoint.bin").string());
  agent.save(f);
}

void restore_checkpoint(softq::SacAgent& agent, const std::string& path, const char* hint) {
  std::ifstream f(path, std::ios::binary);
  if (!f)
    throw std::invalid_argument("checkpoint '" + path + "' not found; " + hint);
  agent.restore(f);
}

softq::SurrogateModel load_model(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f)
    throw std::invalid_argument("surrogate model '" + path +
                                "' not found; run 'softq train-surrogate' first");
  return softq::SurrogateModel::load(f);
}

void write_eval_report(const softq::EvalReport& rep, const fs::path& path) {
  auto f = softq::open_out(path.string());
  f << "stability,cot,avg_speed,duration,distance,energy,fallen\n";
  f << softq::format_double(rep.stability) << ',' << softq::format_double(rep.cot) << ','
    << softq::format_double(rep.avg_speed) << ',' << softq::format_double(rep.duration) << ','
    << softq::format_double(rep.distance) << ',' << softq::format_double(rep.energy) << ','
    << (rep.fallen ? 1 : 0) << '\n';
}

int cmd_collect(const CommonOpts& common, const std::string& out) {
  const auto cfg = make_config(common);
  const auto data = softq::collect(cfg.plant, cfg.collect_options(), cfg.seed);
  const std::string path = resolve_out(out);
  if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
  softq::save(data, path);
  std::cout << "collected " << data.size() << " sequences (" << data.expert_count() << " expert, "
            << data.transition_count() << " transitions) -> " << path << "\n";
  return 0;
}

int cmd_train_surrogate(const CommonOpts& common, const std::string& data_path,
                        const std::string& out) {
  const auto cfg = make_config(common);
  const auto data = softq::load(data_path);
  auto [train, val] = softq::split(data, cfg.val_ratio, softq::derive_seed(cfg.seed, 0x5e1));
  softq::SurrogateModel model(train.stats, softq::derive_seed(cfg.seed, 0x50d));
  const auto hist = model.train(train, &val, cfg.surrogate, softq::derive_seed(cfg.seed, 0x7a1));

  const std::string path = resolve_out(out);
  if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
  {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    model.save(f);
  }
  {
    auto f = softq::open_out(path + ".curve.csv");
    f << "epoch,train_loss,val_loss\n";
    for (std::size_t e = 0; e < hist.train_loss.size(); ++e)
      f << e << ',' << softq::format_double(hist.train_loss[e]) << ','
        << softq::format_double(hist.val_loss.empty() ? 0.0 : hist.val_loss[e]) << '\n';
  }
  std::cout << "trained surrogate on " << train.transition_count() << " transitions, final loss "
            << hist.train_loss.back() << " (val " << hist.val_loss.back() << ") -> " << path << "\n";
  return 0;
}

int cmd_validate_surrogate(const CommonOpts& common, const std::string& model_path,
                           const std::string& data_path, int horizon, const std::string& out) {
  const auto cfg = make_config(common);
  const auto model = load_model(model_path);
  const auto data = softq::load(data_path);
  auto [train, val] = softq::split(data, cfg.val_ratio, softq::derive_seed(cfg.seed, 0x5e1));
  (void)train;
  const auto rep = softq::validate(
      [&model](const Eigen::MatrixXd& s, const Eigen::MatrixXd& a) {
        return model.predict_normalized(s, a);
      },
      val, horizon);

  const std::string path = resolve_out(out);
  if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
  auto f = softq::open_out(path);
  f << "horizon,r,nrmse,rho_step,starts\n";
  for (std::size_t t = 0; t < rep.r.size(); ++t)
    f << (t + 1) << ',' << softq::format_double(rep.r[t]) << ','
      << softq::format_double(rep.nrmse[t]) << ',' << softq::format_double(rep.rho_step[t]) << ','
      << rep.starts_at[t] << '\n';
  std::cout << "single-step R = " << rep.single_step_r()
            << ", NRMSE = " << rep.single_step_nrmse() << "; swept to horizon " << rep.r.size()
            << " -> " << path << "\n";
  return 0;
}

int cmd_train(const CommonOpts& common, const std::string& mode_name, const std::string& model_path,
              const std::string& out) {
  const auto cfg = make_config(common);
  const bool mbrl = mode_name == "mbrl";
  if (!mbrl && mode_name != "mfrl")
    throw std::invalid_argument("train mode must be 'mbrl' or 'mfrl', got '" + mode_name + "'");
  const auto dir = make_run_dir(out, cfg);
  auto episodes = open_episode_csv(dir);
  auto writer = [&episodes](const softq::EpisodeRecord& e) { append_episode(episodes, e); };

  softq::TrainingRun run;
  if (mbrl) {
    if (model_path.empty())
      throw std::invalid_argument("train mbrl requires --model (a trained surrogate)");
    const auto model = load_model(model_path);
    const auto opt = cfg.options_for(softq::TrainMode::mbrl);
    softq::SacAgent agent(opt.sac, softq::derive_seed(cfg.seed, 0xa6e));
    run = softq::run_mbrl(agent, model, cfg.plant, opt, cfg.seed, writer);
    save_checkpoint(agent, dir);
  } else {
    const auto opt = cfg.options_for(softq::TrainMode::mfrl);
    softq::SacAgent agent(opt.sac, softq::derive_seed(cfg.seed, 0xa6e));
    softq::ReferencePlant plant(cfg.plant);
    run = softq::run_mfrl(agent, plant, opt, cfg.seed, writer);
    save_checkpoint(agent, dir);
  }
  write_run_json(dir, run);
  std::cout << mode_name << ": " << run.episodes.size() << " episodes, " << run.env_steps
            << " env steps, converged at "
            << (run.converged_episode < 0 ? std::string("never")
                                          : std::to_string(run.converged_episode))
            << " -> " << dir.string() << "\n";
  return 0;
}

int cmd_post_train(const CommonOpts& common, const std::string& checkpoint,
                   const std::string& model_path, const std::string& out) {
  const auto cfg = make_config(common);
  const auto dir = make_run_dir(out, cfg);
  const auto model = load_model(model_path);
  const auto opt = cfg.options_for(softq::TrainMode::post_training);
  softq::SacAgent agent(opt.sac, softq::derive_seed(cfg.seed, 0xa6e));
  restore_checkpoint(agent, checkpoint, "run 'softq train mbrl' first");

  // Continuity probe: the loaded policy re-scored on the surrogate must match
  // the value the producing run recorded.
  const auto mbrl_opt = cfg.options_for(softq::TrainMode::mbrl);
  const double initial_eval =
      softq::surrogate_policy_eval(model, cfg.plant, agent, mbrl_opt.reward, mbrl_opt.max_steps,
                                   softq::derive_seed(cfg.seed, 0xe7a1));

  auto episodes = open_episode_csv(dir);
  auto writer = [&episodes](const softq::EpisodeRecord& e) { append_episode(episodes, e); };
  softq::ReferencePlant plant(cfg.plant);
  const auto run = softq::run_post_training(agent, plant, opt, cfg.seed, writer);
  save_checkpoint(agent, dir);
  write_run_json(dir, run, initial_eval);
  std::cout << "post-training: " << run.episodes.size() << " episodes, " << run.env_steps
            << " plant steps, initial surrogate eval " << initial_eval << " -> " << dir.string()
            << "\n";
  return 0;
}

int cmd_evaluate(const CommonOpts& common, const std::string& checkpoint, const std::string& out,
                 std::optional<double> duration) {
  auto cfg = make_config(common);
  if (duration) cfg.eval_duration = *duration;
  cfg.validate();
  const auto dir = make_run_dir(out, cfg);
  softq::SacAgent agent(cfg.sac, softq::derive_seed(cfg.seed, 0xa6e));
  restore_checkpoint(agent, checkpoint, "train a policy first");
  softq::ReferencePlant plant(cfg.plant);
  softq::EvalTrace trace;
  const auto rep = softq::evaluate(
      plant, [&agent](const softq::Obs& o) { return agent.act(o, true); }, cfg.eval_duration,
      softq::derive_seed(cfg.seed, 0xe0a1), &trace);
  write_eval_report(rep, dir / "evalreport.csv");
  softq::write_trace_csv(trace, (dir / "trace.csv").string());
  softq::write_feet_csv(trace, (dir / "feet.csv").string());
  std::cout << "evaluated " << rep.duration << " s: avg speed " << rep.avg_speed << " m/s, stability "
            << rep.stability << ", COT " << rep.cot << " -> " << dir.string() << "\n";
  return 0;
}

int cmd_export_gait(const CommonOpts& common, const std::string& out, double duration) {
  const auto cfg = make_config(common);
  if (duration <= 0.0) duration = 2.0 * cfg.gait.period;
  const std::string path = resolve_out(out);
  if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
  auto f = softq::open_out(path);
  f << "t,alpha_b1,z_l1,alpha_b2,z_l2";
  const char* legs[4] = {"fl", "fr", "rr", "rl"};
  for (const char* leg : legs) f << ",d_" << leg << "_a,d_" << leg << "_b,d_" << leg << "_c";
  f << '\n';
  const auto& lim = cfg.plant.limits;
  const int steps = static_cast<int>(std::llround(duration / cfg.plant.sample_time));
  for (int k = 0; k <= steps; ++k) {
    const double t = k * cfg.plant.sample_time;
    const auto a = softq::expert_gait(t, cfg.gait, lim);
    auto [front1, front2] = softq::denormalize(a, lim);
    softq::LegPose rear1 = front1, rear2 = front2;
    rear1.alpha_r = rear2.alpha_r = lim.alpha_r_rear;
    // leg order FL, FR, RR, RL; pair 1 = FL+RR, pair 2 = FR+RL
    const softq::TendonDisplacement d[4] = {
        softq::inverse_kinematics(front1, lim), softq::inverse_kinematics(front2, lim),
        softq::inverse_kinematics(rear1, lim), softq::inverse_kinematics(rear2, lim)};
    f << softq::format_double(t) << ',' << softq::format_double(a.alpha_b1()) << ','
      << softq::format_double(a.z_l1()) << ',' << softq::format_double(a.alpha_b2()) << ','
      << softq::format_double(a.z_l2());
    for (const auto& leg : d)
      f << ',' << softq::format_double(leg.d_a) << ',' << softq::format_double(leg.d_b) << ','
        << softq::format_double(leg.d_c);
    f << '\n';
  }
  std::cout << "exported " << (steps + 1) << " gait samples -> " << path << "\n";
  return 0;
}

int cmd_report(const std::string& out, const std::vector<std::string>& run_dirs) {
  if (run_dirs.empty()) throw std::invalid_argument("report needs at least one run directory");
  std::vector<std::string> metrics;
  std::vector<std::vector<double>> values;  // per metric, per run
  for (const auto& dir : run_dirs) {
    const std::string path = (fs::path(dir) / "evalreport.csv").string();
    auto f = softq::open_in(path);
    std::string header, row;
    if (!std::getline(f, header) || !std::getline(f, row))
      throw std::runtime_error(path + ": expected header and one data row");
    const auto names = softq::split_csv_line(header);
    const auto fields = softq::split_csv_line(row);
    if (names.size() != fields.size())
      throw std::runtime_error(path + ": header/row width mismatch");
    if (metrics.empty()) {
      metrics = names;
      values.assign(names.size(), {});
    } else if (names != metrics) {
      throw std::runtime_error(path + ": metric columns differ from the first report");
    }
    for (std::size_t i = 0; i < fields.size(); ++i)
      values[i].push_back(softq::parse_double_field(fields[i], path, 2));
  }

  const std::string path = resolve_out(out);
  if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
  auto f = softq::open_out(path);
  f << "metric,min,max,avg\n";
  for (std::size_t i = 0; i < metrics.size(); ++i) {
    double lo = values[i][0], hi = values[i][0], sum = 0.0;
    for (double v : values[i]) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      sum += v;
    }
    f << metrics[i] << ',' << softq::format_double(lo) << ',' << softq::format_double(hi) << ','
      << softq::format_double(sum / static_cast<double>(values[i].size())) << '\n';
  }
  std::cout << "aggregated " << run_dirs.size() << " runs -> " << path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Soft-quadruped gait learning pipeline"};
  app.require_subcommand(1);

  CommonOpts c_collect, c_trainsur, c_valsur, c_train, c_pt, c_eval, c_gait;
  std::string out_collect = "dataset.csv";
  auto* collect = app.add_subcommand("collect", "Collect plant transition sequences");
  collect->add_option("--out", out_collect, "Output dataset CSV");
  add_common(collect, c_collect);

  std::string ts_data, ts_out = "surrogate.bin";
  auto* trainsur = app.add_subcommand("train-surrogate", "Fit the dynamics surrogate");
  trainsur->add_option("--data", ts_data, "Dataset CSV from collect")->required();
  trainsur->add_option("--out", ts_out, "Output model file");
  add_common(trainsur, c_trainsur);

  std::string vs_model, vs_data, vs_out = "validation.csv";
  int vs_horizon = 1;
  auto* valsur = app.add_subcommand("validate-surrogate", "Score the surrogate on held-out data");
  valsur->add_option("--model", vs_model, "Trained surrogate")->required();
  valsur->add_option("--data", vs_data, "Dataset CSV")->required();
  valsur->add_option("--horizon", vs_horizon, "Maximum rollout horizon");
  valsur->add_option("--out", vs_out, "Output report CSV");
  add_common(valsur, c_valsur);

  std::string tr_mode, tr_model, tr_out = "run";
  auto* train = app.add_subcommand("train", "Train a policy (mbrl on the surrogate, mfrl on the plant)");
  train->add_option("mode", tr_mode, "mbrl or mfrl")->required();
  train->add_option("--model", tr_model, "Trained surrogate (mbrl only)");
  train->add_option("--out", tr_out, "Run directory");
  add_common(train, c_train);

  std::string pt_ckpt, pt_model, pt_out = "run-pt";
  auto* pt = app.add_subcommand("post-train", "Refine a surrogate-trained policy on the plant");
  pt->add_option("--checkpoint", pt_ckpt, "Agent checkpoint from train mbrl")->required();
  pt->add_option("--model", pt_model, "Trained surrogate (for the continuity probe)")->required();
  pt->add_option("--out", pt_out, "Run directory");
  add_common(pt, c_pt);

  std::string ev_ckpt, ev_out = "eval";
  std::optional<double> ev_duration;
  auto* eval = app.add_subcommand("evaluate", "Deterministic policy rollout with metrics");
  eval->add_option("--checkpoint", ev_ckpt, "Agent checkpoint")->required();
  eval->add_option("--out", ev_out, "Run directory");
  eval->add_option("--duration", ev_duration, "Rollout length in seconds");
  add_common(eval, c_eval);

  std::string eg_out = "gait.csv";
  double eg_duration = 0.0;
  auto* gait = app.add_subcommand("export-gait", "Export expert gait and tendon schedule");
  gait->add_option("--out", eg_out, "Output CSV");
  gait->add_option("--duration", eg_duration, "Seconds to export (default two periods)");
  add_common(gait, c_gait);

  std::string rp_out = "report.csv";
  std::vector<std::string> rp_dirs;
  auto* report = app.add_subcommand("report", "Aggregate evaluation runs into min/max/avg rows");
  report->add_option("--out", rp_out, "Output CSV");
  report->add_option("runs", rp_dirs, "Run directories containing evalreport.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (collect->parsed()) return cmd_collect(c_collect, out_collect);
    if (trainsur->parsed()) return cmd_train_surrogate(c_trainsur, ts_data, ts_out);
    if (valsur->parsed())
      return cmd_validate_surrogate(c_valsur, vs_model, vs_data, vs_horizon, vs_out);
    if (train->parsed()) return cmd_train(c_train, tr_mode, tr_model, tr_out);
    if (pt->parsed()) return cmd_post_train(c_pt, pt_ckpt, pt_model, pt_out);
    if (eval->parsed()) return cmd_evaluate(c_eval, ev_ckpt, ev_out, ev_duration);
    if (gait->parsed()) return cmd_export_gait(c_gait, eg_out, eg_duration);
    if (report->parsed()) return cmd_report(rp_out, rp_dirs);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
