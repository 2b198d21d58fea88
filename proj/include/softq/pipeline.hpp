#pragma once

#include <chrono>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "softq/metrics.hpp"
#include "softq/sac.hpp"
#include "softq/surrogate.hpp"

namespace softq {

enum class TrainMode { mbrl, post_training, mfrl };

inline const char* to_string(TrainMode m) {
  switch (m) {
    case TrainMode::mbrl: return "mbrl";
    case TrainMode::post_training: return "post-training";
    case TrainMode::mfrl: return "mfrl";
  }
  return "?";
}

// Plateau detector: an episode clears the bar when its cumulative reward is
// within `fraction` of the best seen over the trailing window; convergence is
// `sustain` consecutive clearing episodes.  A negative best flips the slack
// to the other side so plateaus below zero are still detectable.
struct ConvergenceConfig {
  double fraction = 0.9;
  int best_window = 50;
  int sustain = 20;
};

class ConvergenceDetector {
 public:
  explicit ConvergenceDetector(const ConvergenceConfig& cfg) : cfg_(cfg) {
    if (cfg.fraction <= 0.0 || cfg.fraction > 1.0)
      throw std::invalid_argument("ConvergenceDetector: fraction must lie in (0,1]");
    if (cfg.best_window < 1 || cfg.sustain < 1)
      throw std::invalid_argument("ConvergenceDetector: windows must be positive");
  }

  // Returns true once the plateau criterion is met.
  bool push(double episode_reward) {
    recent_.push_back(episode_reward);
    if (static_cast<int>(recent_.size()) > cfg_.best_window) recent_.pop_front();
    double best = -std::numeric_limits<double>::infinity();
    for (double r : recent_) best = std::max(best, r);
    best_ = best;
    const double threshold = best >= 0.0 ? cfg_.fraction * best : best / cfg_.fraction;
    streak_ = episode_reward >= threshold ? streak_ + 1 : 0;
    return streak_ >= cfg_.sustain;
  }

  double best() const { return best_; }

 private:
  ConvergenceConfig cfg_;
  std::deque<double> recent_;
  double best_ = -std::numeric_limits<double>::infinity();
  int streak_ = 0;
};

inline bool all_finite(const RobotState& s) {
  for (double x : s.to_array())
    if (!std::isfinite(x)) return false;
  return true;
}

struct EnvStep {
  RobotState obs;
  bool done = false;
  bool valid = true;  // false: state diverged, truncate without recording
  double energy = 0.0;
};

class PlantEnv {
 public:
  explicit PlantEnv(ReferencePlant& plant) : plant_(plant) {}

  RobotState reset(std::uint64_t seed) { return plant_.reset(seed); }

  EnvStep step(const Action& a) {
    const StepOutcome out = plant_.step(a);
    return EnvStep{out.next_state, out.fallen, true, out.energy_increment};
  }

  long steps_taken() const { return plant_.steps(); }
  ReferencePlant& plant() { return plant_; }

 private:
  ReferencePlant& plant_;
};

// Rolls episodes inside the learned dynamics model.  The clean prediction
// chain plays the role of the plant's internal truth; returned observations
// carry the same sensor-noise model the plant uses, and the fall check runs
// on the clean chain.
class SurrogateEnv {
 public:
  SurrogateEnv(const SurrogateModel& model, const PlantConfig& cfg)
      : model_(model), cfg_(cfg) {}

  RobotState reset(std::uint64_t seed) {
    state_ = RobotState{};
    rng_.seed(seed);
    normal_.reset();
    return state_;
  }

  EnvStep step(const Action& a) {
    const RobotState next = model_.predict(state_, a);
    if (!all_finite(next)) return EnvStep{state_, false, false, 0.0};
    state_ = next;
    ++steps_;
    return EnvStep{observe(), ReferencePlant::is_fallen(state_, cfg_), true, 0.0};
  }

  const RobotState& clean_state() const { return state_; }
  long steps_taken() const { return steps_; }

 private:
  RobotState observe() {
    RobotState obs = state_;
    auto draw = [&](double var) { return var > 0.0 ? std::sqrt(var) * normal_(rng_) : 0.0; };
    for (int i = 0; i < 3; ++i) obs.v[i] += draw(cfg_.noise_var_v);
    for (int i = 0; i < 3; ++i) obs.theta[i] += draw(cfg_.noise_var_theta);
    for (int i = 0; i < 4; ++i) obs.f_n[i] = clamp01(obs.f_n[i] + draw(cfg_.noise_var_fn));
    return obs;
  }

  SurrogateModel model_;
  PlantConfig cfg_;
  RobotState state_;
  long steps_ = 0;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

struct EpisodeRecord {
  int episode = 0;
  double cum_reward = 0.0;
  double entropy = 0.0;
  double temperature = 0.0;
  long env_steps = 0;  // cumulative after this episode
};

struct TrainingRun {
  TrainMode mode = TrainMode::mbrl;
  std::vector<EpisodeRecord> episodes;
  long env_steps = 0;
  long updates = 0;
  int converged_episode = -1;  // -1: budget exhausted first
  double checkpoint_eval = std::numeric_limits<double>::quiet_NaN();
  double wall_seconds = 0.0;

  long plant_steps() const { return mode == TrainMode::mbrl ? 0 : env_steps; }
  long surrogate_steps() const { return mode == TrainMode::mbrl ? env_steps : 0; }
  // Steps consumed up to convergence, or the full budget if it never came.
  long env_steps_to_convergence() const {
    if (converged_episode < 0) return env_steps;
    long n = 0;
    for (const auto& e : episodes) {
      n = e.env_steps;
      if (e.episode == converged_episode) break;
    }
    return n;
  }
};

struct TrainOptions {
  TrainMode mode = TrainMode::mbrl;
  SacConfig sac{};
  RewardWeights reward = RewardWeights::surrogate_stage();
  int max_episodes = 400;
  int max_steps = 100;
  int update_every = 1;       // env steps between gradient updates
  int warm_start_steps = 0;   // leading expert-controlled steps per episode
  ConvergenceConfig convergence{};
  GaitWaveSpec gait{};
  ActionLimits limits{};

  static TrainOptions mbrl_defaults() {
    TrainOptions o;
    o.mode = TrainMode::mbrl;
    o.reward = RewardWeights::surrogate_stage(0.2);
    o.max_episodes = 400;
    return o;
  }
  static TrainOptions post_training_defaults() {
    TrainOptions o;
    o.mode = TrainMode::post_training;
    o.sac.critic_lr = 0.001;
    o.sac.actor_lr = 0.0005;
    o.reward = RewardWeights::refinement_stage(0.3);
    o.max_episodes = 400;
    o.warm_start_steps = 32;  // 1.6 s of expert control
    return o;
  }
  static TrainOptions mfrl_defaults() {
    TrainOptions o;
    o.mode = TrainMode::mfrl;
    o.reward = RewardWeights::surrogate_stage(0.2);
    o.max_episodes = 600;
    return o;
  }

  void validate() const {
    sac.validate();
    if (max_episodes < 1 || max_steps < 1)
      throw std::invalid_argument("TrainOptions: episode and step budgets must be positive");
    if (update_every < 1) throw std::invalid_argument("TrainOptions: update_every must be positive");
    if (warm_start_steps < 0 || warm_start_steps > max_steps)
      throw std::invalid_argument("TrainOptions: warm_start_steps must fit in an episode");
    if (mode == TrainMode::post_training && warm_start_steps == 0)
      throw std::invalid_argument("TrainOptions: post-training requires a warm start");
    if (mode != TrainMode::post_training && warm_start_steps != 0)
      throw std::invalid_argument("TrainOptions: warm start is a post-training feature");
  }
};

// Core episode loop shared by all three regimes.  Episode e resets the
// environment with derive_seed(run_seed, e); the first warm_start_steps
// actions come from the expert wave, the rest from the stochastic policy.
// A fall ends the episode with done=true; running out of steps bootstraps.
template <typename Env>
TrainingRun train_agent(SacAgent& agent, Env& env, const TrainOptions& opt, std::uint64_t run_seed,
                        const std::function<void(const EpisodeRecord&)>& on_episode = nullptr) {
  opt.validate();
  const auto t0 = std::chrono::steady_clock::now();
  TrainingRun run;
  run.mode = opt.mode;
  RewardTracker tracker(opt.reward);
  ConvergenceDetector detector(opt.convergence);
  const double ts = opt.reward.sample_time;
  long since_update = 0;

  for (int episode = 0; episode < opt.max_episodes; ++episode) {
    RobotState obs = env.reset(derive_seed(run_seed, static_cast<std::uint64_t>(episode)));
    tracker.reset();
    Action prev;
    double cum = 0.0;

    for (int k = 0; k < opt.max_steps; ++k) {
      const Obs o = augment(obs, prev);
      const Action a = k < opt.warm_start_steps
                           ? expert_gait(k * ts, opt.gait, opt.limits)
                           : agent.act(o, false);
      const EnvStep out = env.step(a);
      if (!out.valid) break;  // model rollout diverged; drop the step
      ++run.env_steps;
      const double r = tracker.step(out.obs.v[0], a);
      cum += r;
      agent.observe(o, a, r, augment(out.obs, a), out.done);
      obs = out.obs;
      prev = a;
      if (++since_update >= opt.update_every && agent.ready()) {
        since_update = 0;
        agent.update();
        ++run.updates;
      }
      if (out.done) break;
    }

    EpisodeRecord rec;
    rec.episode = episode;
    rec.cum_reward = cum;
    rec.entropy = agent.entropy_estimate();
    rec.temperature = agent.temperature();
    rec.env_steps = run.env_steps;
    run.episodes.push_back(rec);
    if (on_episode) on_episode(rec);

    if (detector.push(cum)) {
      run.converged_episode = episode;
      break;
    }
  }

  run.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return run;
}

// Cumulative reward of the frozen (deterministic) policy over one surrogate
// episode.  Used to pin checkpoint fidelity across the MBRL -> PT handoff.
inline double surrogate_policy_eval(const SurrogateModel& model, const PlantConfig& plant_cfg,
                                    SacAgent& agent, const RewardWeights& reward, int max_steps,
                                    std::uint64_t seed) {
  SurrogateEnv env(model, plant_cfg);
  RewardTracker tracker(reward);
  RobotState obs = env.reset(seed);
  Action prev;
  double cum = 0.0;
  for (int k = 0; k < max_steps; ++k) {
    const Action a = agent.act(augment(obs, prev), true);
    const EnvStep out = env.step(a);
    if (!out.valid) break;
    cum += tracker.step(out.obs.v[0], a);
    obs = out.obs;
    prev = a;
    if (out.done) break;
  }
  return cum;
}

inline TrainingRun run_mbrl(SacAgent& agent, const SurrogateModel& model,
                            const PlantConfig& plant_cfg, const TrainOptions& opt,
                            std::uint64_t run_seed,
                            const std::function<void(const EpisodeRecord&)>& on_episode = nullptr) {
  if (opt.mode != TrainMode::mbrl) throw std::invalid_argument("run_mbrl: options are for another mode");
  SurrogateEnv env(model, plant_cfg);
  TrainingRun run = train_agent(agent, env, opt, run_seed, on_episode);
  run.checkpoint_eval = surrogate_policy_eval(model, plant_cfg, agent, opt.reward, opt.max_steps,
                                              derive_seed(run_seed, 0xe7a1));
  return run;
}

inline TrainingRun run_post_training(SacAgent& agent, ReferencePlant& plant, const TrainOptions& opt,
                                     std::uint64_t run_seed,
                                     const std::function<void(const EpisodeRecord&)>& on_episode = nullptr) {
  if (opt.mode != TrainMode::post_training)
    throw std::invalid_argument("run_post_training: options are for another mode");
  PlantEnv env(plant);
  return train_agent(agent, env, opt, run_seed, on_episode);
}

inline TrainingRun run_mfrl(SacAgent& agent, ReferencePlant& plant, const TrainOptions& opt,
                            std::uint64_t run_seed,
                            const std::function<void(const EpisodeRecord&)>& on_episode = nullptr) {
  if (opt.mode != TrainMode::mfrl) throw std::invalid_argument("run_mfrl: options are for another mode");
  PlantEnv env(plant);
  return train_agent(agent, env, opt, run_seed, on_episode);
}

}  // namespace softq
