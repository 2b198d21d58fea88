#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "softq/dataset.hpp"
#include "softq/pipeline.hpp"
#include "softq/surrogate.hpp"

namespace softq {

// Everything a run needs, with defaults that match the documented values of
// each module.  eps2 of the reward is not a key: it is 1/v_ref by definition
// and derived when stage options are built.
struct RunConfig {
  PlantConfig plant{};
  GaitWaveSpec gait{};
  CollectOptions dataset{};
  double val_ratio = 0.2;
  SurrogateTrainConfig surrogate{};
  SacConfig sac{};
  RewardWeights reward = RewardWeights::surrogate_stage(0.2);

  double pt_critic_lr = 0.001;
  double pt_actor_lr = 0.0005;
  double pt_v_ref = 0.3;
  double pt_eps4 = 100.0;
  int pt_warm_start_steps = 32;
  int mbrl_max_episodes = 400;
  int pt_max_episodes = 400;
  int mfrl_max_episodes = 600;

  int max_steps = 100;
  int update_every = 1;
  ConvergenceConfig convergence{};
  double eval_duration = 5.0;
  std::uint64_t seed = 0;

  TrainOptions options_for(TrainMode mode) const {
    TrainOptions o;
    o.mode = mode;
    o.sac = sac;
    o.reward = reward;
    o.reward.eps2 = 1.0 / o.reward.v_ref;
    o.reward.sample_time = plant.sample_time;
    o.max_steps = max_steps;
    o.update_every = update_every;
    o.convergence = convergence;
    o.gait = gait;
    o.limits = plant.limits;
    switch (mode) {
      case TrainMode::mbrl:
        o.max_episodes = mbrl_max_episodes;
        break;
      case TrainMode::post_training:
        o.max_episodes = pt_max_episodes;
        o.warm_start_steps = pt_warm_start_steps;
        o.sac.critic_lr = pt_critic_lr;
        o.sac.actor_lr = pt_actor_lr;
        o.reward.v_ref = pt_v_ref;
        o.reward.eps2 = 1.0 / pt_v_ref;
        o.reward.eps4 = pt_eps4;
        break;
      case TrainMode::mfrl:
        o.max_episodes = mfrl_max_episodes;
        break;
    }
    return o;
  }

  CollectOptions collect_options() const {
    CollectOptions o = dataset;
    o.gait = gait;
    return o;
  }

  void validate() const {
    auto require = [](bool ok, const std::string& key, const std::string& what) {
      if (!ok) throw std::invalid_argument("config: " + key + " " + what);
    };
    require(plant.sample_time > 0.0, "plant.sample_time", "must be positive");
    require(plant.noise_var_v >= 0.0 && plant.noise_var_theta >= 0.0 && plant.noise_var_fn >= 0.0,
            "plant.noise_var_*", "must be nonnegative");
    require(plant.mass > 0.0, "plant.mass", "must be positive");
    require(plant.compute_delay >= 0.0, "plant.compute_delay", "must be nonnegative");
    require(plant.limits.alpha_b_max > 0.0 && plant.limits.z_l_max > 0.0, "limits.*", "must be positive");
    require(gait.period > 0.0, "gait.period", "must be positive");
    require(gait.transition_fraction > 0.0 && gait.transition_fraction < 0.25,
            "gait.transition_fraction", "must lie in (0,0.25)");
    require(dataset.n_sequences > 0, "dataset.n_sequences", "must be positive");
    require(dataset.steps_per_sequence > 0, "dataset.steps_per_sequence", "must be positive");
    require(dataset.expert_fraction >= 0.0 && dataset.expert_fraction <= 1.0,
            "dataset.expert_fraction", "must lie in [0,1]");
    require(val_ratio > 0.0 && val_ratio < 1.0, "dataset.val_ratio", "must lie in (0,1)");
    require(surrogate.epochs > 0 && surrogate.batch_size > 0, "surrogate.*", "must be positive");
    require(surrogate.learning_rate > 0.0, "surrogate.learning_rate", "must be positive");
    try {
      sac.validate();
    } catch (const std::exception& e) {
      throw std::invalid_argument(std::string("config: sac.* invalid: ") + e.what());
    }
    require(reward.v_ref > 0.0, "reward.v_ref", "must be positive");
    require(reward.t_mean >= 1, "reward.t_mean", "must be at least 1");
    require(pt_v_ref > 0.0, "pt.v_ref", "must be positive");
    require(pt_critic_lr > 0.0 && pt_actor_lr > 0.0, "pt.*_lr", "must be positive");
    require(pt_warm_start_steps >= 0 && pt_warm_start_steps <= max_steps, "pt.warm_start_steps",
            "must fit in an episode");
    require(mbrl_max_episodes > 0 && pt_max_episodes > 0 && mfrl_max_episodes > 0,
            "*.max_episodes", "must be positive");
    require(max_steps > 0, "train.max_steps", "must be positive");
    require(update_every > 0, "train.update_every", "must be positive");
    require(convergence.fraction > 0.0 && convergence.fraction <= 1.0, "convergence.fraction",
            "must lie in (0,1]");
    require(convergence.best_window > 0 && convergence.sustain > 0, "convergence.*", "must be positive");
    require(eval_duration > 0.0, "run.eval_duration", "must be positive");
  }
};

namespace detail {

struct ConfigKey {
  std::string name;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

inline double parse_double_value(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return x;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: key " + key + ": not a number: '" + v + "'");
  }
}

inline long long parse_int_value(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long long x = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return x;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: key " + key + ": not an integer: '" + v + "'");
  }
}

inline std::uint64_t parse_u64_value(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const unsigned long long x = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return static_cast<std::uint64_t>(x);
  } catch (const std::exception&) {
    throw std::invalid_argument("config: key " + key + ": not an unsigned integer: '" + v + "'");
  }
}

inline std::vector<ConfigKey> build_registry() {
  std::vector<ConfigKey> reg;
  auto dbl = [&reg](const std::string& name, auto member) {
    reg.push_back(ConfigKey{
        name, [member](const RunConfig& c) { return format_double(*member(const_cast<RunConfig&>(c))); },
        [name, member](RunConfig& c, const std::string& v) { *member(c) = parse_double_value(name, v); }});
  };
  auto inte = [&reg](const std::string& name, auto member) {
    reg.push_back(ConfigKey{
        name,
        [member](const RunConfig& c) { return std::to_string(*member(const_cast<RunConfig&>(c))); },
        [name, member](RunConfig& c, const std::string& v) {
          *member(c) = static_cast<int>(parse_int_value(name, v));
        }});
  };

  dbl("plant.sample_time", [](RunConfig& c) { return &c.plant.sample_time; });
  dbl("plant.fall_roll", [](RunConfig& c) { return &c.plant.fall_roll; });
  dbl("plant.fall_pitch", [](RunConfig& c) { return &c.plant.fall_pitch; });
  dbl("plant.prop_gain", [](RunConfig& c) { return &c.plant.prop_gain; });
  dbl("plant.prop_speed_limit", [](RunConfig& c) { return &c.plant.prop_speed_limit; });
  dbl("plant.stance_gate_fraction", [](RunConfig& c) { return &c.plant.stance_gate_fraction; });
  dbl("plant.relax_time_vx", [](RunConfig& c) { return &c.plant.relax_time_vx; });
  dbl("plant.yaw_gain", [](RunConfig& c) { return &c.plant.yaw_gain; });
  dbl("plant.relax_time_yaw", [](RunConfig& c) { return &c.plant.relax_time_yaw; });
  dbl("plant.lat_gain", [](RunConfig& c) { return &c.plant.lat_gain; });
  dbl("plant.relax_time_vy", [](RunConfig& c) { return &c.plant.relax_time_vy; });
  dbl("plant.tilt_gain_roll", [](RunConfig& c) { return &c.plant.tilt_gain_roll; });
  dbl("plant.tilt_gain_pitch", [](RunConfig& c) { return &c.plant.tilt_gain_pitch; });
  dbl("plant.tilt_omega", [](RunConfig& c) { return &c.plant.tilt_omega; });
  dbl("plant.tilt_zeta", [](RunConfig& c) { return &c.plant.tilt_zeta; });
  dbl("plant.contact_smoothing", [](RunConfig& c) { return &c.plant.contact_smoothing; });
  dbl("plant.actuator_slew_time", [](RunConfig& c) { return &c.plant.actuator_slew_time; });
  dbl("plant.noise_var_v", [](RunConfig& c) { return &c.plant.noise_var_v; });
  dbl("plant.noise_var_theta", [](RunConfig& c) { return &c.plant.noise_var_theta; });
  dbl("plant.noise_var_fn", [](RunConfig& c) { return &c.plant.noise_var_fn; });
  dbl("plant.mass", [](RunConfig& c) { return &c.plant.mass; });
  dbl("plant.energy_gain", [](RunConfig& c) { return &c.plant.energy_gain; });
  dbl("plant.compute_delay", [](RunConfig& c) { return &c.plant.compute_delay; });
  dbl("plant.hip_half_length", [](RunConfig& c) { return &c.plant.hip_half_length; });
  dbl("plant.hip_half_width", [](RunConfig& c) { return &c.plant.hip_half_width; });
  dbl("plant.leg_length", [](RunConfig& c) { return &c.plant.leg_length; });
  dbl("limits.alpha_b_max", [](RunConfig& c) { return &c.plant.limits.alpha_b_max; });
  dbl("limits.z_l_max", [](RunConfig& c) { return &c.plant.limits.z_l_max; });
  dbl("limits.disc_radius", [](RunConfig& c) { return &c.plant.limits.disc_radius; });
  dbl("gait.period", [](RunConfig& c) { return &c.gait.period; });
  dbl("gait.alpha_b_amplitude", [](RunConfig& c) { return &c.gait.alpha_b_amplitude; });
  dbl("gait.z_l_swing", [](RunConfig& c) { return &c.gait.z_l_swing; });
  dbl("gait.phase_offset_pair2", [](RunConfig& c) { return &c.gait.phase_offset_pair2; });
  dbl("gait.transition_fraction", [](RunConfig& c) { return &c.gait.transition_fraction; });
  inte("dataset.n_sequences", [](RunConfig& c) { return &c.dataset.n_sequences; });
  inte("dataset.steps_per_sequence", [](RunConfig& c) { return &c.dataset.steps_per_sequence; });
  dbl("dataset.expert_fraction", [](RunConfig& c) { return &c.dataset.expert_fraction; });
  dbl("dataset.ou_time_constant", [](RunConfig& c) { return &c.dataset.ou_time_constant; });
  dbl("dataset.ou_sigma", [](RunConfig& c) { return &c.dataset.ou_sigma; });
  dbl("dataset.ou_mean", [](RunConfig& c) { return &c.dataset.ou_mean; });
  dbl("dataset.val_ratio", [](RunConfig& c) { return &c.val_ratio; });
  inte("surrogate.epochs", [](RunConfig& c) { return &c.surrogate.epochs; });
  inte("surrogate.batch_size", [](RunConfig& c) { return &c.surrogate.batch_size; });
  dbl("surrogate.learning_rate", [](RunConfig& c) { return &c.surrogate.learning_rate; });
  dbl("sac.gamma", [](RunConfig& c) { return &c.sac.gamma; });
  dbl("sac.tau", [](RunConfig& c) { return &c.sac.tau; });
  inte("sac.batch_size", [](RunConfig& c) { return &c.sac.batch_size; });
  inte("sac.replay_capacity", [](RunConfig& c) { return &c.sac.replay_capacity; });
  dbl("sac.critic_lr", [](RunConfig& c) { return &c.sac.critic_lr; });
  dbl("sac.actor_lr", [](RunConfig& c) { return &c.sac.actor_lr; });
  dbl("sac.temperature_lr", [](RunConfig& c) { return &c.sac.temperature_lr; });
  dbl("sac.initial_temperature", [](RunConfig& c) { return &c.sac.initial_temperature; });
  dbl("sac.target_entropy", [](RunConfig& c) { return &c.sac.target_entropy; });
  inte("sac.policy_delay", [](RunConfig& c) { return &c.sac.policy_delay; });
  dbl("reward.eps1", [](RunConfig& c) { return &c.reward.eps1; });
  dbl("reward.eps3", [](RunConfig& c) { return &c.reward.eps3; });
  dbl("reward.eps4", [](RunConfig& c) { return &c.reward.eps4; });
  dbl("reward.eps5", [](RunConfig& c) { return &c.reward.eps5; });
  dbl("reward.v_ref", [](RunConfig& c) { return &c.reward.v_ref; });
  dbl("reward.sigma_threshold", [](RunConfig& c) { return &c.reward.sigma_threshold[0]; });
  inte("reward.t_mean", [](RunConfig& c) { return &c.reward.t_mean; });
  dbl("reward.episode_duration", [](RunConfig& c) { return &c.reward.episode_duration; });
  dbl("pt.critic_lr", [](RunConfig& c) { return &c.pt_critic_lr; });
  dbl("pt.actor_lr", [](RunConfig& c) { return &c.pt_actor_lr; });
  dbl("pt.v_ref", [](RunConfig& c) { return &c.pt_v_ref; });
  dbl("pt.eps4", [](RunConfig& c) { return &c.pt_eps4; });
  inte("pt.warm_start_steps", [](RunConfig& c) { return &c.pt_warm_start_steps; });
  inte("mbrl.max_episodes", [](RunConfig& c) { return &c.mbrl_max_episodes; });
  inte("pt.max_episodes", [](RunConfig& c) { return &c.pt_max_episodes; });
  inte("mfrl.max_episodes", [](RunConfig& c) { return &c.mfrl_max_episodes; });
  inte("train.max_steps", [](RunConfig& c) { return &c.max_steps; });
  inte("train.update_every", [](RunConfig& c) { return &c.update_every; });
  dbl("convergence.fraction", [](RunConfig& c) { return &c.convergence.fraction; });
  inte("convergence.best_window", [](RunConfig& c) { return &c.convergence.best_window; });
  inte("convergence.sustain", [](RunConfig& c) { return &c.convergence.sustain; });
  dbl("run.eval_duration", [](RunConfig& c) { return &c.eval_duration; });
  reg.push_back(ConfigKey{
      "run.seed", [](const RunConfig& c) { return std::to_string(c.seed); },
      [](RunConfig& c, const std::string& v) { c.seed = parse_u64_value("run.seed", v); }});
  return reg;
}

inline const std::vector<ConfigKey>& registry() {
  static const std::vector<ConfigKey> reg = build_registry();
  return reg;
}

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace detail

// The sigma_threshold key sets all four components; the registry exposes the
// scalar and this hook keeps the vector coherent.
inline void apply_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& k : detail::registry()) {
    if (k.name == key) {
      k.set(cfg, value);
      if (key == "reward.sigma_threshold")
        cfg.reward.sigma_threshold.fill(cfg.reward.sigma_threshold[0]);
      return;
    }
  }
  throw std::invalid_argument("config: unknown key '" + key + "'");
}

// Deterministic text form: sections in registry order, one key per line.
// Parsing this text back yields an identical config, and serializing that
// config reproduces the bytes.
inline std::string serialize_config(const RunConfig& cfg) {
  std::ostringstream os;
  std::string section;
  for (const auto& k : detail::registry()) {
    const auto dot = k.name.find('.');
    const std::string sec = k.name.substr(0, dot);
    if (sec != section) {
      if (!section.empty()) os << '\n';
      os << '[' << sec << "]\n";
      section = sec;
    }
    os << k.name.substr(dot + 1) << " = " << k.get(cfg) << '\n';
  }
  return os.str();
}

inline void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& origin) {
  std::istringstream is(text);
  std::string line, section;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw std::invalid_argument(origin + ":" + std::to_string(line_no) + ": malformed section header");
      section = detail::trim(t.substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(origin + ":" + std::to_string(line_no) + ": expected key = value");
    std::string key = detail::trim(t.substr(0, eq));
    const std::string value = detail::trim(t.substr(eq + 1));
    if (!section.empty() && key.find('.') == std::string::npos) key = section + "." + key;
    apply_config_value(cfg, key, value);
  }
}

inline RunConfig load_config(const std::string& path) {
  auto f = open_in(path);
  std::ostringstream ss;
  ss << f.rdbuf();
  RunConfig cfg;
  apply_config_text(cfg, ss.str(), path);
  return cfg;
}

}  // namespace softq
