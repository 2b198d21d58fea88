#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "softq/plant.hpp"
#include "softq/sac.hpp"

namespace softq {

// Truth-side record of one evaluation rollout.  Observed states are what the
// policy saw; the metric series come from the plant's noise-free internals.
struct EvalTrace {
  double sample_time = 0.05;
  std::vector<RobotState> observed;
  std::vector<RobotState> truth;
  std::vector<Action> actions;
  std::vector<double> yaw_rate;      // rad/s, truth
  std::vector<double> energy;        // J per step
  std::vector<std::array<Vec3, 4>> feet;
  bool fallen = false;

  std::size_t steps() const { return truth.size(); }
  double duration() const { return static_cast<double>(truth.size()) * sample_time; }
};

struct StabilityWeights {
  double w_time = 0.2;
  double w_yaw_rate = 1.0;
  double w_lateral = 1.0;
};

// Walk-quality score: reward for staying up, penalties for the worst yaw
// excursion rate and lateral slip seen anywhere in the episode.
inline double stability(const EvalTrace& trace, const StabilityWeights& w = {}) {
  if (trace.truth.empty()) throw std::invalid_argument("stability: empty trace");
  double max_yaw = 0.0, max_lat = 0.0;
  for (std::size_t k = 0; k < trace.truth.size(); ++k) {
    max_yaw = std::max(max_yaw, std::abs(trace.yaw_rate[k]));
    max_lat = std::max(max_lat, std::abs(trace.truth[k].v[1]));
  }
  return w.w_time * trace.duration() - w.w_yaw_rate * max_yaw - w.w_lateral * max_lat;
}

inline double forward_distance(const EvalTrace& trace) {
  double d = 0.0;
  for (const auto& s : trace.truth) d += s.v[0] * trace.sample_time;
  return d;
}

inline double total_energy(const EvalTrace& trace) {
  double e = 0.0;
  for (double x : trace.energy) e += x;
  return e;
}

inline double cost_of_transport(const EvalTrace& trace, double mass) {
  if (mass <= 0.0) throw std::invalid_argument("cost_of_transport: mass must be positive");
  const double d = forward_distance(trace);
  if (d <= 0.0) throw std::domain_error("cost_of_transport: no forward progress, COT undefined");
  return total_energy(trace) / (mass * d);
}

struct EvalReport {
  double stability = 0.0;
  double cot = std::numeric_limits<double>::infinity();  // J/kg/m
  double avg_speed = 0.0;   // m/s, truth v_x mean
  double duration = 0.0;    // s walked before fall or cutoff
  double distance = 0.0;    // m, net forward
  double energy = 0.0;      // J
  bool fallen = false;
};

inline EvalReport summarize(const EvalTrace& trace, double mass,
                            const StabilityWeights& w = {}) {
  EvalReport rep;
  rep.duration = trace.duration();
  rep.fallen = trace.fallen;
  if (trace.truth.empty()) return rep;
  rep.stability = stability(trace, w);
  rep.distance = forward_distance(trace);
  rep.energy = total_energy(trace);
  rep.avg_speed = rep.distance / rep.duration;
  if (rep.distance > 0.0) rep.cot = rep.energy / (mass * rep.distance);
  return rep;
}

// Rolls the plant under a policy for up to `duration` seconds.  The policy
// sees observed (noisy) states augmented with its previous action; all
// metrics use the internal truth series.
inline EvalTrace rollout(ReferencePlant& plant, const std::function<Action(const Obs&)>& policy,
                         double duration, std::uint64_t seed) {
  if (duration <= 0.0) throw std::invalid_argument("rollout: duration must be positive");
  EvalTrace trace;
  trace.sample_time = plant.config().sample_time;
  const int steps = static_cast<int>(std::llround(duration / trace.sample_time));
  RobotState obs = plant.reset(seed);
  Action prev;
  for (int k = 0; k < steps; ++k) {
    const Action a = policy(augment(obs, prev));
    const StepOutcome out = plant.step(a);
    trace.observed.push_back(out.next_state);
    trace.truth.push_back(plant.truth());
    trace.actions.push_back(a);
    trace.yaw_rate.push_back(plant.truth_yaw_rate());
    trace.energy.push_back(out.energy_increment);
    trace.feet.push_back(out.foot_positions);
    obs = out.next_state;
    prev = a;
    if (out.fallen) {
      trace.fallen = true;
      break;
    }
  }
  return trace;
}

inline EvalReport evaluate(ReferencePlant& plant, const std::function<Action(const Obs&)>& policy,
                           double duration, std::uint64_t seed, EvalTrace* trace_out = nullptr,
                           const StabilityWeights& w = {}) {
  EvalTrace trace = rollout(plant, policy, duration, seed);
  EvalReport rep = summarize(trace, plant.config().mass, w);
  if (trace_out) *trace_out = std::move(trace);
  return rep;
}

inline std::array<int, 4> binarize_contact(const Vec4& f_n, double threshold = 0.5) {
  std::array<int, 4> out{};
  for (int i = 0; i < 4; ++i) out[i] = f_n[i] >= threshold ? 1 : 0;
  return out;
}

// Constant-velocity Kalman filter with acceleration as the control input and
// a position fix as the measurement; one instance per horizontal axis.
struct KalmanConfig {
  double sample_time = 0.05;
  double q_pos = 0.01;  // m^2 per step
  double q_vel = 1.0;   // (m/s)^2 per step; sized for raw accelerometer feeds
  double r_pos = 0.1;   // m^2, time-of-flight range fixes
};

struct KalmanState {
  Eigen::Vector2d x = Eigen::Vector2d::Zero();      // position, velocity
  Eigen::Matrix2d P = Eigen::Matrix2d::Identity();
};

inline KalmanState kalman_predict(const KalmanState& k, double accel, const KalmanConfig& cfg) {
  const double ts = cfg.sample_time;
  Eigen::Matrix2d F;
  F << 1.0, ts, 0.0, 1.0;
  Eigen::Vector2d B;
  B << 0.5 * ts * ts, ts;
  Eigen::Matrix2d Q;
  Q << cfg.q_pos, 0.0, 0.0, cfg.q_vel;
  KalmanState out;
  out.x = F * k.x + B * accel;
  out.P = F * k.P * F.transpose() + Q;
  out.P = 0.5 * (out.P + out.P.transpose()).eval();
  return out;
}

inline KalmanState kalman_update(const KalmanState& k, double position, const KalmanConfig& cfg) {
  const Eigen::RowVector2d H(1.0, 0.0);
  const double s = (H * k.P * H.transpose())(0) + cfg.r_pos;
  const Eigen::Vector2d K = k.P * H.transpose() / s;
  KalmanState out;
  out.x = k.x + K * (position - (H * k.x)(0));
  const Eigen::Matrix2d A = Eigen::Matrix2d::Identity() - K * H;
  out.P = A * k.P * A.transpose() + K * cfg.r_pos * K.transpose();  // Joseph form
  out.P = 0.5 * (out.P + out.P.transpose()).eval();
  return out;
}

// One filter cycle; a non-finite measurement (sensor dropout) degrades to
// predict-only.
inline KalmanState kalman_step(const KalmanState& k, double accel, double position_meas,
                               const KalmanConfig& cfg) {
  KalmanState p = kalman_predict(k, accel, cfg);
  if (!std::isfinite(position_meas)) return p;
  return kalman_update(p, position_meas, cfg);
}

inline void write_trace_csv(const EvalTrace& trace, const std::string& path) {
  auto f = open_out(path);
  f << "t";
  const char* names[10] = {"theta_x", "theta_y", "theta_z", "v_x", "v_y",
                           "v_z",     "fn_fl",   "fn_fr",   "fn_rr", "fn_rl"};
  for (const char* n : names) f << ',' << n;
  f << ",a0,a1,a2,a3,fallen,energy";
  const char* legs[4] = {"fl", "fr", "rr", "rl"};
  for (const char* leg : legs) f << ",foot_" << leg << "_x,foot_" << leg << "_y,foot_" << leg << "_z";
  f << '\n';
  for (std::size_t k = 0; k < trace.steps(); ++k) {
    f << format_double(static_cast<double>(k + 1) * trace.sample_time);
    for (double x : trace.observed[k].to_array()) f << ',' << format_double(x);
    for (double x : trace.actions[k].v) f << ',' << format_double(x);
    f << ',' << (trace.fallen && k + 1 == trace.steps() ? 1 : 0);
    f << ',' << format_double(trace.energy[k]);
    for (const auto& foot : trace.feet[k])
      for (double x : foot) f << ',' << format_double(x);
    f << '\n';
  }
}

inline void write_feet_csv(const EvalTrace& trace, const std::string& path) {
  auto f = open_out(path);
  f << "t,leg_id,x,y,z\n";
  for (std::size_t k = 0; k < trace.steps(); ++k)
    for (int leg = 0; leg < 4; ++leg) {
      f << format_double(static_cast<double>(k + 1) * trace.sample_time) << ',' << leg;
      for (double x : trace.feet[k][static_cast<std::size_t>(leg)]) f << ',' << format_double(x);
      f << '\n';
    }
}

}  // namespace softq
