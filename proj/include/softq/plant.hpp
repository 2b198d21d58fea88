#pragma once

#include <array>
#include <chrono>
#include <cmath>
#include <random>
#include <stdexcept>
#include <thread>

#include "softq/kinematics.hpp"

namespace softq {

// 10-dim observable state: body angles, body velocities, normalized foot forces.
// Leg order everywhere: FL, FR, RR, RL.  Pair 1 = FL+RR, pair 2 = FR+RL.
struct RobotState {
  Vec3 theta{0.0, 0.0, 0.0};        // rad: roll (x), pitch (y), yaw (z)
  Vec3 v{0.0, 0.0, 0.0};            // m/s: v_x, v_y, v_z
  Vec4 f_n{1.0, 1.0, 1.0, 1.0};     // normalized foot forces in [0,1]

  std::array<double, 10> to_array() const {
    return {theta[0], theta[1], theta[2], v[0], v[1], v[2], f_n[0], f_n[1], f_n[2], f_n[3]};
  }
  static RobotState from_array(const std::array<double, 10>& a) {
    RobotState s;
    s.theta = {a[0], a[1], a[2]};
    s.v = {a[3], a[4], a[5]};
    s.f_n = {a[6], a[7], a[8], a[9]};
    return s;
  }
  bool operator==(const RobotState& o) const {
    return theta == o.theta && v == o.v && f_n == o.f_n;
  }
};

struct PlantConfig {
  double sample_time = 0.05;        // s
  ActionLimits limits{};

  // Fall thresholds on |roll| / |pitch| (strict inequality).
  double fall_roll = 0.6;           // rad
  double fall_pitch = 0.6;          // rad

  // Propulsion: v_x relaxes toward prop_gain * bending-rate * stance gate,
  // saturated at prop_speed_limit.  The gate is full at z_l = 0 and zero once
  // compression exceeds stance_gate_fraction of z_l_max (foot unloaded).
  double prop_gain = 0.10;          // (m/s) per (rad/s)
  double prop_speed_limit = 0.6;    // m/s
  double stance_gate_fraction = 0.5;
  double relax_time_vx = 0.5;       // s

  // Yaw rate follows the propulsion asymmetry of the two diagonal pairs.
  double yaw_gain = 1.0;            // (rad/s) per (m/s) asymmetry
  double relax_time_yaw = 0.3;      // s

  // Lateral velocity excited by the diagonal compression imbalance.
  double lat_gain = 0.02;           // m/s per unit imbalance
  double relax_time_vy = 0.2;       // s

  // Roll/pitch: damped second-order response to the diagonal imbalance.
  double tilt_gain_roll = 1.5;      // rad per unit imbalance
  double tilt_gain_pitch = 0.9;     // rad per unit imbalance
  double tilt_omega = 2.0;          // rad/s natural frequency
  double tilt_zeta = 1.0;           // damping ratio

  // Foot-force sensor dynamics: fraction of the gap to 1 - z_l/z_l_max closed
  // per step.
  double contact_smoothing = 0.96;

  // Tendon servos slew at a finite rate: one full actuator stroke takes this
  // many seconds, so commanded poses are tracked, never teleported.  0 disables.
  double actuator_slew_time = 0.4;  // s

  // Sensor noise variances, applied to the returned observation only.
  double noise_var_v = 0.002;       // (m/s)^2
  double noise_var_theta = 0.002;   // rad^2
  double noise_var_fn = 0.005;      // dimensionless^2

  double mass = 1.0;                // kg
  double energy_gain = 11.0;        // J per meter of total tendon travel
  double compute_delay = 0.0;       // s of artificial wall-clock cost per step

  // Body geometry for foot-point reconstruction.
  double hip_half_length = 0.06;    // m, x offset of hips
  double hip_half_width = 0.04;     // m, y offset of hips
  double leg_length = 0.10;         // m
};

struct StepOutcome {
  RobotState next_state;            // observed (noisy) state
  bool fallen = false;
  double energy_increment = 0.0;    // J
  std::array<Vec3, 4> foot_positions{};  // world frame, legs FL, FR, RR, RL
};

// Reduced-order trot plant.  Owns its RNG and an internal noise-free truth
// state; observations add Gaussian sensor noise on top of the truth.
class ReferencePlant {
 public:
  explicit ReferencePlant(const PlantConfig& config = PlantConfig{}) : cfg_(config) { reset(0); }

  const PlantConfig& config() const { return cfg_; }

  RobotState reset(std::uint64_t seed) {
    truth_ = RobotState{};
    roll_rate_ = pitch_rate_ = yaw_rate_ = 0.0;
    prev_pose1_ = LegPose{};
    prev_pose2_ = LegPose{};
    prev_mean_z_ = 0.0;
    for (auto& t : prev_tendons_) t = TendonDisplacement{};
    position_ = {0.0, 0.0, cfg_.leg_length};
    fallen_ = false;
    steps_ = 0;
    rng_.seed(seed);
    normal_.reset();
    return truth_;
  }

  StepOutcome step(const Action& action) {
    if (fallen_) throw std::logic_error("step() called on a fallen plant; episode must terminate");
    const double ts = cfg_.sample_time;
    auto [c1, c2] = denormalize(action, cfg_.limits);
    const LegPose p1 = slew_toward(prev_pose1_, c1);
    const LegPose p2 = slew_toward(prev_pose2_, c2);

    const double db1 = (p1.alpha_b - prev_pose1_.alpha_b) / ts;
    const double db2 = (p2.alpha_b - prev_pose2_.alpha_b) / ts;
    const double z1n = p1.z_l / cfg_.limits.z_l_max;
    const double z2n = p2.z_l / cfg_.limits.z_l_max;

    const double prop1 = cfg_.prop_gain * db1 * stance_gate(z1n);
    const double prop2 = cfg_.prop_gain * db2 * stance_gate(z2n);
    const double raw = 0.5 * (prop1 + prop2);
    const double prop = cfg_.prop_speed_limit * std::tanh(raw / cfg_.prop_speed_limit);

    truth_.v[0] += relax_gain(cfg_.relax_time_vx) * (prop - truth_.v[0]);

    const double imbalance = z1n - z2n;  // diagonal compression imbalance
    truth_.v[1] += relax_gain(cfg_.relax_time_vy) * (cfg_.lat_gain * imbalance - truth_.v[1]);

    yaw_rate_ += relax_gain(cfg_.relax_time_yaw) * (cfg_.yaw_gain * (prop1 - prop2) - yaw_rate_);
    truth_.theta[2] += yaw_rate_ * ts;

    tilt_step(truth_.theta[0], roll_rate_, cfg_.tilt_gain_roll * imbalance, ts);
    tilt_step(truth_.theta[1], pitch_rate_, cfg_.tilt_gain_pitch * imbalance, ts);

    const double mean_z = 0.5 * (p1.z_l + p2.z_l);
    truth_.v[2] = -(mean_z - prev_mean_z_) / ts;

    const std::array<double, 4> leg_zn = {z1n, z2n, z1n, z2n};
    for (int i = 0; i < 4; ++i)
      truth_.f_n[i] += cfg_.contact_smoothing * ((1.0 - leg_zn[i]) - truth_.f_n[i]);

    StepOutcome out;
    out.energy_increment = tendon_energy(p1, p2);

    const double cy = std::cos(truth_.theta[2]);
    const double sy = std::sin(truth_.theta[2]);
    position_[0] += (cy * truth_.v[0] - sy * truth_.v[1]) * ts;
    position_[1] += (sy * truth_.v[0] + cy * truth_.v[1]) * ts;
    position_[2] = cfg_.leg_length - mean_z;
    out.foot_positions = foot_points(p1, p2, cy, sy);

    fallen_ = is_fallen(truth_, cfg_);
    out.fallen = fallen_;

    out.next_state = observe();

    prev_pose1_ = p1;
    prev_pose2_ = p2;
    prev_mean_z_ = mean_z;
    ++steps_;

    if (cfg_.compute_delay > 0.0)
      std::this_thread::sleep_for(std::chrono::duration<double>(cfg_.compute_delay));
    return out;
  }

  static bool is_fallen(const RobotState& s, const PlantConfig& cfg) {
    return std::abs(s.theta[0]) > cfg.fall_roll || std::abs(s.theta[1]) > cfg.fall_pitch;
  }

  const RobotState& truth() const { return truth_; }
  double truth_yaw_rate() const { return yaw_rate_; }
  const Vec3& body_position() const { return position_; }
  bool fallen() const { return fallen_; }
  long steps() const { return steps_; }

 private:
  double relax_gain(double tau) const { return 1.0 - std::exp(-cfg_.sample_time / tau); }

  static double step_toward(double x, double target, double cap) {
    const double d = target - x;
    if (d > cap) return x + cap;
    if (d < -cap) return x - cap;
    return target;
  }

  // Steering alpha_r is positional; bend and compression are rate-limited.
  LegPose slew_toward(const LegPose& from, const LegPose& cmd) const {
    if (cfg_.actuator_slew_time <= 0.0) return cmd;
    const double f = cfg_.sample_time / cfg_.actuator_slew_time;
    LegPose out = cmd;
    out.alpha_b = step_toward(from.alpha_b, cmd.alpha_b, cfg_.limits.alpha_b_max * f);
    out.z_l = step_toward(from.z_l, cmd.z_l, cfg_.limits.z_l_max * f);
    return out;
  }

  double stance_gate(double zn) const {
    double g = 1.0 - zn / cfg_.stance_gate_fraction;
    return g < 0.0 ? 0.0 : (g > 1.0 ? 1.0 : g);
  }

  void tilt_step(double& angle, double& rate, double target, double ts) const {
    const double w = cfg_.tilt_omega;
    const double acc = w * w * (target - angle) - 2.0 * cfg_.tilt_zeta * w * rate;
    rate += acc * ts;
    angle += rate * ts;
  }

  double tendon_energy(const LegPose& p1, const LegPose& p2) {
    const std::array<const LegPose*, 4> pair_pose = {&p1, &p2, &p1, &p2};
    const std::array<double, 4> leg_alpha_r = {cfg_.limits.alpha_r_forward, cfg_.limits.alpha_r_forward,
                                               cfg_.limits.alpha_r_rear, cfg_.limits.alpha_r_rear};
    double travel = 0.0;
    for (int i = 0; i < 4; ++i) {
      LegPose leg{pair_pose[i]->alpha_b, leg_alpha_r[i], pair_pose[i]->z_l};
      TendonDisplacement d = inverse_kinematics(leg, cfg_.limits);
      travel += std::abs(d.d_a - prev_tendons_[i].d_a) + std::abs(d.d_b - prev_tendons_[i].d_b) +
                std::abs(d.d_c - prev_tendons_[i].d_c);
      prev_tendons_[i] = d;
    }
    return cfg_.energy_gain * travel;
  }

  std::array<Vec3, 4> foot_points(const LegPose& p1, const LegPose& p2, double cy, double sy) const {
    const std::array<const LegPose*, 4> pair_pose = {&p1, &p2, &p1, &p2};
    const std::array<double, 4> hx = {cfg_.hip_half_length, cfg_.hip_half_length,
                                      -cfg_.hip_half_length, -cfg_.hip_half_length};
    const std::array<double, 4> hy = {cfg_.hip_half_width, -cfg_.hip_half_width,
                                      -cfg_.hip_half_width, cfg_.hip_half_width};
    const std::array<double, 4> leg_alpha_r = {cfg_.limits.alpha_r_forward, cfg_.limits.alpha_r_forward,
                                               cfg_.limits.alpha_r_rear, cfg_.limits.alpha_r_rear};
    std::array<Vec3, 4> feet;
    for (int i = 0; i < 4; ++i) {
      const LegPose* p = pair_pose[i];
      const double sx = std::sin(p->alpha_b) * std::cos(leg_alpha_r[i]);
      const double sy_off = std::sin(p->alpha_b) * std::sin(leg_alpha_r[i]);
      const double bx = hx[i] + cfg_.leg_length * sx;
      const double by = hy[i] + cfg_.leg_length * sy_off;
      feet[i][0] = position_[0] + cy * bx - sy * by;
      feet[i][1] = position_[1] + sy * bx + cy * by;
      feet[i][2] = position_[2] - (cfg_.leg_length - p->z_l) * std::cos(p->alpha_b);
    }
    return feet;
  }

  RobotState observe() {
    // Noise draws happen every step in a fixed order so the stream is
    // identical whether or not individual variances are zero.
    const double sv = std::sqrt(cfg_.noise_var_v);
    const double st = std::sqrt(cfg_.noise_var_theta);
    const double sf = std::sqrt(cfg_.noise_var_fn);
    RobotState obs = truth_;
    for (int i = 0; i < 3; ++i) obs.v[i] += sv * normal_(rng_);
    for (int i = 0; i < 3; ++i) obs.theta[i] += st * normal_(rng_);
    for (int i = 0; i < 4; ++i) obs.f_n[i] = clamp01(obs.f_n[i] + sf * normal_(rng_));
    return obs;
  }

  PlantConfig cfg_;
  RobotState truth_;
  double roll_rate_ = 0.0, pitch_rate_ = 0.0, yaw_rate_ = 0.0;
  LegPose prev_pose1_, prev_pose2_;
  double prev_mean_z_ = 0.0;
  std::array<TendonDisplacement, 4> prev_tendons_{};
  Vec3 position_{0.0, 0.0, 0.0};
  bool fallen_ = false;
  long steps_ = 0;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace softq
