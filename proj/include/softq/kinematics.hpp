#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include "softq/common.hpp"

namespace softq {

// Actuation limits shared by the gait generator, the plant and the CLI.
struct ActionLimits {
  double alpha_b_max = 1.0;       // rad, max bending angle
  double z_l_max = 0.01;          // m, max axial compression
  double disc_radius = 0.02;      // m, tendon disc radius R_d
  double alpha_r_forward = 0.0;   // rad, rotation-direction constant for forward walking
  double alpha_r_rear = kPi;      // rad, mirrored value used by the rear legs
};

struct LegPose {
  double alpha_b = 0.0;  // rad, bending angle in [0, alpha_b_max]
  double alpha_r = 0.0;  // rad, bending direction in [0, 2*pi)
  double z_l = 0.0;      // m, axial compression in [0, z_l_max]
};

struct TendonDisplacement {
  double d_a = 0.0;  // m
  double d_b = 0.0;
  double d_c = 0.0;
  double sum() const { return d_a + d_b + d_c; }
};

// Normalized per-pair command [alpha_b1, z_l1, alpha_b2, z_l2], each in [0,1].
// Pair 1 drives front-left + rear-right, pair 2 front-right + rear-left.
struct Action {
  std::array<double, 4> v{0.0, 0.0, 0.0, 0.0};

  Action() = default;
  Action(double ab1, double zl1, double ab2, double zl2) : v{ab1, zl1, ab2, zl2} { clamp(); }
  explicit Action(const std::array<double, 4>& a) : v(a) { clamp(); }

  double alpha_b1() const { return v[0]; }
  double z_l1() const { return v[1]; }
  double alpha_b2() const { return v[2]; }
  double z_l2() const { return v[3]; }

  void clamp() {
    for (double& x : v) x = clamp01(x);
  }

  bool operator==(const Action& o) const { return v == o.v; }
};

// Open-loop trot wave: half-sinusoid bending sweep, square-wave lift with
// smoothed transitions, pair 2 delayed by phase_offset_pair2 of the period.
struct GaitWaveSpec {
  double period = 0.8;               // s
  double alpha_b_amplitude = 0.5;    // rad, conservative hand-tuned sweep
  double z_l_swing = 0.01;           // m, lift during the swing half-cycle
  double phase_offset_pair2 = 0.5;   // fraction of period
  double transition_fraction = 0.1;  // fraction of period per z_l edge
};

namespace detail {

inline void check_range(double v, double lo, double hi, const char* name) {
  if (!(v >= lo && v <= hi))
    throw std::domain_error(std::string(name) + " out of range [" + format_double(lo) + ", " +
                            format_double(hi) + "]: " + format_double(v));
}

inline double smoothstep(double x) {
  x = clamp01(x);
  return x * x * (3.0 - 2.0 * x);
}

// Lift pulse on phase [0,1): zero on the stance half, rises just after 0.5,
// falls back to exactly zero at 1.  Support is the open interval (0.5, 1).
inline double lift_pulse(double phase, double transition) {
  if (phase <= 0.5) return 0.0;
  if (phase < 0.5 + transition) return smoothstep((phase - 0.5) / transition);
  if (phase <= 1.0 - transition) return 1.0;
  return 1.0 - smoothstep((phase - (1.0 - transition)) / transition);
}

// Bending sweep: rises 0 -> 1 over the stance half, returns over the swing half.
inline double bend_wave(double phase) { return 0.5 * (1.0 - std::cos(2.0 * kPi * phase)); }

}  // namespace detail

// Eq-3 style tendon kinematics: d_X = R_d * alpha_b * cos(alpha_r + phi_X) + z_l
// with phi_A = 0, phi_B = 2*pi/3, phi_C = 4*pi/3.
inline TendonDisplacement inverse_kinematics(const LegPose& pose, const ActionLimits& limits) {
  detail::check_range(pose.alpha_b, 0.0, limits.alpha_b_max, "alpha_b");
  detail::check_range(pose.z_l, 0.0, limits.z_l_max, "z_l");
  if (!(pose.alpha_r >= 0.0 && pose.alpha_r < 2.0 * kPi))
    throw std::domain_error("alpha_r out of range [0, 2*pi): " + format_double(pose.alpha_r));
  const double r = limits.disc_radius;
  TendonDisplacement d;
  d.d_a = r * pose.alpha_b * std::cos(pose.alpha_r) + pose.z_l;
  d.d_b = r * pose.alpha_b * std::cos(pose.alpha_r + 2.0 * kPi / 3.0) + pose.z_l;
  d.d_c = r * pose.alpha_b * std::cos(pose.alpha_r + 4.0 * kPi / 3.0) + pose.z_l;
  return d;
}

// Normalized action -> physical poses for (pair 1, pair 2), alpha_r fixed at
// the forward-walking constant.
inline std::pair<LegPose, LegPose> denormalize(const Action& a, const ActionLimits& limits) {
  LegPose p1{a.alpha_b1() * limits.alpha_b_max, limits.alpha_r_forward, a.z_l1() * limits.z_l_max};
  LegPose p2{a.alpha_b2() * limits.alpha_b_max, limits.alpha_r_forward, a.z_l2() * limits.z_l_max};
  return {p1, p2};
}

inline Action normalize(const LegPose& p1, const LegPose& p2, const ActionLimits& limits) {
  return Action(p1.alpha_b / limits.alpha_b_max, p1.z_l / limits.z_l_max,
                p2.alpha_b / limits.alpha_b_max, p2.z_l / limits.z_l_max);
}

// Expert trot command at time t (normalized action space).
inline Action expert_gait(double t, const GaitWaveSpec& spec, const ActionLimits& limits = ActionLimits{}) {
  if (!(spec.period > 0.0)) throw std::domain_error("gait period must be positive");
  if (!(spec.transition_fraction > 0.0 && spec.transition_fraction < 0.25))
    throw std::domain_error("gait transition_fraction must lie in (0, 0.25)");
  const double ab_norm = clamp01(spec.alpha_b_amplitude / limits.alpha_b_max);
  const double zl_norm = clamp01(spec.z_l_swing / limits.z_l_max);
  const double phase1 = wrap_unit(t / spec.period);
  const double phase2 = wrap_unit(phase1 + (1.0 - spec.phase_offset_pair2));
  const double w = spec.transition_fraction;
  return Action(ab_norm * detail::bend_wave(phase1), zl_norm * detail::lift_pulse(phase1, w),
                ab_norm * detail::bend_wave(phase2), zl_norm * detail::lift_pulse(phase2, w));
}

}  // namespace softq
