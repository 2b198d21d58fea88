#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <numeric>
#include <istream>
#include <ostream>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "softq/kinematics.hpp"
#include "softq/mlp.hpp"
#include "softq/plant.hpp"

namespace softq {

// RL observation: sensor state plus the previous action.
using Obs = Eigen::Matrix<double, 14, 1>;

inline Obs augment(const RobotState& s, const Action& prev_action) {
  Obs o;
  const auto arr = s.to_array();
  for (int d = 0; d < 10; ++d) o(d) = arr[d];
  for (int d = 0; d < 4; ++d) o(10 + d) = prev_action.v[d];
  return o;
}

// Weights of the per-step gait reward.  eps2 is conventionally 1/v_ref so the
// speed term spans [0,1]; the factories keep that coupling.
struct RewardWeights {
  double eps1 = 5.0;
  double eps2 = 5.0;
  double eps3 = 0.25;
  double eps4 = 10.0;
  double eps5 = 3.0;
  double v_ref = 0.2;                                     // m/s
  std::array<double, 4> sigma_threshold{0.5, 0.5, 0.5, 0.5};
  int t_mean = 20;          // steps in the mean-action window
  double sample_time = 0.05;  // s
  double episode_duration = 5.0;  // s, scales the survival bonus

  static RewardWeights surrogate_stage(double v_ref = 0.2) {
    RewardWeights w;
    w.v_ref = v_ref;
    w.eps2 = 1.0 / v_ref;
    return w;
  }
  static RewardWeights refinement_stage(double v_ref = 0.3) {
    RewardWeights w;
    w.v_ref = v_ref;
    w.eps2 = 1.0 / v_ref;
    w.eps4 = 100.0;
    return w;
  }
};

// One reward term evaluation from explicit history entries.  The smoothness
// term is the plain second difference of the last three actions; the posture
// term penalizes only the part of each component above its threshold, so a
// low gait is free to modulate while deep bends stay expensive.
inline double gait_reward(const RewardWeights& w, double v_x, const std::array<double, 4>& a,
                          const std::array<double, 4>& a_prev, const std::array<double, 4>& a_prev2,
                          const std::array<double, 4>& window_mean) {
  double accel_sq = 0.0, over_sq = 0.0, dev_sq = 0.0;
  for (int j = 0; j < 4; ++j) {
    const double dd = a[j] - 2.0 * a_prev[j] + a_prev2[j];
    accel_sq += dd * dd;
    const double over = std::max(a[j] - w.sigma_threshold[j], 0.0);
    over_sq += over * over;
    const double dev = a[j] - window_mean[j];
    dev_sq += dev * dev;
  }
  return w.eps1 * w.sample_time / w.episode_duration + (1.0 - w.eps2 * std::abs(v_x - w.v_ref)) -
         w.eps3 * std::sqrt(accel_sq) - w.eps4 * std::sqrt(over_sq) - w.eps5 * dev_sq;
}

// Maintains the action history a reward evaluation needs.  The window holds
// the current action as its newest entry and is zero-padded before the
// episode has produced t_mean actions.
class RewardTracker {
 public:
  explicit RewardTracker(const RewardWeights& w) : w_(w) {
    if (w.t_mean < 1) throw std::invalid_argument("RewardTracker: t_mean must be at least 1");
    reset();
  }

  const RewardWeights& weights() const { return w_; }

  void reset() {
    window_.assign(static_cast<std::size_t>(w_.t_mean), {0.0, 0.0, 0.0, 0.0});
    prev_ = prev2_ = {0.0, 0.0, 0.0, 0.0};
  }

  double step(double v_x, const Action& a) {
    window_.pop_front();
    window_.push_back(a.v);
    std::array<double, 4> mean{};
    for (const auto& e : window_)
      for (int j = 0; j < 4; ++j) mean[j] += e[j];
    for (int j = 0; j < 4; ++j) mean[j] /= static_cast<double>(w_.t_mean);
    const double r = gait_reward(w_, v_x, a.v, prev_, prev2_, mean);
    prev2_ = prev_;
    prev_ = a.v;
    return r;
  }

 private:
  RewardWeights w_;
  std::deque<std::array<double, 4>> window_;
  std::array<double, 4> prev_{}, prev2_{};
};

struct SacConfig {
  double gamma = 0.99;
  double tau = 0.005;
  int batch_size = 4096;
  int replay_capacity = 16384;
  double critic_lr = 0.002;
  double actor_lr = 0.001;
  double temperature_lr = 0.001;
  double initial_temperature = 0.1;
  double target_entropy = -4.0;
  int policy_delay = 3;  // actor/temperature update every n-th update call
  std::vector<int> actor_hidden{256, 128, 128};
  std::vector<int> critic_obs_hidden{128, 128};
  std::vector<int> critic_act_hidden{128};
  std::vector<int> critic_head_hidden{32};

  void validate() const {
    if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("SacConfig: gamma must lie in (0,1)");
    if (!(tau > 0.0 && tau <= 1.0)) throw std::invalid_argument("SacConfig: tau must lie in (0,1]");
    if (batch_size < 1) throw std::invalid_argument("SacConfig: batch_size must be positive");
    if (replay_capacity < batch_size)
      throw std::invalid_argument("SacConfig: replay_capacity must hold at least one batch");
    if (policy_delay < 1) throw std::invalid_argument("SacConfig: policy_delay must be at least 1");
    if (critic_lr <= 0.0 || actor_lr <= 0.0 || temperature_lr <= 0.0)
      throw std::invalid_argument("SacConfig: learning rates must be positive");
    if (!(target_entropy < 0.0)) throw std::invalid_argument("SacConfig: target_entropy must be negative");
  }
};

struct ReplayEntry {
  Obs s;
  std::array<double, 4> a;
  double r = 0.0;
  Obs s_next;
  bool done = false;
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("ReplayBuffer: zero capacity");
    data_.reserve(capacity);
  }

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return data_.size(); }
  std::uint64_t total_pushed() const { return pushed_; }

  void push(const ReplayEntry& e) {
    if (data_.size() < capacity_) {
      data_.push_back(e);
    } else {
      data_[static_cast<std::size_t>(pushed_ % capacity_)] = e;
    }
    ++pushed_;
  }

  // i-th oldest entry still held.
  const ReplayEntry& at(std::size_t i) const {
    if (i >= data_.size()) throw std::out_of_range("ReplayBuffer: index past size");
    if (data_.size() < capacity_) return data_[i];
    return data_[static_cast<std::size_t>((pushed_ + i) % capacity_)];
  }

  // Uniform sample without replacement (partial Fisher-Yates over indices).
  std::vector<std::size_t> sample_indices(std::size_t n, std::mt19937_64& rng) const {
    if (n > data_.size()) throw std::invalid_argument("ReplayBuffer: sample larger than contents");
    std::vector<std::size_t> idx(data_.size());
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
      std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(n);
    return idx;
  }

  const ReplayEntry& raw(std::size_t slot) const { return data_[slot]; }

 private:
  std::size_t capacity_;
  std::uint64_t pushed_ = 0;
  std::vector<ReplayEntry> data_;
};

// Tanh-squashed Gaussian policy.  The network emits 4 means and 4 raw spread
// values; spreads pass through softplus after a hard [-10,10] clamp whose
// outside region carries zero gradient.  Actions live in [0,1]^4 via
// a = (tanh(z) + 1) / 2.
class GaussianActor {
 public:
  GaussianActor() = default;
  GaussianActor(const std::vector<int>& hidden, std::uint64_t seed) {
    std::vector<int> sizes{14};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(8);
    std::vector<Activation> acts(hidden.size(), Activation::relu);
    acts.push_back(Activation::linear);
    net_ = Mlp(sizes, acts, seed);
  }

  Mlp& net() { return net_; }
  const Mlp& net() const { return net_; }

  struct Sample {
    Eigen::MatrixXd actions;   // 4 x n, in [0,1]
    Eigen::RowVectorXd log_prob;  // 1 x n
    // caches for the actor gradient
    Eigen::MatrixXd mean, sigma, xi, z, u, raw;  // 4 x n each except raw (8 x n)
    Mlp::Workspace ws;
  };

  static constexpr double kRawClamp = 10.0;

  Sample sample_batch(const Eigen::MatrixXd& obs, std::mt19937_64& rng) const {
    Sample s;
    const Eigen::Index n = obs.cols();
    s.raw = net_.forward(obs, s.ws);
    if (!s.raw.allFinite()) throw std::runtime_error("GaussianActor: non-finite network output");
    s.mean = s.raw.topRows(4);
    const Eigen::MatrixXd clamped = s.raw.bottomRows(4).cwiseMax(-kRawClamp).cwiseMin(kRawClamp);
    s.sigma = clamped.unaryExpr([](double c) { return detail::softplus(c); });
    s.xi.resize(4, n);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (Eigen::Index c = 0; c < n; ++c)
      for (int d = 0; d < 4; ++d) s.xi(d, c) = gauss(rng);
    s.z = s.mean + s.sigma.cwiseProduct(s.xi);
    s.u = s.z.array().tanh().matrix();
    s.actions = 0.5 * (s.u.array() + 1.0).matrix();
    s.log_prob = log_prob_from(s.sigma, s.xi, s.z);
    return s;
  }

  Eigen::MatrixXd mean_action(const Eigen::MatrixXd& obs) const {
    const Eigen::MatrixXd out = net_.forward(obs);
    if (!out.allFinite()) throw std::runtime_error("GaussianActor: non-finite network output");
    return 0.5 * (out.topRows(4).array().tanh() + 1.0).matrix();
  }

  // log pi(a|s) of the squashed sample, using the stable identity
  // log(1 - tanh(z)^2) = 2 (log 2 - z - softplus(-2z)).
  static Eigen::RowVectorXd log_prob_from(const Eigen::MatrixXd& sigma, const Eigen::MatrixXd& xi,
                                          const Eigen::MatrixXd& z) {
    const double half_log_2pi = 0.5 * std::log(2.0 * kPi);
    Eigen::RowVectorXd lp = Eigen::RowVectorXd::Zero(z.cols());
    for (Eigen::Index c = 0; c < z.cols(); ++c) {
      double acc = 0.0;
      for (int d = 0; d < 4; ++d) {
        const double zz = z(d, c);
        const double log_da_dz = std::log(2.0) - 2.0 * zz - 2.0 * detail::softplus(-2.0 * zz);
        acc += -half_log_2pi - std::log(sigma(d, c)) - 0.5 * xi(d, c) * xi(d, c) - log_da_dz;
      }
      lp(c) = acc;
    }
    return lp;
  }

 private:
  Mlp net_;
};

// Q network with separate observation and action feature paths merged by a
// small head.
class Critic {
 public:
  Critic() = default;
  Critic(const std::vector<int>& obs_hidden, const std::vector<int>& act_hidden,
         const std::vector<int>& head_hidden, std::uint64_t seed) {
    auto relu_chain = [](int in, const std::vector<int>& hidden) {
      std::vector<int> sizes{in};
      sizes.insert(sizes.end(), hidden.begin(), hidden.end());
      return sizes;
    };
    const auto obs_sizes = relu_chain(14, obs_hidden);
    const auto act_sizes = relu_chain(4, act_hidden);
    obs_path_ = Mlp(obs_sizes, std::vector<Activation>(obs_hidden.size(), Activation::relu),
                    derive_seed(seed, 1));
    act_path_ = Mlp(act_sizes, std::vector<Activation>(act_hidden.size(), Activation::relu),
                    derive_seed(seed, 2));
    std::vector<int> head_sizes{obs_hidden.back() + act_hidden.back()};
    head_sizes.insert(head_sizes.end(), head_hidden.begin(), head_hidden.end());
    head_sizes.push_back(1);
    std::vector<Activation> head_acts(head_hidden.size(), Activation::relu);
    head_acts.push_back(Activation::linear);
    head_ = Mlp(head_sizes, head_acts, derive_seed(seed, 3));
  }

  struct Workspace {
    Mlp::Workspace obs, act, head;
  };
  struct Grads {
    Gradients obs, act, head;
  };

  Eigen::RowVectorXd forward(const Eigen::MatrixXd& obs, const Eigen::MatrixXd& act) const {
    return head_.forward(merge(obs_path_.forward(obs), act_path_.forward(act)));
  }

  Eigen::RowVectorXd forward(const Eigen::MatrixXd& obs, const Eigen::MatrixXd& act,
                             Workspace& ws) const {
    const Eigen::MatrixXd fo = obs_path_.forward(obs, ws.obs);
    const Eigen::MatrixXd fa = act_path_.forward(act, ws.act);
    return head_.forward(merge(fo, fa), ws.head);
  }

  // Returns the gradient with respect to the action batch; parameter grads
  // land in g.
  Eigen::MatrixXd backward(const Workspace& ws, const Eigen::RowVectorXd& grad_q, Grads& g) const {
    const Eigen::MatrixXd merged_grad = head_.backward(ws.head, grad_q, g.head);
    const Eigen::Index no = obs_path_.output_size();
    obs_path_.backward(ws.obs, merged_grad.topRows(no), g.obs);
    return act_path_.backward(ws.act, merged_grad.bottomRows(act_path_.output_size()), g.act);
  }

  Mlp& obs_path() { return obs_path_; }
  Mlp& act_path() { return act_path_; }
  Mlp& head() { return head_; }
  const Mlp& obs_path() const { return obs_path_; }
  const Mlp& act_path() const { return act_path_; }
  const Mlp& head() const { return head_; }

  void save(std::ostream& os) const {
    obs_path_.save(os);
    act_path_.save(os);
    head_.save(os);
  }
  static Critic load(std::istream& is) {
    Critic c;
    c.obs_path_ = Mlp::load(is);
    c.act_path_ = Mlp::load(is);
    c.head_ = Mlp::load(is);
    return c;
  }

 private:
  static Eigen::MatrixXd merge(const Eigen::MatrixXd& fo, const Eigen::MatrixXd& fa) {
    Eigen::MatrixXd m(fo.rows() + fa.rows(), fo.cols());
    m.topRows(fo.rows()) = fo;
    m.bottomRows(fa.rows()) = fa;
    return m;
  }

  Mlp obs_path_, act_path_, head_;
};

inline void soft_update(Critic& target, const Critic& online, double tau) {
  soft_update(target.obs_path(), online.obs_path(), tau);
  soft_update(target.act_path(), online.act_path(), tau);
  soft_update(target.head(), online.head(), tau);
}

struct CriticOptimizer {
  AdamOptimizer obs, act, head;
  CriticOptimizer(const Critic& c, double lr)
      : obs(c.obs_path(), lr), act(c.act_path(), lr), head(c.head(), lr) {}
  void step(Critic& c, const Critic::Grads& g) {
    obs.step(c.obs_path(), g.obs);
    act.step(c.act_path(), g.act);
    head.step(c.head(), g.head);
  }
};

struct UpdateDiagnostics {
  double critic1_loss = 0.0;
  double critic2_loss = 0.0;
  double actor_objective = 0.0;  // mean(alpha*logpi - Qmin), when policy updated
  double entropy = 0.0;          // latest mean(-logpi) estimate
  double temperature = 0.0;
  bool policy_updated = false;
};

class SacAgent {
 public:
  SacAgent(const SacConfig& cfg, std::uint64_t seed)
      : cfg_(cfg),
        buffer_((cfg_.validate(), static_cast<std::size_t>(cfg_.replay_capacity))),
        actor_(cfg.actor_hidden, derive_seed(seed, 10)),
        critic1_(cfg.critic_obs_hidden, cfg.critic_act_hidden, cfg.critic_head_hidden, derive_seed(seed, 11)),
        critic2_(cfg.critic_obs_hidden, cfg.critic_act_hidden, cfg.critic_head_hidden, derive_seed(seed, 12)),
        target1_(critic1_),
        target2_(critic2_),
        alpha_(cfg.initial_temperature),
        rng_(derive_seed(seed, 13)),
        actor_opt_(actor_.net(), cfg.actor_lr),
        critic1_opt_(critic1_, cfg.critic_lr),
        critic2_opt_(critic2_, cfg.critic_lr),
        alpha_opt_(cfg.temperature_lr) {
    entropy_estimate_ = -cfg.target_entropy;
  }

  const SacConfig& config() const { return cfg_; }
  double temperature() const { return alpha_; }
  double entropy_estimate() const { return entropy_estimate_; }
  ReplayBuffer& buffer() { return buffer_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  GaussianActor& actor() { return actor_; }
  const GaussianActor& actor() const { return actor_; }
  Critic& critic1() { return critic1_; }
  Critic& critic2() { return critic2_; }
  Critic& target1() { return target1_; }
  Critic& target2() { return target2_; }
  std::uint64_t update_count() const { return update_count_; }

  Action act(const Obs& obs, bool deterministic) {
    if (deterministic) {
      const Eigen::MatrixXd a = actor_.mean_action(obs);
      return Action(a(0, 0), a(1, 0), a(2, 0), a(3, 0));
    }
    const auto s = actor_.sample_batch(obs, rng_);
    return Action(s.actions(0, 0), s.actions(1, 0), s.actions(2, 0), s.actions(3, 0));
  }

  void observe(const Obs& s, const Action& a, double r, const Obs& s_next, bool done) {
    buffer_.push(ReplayEntry{s, a.v, r, s_next, done});
  }

  bool ready() const { return buffer_.size() >= static_cast<std::size_t>(cfg_.batch_size); }

  UpdateDiagnostics update() {
    if (!ready()) throw std::logic_error("SacAgent::update: replay buffer below one batch");
    ++update_count_;
    const Eigen::Index n = cfg_.batch_size;

    const auto idx = buffer_.sample_indices(static_cast<std::size_t>(n), rng_);
    Eigen::MatrixXd s(14, n), s2(14, n), a(4, n);
    Eigen::RowVectorXd r(n), not_done(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      const ReplayEntry& e = buffer_.at(idx[static_cast<std::size_t>(j)]);
      s.col(j) = e.s;
      s2.col(j) = e.s_next;
      for (int d = 0; d < 4; ++d) a(d, j) = e.a[d];
      r(j) = e.r;
      not_done(j) = e.done ? 0.0 : 1.0;
    }

    UpdateDiagnostics diag;
    diag.temperature = alpha_;

    // Critic target: entropy-regularized minimum of the target critics.
    const auto next = actor_.sample_batch(s2, rng_);
    const Eigen::RowVectorXd q1t = target1_.forward(s2, next.actions);
    const Eigen::RowVectorXd q2t = target2_.forward(s2, next.actions);
    const Eigen::RowVectorXd soft_q = q1t.cwiseMin(q2t) - alpha_ * next.log_prob;
    const Eigen::RowVectorXd y = r + cfg_.gamma * not_done.cwiseProduct(soft_q);

    Critic::Workspace ws1, ws2;
    Critic::Grads g1, g2;
    const Eigen::RowVectorXd q1 = critic1_.forward(s, a, ws1);
    const Eigen::RowVectorXd q2 = critic2_.forward(s, a, ws2);
    const Eigen::RowVectorXd d1 = q1 - y, d2 = q2 - y;
    diag.critic1_loss = 0.5 * d1.squaredNorm() / static_cast<double>(n);
    diag.critic2_loss = 0.5 * d2.squaredNorm() / static_cast<double>(n);
    if (!std::isfinite(diag.critic1_loss) || !std::isfinite(diag.critic2_loss))
      throw std::runtime_error("SacAgent::update: non-finite critic loss");
    critic1_.backward(ws1, d1 / static_cast<double>(n), g1);
    critic2_.backward(ws2, d2 / static_cast<double>(n), g2);
    critic1_opt_.step(critic1_, g1);
    critic2_opt_.step(critic2_, g2);

    if (update_count_ % static_cast<std::uint64_t>(cfg_.policy_delay) == 0) {
      diag.policy_updated = true;
      const auto fresh = actor_.sample_batch(s, rng_);

      Critic::Workspace aw1, aw2;
      const Eigen::RowVectorXd aq1 = critic1_.forward(s, fresh.actions, aw1);
      const Eigen::RowVectorXd aq2 = critic2_.forward(s, fresh.actions, aw2);
      Eigen::RowVectorXd pick1(n), pick2(n);
      for (Eigen::Index j = 0; j < n; ++j) {
        const bool first = aq1(j) <= aq2(j);
        pick1(j) = first ? 1.0 : 0.0;
        pick2(j) = first ? 0.0 : 1.0;
      }
      Critic::Grads scratch;
      const Eigen::MatrixXd dq_da =
          critic1_.backward(aw1, pick1, scratch) + critic2_.backward(aw2, pick2, scratch);

      const Eigen::RowVectorXd qmin = aq1.cwiseMin(aq2);
      diag.actor_objective = (alpha_ * fresh.log_prob - qmin).mean();

      // d(alpha*logpi - Q)/dz and its spread-route variant; spread gradients
      // pass through softplus and vanish outside the raw clamp.
      const double inv_n = 1.0 / static_cast<double>(n);
      const Eigen::MatrixXd da_dz = (0.5 * (1.0 - fresh.u.array().square())).matrix();
      const Eigen::MatrixXd core = alpha_ * 2.0 * fresh.u - dq_da.cwiseProduct(da_dz);
      Eigen::MatrixXd out_grad = Eigen::MatrixXd::Zero(8, n);
      out_grad.topRows(4) = inv_n * core;
      const Eigen::MatrixXd raw_spread = fresh.raw.bottomRows(4);
      for (Eigen::Index c = 0; c < n; ++c) {
        for (int d = 0; d < 4; ++d) {
          const double raw = raw_spread(d, c);
          if (raw <= -GaussianActor::kRawClamp || raw >= GaussianActor::kRawClamp) continue;
          const double dsig = detail::sigmoid(raw);
          const double dJ_dsigma =
              core(d, c) * fresh.xi(d, c) - alpha_ / fresh.sigma(d, c);
          out_grad(4 + d, c) = inv_n * dJ_dsigma * dsig;
        }
      }
      Gradients ag;
      actor_.net().backward(fresh.ws, out_grad, ag);
      actor_opt_.step(actor_.net(), ag);

      entropy_estimate_ = -fresh.log_prob.mean();
      const double alpha_grad = entropy_estimate_ - cfg_.target_entropy;
      alpha_ = std::max(alpha_opt_.step(alpha_, alpha_grad), 1e-6);
    }

    soft_update(target1_, critic1_, cfg_.tau);
    soft_update(target2_, critic2_, cfg_.tau);
    diag.entropy = entropy_estimate_;
    diag.temperature = alpha_;
    return diag;
  }

  void save(std::ostream& os) const {
    os.write("SAC1", 4);
    const std::uint32_t version = 1;
    os.write(reinterpret_cast<const char*>(&version), sizeof version);
    os.write(reinterpret_cast<const char*>(&alpha_), sizeof alpha_);
    os.write(reinterpret_cast<const char*>(&update_count_), sizeof update_count_);
    actor_.net().save(os);
    critic1_.save(os);
    critic2_.save(os);
    target1_.save(os);
    target2_.save(os);
    if (!os) throw std::runtime_error("SacAgent::save: write failed");
  }

  // Restores networks, temperature, and the update counter into a freshly
  // configured agent; optimizer moments restart, which is what stage
  // boundaries want (post-training changes the learning rates anyway).
  void restore(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::string(magic, 4) != "SAC1")
      throw std::runtime_error("SacAgent::restore: bad magic, not an agent checkpoint");
    std::uint32_t version = 0;
    is.read(reinterpret_cast<char*>(&version), sizeof version);
    if (version != 1) throw std::runtime_error("SacAgent::restore: unsupported checkpoint version");
    is.read(reinterpret_cast<char*>(&alpha_), sizeof alpha_);
    is.read(reinterpret_cast<char*>(&update_count_), sizeof update_count_);
    if (!is) throw std::runtime_error("SacAgent::restore: truncated checkpoint");
    actor_.net() = Mlp::load(is);
    critic1_ = Critic::load(is);
    critic2_ = Critic::load(is);
    target1_ = Critic::load(is);
    target2_ = Critic::load(is);
    actor_opt_ = AdamOptimizer(actor_.net(), cfg_.actor_lr);
    critic1_opt_ = CriticOptimizer(critic1_, cfg_.critic_lr);
    critic2_opt_ = CriticOptimizer(critic2_, cfg_.critic_lr);
    alpha_opt_ = ScalarAdam(cfg_.temperature_lr);
  }

  void reseed(std::uint64_t seed) { rng_.seed(seed); }

 private:
  SacConfig cfg_;
  ReplayBuffer buffer_;
  GaussianActor actor_;
  Critic critic1_, critic2_, target1_, target2_;
  double alpha_;
  double entropy_estimate_ = 0.0;
  std::uint64_t update_count_ = 0;
  std::mt19937_64 rng_;
  AdamOptimizer actor_opt_;
  CriticOptimizer critic1_opt_, critic2_opt_;
  ScalarAdam alpha_opt_;
};

}  // namespace softq
