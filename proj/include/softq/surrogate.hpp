#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "softq/dataset.hpp"
#include "softq/mlp.hpp"

namespace softq {

struct SurrogateTrainConfig {
  int epochs = 120;
  int batch_size = 64;
  double learning_rate = 0.001;
};

struct SurrogateTrainHistory {
  std::vector<double> train_loss;  // mean over samples of 0.5 * |err|^2, normalized space
  std::vector<double> val_loss;    // empty when no validation split was given
};

// (state, action) -> next-state regressor operating in normalized space.
// The stats captured at construction define that space for the lifetime of
// the model and travel with it through serialization.
class SurrogateModel {
 public:
  SurrogateModel() = default;

  SurrogateModel(const NormalizationStats& stats, std::uint64_t seed,
                 const std::vector<int>& hidden = {64, 128, 64})
      : stats_(stats) {
    std::vector<int> sizes{14};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(10);
    std::vector<Activation> acts(hidden.size(), Activation::relu);
    acts.push_back(Activation::linear);
    net_ = Mlp(sizes, acts, seed);
  }

  const NormalizationStats& stats() const { return stats_; }
  Mlp& net() { return net_; }
  const Mlp& net() const { return net_; }

  // Batched normalized-space prediction: rows 0..9 state, rows 10..13 action.
  Eigen::MatrixXd predict_normalized(const Eigen::MatrixXd& state_n,
                                     const Eigen::MatrixXd& action_n) const {
    if (state_n.rows() != 10 || action_n.rows() != 4 || state_n.cols() != action_n.cols())
      throw std::invalid_argument("SurrogateModel: batch must be 10xN states with 4xN actions");
    Eigen::MatrixXd x(14, state_n.cols());
    x.topRows(10) = state_n;
    x.bottomRows(4) = action_n;
    return net_.forward(x);
  }

  RobotState predict(const RobotState& s, const Action& a) const {
    const auto sn = stats_.normalize_state(s);
    const auto an = stats_.normalize_action(a);
    Eigen::MatrixXd x(14, 1);
    for (int d = 0; d < 10; ++d) x(d, 0) = sn[d];
    for (int d = 0; d < 4; ++d) x(10 + d, 0) = an[d];
    const Eigen::MatrixXd y = net_.forward(x);
    std::array<double, 10> out;
    for (int d = 0; d < 10; ++d) out[d] = y(d, 0);
    return stats_.denormalize_state(out);
  }

  SurrogateTrainHistory train(const Dataset& train_data, const Dataset* val_data,
                              const SurrogateTrainConfig& cfg, std::uint64_t seed) {
    if (cfg.epochs <= 0 || cfg.batch_size <= 0 || cfg.learning_rate <= 0.0)
      throw std::invalid_argument("SurrogateModel::train: config values must be positive");
    auto [x, y] = to_matrices(train_data, stats_);
    const Eigen::Index n = x.cols();
    if (n == 0) throw std::invalid_argument("SurrogateModel::train: empty training set");

    Eigen::MatrixXd vx, vy;
    if (val_data) std::tie(vx, vy) = to_matrices(*val_data, stats_);

    AdamOptimizer adam(net_, cfg.learning_rate);
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(seed);

    SurrogateTrainHistory hist;
    Mlp::Workspace ws;
    Gradients g;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      std::shuffle(perm.begin(), perm.end(), rng);
      double sum_loss = 0.0;
      for (Eigen::Index start = 0; start < n; start += cfg.batch_size) {
        const Eigen::Index bs = std::min<Eigen::Index>(cfg.batch_size, n - start);
        Eigen::MatrixXd xb(14, bs), yb(10, bs);
        for (Eigen::Index j = 0; j < bs; ++j) {
          xb.col(j) = x.col(perm[static_cast<std::size_t>(start + j)]);
          yb.col(j) = y.col(perm[static_cast<std::size_t>(start + j)]);
        }
        const Eigen::MatrixXd pred = net_.forward(xb, ws);
        const Eigen::MatrixXd diff = pred - yb;
        sum_loss += 0.5 * diff.squaredNorm();
        net_.backward(ws, diff / static_cast<double>(bs), g);
        adam.step(net_, g);
      }
      hist.train_loss.push_back(sum_loss / static_cast<double>(n));
      if (val_data) {
        const Eigen::MatrixXd diff = net_.forward(vx) - vy;
        hist.val_loss.push_back(0.5 * diff.squaredNorm() / static_cast<double>(vx.cols()));
      }
    }
    return hist;
  }

  void save(std::ostream& os) const {
    os.write("SRG1", 4);
    auto put = [&](const auto& arr) {
      os.write(reinterpret_cast<const char*>(arr.data()),
               static_cast<std::streamsize>(sizeof(double) * arr.size()));
    };
    put(stats_.state_min);
    put(stats_.state_max);
    put(stats_.state_mean);
    put(stats_.action_min);
    put(stats_.action_max);
    put(stats_.action_mean);
    if (!os) throw std::runtime_error("SurrogateModel::save: write failed");
    net_.save(os);
  }

  static SurrogateModel load(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::string(magic, 4) != "SRG1")
      throw std::runtime_error("SurrogateModel::load: bad magic, not a surrogate file");
    SurrogateModel m;
    auto get = [&](auto& arr) {
      is.read(reinterpret_cast<char*>(arr.data()),
              static_cast<std::streamsize>(sizeof(double) * arr.size()));
    };
    get(m.stats_.state_min);
    get(m.stats_.state_max);
    get(m.stats_.state_mean);
    get(m.stats_.action_min);
    get(m.stats_.action_max);
    get(m.stats_.action_mean);
    if (!is) throw std::runtime_error("SurrogateModel::load: truncated surrogate file");
    m.net_ = Mlp::load(is);
    return m;
  }

  // Flattens every transition into normalized input/target columns.
  static std::pair<Eigen::MatrixXd, Eigen::MatrixXd> to_matrices(const Dataset& data,
                                                                 const NormalizationStats& stats) {
    const std::size_t n = data.transition_count();
    Eigen::MatrixXd x(14, static_cast<Eigen::Index>(n)), y(10, static_cast<Eigen::Index>(n));
    Eigen::Index col = 0;
    for (const auto& seq : data.sequences) {
      for (const auto& tr : seq.steps) {
        const auto sn = stats.normalize_state(tr.s);
        const auto an = stats.normalize_action(tr.a);
        const auto tn = stats.normalize_state(tr.s_next);
        for (int d = 0; d < 10; ++d) x(d, col) = sn[d];
        for (int d = 0; d < 4; ++d) x(10 + d, col) = an[d];
        for (int d = 0; d < 10; ++d) y(d, col) = tn[d];
        ++col;
      }
    }
    return {std::move(x), std::move(y)};
  }

 private:
  NormalizationStats stats_;
  Mlp net_;
};

// Multi-horizon open-loop accuracy of a predictor on a held-out dataset.
// r[t-1] and nrmse[t-1] are the horizon-t aggregates; horizon 1 equals the
// plain single-step metrics by construction (same accumulation path).
struct ValidationReport {
  std::vector<double> r;              // R^t
  std::vector<double> nrmse;          // NRMSE^t
  std::vector<double> rho_step;       // mean per-dim correlation at exactly step i
  std::vector<std::size_t> starts_at; // |S_t|: starts with at least t steps ahead

  double single_step_r() const { return r.empty() ? 0.0 : r.front(); }
  double single_step_nrmse() const { return nrmse.empty() ? 0.0 : nrmse.front(); }
};

namespace detail {

struct PearsonAcc {
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  long n = 0;
  void add(double x, double y) {
    sx += x;
    sy += y;
    sxx += x * x;
    syy += y * y;
    sxy += x * y;
    ++n;
  }
  // Constant series: correlated 1 when both sides are the same constant up
  // to fp noise, otherwise 0 (undefined slope carries no predictive signal).
  double rho() const {
    if (n < 1) return 0.0;
    const double nn = static_cast<double>(n);
    const double vx = sxx - sx * sx / nn;
    const double vy = syy - sy * sy / nn;
    const double cxy = sxy - sx * sy / nn;
    const double eps = 1e-15 * std::max(1.0, std::max(sxx, syy));
    if (vx <= eps && vy <= eps) {
      const double mx = sx / nn, my = sy / nn;
      const double tol = 1e-9 * std::max(1.0, std::max(std::abs(mx), std::abs(my)));
      return std::abs(mx - my) <= tol ? 1.0 : 0.0;
    }
    if (vx <= eps || vy <= eps) return 0.0;
    return cxy / std::sqrt(vx * vy);
  }
};

}  // namespace detail

// Predictor maps normalized (10xN states, 4xN actions) to 10xN next states.
// NRMSE error terms are scaled by the per-dimension value range observed in
// this dataset (over initial and successor states together), measured in raw
// units, so horizon errors are comparable across dimensions.
template <typename Predictor>
ValidationReport validate(Predictor&& predict, const Dataset& data, int max_horizon) {
  if (max_horizon < 1) throw std::invalid_argument("validate: horizon must be at least 1");
  if (data.sequences.empty()) throw std::invalid_argument("validate: empty dataset");

  // Raw-unit value ranges of this dataset, independent of the training stats.
  std::array<double, 10> lo{}, hi{};
  bool first = true;
  auto eat = [&](const RobotState& s) {
    const auto a = s.to_array();
    for (int d = 0; d < 10; ++d) {
      if (first) {
        lo[d] = hi[d] = a[d];
      } else {
        lo[d] = std::min(lo[d], a[d]);
        hi[d] = std::max(hi[d], a[d]);
      }
    }
    first = false;
  };
  for (const auto& seq : data.sequences)
    for (std::size_t k = 0; k < seq.steps.size(); ++k) {
      if (k == 0) eat(seq.steps[k].s);
      eat(seq.steps[k].s_next);
    }

  const auto& st = data.stats;
  std::array<double, 10> err_scale{};  // train-range / data-range, squared later
  for (int d = 0; d < 10; ++d) {
    const double train_range = st.state_max[d] - st.state_min[d];
    const double data_range = hi[d] - lo[d];
    err_scale[d] = data_range > 0.0 ? train_range / data_range : 0.0;
  }

  int longest = 0;
  for (const auto& seq : data.sequences) longest = std::max<int>(longest, static_cast<int>(seq.steps.size()));
  const int t_max = std::min(max_horizon, longest);

  // err_by_horizon[h][i]: summed squared scaled error at step i+1 over starts
  // whose remaining length is exactly h+1.  Restricting the horizon-T metric
  // to starts that survive T steps is then a suffix sum over h.
  std::vector<std::vector<double>> err_by_horizon(static_cast<std::size_t>(longest));
  for (int h = 0; h < longest; ++h) err_by_horizon[static_cast<std::size_t>(h)].assign(static_cast<std::size_t>(h) + 1, 0.0);
  std::vector<long> starts_with_horizon(static_cast<std::size_t>(longest) + 1, 0);
  std::vector<std::array<detail::PearsonAcc, 10>> pearson(static_cast<std::size_t>(t_max));

  for (const auto& seq : data.sequences) {
    const int len = static_cast<int>(seq.steps.size());
    if (len == 0) continue;
    Eigen::MatrixXd states(10, len + 1), actions(4, len);
    for (int k = 0; k < len; ++k) {
      const auto sn = st.normalize_state(seq.steps[static_cast<std::size_t>(k)].s);
      const auto an = st.normalize_action(seq.steps[static_cast<std::size_t>(k)].a);
      for (int d = 0; d < 10; ++d) states(d, k) = sn[d];
      for (int d = 0; d < 4; ++d) actions(d, k) = an[d];
    }
    {
      const auto sn = st.normalize_state(seq.steps.back().s_next);
      for (int d = 0; d < 10; ++d) states(d, len) = sn[d];
    }
    for (int k = 0; k < len; ++k) ++starts_with_horizon[static_cast<std::size_t>(len - k)];

    Eigen::MatrixXd rolled = states.leftCols(len);  // start k sits in column k
    const int seq_t_max = std::min(t_max, len);
    for (int i = 1; i <= seq_t_max; ++i) {
      const int active = len - i + 1;
      rolled = predict(rolled.leftCols(active), actions.middleCols(i - 1, active));
      if (rolled.rows() != 10 || rolled.cols() != active)
        throw std::logic_error("validate: predictor returned a wrong-shaped batch");
      for (int k = 0; k < active; ++k) {
        const int horizon = len - k;  // start k survives exactly this many steps
        double e = 0.0;
        for (int d = 0; d < 10; ++d) {
          const double diff = (rolled(d, k) - states(d, k + i)) * err_scale[d];
          e += diff * diff;
          pearson[static_cast<std::size_t>(i - 1)][static_cast<std::size_t>(d)].add(
              rolled(d, k), states(d, k + i));
        }
        err_by_horizon[static_cast<std::size_t>(horizon - 1)][static_cast<std::size_t>(i - 1)] += e;
      }
    }
  }

  ValidationReport rep;
  double rho_sum = 0.0;
  for (int t = 1; t <= t_max; ++t) {
    double rho_bar = 0.0;
    for (int d = 0; d < 10; ++d)
      rho_bar += pearson[static_cast<std::size_t>(t - 1)][static_cast<std::size_t>(d)].rho();
    rho_bar /= 10.0;
    rho_sum += rho_bar;
    rep.rho_step.push_back(rho_bar);
    rep.r.push_back(rho_sum / static_cast<double>(t));

    long n_starts = 0;
    for (int h = t; h <= longest; ++h) n_starts += starts_with_horizon[static_cast<std::size_t>(h)];
    double err_sum = 0.0;
    for (int h = t; h <= longest; ++h)
      for (int i = 1; i <= t; ++i)
        err_sum += err_by_horizon[static_cast<std::size_t>(h - 1)][static_cast<std::size_t>(i - 1)];
    rep.starts_at.push_back(static_cast<std::size_t>(n_starts));
    rep.nrmse.push_back(n_starts > 0
                            ? std::sqrt(err_sum / (static_cast<double>(n_starts) * static_cast<double>(t)))
                            : 0.0);
  }
  return rep;
}

}  // namespace softq
