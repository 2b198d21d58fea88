#pragma once

#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "softq/common.hpp"

namespace softq {

enum class Activation : std::uint8_t { linear = 0, relu = 1, tanh = 2, softplus = 3 };

namespace detail {

inline double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline Eigen::MatrixXd apply_activation(Activation act, const Eigen::MatrixXd& z) {
  switch (act) {
    case Activation::linear: return z;
    case Activation::relu: return z.cwiseMax(0.0);
    case Activation::tanh: return z.array().tanh().matrix();
    case Activation::softplus: return z.unaryExpr([](double x) { return softplus(x); });
  }
  throw std::logic_error("unknown activation");
}

// Derivative as a function of the pre-activation z.
inline Eigen::MatrixXd activation_grad(Activation act, const Eigen::MatrixXd& z) {
  switch (act) {
    case Activation::linear: return Eigen::MatrixXd::Ones(z.rows(), z.cols());
    case Activation::relu:
      return z.unaryExpr([](double x) { return x > 0.0 ? 1.0 : 0.0; });
    case Activation::tanh: {
      Eigen::MatrixXd t = z.array().tanh().matrix();
      return (1.0 - t.array().square()).matrix();
    }
    case Activation::softplus: return z.unaryExpr([](double x) { return sigmoid(x); });
  }
  throw std::logic_error("unknown activation");
}

}  // namespace detail

struct LayerGrads {
  Eigen::MatrixXd dW;
  Eigen::VectorXd db;
};

using Gradients = std::vector<LayerGrads>;

// Plain fully connected network.  Samples are columns, so forward maps an
// (in x n) batch to an (out x n) batch.  Relu layers get He-uniform init,
// everything else Xavier-uniform, drawn in storage order from one seeded
// generator so a given (shape, seed) pair always produces the same weights.
class Mlp {
 public:
  struct Layer {
    Eigen::MatrixXd W;  // out x in
    Eigen::VectorXd b;  // out
    Activation act = Activation::linear;
  };

  struct Workspace {
    Eigen::MatrixXd input;
    std::vector<Eigen::MatrixXd> z;  // pre-activation per layer
    std::vector<Eigen::MatrixXd> a;  // post-activation per layer
  };

  Mlp() = default;

  Mlp(const std::vector<int>& sizes, const std::vector<Activation>& acts, std::uint64_t seed) {
    if (sizes.size() < 2) throw std::invalid_argument("Mlp: need at least input and output sizes");
    if (acts.size() != sizes.size() - 1)
      throw std::invalid_argument("Mlp: one activation per weight layer required");
    for (int s : sizes)
      if (s <= 0) throw std::invalid_argument("Mlp: layer sizes must be positive");

    std::mt19937_64 rng(seed);
    layers_.resize(acts.size());
    for (std::size_t l = 0; l < acts.size(); ++l) {
      const int fan_in = sizes[l], fan_out = sizes[l + 1];
      const double limit = acts[l] == Activation::relu
                               ? std::sqrt(6.0 / fan_in)
                               : std::sqrt(6.0 / (fan_in + fan_out));
      std::uniform_real_distribution<double> uni(-limit, limit);
      auto& L = layers_[l];
      L.W.resize(fan_out, fan_in);
      for (Eigen::Index i = 0; i < L.W.size(); ++i) L.W.data()[i] = uni(rng);
      L.b = Eigen::VectorXd::Zero(fan_out);
      L.act = acts[l];
    }
  }

  int input_size() const { return static_cast<int>(layers_.front().W.cols()); }
  int output_size() const { return static_cast<int>(layers_.back().W.rows()); }
  std::size_t layer_count() const { return layers_.size(); }
  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& L : layers_) n += static_cast<std::size_t>(L.W.size() + L.b.size());
    return n;
  }

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const {
    check_input(x);
    Eigen::MatrixXd a = x;
    for (const auto& L : layers_)
      a = detail::apply_activation(L.act, (L.W * a).colwise() + L.b);
    return a;
  }

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, Workspace& ws) const {
    check_input(x);
    ws.input = x;
    ws.z.resize(layers_.size());
    ws.a.resize(layers_.size());
    const Eigen::MatrixXd* prev = &ws.input;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      ws.z[l] = (layers_[l].W * (*prev)).colwise() + layers_[l].b;
      ws.a[l] = detail::apply_activation(layers_[l].act, ws.z[l]);
      prev = &ws.a[l];
    }
    return ws.a.back();
  }

  // Backpropagates grad_out (same shape as the forward output; any batch-mean
  // factor is the caller's) and returns the gradient with respect to the
  // input batch.  Parameter gradients accumulate nothing: g is overwritten.
  Eigen::MatrixXd backward(const Workspace& ws, const Eigen::MatrixXd& grad_out, Gradients& g) const {
    if (ws.z.size() != layers_.size())
      throw std::logic_error("Mlp::backward: workspace does not match a forward pass");
    g.resize(layers_.size());
    Eigen::MatrixXd grad = grad_out;
    for (std::size_t l = layers_.size(); l-- > 0;) {
      const Eigen::MatrixXd dz =
          grad.cwiseProduct(detail::activation_grad(layers_[l].act, ws.z[l]));
      const Eigen::MatrixXd& below = (l == 0) ? ws.input : ws.a[l - 1];
      g[l].dW = dz * below.transpose();
      g[l].db = dz.rowwise().sum();
      grad = layers_[l].W.transpose() * dz;
    }
    return grad;
  }

  void save(std::ostream& os) const {
    os.write("MLP1", 4);
    write_u32(os, static_cast<std::uint32_t>(layers_.size()));
    for (const auto& L : layers_) {
      write_u32(os, static_cast<std::uint32_t>(L.W.cols()));
      write_u32(os, static_cast<std::uint32_t>(L.W.rows()));
      write_u32(os, static_cast<std::uint32_t>(L.act));
      os.write(reinterpret_cast<const char*>(L.W.data()),
               static_cast<std::streamsize>(sizeof(double) * L.W.size()));
      os.write(reinterpret_cast<const char*>(L.b.data()),
               static_cast<std::streamsize>(sizeof(double) * L.b.size()));
    }
    if (!os) throw std::runtime_error("Mlp::save: write failed");
  }

  static Mlp load(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::string(magic, 4) != "MLP1")
      throw std::runtime_error("Mlp::load: bad magic, not a network file");
    const std::uint32_t n = read_u32(is);
    if (n == 0 || n > 64) throw std::runtime_error("Mlp::load: implausible layer count");
    Mlp net;
    net.layers_.resize(n);
    for (auto& L : net.layers_) {
      const std::uint32_t in = read_u32(is), out = read_u32(is), act = read_u32(is);
      if (in == 0 || out == 0 || act > 3) throw std::runtime_error("Mlp::load: corrupt layer header");
      L.W.resize(out, in);
      L.b.resize(out);
      L.act = static_cast<Activation>(act);
      is.read(reinterpret_cast<char*>(L.W.data()),
              static_cast<std::streamsize>(sizeof(double) * L.W.size()));
      is.read(reinterpret_cast<char*>(L.b.data()),
              static_cast<std::streamsize>(sizeof(double) * L.b.size()));
      if (!is) throw std::runtime_error("Mlp::load: truncated network file");
    }
    return net;
  }

 private:
  void check_input(const Eigen::MatrixXd& x) const {
    if (layers_.empty()) throw std::logic_error("Mlp: forward on an empty network");
    if (x.rows() != layers_.front().W.cols())
      throw std::invalid_argument("Mlp: input has " + std::to_string(x.rows()) +
                                  " rows, network expects " +
                                  std::to_string(layers_.front().W.cols()));
  }

  static void write_u32(std::ostream& os, std::uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  static std::uint32_t read_u32(std::istream& is) {
    std::uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!is) throw std::runtime_error("Mlp::load: truncated network file");
    return v;
  }

  std::vector<Layer> layers_;
};

// In-place Polyak blend: target <- online + (1 - tau) * (target - online).
inline void soft_update(Mlp& target, const Mlp& online, double tau) {
  if (target.layer_count() != online.layer_count())
    throw std::invalid_argument("soft_update: mismatched networks");
  for (std::size_t l = 0; l < target.layer_count(); ++l) {
    auto& t = target.layers()[l];
    const auto& o = online.layers()[l];
    if (t.W.rows() != o.W.rows() || t.W.cols() != o.W.cols())
      throw std::invalid_argument("soft_update: mismatched layer shapes");
    t.W = o.W + (1.0 - tau) * (t.W - o.W);
    t.b = o.b + (1.0 - tau) * (t.b - o.b);
  }
}

class AdamOptimizer {
 public:
  AdamOptimizer(const Mlp& net, double lr, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    mW_.reserve(net.layer_count());
    for (const auto& L : net.layers()) {
      mW_.push_back(Eigen::MatrixXd::Zero(L.W.rows(), L.W.cols()));
      vW_.push_back(Eigen::MatrixXd::Zero(L.W.rows(), L.W.cols()));
      mb_.push_back(Eigen::VectorXd::Zero(L.b.size()));
      vb_.push_back(Eigen::VectorXd::Zero(L.b.size()));
    }
  }

  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }
  long step_count() const { return t_; }

  void step(Mlp& net, const Gradients& g) {
    if (g.size() != mW_.size()) throw std::invalid_argument("AdamOptimizer: gradient count mismatch");
    for (std::size_t l = 0; l < g.size(); ++l)
      if (!g[l].dW.allFinite() || !g[l].db.allFinite())
        throw std::runtime_error("AdamOptimizer: non-finite gradient in layer " + std::to_string(l));
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t l = 0; l < g.size(); ++l) {
      auto& L = net.layers()[l];
      mW_[l] = beta1_ * mW_[l] + (1.0 - beta1_) * g[l].dW;
      vW_[l] = beta2_ * vW_[l] + (1.0 - beta2_) * g[l].dW.cwiseProduct(g[l].dW);
      mb_[l] = beta1_ * mb_[l] + (1.0 - beta1_) * g[l].db;
      vb_[l] = beta2_ * vb_[l] + (1.0 - beta2_) * g[l].db.cwiseProduct(g[l].db);
      L.W -= lr_ * (mW_[l] / c1).cwiseQuotient(((vW_[l] / c2).cwiseSqrt().array() + eps_).matrix());
      L.b -= lr_ * (mb_[l] / c1).cwiseQuotient(((vb_[l] / c2).cwiseSqrt().array() + eps_).matrix());
    }
  }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<Eigen::MatrixXd> mW_, vW_;
  std::vector<Eigen::VectorXd> mb_, vb_;
};

// Scalar Adam, used for quantities optimized directly (e.g. an entropy
// temperature) rather than through a network.
class ScalarAdam {
 public:
  explicit ScalarAdam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  double step(double value, double grad) {
    if (!std::isfinite(grad)) throw std::runtime_error("ScalarAdam: non-finite gradient");
    ++t_;
    m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
    v_ = beta2_ * v_ + (1.0 - beta2_) * grad * grad;
    const double mhat = m_ / (1.0 - std::pow(beta1_, static_cast<double>(t_)));
    const double vhat = v_ / (1.0 - std::pow(beta2_, static_cast<double>(t_)));
    return value - lr_ * mhat / (std::sqrt(vhat) + eps_);
  }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  double m_ = 0.0, v_ = 0.0;
};

}  // namespace softq
