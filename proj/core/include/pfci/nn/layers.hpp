#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "pfci/nn/ops.hpp"

namespace pfci::nn {

/// Ordered, named parameter table of one network.
template <class T>
class ParamStore {
 public:
  /// Normal(0, stddev) initialization; stddev 0 gives zeros.
  Var<T> add(const std::string& name, Shape shape, std::mt19937_64& rng, double stddev) {
    Tensor<T> t(shape);
    if (stddev > 0) {
      std::normal_distribution<double> dist(0.0, stddev);
      for (auto& v : t.span()) v = static_cast<T>(dist(rng));
    }
    Var<T> v(std::move(t), true);
    params_.emplace_back(name, v);
    return v;
  }

  const std::vector<std::pair<std::string, Var<T>>>& entries() const noexcept { return params_; }
  std::vector<Var<T>> vars() const {
    std::vector<Var<T>> out;
    for (const auto& [n, v] : params_) out.push_back(v);
    return out;
  }
  Var<T> get(const std::string& name) const {
    for (const auto& [n, v] : params_)
      if (n == name) return v;
    throw ParameterError("no parameter named " + name);
  }
  void zero_grad() {
    for (auto& [n, v] : params_) v.zero_grad();
  }
  void set_requires_grad(bool on) {
    for (auto& [n, v] : params_) v.set_requires_grad(on);
  }
  std::size_t scalar_count() const {
    std::size_t s = 0;
    for (const auto& [n, v] : params_) s += v.value().numel();
    return s;
  }

 private:
  std::vector<std::pair<std::string, Var<T>>> params_;
};

template <class T>
struct Conv {
  Var<T> w;
  Var<T> b;
  int stride = 1;
  int pad = 0;

  Var<T> operator()(const Var<T>& x) const { return conv2d(x, w, b, stride, pad); }
};

template <class T>
struct ConvT {
  Var<T> w;
  Var<T> b;
  int stride = 2;
  int pad = 0;
  int output_pad = 0;

  Var<T> operator()(const Var<T>& x) const { return conv_transpose2d(x, w, b, stride, pad, output_pad); }
};

template <class T>
Conv<T> make_conv(ParamStore<T>& ps, const std::string& name, int cin, int cout, int k, int stride, int pad,
                  std::mt19937_64& rng, double stddev) {
  Conv<T> c;
  c.w = ps.add(name + ".w", Shape{cout, cin, k, k}, rng, stddev);
  c.b = ps.add(name + ".b", Shape{1, cout, 1, 1}, rng, 0.0);
  c.stride = stride;
  c.pad = pad;
  return c;
}

template <class T>
ConvT<T> make_convt(ParamStore<T>& ps, const std::string& name, int cin, int cout, int k, int stride, int pad,
                    int output_pad, std::mt19937_64& rng, double stddev) {
  ConvT<T> c;
  c.w = ps.add(name + ".w", Shape{cin, cout, k, k}, rng, stddev);
  c.b = ps.add(name + ".b", Shape{1, cout, 1, 1}, rng, 0.0);
  c.stride = stride;
  c.pad = pad;
  c.output_pad = output_pad;
  return c;
}

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. Parameters that received no gradient this step are skipped.
template <class T>
class Adam {
 public:
  Adam(std::vector<Var<T>> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    for (const auto& p : params_) {
      m_.emplace_back(p.shape());
      v_.emplace_back(p.shape());
    }
  }

  void step() {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, t_);
    const double c2 = 1.0 - std::pow(cfg_.beta2, t_);
    for (std::size_t k = 0; k < params_.size(); ++k) {
      auto& p = params_[k];
      if (!p.has_grad()) continue;
      const auto& g = p.grad();
      auto& w = p.mutable_value();
      auto& m = m_[k];
      auto& v = v_[k];
      for (std::size_t i = 0; i < w.numel(); ++i) {
        const double gi = g[i];
        m[i] = static_cast<T>(cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gi);
        v[i] = static_cast<T>(cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gi * gi);
        const double mh = m[i] / c1;
        const double vh = v[i] / c2;
        w[i] = static_cast<T>(w[i] - cfg_.lr * mh / (std::sqrt(vh) + cfg_.eps));
      }
    }
  }

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }
  int steps() const noexcept { return t_; }

 private:
  std::vector<Var<T>> params_;
  AdamConfig cfg_;
  std::vector<Tensor<T>> m_;
  std::vector<Tensor<T>> v_;
  int t_ = 0;
};

}  // namespace pfci::nn
