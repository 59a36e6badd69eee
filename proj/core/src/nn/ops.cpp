#include "pfci/nn/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <memory>

namespace pfci::nn {

namespace {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MapMat = Eigen::Map<RowMat<T>>;
template <class T>
using CMapMat = Eigen::Map<const RowMat<T>>;

/// Uninitialized working buffer; every use overwrites it completely.
template <class T>
class Scratch {
 public:
  explicit Scratch(std::size_t n) : n_(n), p_(new T[n]) {}
  T* data() noexcept { return p_.get(); }
  std::size_t size() const noexcept { return n_; }

 private:
  std::size_t n_;
  std::unique_ptr<T[]> p_;
};

struct ConvGeom {
  int c, h, w;  // image side
  int k, stride, pad;
  int oh, ow;   // column side
  int rows() const { return c * k * k; }
  int cols() const { return oh * ow; }
};

/// Output columns [lo, hi) whose input x = ox * stride - pad + kj falls inside [0, w).
inline void valid_range(const ConvGeom& g, int kj, int& lo, int& hi) {
  const int off = kj - g.pad;
  lo = off >= 0 ? 0 : (-off + g.stride - 1) / g.stride;
  hi = off >= g.w ? 0 : std::min(g.ow, (g.w - 1 - off) / g.stride + 1);
  if (hi < lo) hi = lo;
}

template <class T>
void im2col(const T* img, const ConvGeom& g, T* col) {
  for (int c = 0; c < g.c; ++c) {
    const T* plane = img + static_cast<std::size_t>(c) * g.h * g.w;
    for (int ki = 0; ki < g.k; ++ki) {
      for (int kj = 0; kj < g.k; ++kj) {
        T* dst = col + (static_cast<std::size_t>((c * g.k + ki) * g.k + kj)) * g.cols();
        int lo, hi;
        valid_range(g, kj, lo, hi);
        const int off = kj - g.pad;
        for (int oy = 0; oy < g.oh; ++oy) {
          const int iy = oy * g.stride - g.pad + ki;
          T* drow = dst + static_cast<std::size_t>(oy) * g.ow;
          if (iy < 0 || iy >= g.h) {
            std::fill(drow, drow + g.ow, T(0));
            continue;
          }
          const T* srow = plane + static_cast<std::size_t>(iy) * g.w;
          std::fill(drow, drow + lo, T(0));
          if (g.stride == 1) {
            if (hi > lo) std::copy(srow + (off + lo), srow + (off + hi), drow + lo);
          } else {
            for (int ox = lo; ox < hi; ++ox) drow[ox] = srow[off + ox * g.stride];
          }
          std::fill(drow + hi, drow + g.ow, T(0));
        }
      }
    }
  }
}

template <class T>
void col2im(const T* col, const ConvGeom& g, T* img) {
  for (int c = 0; c < g.c; ++c) {
    T* plane = img + static_cast<std::size_t>(c) * g.h * g.w;
    for (int ki = 0; ki < g.k; ++ki) {
      for (int kj = 0; kj < g.k; ++kj) {
        const T* src = col + (static_cast<std::size_t>((c * g.k + ki) * g.k + kj)) * g.cols();
        int lo, hi;
        valid_range(g, kj, lo, hi);
        const int off = kj - g.pad;
        for (int oy = 0; oy < g.oh; ++oy) {
          const int iy = oy * g.stride - g.pad + ki;
          if (iy < 0 || iy >= g.h) continue;
          const T* srow = src + static_cast<std::size_t>(oy) * g.ow;
          T* drow = plane + static_cast<std::size_t>(iy) * g.w;
          if (g.stride == 1) {
            for (int ox = lo; ox < hi; ++ox) drow[off + ox] += srow[ox];
          } else {
            for (int ox = lo; ox < hi; ++ox) drow[off + ox * g.stride] += srow[ox];
          }
        }
      }
    }
  }
}

template <class T>
void require_same(const Var<T>& a, const Var<T>& b, const char* op) {
  if (!(a.shape() == b.shape())) {
    throw ShapeError(std::string(op) + ": shapes differ " + a.shape().str() + " vs " + b.shape().str());
  }
}

template <class T>
void check_bias(const Var<T>& bias, int channels, const char* op) {
  if (bias.defined() && !(bias.shape() == Shape{1, channels, 1, 1})) {
    throw ShapeError(std::string(op) + ": bias shape " + bias.shape().str() + " does not match " +
                     std::to_string(channels) + " channels");
  }
}

template <class T>
void add_bias(Tensor<T>& out, const Var<T>& bias) {
  if (!bias.defined()) return;
  const Shape& s = out.shape();
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) {
      const T b = bias.value()[static_cast<std::size_t>(c)];
      T* p = out.channel(n, c);
      for (std::size_t i = 0; i < s.plane(); ++i) p[i] += b;
    }
}

template <class T>
void accumulate_bias_grad(const Tensor<T>& gout, Var<T> bias) {
  if (!bias.requires_grad()) return;
  auto& gb = bias.grad_buffer();
  const Shape& s = gout.shape();
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) {
      const T* p = gout.channel(n, c);
      double acc = 0;
      for (std::size_t i = 0; i < s.plane(); ++i) acc += p[i];
      gb[static_cast<std::size_t>(c)] += static_cast<T>(acc);
    }
}

// Elementwise map with a derivative expressed through input and output values.
template <class T, class F, class D>
Var<T> unary(const Var<T>& x, F f, D dfdx) {
  Tensor<T> out(x.shape());
  const auto& xv = x.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = f(xv[i]);
  return make_result<T>(std::move(out), {x}, [x, dfdx](Node<T>& self) mutable {
    if (!x.requires_grad()) return;
    auto& gx = x.grad_buffer();
    const auto& xv = x.value();
    for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] += self.grad[i] * dfdx(xv[i], self.value[i]);
  });
}

template <class T>
Var<T> scalar_result(double v, std::initializer_list<Var<T>> inputs, std::function<void(Node<T>&)> bw) {
  return make_result<T>(Tensor<T>(kScalar, static_cast<T>(v)), inputs, std::move(bw));
}

}  // namespace

template <class T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, int stride, int pad) {
  const Shape xs = x.shape();
  const Shape ws = weight.shape();
  if (ws.c != xs.c || ws.h != ws.w) {
    throw ShapeError("conv2d: weight " + ws.str() + " incompatible with input " + xs.str());
  }
  check_bias(bias, ws.n, "conv2d");
  const int k = ws.h;
  const int oh = (xs.h + 2 * pad - k) / stride + 1;
  const int ow = (xs.w + 2 * pad - k) / stride + 1;
  if (oh < 1 || ow < 1 || xs.h + 2 * pad < k || xs.w + 2 * pad < k) {
    throw ShapeError("conv2d: input " + xs.str() + " too small for kernel " + std::to_string(k));
  }
  const ConvGeom g{xs.c, xs.h, xs.w, k, stride, pad, oh, ow};
  const int cout = ws.n;

  Tensor<T> out(Shape{xs.n, cout, oh, ow});
  Scratch<T> col(static_cast<std::size_t>(g.rows()) * g.cols());
  CMapMat<T> W(weight.value().data(), cout, g.rows());
  for (int n = 0; n < xs.n; ++n) {
    im2col(x.value().sample(n), g, col.data());
    CMapMat<T> C(col.data(), g.rows(), g.cols());
    MapMat<T> O(out.sample(n), cout, g.cols());
    O.noalias() = W * C;
  }
  add_bias(out, bias);

  return make_result<T>(std::move(out), {x, weight, bias}, [x, weight, bias, g, cout](Node<T>& self) mutable {
    const Shape xs = x.shape();
    Scratch<T> col(static_cast<std::size_t>(g.rows()) * g.cols());
    Scratch<T> dcol(col.size());
    CMapMat<T> W(weight.value().data(), cout, g.rows());
    for (int n = 0; n < xs.n; ++n) {
      CMapMat<T> dY(self.grad.sample(n), cout, g.cols());
      if (weight.requires_grad()) {
        im2col(x.value().sample(n), g, col.data());
        CMapMat<T> C(col.data(), g.rows(), g.cols());
        MapMat<T> dW(weight.grad_buffer().data(), cout, g.rows());
        dW.noalias() += dY * C.transpose();
      }
      if (x.requires_grad()) {
        MapMat<T> dC(dcol.data(), g.rows(), g.cols());
        dC.noalias() = W.transpose() * dY;
        col2im(dcol.data(), g, x.grad_buffer().sample(n));
      }
    }
    accumulate_bias_grad(self.grad, bias);
  });
}

template <class T>
Var<T> conv_transpose2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, int stride, int pad,
                        int output_pad) {
  const Shape xs = x.shape();
  const Shape ws = weight.shape();
  if (ws.n != xs.c || ws.h != ws.w) {
    throw ShapeError("conv_transpose2d: weight " + ws.str() + " incompatible with input " + xs.str());
  }
  const int cout = ws.c;
  check_bias(bias, cout, "conv_transpose2d");
  const int k = ws.h;
  const int oh = (xs.h - 1) * stride - 2 * pad + k + output_pad;
  const int ow = (xs.w - 1) * stride - 2 * pad + k + output_pad;
  if (oh < 1 || ow < 1 || output_pad >= stride) throw ShapeError("conv_transpose2d: invalid geometry");
  // Image side is the output; the column side must reproduce the input grid.
  const ConvGeom g{cout, oh, ow, k, stride, pad, xs.h, xs.w};
  if ((oh + 2 * pad - k) / stride + 1 != xs.h || (ow + 2 * pad - k) / stride + 1 != xs.w) {
    throw ShapeError("conv_transpose2d: geometry does not invert");
  }
  const int cin = xs.c;

  Tensor<T> out(Shape{xs.n, cout, oh, ow});
  Scratch<T> col(static_cast<std::size_t>(g.rows()) * g.cols());
  CMapMat<T> W(weight.value().data(), cin, g.rows());
  for (int n = 0; n < xs.n; ++n) {
    CMapMat<T> X(x.value().sample(n), cin, g.cols());
    MapMat<T> C(col.data(), g.rows(), g.cols());
    C.noalias() = W.transpose() * X;
    col2im(col.data(), g, out.sample(n));
  }
  add_bias(out, bias);

  return make_result<T>(std::move(out), {x, weight, bias}, [x, weight, bias, g, cin](Node<T>& self) mutable {
    const Shape xs = x.shape();
    Scratch<T> dcol(static_cast<std::size_t>(g.rows()) * g.cols());
    CMapMat<T> W(weight.value().data(), cin, g.rows());
    for (int n = 0; n < xs.n; ++n) {
      im2col(self.grad.sample(n), g, dcol.data());
      CMapMat<T> dC(dcol.data(), g.rows(), g.cols());
      if (x.requires_grad()) {
        MapMat<T> dX(x.grad_buffer().sample(n), cin, g.cols());
        dX.noalias() += W * dC;
      }
      if (weight.requires_grad()) {
        CMapMat<T> X(x.value().sample(n), cin, g.cols());
        MapMat<T> dW(weight.grad_buffer().data(), cin, g.rows());
        dW.noalias() += X * dC.transpose();
      }
    }
    accumulate_bias_grad(self.grad, bias);
  });
}

template <class T>
Var<T> reflect_pad2d(const Var<T>& x, int pad) {
  const Shape xs = x.shape();
  if (pad < 0 || pad >= xs.h || pad >= xs.w) {
    throw ShapeError("reflect_pad2d: pad " + std::to_string(pad) + " too large for " + xs.str());
  }
  const Shape os{xs.n, xs.c, xs.h + 2 * pad, xs.w + 2 * pad};
  auto reflect = [](int i, int n) { return i < 0 ? -i : (i >= n ? 2 * n - 2 - i : i); };
  // Source offset within a plane for every output pixel.
  std::vector<int> src(os.plane());
  for (int y = 0; y < os.h; ++y)
    for (int xx = 0; xx < os.w; ++xx)
      src[static_cast<std::size_t>(y) * os.w + xx] = reflect(y - pad, xs.h) * xs.w + reflect(xx - pad, xs.w);

  Tensor<T> out(os);
  for (int n = 0; n < xs.n; ++n)
    for (int c = 0; c < xs.c; ++c) {
      const T* s = x.value().channel(n, c);
      T* d = out.channel(n, c);
      for (std::size_t i = 0; i < src.size(); ++i) d[i] = s[src[i]];
    }
  return make_result<T>(std::move(out), {x}, [x, src = std::move(src)](Node<T>& self) mutable {
    if (!x.requires_grad()) return;
    auto& gx = x.grad_buffer();
    const Shape xs = x.shape();
    for (int n = 0; n < xs.n; ++n)
      for (int c = 0; c < xs.c; ++c) {
        const T* g = self.grad.channel(n, c);
        T* d = gx.channel(n, c);
        for (std::size_t i = 0; i < src.size(); ++i) d[src[i]] += g[i];
      }
  });
}

template <class T>
Var<T> instance_norm2d(const Var<T>& x, double eps) {
  const Shape xs = x.shape();
  const std::size_t hw = xs.plane();
  std::vector<T> inv_std(static_cast<std::size_t>(xs.n) * xs.c);
  Tensor<T> out(xs);
  for (int n = 0; n < xs.n; ++n)
    for (int c = 0; c < xs.c; ++c) {
      const T* s = x.value().channel(n, c);
      T* d = out.channel(n, c);
      double mean = 0;
      for (std::size_t i = 0; i < hw; ++i) mean += s[i];
      mean /= static_cast<double>(hw);
      double var = 0;
      for (std::size_t i = 0; i < hw; ++i) var += (s[i] - mean) * (s[i] - mean);
      var /= static_cast<double>(hw);
      const double is = 1.0 / std::sqrt(var + eps);
      inv_std[static_cast<std::size_t>(n) * xs.c + c] = static_cast<T>(is);
      for (std::size_t i = 0; i < hw; ++i) d[i] = static_cast<T>((s[i] - mean) * is);
    }
  return make_result<T>(std::move(out), {x}, [x, inv_std = std::move(inv_std)](Node<T>& self) mutable {
    if (!x.requires_grad()) return;
    const Shape xs = x.shape();
    const std::size_t hw = xs.plane();
    auto& gx = x.grad_buffer();
    for (int n = 0; n < xs.n; ++n)
      for (int c = 0; c < xs.c; ++c) {
        const T* g = self.grad.channel(n, c);
        const T* y = self.value.channel(n, c);
        T* d = gx.channel(n, c);
        double mg = 0, mgy = 0;
        for (std::size_t i = 0; i < hw; ++i) {
          mg += g[i];
          mgy += static_cast<double>(g[i]) * y[i];
        }
        mg /= static_cast<double>(hw);
        mgy /= static_cast<double>(hw);
        const double is = inv_std[static_cast<std::size_t>(n) * xs.c + c];
        for (std::size_t i = 0; i < hw; ++i) d[i] += static_cast<T>(is * (g[i] - mg - y[i] * mgy));
      }
  });
}

template <class T>
Var<T> relu(const Var<T>& x) {
  if (BranchTrace::active()) {
    for (T v : x.value().span()) BranchTrace::record(v > T(0));
  }
  return unary(
      x, [](T v) { return v > T(0) ? v : T(0); }, [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <class T>
Var<T> leaky_relu(const Var<T>& x, double slope) {
  if (BranchTrace::active()) {
    for (T v : x.value().span()) BranchTrace::record(v > T(0));
  }
  const T s = static_cast<T>(slope);
  return unary(
      x, [s](T v) { return v > T(0) ? v : s * v; }, [s](T v, T) { return v > T(0) ? T(1) : s; });
}

template <class T>
Var<T> tanh(const Var<T>& x) {
  return unary(
      x, [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
}

template <class T>
Var<T> sigmoid(const Var<T>& x) {
  return unary(
      x,
      [](T v) {
        if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
        const T e = std::exp(v);
        return e / (T(1) + e);
      },
      [](T, T y) { return y * (T(1) - y); });
}

template <class T>
Var<T> max_pool2(const Var<T>& x) {
  const Shape xs = x.shape();
  if (xs.h < 2 || xs.w < 2) throw ShapeError("max_pool2: input " + xs.str() + " smaller than 2x2");
  const Shape os{xs.n, xs.c, xs.h / 2, xs.w / 2};
  Tensor<T> out(os);
  std::vector<std::size_t> arg(os.numel());
  const bool trace = BranchTrace::active();
  std::size_t o = 0;
  for (int n = 0; n < xs.n; ++n)
    for (int c = 0; c < xs.c; ++c) {
      const std::size_t base = static_cast<std::size_t>(n) * xs.sample() + static_cast<std::size_t>(c) * xs.plane();
      for (int y = 0; y < os.h; ++y)
        for (int xx = 0; xx < os.w; ++xx, ++o) {
          std::size_t best = base + static_cast<std::size_t>(2 * y) * xs.w + 2 * xx;
          std::uint8_t which = 0;
          const std::size_t cand[4] = {best, best + 1, best + static_cast<std::size_t>(xs.w),
                                       best + static_cast<std::size_t>(xs.w) + 1};
          for (std::uint8_t q = 1; q < 4; ++q) {
            if (x.value()[cand[q]] > x.value()[best]) {
              best = cand[q];
              which = q;
            }
          }
          if (trace) BranchTrace::record(which);
          arg[o] = best;
          out[o] = x.value()[best];
        }
    }
  return make_result<T>(std::move(out), {x}, [x, arg = std::move(arg)](Node<T>& self) mutable {
    if (!x.requires_grad()) return;
    auto& gx = x.grad_buffer();
    for (std::size_t i = 0; i < arg.size(); ++i) gx[arg[i]] += self.grad[i];
  });
}

template <class T>
Var<T> concat_channels(const Var<T>& a, const Var<T>& b) {
  const Shape as = a.shape(), bs = b.shape();
  if (as.n != bs.n || as.h != bs.h || as.w != bs.w) {
    throw ShapeError("concat_channels: " + as.str() + " vs " + bs.str());
  }
  Tensor<T> out(Shape{as.n, as.c + bs.c, as.h, as.w});
  for (int n = 0; n < as.n; ++n) {
    std::copy(a.value().sample(n), a.value().sample(n) + as.sample(), out.sample(n));
    std::copy(b.value().sample(n), b.value().sample(n) + bs.sample(), out.sample(n) + as.sample());
  }
  return make_result<T>(std::move(out), {a, b}, [a, b](Node<T>& self) mutable {
    const Shape as = a.shape(), bs = b.shape();
    for (int n = 0; n < as.n; ++n) {
      const T* g = self.grad.sample(n);
      if (a.requires_grad()) {
        T* d = a.grad_buffer().sample(n);
        for (std::size_t i = 0; i < as.sample(); ++i) d[i] += g[i];
      }
      if (b.requires_grad()) {
        T* d = b.grad_buffer().sample(n);
        for (std::size_t i = 0; i < bs.sample(); ++i) d[i] += g[as.sample() + i];
      }
    }
  });
}

template <class T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require_same(a, b, "add");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a.value()[i] + b.value()[i];
  return make_result<T>(std::move(out), {a, b}, [a, b](Node<T>& self) mutable {
    for (const Var<T>* v : {&a, &b}) {
      if (!v->requires_grad()) continue;
      auto& g = v->grad_buffer();
      for (std::size_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i];
    }
  });
}

template <class T>
Var<T> scale(const Var<T>& a, double k) {
  Tensor<T> out(a.shape());
  const T kk = static_cast<T>(k);
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a.value()[i] * kk;
  return make_result<T>(std::move(out), {a}, [a, kk](Node<T>& self) mutable {
    if (!a.requires_grad()) return;
    auto& g = a.grad_buffer();
    for (std::size_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i] * kk;
  });
}

template <class T>
Var<T> mse_const(const Var<T>& x, double target) {
  const auto& xv = x.value();
  double acc = 0;
  for (std::size_t i = 0; i < xv.numel(); ++i) acc += (xv[i] - target) * (xv[i] - target);
  const double n = static_cast<double>(xv.numel());
  return scalar_result<T>(acc / n, {x}, [x, target, n](Node<T>& self) mutable {
    if (!x.requires_grad()) return;
    auto& g = x.grad_buffer();
    const double s = 2.0 * self.grad[0] / n;
    for (std::size_t i = 0; i < g.numel(); ++i) g[i] += static_cast<T>(s * (x.value()[i] - target));
  });
}

template <class T>
Var<T> l1_loss(const Var<T>& a, const Var<T>& b) {
  require_same(a, b, "l1_loss");
  const bool trace = BranchTrace::active();
  double acc = 0;
  for (std::size_t i = 0; i < a.value().numel(); ++i) {
    const double d = static_cast<double>(a.value()[i]) - b.value()[i];
    acc += std::abs(d);
    if (trace) BranchTrace::record(static_cast<std::uint8_t>((d > 0) + 2 * (d < 0)));
  }
  const double n = static_cast<double>(a.value().numel());
  return scalar_result<T>(acc / n, {a, b}, [a, b, n](Node<T>& self) mutable {
    const T s = static_cast<T>(self.grad[0] / n);
    for (std::size_t i = 0; i < a.value().numel(); ++i) {
      const T d = a.value()[i] - b.value()[i];
      const T sg = d > T(0) ? s : (d < T(0) ? -s : T(0));
      if (a.requires_grad()) a.grad_buffer()[i] += sg;
      if (b.requires_grad()) b.grad_buffer()[i] -= sg;
    }
  });
}

template <class T>
Var<T> bce_logits(const Var<T>& logits, const Tensor<T>& target) {
  if (!(logits.shape() == target.shape())) {
    throw ShapeError("bce_logits: logits " + logits.shape().str() + " vs target " + target.shape().str());
  }
  const auto& xv = logits.value();
  double acc = 0;
  for (std::size_t i = 0; i < xv.numel(); ++i) {
    const double v = xv[i];
    acc += std::max(v, 0.0) - v * target[i] + std::log1p(std::exp(-std::abs(v)));
  }
  const double n = static_cast<double>(xv.numel());
  return scalar_result<T>(acc / n, {logits}, [logits, target, n](Node<T>& self) mutable {
    if (!logits.requires_grad()) return;
    auto& g = logits.grad_buffer();
    const double s = self.grad[0] / n;
    for (std::size_t i = 0; i < g.numel(); ++i) {
      const double v = logits.value()[i];
      const double sig = v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
      g[i] += static_cast<T>(s * (sig - target[i]));
    }
  });
}

template <class T>
Var<T> bce_logits_const(const Var<T>& logits, double target) {
  return bce_logits(logits, Tensor<T>(logits.shape(), static_cast<T>(target)));
}

template <class T>
Var<T> dice_loss(const Var<T>& probs, const Tensor<T>& target, double eps) {
  if (!(probs.shape() == target.shape())) {
    throw ShapeError("dice_loss: prediction " + probs.shape().str() + " vs target " + target.shape().str());
  }
  const auto& p = probs.value();
  double spt = 0, sp = 0, st = 0;
  for (std::size_t i = 0; i < p.numel(); ++i) {
    spt += static_cast<double>(p[i]) * target[i];
    sp += p[i];
    st += target[i];
  }
  const double num = 2.0 * spt + eps;
  const double den = sp + st + eps;
  return scalar_result<T>(1.0 - num / den, {probs}, [probs, target, num, den](Node<T>& self) mutable {
    if (!probs.requires_grad()) return;
    auto& g = probs.grad_buffer();
    const double s = self.grad[0];
    for (std::size_t i = 0; i < g.numel(); ++i) {
      g[i] += static_cast<T>(-s * (2.0 * target[i] * den - num) / (den * den));
    }
  });
}

#define PFCI_NN_OPS_INSTANTIATE(T)                                                             \
  template Var<T> conv2d(const Var<T>&, const Var<T>&, const Var<T>&, int, int);              \
  template Var<T> conv_transpose2d(const Var<T>&, const Var<T>&, const Var<T>&, int, int, int); \
  template Var<T> reflect_pad2d(const Var<T>&, int);                                         \
  template Var<T> instance_norm2d(const Var<T>&, double);                                    \
  template Var<T> relu(const Var<T>&);                                                       \
  template Var<T> leaky_relu(const Var<T>&, double);                                         \
  template Var<T> tanh(const Var<T>&);                                                       \
  template Var<T> sigmoid(const Var<T>&);                                                    \
  template Var<T> max_pool2(const Var<T>&);                                                  \
  template Var<T> concat_channels(const Var<T>&, const Var<T>&);                             \
  template Var<T> add(const Var<T>&, const Var<T>&);                                         \
  template Var<T> scale(const Var<T>&, double);                                              \
  template Var<T> mse_const(const Var<T>&, double);                                          \
  template Var<T> l1_loss(const Var<T>&, const Var<T>&);                                     \
  template Var<T> bce_logits(const Var<T>&, const Tensor<T>&);                               \
  template Var<T> bce_logits_const(const Var<T>&, double);                                   \
  template Var<T> dice_loss(const Var<T>&, const Tensor<T>&, double);

PFCI_NN_OPS_INSTANTIATE(float)
PFCI_NN_OPS_INSTANTIATE(double)

}  // namespace pfci::nn
