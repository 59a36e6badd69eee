#pragma once

#include "pfci/nn/autograd.hpp"

namespace pfci::nn {

/// 2D convolution with zero padding. x: (N, Cin, H, W); weight: (Cout, Cin, k, k);
/// bias: (1, Cout, 1, 1) or undefined.
template <class T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, int stride, int pad);

/// Transposed convolution. weight: (Cin, Cout, k, k). Output side is
/// (H - 1) * stride - 2 * pad + k + output_pad.
template <class T>
Var<T> conv_transpose2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, int stride, int pad,
                        int output_pad);

/// Reflection padding on both spatial axes; pad must be smaller than each side.
template <class T>
Var<T> reflect_pad2d(const Var<T>& x, int pad);

/// Per-sample, per-channel normalization over H*W with biased variance; no affine terms.
template <class T>
Var<T> instance_norm2d(const Var<T>& x, double eps = 1e-5);

template <class T>
Var<T> relu(const Var<T>& x);
template <class T>
Var<T> leaky_relu(const Var<T>& x, double slope = 0.2);
template <class T>
Var<T> tanh(const Var<T>& x);
template <class T>
Var<T> sigmoid(const Var<T>& x);

/// 2x2 max pooling with stride 2 (floor). Ties resolve to the first element in raster order.
template <class T>
Var<T> max_pool2(const Var<T>& x);

/// Concatenation along channels.
template <class T>
Var<T> concat_channels(const Var<T>& a, const Var<T>& b);

template <class T>
Var<T> add(const Var<T>& a, const Var<T>& b);
template <class T>
Var<T> scale(const Var<T>& a, double k);

/// mean((x - target)^2) against a constant.
template <class T>
Var<T> mse_const(const Var<T>& x, double target);
/// mean(|a - b|).
template <class T>
Var<T> l1_loss(const Var<T>& a, const Var<T>& b);
/// Numerically stable mean binary cross-entropy on logits against a target tensor in [0, 1].
template <class T>
Var<T> bce_logits(const Var<T>& logits, const Tensor<T>& target);
template <class T>
Var<T> bce_logits_const(const Var<T>& logits, double target);
/// 1 - (2 * sum(p * t) + eps) / (sum(p) + sum(t) + eps) over the whole batch.
template <class T>
Var<T> dice_loss(const Var<T>& probs, const Tensor<T>& target, double eps = 1e-6);

#define PFCI_NN_OPS_EXTERN(T)                                                                            \
  extern template Var<T> conv2d(const Var<T>&, const Var<T>&, const Var<T>&, int, int);                 \
  extern template Var<T> conv_transpose2d(const Var<T>&, const Var<T>&, const Var<T>&, int, int, int);  \
  extern template Var<T> reflect_pad2d(const Var<T>&, int);                                            \
  extern template Var<T> instance_norm2d(const Var<T>&, double);                                       \
  extern template Var<T> relu(const Var<T>&);                                                          \
  extern template Var<T> leaky_relu(const Var<T>&, double);                                            \
  extern template Var<T> tanh(const Var<T>&);                                                          \
  extern template Var<T> sigmoid(const Var<T>&);                                                       \
  extern template Var<T> max_pool2(const Var<T>&);                                                     \
  extern template Var<T> concat_channels(const Var<T>&, const Var<T>&);                                \
  extern template Var<T> add(const Var<T>&, const Var<T>&);                                            \
  extern template Var<T> scale(const Var<T>&, double);                                                 \
  extern template Var<T> mse_const(const Var<T>&, double);                                             \
  extern template Var<T> l1_loss(const Var<T>&, const Var<T>&);                                        \
  extern template Var<T> bce_logits(const Var<T>&, const Tensor<T>&);                                  \
  extern template Var<T> bce_logits_const(const Var<T>&, double);                                      \
  extern template Var<T> dice_loss(const Var<T>&, const Tensor<T>&, double);

PFCI_NN_OPS_EXTERN(float)
PFCI_NN_OPS_EXTERN(double)
#undef PFCI_NN_OPS_EXTERN

}  // namespace pfci::nn
