#pragma once

#include <cstdint>
#include <vector>

#include "pfci/model_config.hpp"
#include "pfci/nn/layers.hpp"

namespace pfci::nn {

/// PatchGAN layout: `strided` 4x4/stride-2 convs, one 4x4/stride-1 conv, then a stride-1
/// output conv of side `final_kernel`. Receptive field = (5 + final_kernel) * 2^strided - 2.
struct PatchLayout {
  int strided = 3;
  int final_kernel = 4;
  int receptive_field = 70;
};

/// Closest reachable layout to `target` (ties prefer a 4x4 output conv, then fewer layers).
PatchLayout patch_layout(int target_receptive_field);
/// Receptive field of a stack of (kernel, stride) convolutions.
int receptive_field(const std::vector<std::pair<int, int>>& kernel_stride);

/// ResNet translator: 7x7 stem, two stride-2 downsamplings, `depth` residual blocks, two
/// transposed-conv upsamplings, 7x7 head with tanh. Reflection padding, instance norm.
template <class T>
class ResnetGenerator {
 public:
  ResnetGenerator(const NetConfig& cfg, std::uint64_t seed);
  Var<T> forward(const Var<T>& x) const;
  ParamStore<T>& params() noexcept { return ps_; }
  const ParamStore<T>& params() const noexcept { return ps_; }
  const NetConfig& config() const noexcept { return cfg_; }

 private:
  NetConfig cfg_;
  ParamStore<T> ps_;
  Conv<T> stem_;
  std::vector<Conv<T>> down_;
  std::vector<std::pair<Conv<T>, Conv<T>>> res_;
  std::vector<ConvT<T>> up_;
  Conv<T> head_;
};

/// Patch discriminator emitting one raw score per patch.
template <class T>
class PatchDiscriminator {
 public:
  PatchDiscriminator(const NetConfig& cfg, int in_channels, std::uint64_t seed);
  Var<T> forward(const Var<T>& x) const;
  ParamStore<T>& params() noexcept { return ps_; }
  const ParamStore<T>& params() const noexcept { return ps_; }
  const PatchLayout& layout() const noexcept { return layout_; }
  /// Score-map side for a square input of side `input_size`.
  static int output_size(const PatchLayout& layout, int input_size);

 private:
  PatchLayout layout_;
  ParamStore<T> ps_;
  std::vector<Conv<T>> layers_;
};

/// Segmentation U-Net: `depth` levels of double 3x3 conv blocks joined by max pooling on the
/// way down and 2x2 transposed convs on the way up, with a skip concatenation at every
/// level. Emits logits.
template <class T>
class UNetSegmenter {
 public:
  UNetSegmenter(const NetConfig& cfg, std::uint64_t seed);
  Var<T> forward(const Var<T>& x) const;
  ParamStore<T>& params() noexcept { return ps_; }
  const ParamStore<T>& params() const noexcept { return ps_; }

 private:
  struct Block {
    Conv<T> a;
    Conv<T> b;
  };
  Var<T> block(const Block& blk, const Var<T>& x) const;

  NetConfig cfg_;
  ParamStore<T> ps_;
  std::vector<Block> enc_;
  Block bottom_;
  std::vector<ConvT<T>> up_;
  std::vector<Block> dec_;
  Conv<T> head_;
};

/// Encoder-decoder translator with skips: `depth` 4x4 stride-2 downsamplings (LeakyReLU 0.2),
/// mirrored transposed convs (ReLU) and a tanh head.
template <class T>
class UNetGenerator {
 public:
  UNetGenerator(const NetConfig& cfg, std::uint64_t seed);
  Var<T> forward(const Var<T>& x) const;
  ParamStore<T>& params() noexcept { return ps_; }
  const ParamStore<T>& params() const noexcept { return ps_; }

 private:
  NetConfig cfg_;
  ParamStore<T> ps_;
  std::vector<Conv<T>> down_;
  std::vector<ConvT<T>> up_;
};

/// Instance norm, skipped on 1x1 maps where it would zero the signal.
template <class T>
Var<T> norm_if_spatial(const Var<T>& x) {
  return x.shape().plane() > 1 ? instance_norm2d(x) : x;
}

extern template class ResnetGenerator<float>;
extern template class ResnetGenerator<double>;
extern template class PatchDiscriminator<float>;
extern template class PatchDiscriminator<double>;
extern template class UNetSegmenter<float>;
extern template class UNetSegmenter<double>;
extern template class UNetGenerator<float>;
extern template class UNetGenerator<double>;

}  // namespace pfci::nn
