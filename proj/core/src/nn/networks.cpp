#include "pfci/nn/networks.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

namespace pfci::nn {

namespace {

constexpr double kGanInitStd = 0.02;

int level_width(const NetConfig& cfg, int level) {
  int mult = 1;
  for (int i = 0; i < level && mult < cfg.max_width_mult; ++i) mult *= 2;
  return cfg.base_width * std::min(mult, cfg.max_width_mult);
}

double he_std(int cin, int k) { return std::sqrt(2.0 / (static_cast<double>(cin) * k * k)); }

}  // namespace

PatchLayout patch_layout(int target) {
  if (target < 1) throw ParameterError("discriminator receptive field must be >= 1");
  PatchLayout best{0, 4, 7};
  auto key = [target](const PatchLayout& l) {
    return std::make_tuple(std::abs(l.receptive_field - target), std::abs(l.final_kernel - 4), l.strided);
  };
  bool first = true;
  for (int n = 0; n <= 8; ++n) {
    for (int k = 2; k <= 8; ++k) {
      PatchLayout l{n, k, (5 + k) * (1 << n) - 2};
      if (first || key(l) < key(best)) best = l;
      first = false;
    }
  }
  return best;
}

int receptive_field(const std::vector<std::pair<int, int>>& kernel_stride) {
  int rf = 1;
  int jump = 1;
  for (auto [k, s] : kernel_stride) {
    rf += (k - 1) * jump;
    jump *= s;
  }
  return rf;
}

// ---------------------------------------------------------------------------------------

template <class T>
ResnetGenerator<T>::ResnetGenerator(const NetConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg.validate(Arch::ResnetGenerator);
  std::mt19937_64 rng(seed);
  const int w = cfg.base_width;
  stem_ = make_conv(ps_, "stem", cfg.in_channels, w, 7, 1, 0, rng, kGanInitStd);
  down_.push_back(make_conv(ps_, "down0", w, 2 * w, 3, 2, 1, rng, kGanInitStd));
  down_.push_back(make_conv(ps_, "down1", 2 * w, 4 * w, 3, 2, 1, rng, kGanInitStd));
  for (int i = 0; i < cfg.depth; ++i) {
    const std::string p = "res" + std::to_string(i);
    auto c1 = make_conv(ps_, p + ".c1", 4 * w, 4 * w, 3, 1, 0, rng, kGanInitStd);
    auto c2 = make_conv(ps_, p + ".c2", 4 * w, 4 * w, 3, 1, 0, rng, kGanInitStd);
    res_.emplace_back(c1, c2);
  }
  up_.push_back(make_convt(ps_, "up0", 4 * w, 2 * w, 3, 2, 1, 1, rng, kGanInitStd));
  up_.push_back(make_convt(ps_, "up1", 2 * w, w, 3, 2, 1, 1, rng, kGanInitStd));
  head_ = make_conv(ps_, "head", w, cfg.out_channels, 7, 1, 0, rng, kGanInitStd);
}

template <class T>
Var<T> ResnetGenerator<T>::forward(const Var<T>& x) const {
  Var<T> h = relu(instance_norm2d(stem_(reflect_pad2d(x, 3))));
  for (const auto& d : down_) h = relu(instance_norm2d(d(h)));
  for (const auto& [c1, c2] : res_) {
    Var<T> r = relu(instance_norm2d(c1(reflect_pad2d(h, 1))));
    r = instance_norm2d(c2(reflect_pad2d(r, 1)));
    h = add(h, r);
  }
  for (const auto& u : up_) h = relu(instance_norm2d(u(h)));
  return tanh(head_(reflect_pad2d(h, 3)));
}

// ---------------------------------------------------------------------------------------

template <class T>
PatchDiscriminator<T>::PatchDiscriminator(const NetConfig& cfg, int in_channels, std::uint64_t seed)
    : layout_(patch_layout(cfg.disc_receptive_field)) {
  cfg.validate(Arch::PatchDiscriminator);
  if (in_channels < 1) throw ParameterError("discriminator needs at least one input channel");
  std::mt19937_64 rng(seed);
  auto width = [&](int i) { return cfg.disc_base_width * std::min(1 << std::min(i, 3), 8); };
  int cin = in_channels;
  int i = 0;
  for (; i < layout_.strided; ++i) {
    layers_.push_back(make_conv(ps_, "l" + std::to_string(i), cin, width(i), 4, 2, 1, rng, kGanInitStd));
    cin = width(i);
  }
  layers_.push_back(make_conv(ps_, "l" + std::to_string(i), cin, width(i), 4, 1, 1, rng, kGanInitStd));
  cin = width(i);
  ++i;
  layers_.push_back(make_conv(ps_, "l" + std::to_string(i), cin, 1, layout_.final_kernel, 1,
                              (layout_.final_kernel - 2) / 2, rng, kGanInitStd));
  if (output_size(layout_, cfg.input_size) < 1) {
    throw ParameterError("discriminator receptive field " + std::to_string(layout_.receptive_field) +
                         " collapses a " + std::to_string(cfg.input_size) + "-pixel input");
  }
}

template <class T>
int PatchDiscriminator<T>::output_size(const PatchLayout& layout, int input_size) {
  int s = input_size;
  for (int i = 0; i < layout.strided; ++i) s = (s + 2 - 4) / 2 + 1;
  s = s + 2 - 4 + 1;
  s = s + 2 * ((layout.final_kernel - 2) / 2) - layout.final_kernel + 1;
  return s;
}

template <class T>
Var<T> PatchDiscriminator<T>::forward(const Var<T>& x) const {
  Var<T> h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = layers_[i](h);
    if (i + 1 == layers_.size()) break;
    if (i > 0) h = norm_if_spatial(h);
    h = leaky_relu(h, 0.2);
  }
  return h;
}

// ---------------------------------------------------------------------------------------

template <class T>
UNetSegmenter<T>::UNetSegmenter(const NetConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg.validate(Arch::UNetSegmenter);
  std::mt19937_64 rng(seed);
  auto make_block = [&](const std::string& name, int cin, int cout) {
    return Block{make_conv(ps_, name + ".a", cin, cout, 3, 1, 1, rng, he_std(cin, 3)),
                 make_conv(ps_, name + ".b", cout, cout, 3, 1, 1, rng, he_std(cout, 3))};
  };
  const int levels = cfg.depth;
  int cin = cfg.in_channels;
  for (int l = 0; l < levels; ++l) {
    enc_.push_back(make_block("enc" + std::to_string(l), cin, level_width(cfg, l)));
    cin = level_width(cfg, l);
  }
  bottom_ = make_block("bottom", cin, level_width(cfg, levels));
  for (int l = 0; l < levels; ++l) {
    const int wl = level_width(cfg, l);
    const int wn = level_width(cfg, l + 1);
    up_.push_back(make_convt(ps_, "up" + std::to_string(l), wn, wl, 2, 2, 0, 0, rng, he_std(wn, 2)));
    dec_.push_back(make_block("dec" + std::to_string(l), 2 * wl, wl));
  }
  head_ = make_conv(ps_, "head", level_width(cfg, 0), cfg.out_channels, 1, 1, 0, rng, he_std(level_width(cfg, 0), 1));
}

template <class T>
Var<T> UNetSegmenter<T>::block(const Block& blk, const Var<T>& x) const {
  return relu(blk.b(relu(blk.a(x))));
}

template <class T>
Var<T> UNetSegmenter<T>::forward(const Var<T>& x) const {
  std::vector<Var<T>> skips;
  Var<T> h = x;
  for (const auto& e : enc_) {
    h = block(e, h);
    skips.push_back(h);
    h = max_pool2(h);
  }
  h = block(bottom_, h);
  for (int l = static_cast<int>(enc_.size()) - 1; l >= 0; --l) {
    Var<T> u = up_[static_cast<std::size_t>(l)](h);
    h = block(dec_[static_cast<std::size_t>(l)], concat_channels(skips[static_cast<std::size_t>(l)], u));
  }
  return head_(h);
}

// ---------------------------------------------------------------------------------------

template <class T>
UNetGenerator<T>::UNetGenerator(const NetConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg.validate(Arch::UNetGenerator);
  std::mt19937_64 rng(seed);
  const int levels = cfg.depth;
  int cin = cfg.in_channels;
  for (int l = 0; l < levels; ++l) {
    down_.push_back(make_conv(ps_, "down" + std::to_string(l), cin, level_width(cfg, l), 4, 2, 1, rng, kGanInitStd));
    cin = level_width(cfg, l);
  }
  // up_[l] maps level l back to level l-1 (or to the output for l = 0).
  for (int l = 0; l < levels; ++l) {
    const int in = (l == levels - 1) ? level_width(cfg, l) : 2 * level_width(cfg, l);
    const int out = (l == 0) ? cfg.out_channels : level_width(cfg, l - 1);
    up_.push_back(make_convt(ps_, "up" + std::to_string(l), in, out, 4, 2, 1, 0, rng, kGanInitStd));
  }
}

template <class T>
Var<T> UNetGenerator<T>::forward(const Var<T>& x) const {
  const int levels = static_cast<int>(down_.size());
  std::vector<Var<T>> feats;
  Var<T> h = down_[0](x);
  feats.push_back(h);
  for (int l = 1; l < levels; ++l) {
    h = norm_if_spatial(down_[static_cast<std::size_t>(l)](leaky_relu(h, 0.2)));
    feats.push_back(h);
  }
  for (int l = levels - 1; l >= 1; --l) {
    h = norm_if_spatial(up_[static_cast<std::size_t>(l)](relu(h)));
    h = concat_channels(feats[static_cast<std::size_t>(l - 1)], h);
  }
  return tanh(up_[0](relu(h)));
}

template class ResnetGenerator<float>;
template class ResnetGenerator<double>;
template class PatchDiscriminator<float>;
template class PatchDiscriminator<double>;
template class UNetSegmenter<float>;
template class UNetSegmenter<double>;
template class UNetGenerator<float>;
template class UNetGenerator<double>;

}  // namespace pfci::nn
