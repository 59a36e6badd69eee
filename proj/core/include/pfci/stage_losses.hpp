#pragma once

#include <cstdint>

#include "pfci/model_config.hpp"
#include "pfci/nn/networks.hpp"

namespace pfci {

/// Independent per-network seeds from one training seed.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

template <class T>
struct CycleGanNets {
  nn::ResnetGenerator<T> g_ab;
  nn::ResnetGenerator<T> g_ba;
  nn::PatchDiscriminator<T> d_a;
  nn::PatchDiscriminator<T> d_b;

  CycleGanNets(const NetConfig& cfg, std::uint64_t seed)
      : g_ab(cfg, derive_seed(seed, 0)),
        g_ba(cfg, derive_seed(seed, 1)),
        d_a(cfg, cfg.in_channels, derive_seed(seed, 2)),
        d_b(cfg, cfg.out_channels, derive_seed(seed, 3)) {}
};

template <class T>
struct Pix2PixNets {
  nn::UNetGenerator<T> g;
  nn::PatchDiscriminator<T> d;

  Pix2PixNets(const NetConfig& cfg, std::uint64_t seed)
      : g(cfg, derive_seed(seed, 0)), d(cfg, cfg.in_channels + cfg.out_channels, derive_seed(seed, 1)) {}
};

struct CycleGanTerms {
  double adv = 0;
  double cycle = 0;
};

struct SegmentationTerms {
  double bce = 0;
  double dice = 0;
};

struct Pix2PixTerms {
  double gan = 0;
  double l1 = 0;
};

/// Least-squares adversarial terms for both generators plus weighted cycle consistency.
template <class T>
nn::Var<T> cyclegan_generator_loss(const CycleGanNets<T>& nets, const nn::Var<T>& a, const nn::Var<T>& b,
                                   const LossWeights& w, CycleGanTerms* terms = nullptr,
                                   nn::Var<T>* fake_a_out = nullptr, nn::Var<T>* fake_b_out = nullptr) {
  using namespace nn;
  Var<T> fake_b = nets.g_ab.forward(a);
  Var<T> fake_a = nets.g_ba.forward(b);
  if (fake_a_out) *fake_a_out = fake_a;
  if (fake_b_out) *fake_b_out = fake_b;
  Var<T> adv = add(mse_const(nets.d_b.forward(fake_b), 1.0), mse_const(nets.d_a.forward(fake_a), 1.0));
  Var<T> cyc = add(l1_loss(nets.g_ba.forward(fake_b), a), l1_loss(nets.g_ab.forward(fake_a), b));
  if (terms) {
    terms->adv = adv.item();
    terms->cycle = cyc.item();
  }
  return add(adv, scale(cyc, w.cycle));
}

/// Least-squares discriminator objective, halved as in the original recipe.
template <class T>
nn::Var<T> lsgan_discriminator_loss(const nn::PatchDiscriminator<T>& d, const nn::Var<T>& real,
                                    const nn::Var<T>& fake) {
  using namespace nn;
  return scale(add(mse_const(d.forward(real), 1.0), mse_const(d.forward(fake), 0.0)), 0.5);
}

/// Weighted sum of binary cross-entropy on logits and soft Dice on probabilities.
template <class T>
nn::Var<T> segmentation_loss(const nn::UNetSegmenter<T>& net, const nn::Var<T>& x, const nn::Tensor<T>& target,
                             const LossWeights& w, SegmentationTerms* terms = nullptr) {
  using namespace nn;
  Var<T> logits = net.forward(x);
  Var<T> bce = bce_logits(logits, target);
  Var<T> dice = dice_loss(sigmoid(logits), target);
  if (terms) {
    terms->bce = bce.item();
    terms->dice = dice.item();
  }
  return add(scale(bce, w.bce), scale(dice, w.dice));
}

/// Conditional adversarial term (sigmoid cross-entropy) plus weighted L1 to the target.
template <class T>
nn::Var<T> pix2pix_generator_loss(const Pix2PixNets<T>& nets, const nn::Var<T>& x, const nn::Var<T>& y,
                                  const LossWeights& w, Pix2PixTerms* terms = nullptr,
                                  nn::Var<T>* fake_out = nullptr) {
  using namespace nn;
  Var<T> fake = nets.g.forward(x);
  Var<T> gan = bce_logits_const(nets.d.forward(concat_channels(x, fake)), 1.0);
  Var<T> l1 = l1_loss(fake, y);
  if (terms) {
    terms->gan = gan.item();
    terms->l1 = l1.item();
  }
  if (fake_out) *fake_out = fake;
  return add(scale(gan, w.gan), scale(l1, w.l1));
}

template <class T>
nn::Var<T> pix2pix_discriminator_loss(const Pix2PixNets<T>& nets, const nn::Var<T>& x, const nn::Var<T>& y,
                                      const nn::Var<T>& fake) {
  using namespace nn;
  Var<T> real_term = bce_logits_const(nets.d.forward(concat_channels(x, y)), 1.0);
  Var<T> fake_term = bce_logits_const(nets.d.forward(concat_channels(x, fake)), 0.0);
  return scale(add(real_term, fake_term), 0.5);
}

}  // namespace pfci
