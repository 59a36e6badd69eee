#include "pfci/models.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "pfci/metrics.hpp"

namespace pfci {

using nn::Var;

FloatImage normalize_pm1(const FloatImage& img) {
  const auto px = img.pixels();
  if (px.empty()) return img;
  const auto [lo_it, hi_it] = std::minmax_element(px.begin(), px.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  std::vector<double> out(px.size(), 0.0);
  if (hi > lo) {
    const double span = hi - lo;
    for (std::size_t i = 0; i < px.size(); ++i) out[i] = 2.0 * (px[i] - lo) / span - 1.0;
  }
  return FloatImage(img.width(), img.height(), std::move(out));
}

FloatImage pm1_to_unit(const FloatImage& img) {
  std::vector<double> out(img.size());
  const auto px = img.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) out[i] = (px[i] + 1.0) * 0.5;
  return FloatImage(img.width(), img.height(), std::move(out));
}

FloatImage prepare_image(const FloatImage& img, int size) {
  if (img.width() == size && img.height() == size) return normalize_pm1(img);
  return normalize_pm1(resize_bilinear(img, size, size));
}

BinaryImage prepare_mask(const BinaryImage& mask, int size) {
  if (mask.width() == size && mask.height() == size) return mask;
  return resize_nearest(mask, size, size);
}

double dice_loss(const FloatImage& pred, const BinaryImage& target) {
  if (pred.width() != target.width() || pred.height() != target.height()) {
    throw ShapeError("dice_loss: prediction and target dimensions differ");
  }
  constexpr double eps = 1e-6;
  double inter = 0, sp = 0, st = 0;
  const auto p = pred.pixels();
  const auto t = target.bits();
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] < 0.0 || p[i] > 1.0) throw RangeError("dice_loss: prediction outside [0, 1]");
    inter += p[i] * t[i];
    sp += p[i];
    st += t[i];
  }
  return 1.0 - (2.0 * inter + eps) / (sp + st + eps);
}

// ---------------------------------------------------------------------------------------

void LossLog::add(int epoch, const std::string& term, double value) { rows_.push_back({epoch, term, value}); }

std::vector<double> LossLog::values(const std::string& term) const {
  std::vector<double> out;
  for (const auto& r : rows_)
    if (r.term == term) out.push_back(r.value);
  return out;
}

std::string LossLog::to_csv() const {
  std::string out = "epoch,term,value\n";
  for (const auto& r : rows_) out += std::to_string(r.epoch) + "," + r.term + "," + format_sig6(r.value) + "\n";
  return out;
}

void LossLog::write_csv(const std::filesystem::path& path) const {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  f << to_csv();
  if (!f) throw IoError("short write to " + path.string());
}

// ---------------------------------------------------------------------------------------

nn::Tensor<float> images_to_tensor(const std::vector<const FloatImage*>& imgs, int size) {
  nn::Tensor<float> t(nn::Shape{static_cast<int>(imgs.size()), 1, size, size});
  for (std::size_t n = 0; n < imgs.size(); ++n) {
    const FloatImage& img = *imgs[n];
    if (img.width() != size || img.height() != size) {
      throw ShapeError("expected a " + std::to_string(size) + "x" + std::to_string(size) + " image, got " +
                       std::to_string(img.width()) + "x" + std::to_string(img.height()));
    }
    float* dst = t.sample(static_cast<int>(n));
    const auto px = img.pixels();
    for (std::size_t i = 0; i < px.size(); ++i) dst[i] = static_cast<float>(px[i]);
  }
  return t;
}

FloatImage tensor_to_image(const nn::Tensor<float>& t, int sample) {
  const auto& s = t.shape();
  std::vector<double> px(s.plane());
  const float* src = t.channel(sample, 0);
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = src[i];
  return FloatImage(s.w, s.h, std::move(px));
}

namespace {

nn::Tensor<float> masks_to_tensor(const std::vector<const BinaryImage*>& masks, int size) {
  nn::Tensor<float> t(nn::Shape{static_cast<int>(masks.size()), 1, size, size});
  for (std::size_t n = 0; n < masks.size(); ++n) {
    const auto bits = masks[n]->bits();
    float* dst = t.sample(static_cast<int>(n));
    for (std::size_t i = 0; i < bits.size(); ++i) dst[i] = bits[i] ? 1.0f : 0.0f;
  }
  return t;
}

void check_finite(double v, const std::string& term, int epoch) {
  if (!std::isfinite(v)) {
    throw NumericError("non-finite " + term + " loss (" + std::to_string(v) + ") at epoch " + std::to_string(epoch));
  }
}

std::vector<std::size_t> shuffled(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

std::vector<FloatImage> prepare_all(const std::vector<FloatImage>& imgs, int size) {
  std::vector<FloatImage> out;
  out.reserve(imgs.size());
  for (const auto& img : imgs) out.push_back(prepare_image(img, size));
  return out;
}

std::vector<BinaryImage> prepare_masks(const std::vector<BinaryImage>& masks, int size) {
  std::vector<BinaryImage> out;
  out.reserve(masks.size());
  for (const auto& m : masks) out.push_back(prepare_mask(m, size));
  return out;
}

nn::AdamConfig adam_config(const TrainConfig& t) { return nn::AdamConfig{t.learning_rate, t.beta1, t.beta2, 1e-8}; }

Checkpoint base_checkpoint(const char* stage, const NetConfig& net, const TrainConfig& train,
                           const LossWeights& weights) {
  Checkpoint ck;
  ck.stage = stage;
  ck.net = net;
  ck.train = train;
  ck.weights = weights;
  ck.meta["selected_epoch"] = 0;
  return ck;
}

Checkpoint snapshot(const Checkpoint& base, const CycleGanNets<float>& nets) {
  Checkpoint ck = base;
  ck.tensors.clear();
  export_params(nets.g_ab.params(), "G_AB", ck);
  export_params(nets.g_ba.params(), "G_BA", ck);
  export_params(nets.d_a.params(), "D_A", ck);
  export_params(nets.d_b.params(), "D_B", ck);
  return ck;
}

Checkpoint snapshot(const Checkpoint& base, const nn::UNetSegmenter<float>& net) {
  Checkpoint ck = base;
  ck.tensors.clear();
  export_params(net.params(), "S", ck);
  return ck;
}

Checkpoint snapshot(const Checkpoint& base, const Pix2PixNets<float>& nets) {
  Checkpoint ck = base;
  ck.tensors.clear();
  export_params(nets.g.params(), "G", ck);
  export_params(nets.d.params(), "D", ck);
  return ck;
}

/// Keeps the best-validation snapshot.
struct Selector {
  bool enabled = false;
  double best = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  Checkpoint best_ck;

  template <class Nets>
  void offer(double val, int epoch, const Checkpoint& base, const Nets& nets) {
    if (!enabled || !(val < best)) return;
    best = val;
    best_epoch = epoch;
    best_ck = snapshot(base, nets);
  }

  template <class Nets>
  Checkpoint finish(const Checkpoint& base, const Nets& nets, int epochs) {
    Checkpoint ck = enabled ? best_ck : snapshot(base, nets);
    ck.epochs = epochs;
    ck.meta["selected_epoch"] = enabled ? best_epoch : epochs;
    if (enabled) ck.meta["selected_validation_loss"] = best;
    return ck;
  }
};

void require_nonempty(std::size_t n, const char* what) {
  if (n == 0) throw DataError(std::string(what) + " is empty");
}

}  // namespace

// ---------------------------------------------------------------------------------------

Checkpoint init_cyclegan_checkpoint(const NetConfig& net, const TrainConfig& train, const LossWeights& weights) {
  net.validate(Arch::ResnetGenerator);
  net.validate(Arch::PatchDiscriminator);
  CycleGanNets<float> nets(net, train.seed);
  return snapshot(base_checkpoint("cyclegan", net, train, weights), nets);
}

Checkpoint init_unet_checkpoint(const NetConfig& net, const TrainConfig& train, const LossWeights& weights) {
  net.validate(Arch::UNetSegmenter);
  nn::UNetSegmenter<float> s(net, derive_seed(train.seed, 0));
  return snapshot(base_checkpoint("unet", net, train, weights), s);
}

Checkpoint init_pix2pix_checkpoint(const NetConfig& net, const TrainConfig& train, const LossWeights& weights) {
  net.validate(Arch::UNetGenerator);
  net.validate(Arch::PatchDiscriminator);
  Pix2PixNets<float> nets(net, train.seed);
  return snapshot(base_checkpoint("pix2pix", net, train, weights), nets);
}

TrainResult train_cyclegan(const std::vector<FloatImage>& domain_a, const std::vector<FloatImage>& domain_b,
                           const NetConfig& net, const TrainConfig& train, const LossWeights& weights,
                           const ImageSets* validation) {
  net.validate(Arch::ResnetGenerator);
  net.validate(Arch::PatchDiscriminator);
  train.validate();
  weights.validate();
  require_nonempty(domain_a.size(), "domain A");
  require_nonempty(domain_b.size(), "domain B");
  const int size = net.input_size;
  const auto a_imgs = prepare_all(domain_a, size);
  const auto b_imgs = prepare_all(domain_b, size);

  CycleGanNets<float> nets(net, train.seed);
  const Checkpoint base = base_checkpoint("cyclegan", net, train, weights);
  nn::Adam<float> opt_gab(nets.g_ab.params().vars(), adam_config(train));
  nn::Adam<float> opt_gba(nets.g_ba.params().vars(), adam_config(train));
  nn::Adam<float> opt_da(nets.d_a.params().vars(), adam_config(train));
  nn::Adam<float> opt_db(nets.d_b.params().vars(), adam_config(train));

  std::vector<FloatImage> val_a, val_b;
  if (validation) {
    val_a = prepare_all(validation->a, size);
    val_b = prepare_all(validation->b, size);
  }
  auto val_cycle = [&]() {
    nn::NoGradGuard ng;
    double sum = 0;
    std::size_t n = 0;
    for (const auto& img : val_a) {
      Var<float> x(images_to_tensor({&img}, size));
      sum += nn::l1_loss(nets.g_ba.forward(nets.g_ab.forward(x)), x).item();
      ++n;
    }
    for (const auto& img : val_b) {
      Var<float> x(images_to_tensor({&img}, size));
      sum += nn::l1_loss(nets.g_ab.forward(nets.g_ba.forward(x)), x).item();
      ++n;
    }
    return sum / static_cast<double>(n);
  };

  Selector sel;
  sel.enabled = !val_a.empty() || !val_b.empty();
  if (sel.enabled) sel.offer(val_cycle(), 0, base, nets);

  LossLog log;
  std::mt19937_64 rng(derive_seed(train.seed, 100));
  const std::size_t n_max = std::max(a_imgs.size(), b_imgs.size());
  const std::size_t bs = static_cast<std::size_t>(train.batch_size);
  for (int epoch = 1; epoch <= train.epochs; ++epoch) {
    const auto perm_a = shuffled(a_imgs.size(), rng);
    const auto perm_b = shuffled(b_imgs.size(), rng);
    double s_adv = 0, s_cyc = 0, s_da = 0, s_db = 0, s_tot = 0;
    int steps = 0;
    for (std::size_t start = 0; start < n_max; start += bs) {
      std::vector<const FloatImage*> ba, bb;
      for (std::size_t k = start; k < std::min(start + bs, n_max); ++k) {
        ba.push_back(&a_imgs[perm_a[k % a_imgs.size()]]);
        bb.push_back(&b_imgs[perm_b[k % b_imgs.size()]]);
      }
      Var<float> a(images_to_tensor(ba, size));
      Var<float> b(images_to_tensor(bb, size));

      nets.d_a.params().set_requires_grad(false);
      nets.d_b.params().set_requires_grad(false);
      CycleGanTerms terms;
      Var<float> fake_a, fake_b;
      Var<float> g_loss = cyclegan_generator_loss(nets, a, b, weights, &terms, &fake_a, &fake_b);
      check_finite(g_loss.item(), "generator", epoch);
      fake_a = nn::detach(fake_a);
      fake_b = nn::detach(fake_b);
      opt_gab.zero_grad();
      opt_gba.zero_grad();
      nn::backward(g_loss);
      opt_gab.step();
      opt_gba.step();
      nets.d_a.params().set_requires_grad(true);
      nets.d_b.params().set_requires_grad(true);

      Var<float> da = lsgan_discriminator_loss(nets.d_a, a, fake_a);
      check_finite(da.item(), "D_A", epoch);
      opt_da.zero_grad();
      nn::backward(da);
      opt_da.step();
      Var<float> db = lsgan_discriminator_loss(nets.d_b, b, fake_b);
      check_finite(db.item(), "D_B", epoch);
      opt_db.zero_grad();
      nn::backward(db);
      opt_db.step();

      s_adv += terms.adv;
      s_cyc += terms.cycle;
      s_da += da.item();
      s_db += db.item();
      s_tot += g_loss.item();
      ++steps;
    }
    log.add(epoch, "adv_G", s_adv / steps);
    log.add(epoch, "cycle", s_cyc / steps);
    log.add(epoch, "D_A", s_da / steps);
    log.add(epoch, "D_B", s_db / steps);
    log.add(epoch, "total", s_tot / steps);
    if (sel.enabled) {
      const double v = val_cycle();
      check_finite(v, "validation cycle", epoch);
      log.add(epoch, "val_cycle", v);
      sel.offer(v, epoch, base, nets);
    }
  }
  return TrainResult{sel.finish(base, nets, train.epochs), std::move(log)};
}

TrainResult train_unet(const SegmentationSet& pairs, const NetConfig& net, const TrainConfig& train,
                       const LossWeights& weights, const SegmentationSet* validation) {
  net.validate(Arch::UNetSegmenter);
  train.validate();
  weights.validate();
  require_nonempty(pairs.images.size(), "segmentation training set");
  if (pairs.images.size() != pairs.masks.size()) throw DataError("segmentation images and masks differ in count");
  const int size = net.input_size;
  const auto imgs = prepare_all(pairs.images, size);
  const auto masks = prepare_masks(pairs.masks, size);

  nn::UNetSegmenter<float> model(net, derive_seed(train.seed, 0));
  const Checkpoint base = base_checkpoint("unet", net, train, weights);
  nn::Adam<float> opt(model.params().vars(), adam_config(train));

  std::vector<FloatImage> val_imgs;
  std::vector<BinaryImage> val_masks;
  if (validation) {
    if (validation->images.size() != validation->masks.size()) {
      throw DataError("validation images and masks differ in count");
    }
    val_imgs = prepare_all(validation->images, size);
    val_masks = prepare_masks(validation->masks, size);
  }
  auto val_loss = [&]() {
    nn::NoGradGuard ng;
    double sum = 0;
    for (std::size_t i = 0; i < val_imgs.size(); ++i) {
      Var<float> x(images_to_tensor({&val_imgs[i]}, size));
      sum += segmentation_loss(model, x, masks_to_tensor({&val_masks[i]}, size), weights).item();
    }
    return sum / static_cast<double>(val_imgs.size());
  };

  Selector sel;
  sel.enabled = !val_imgs.empty();
  if (sel.enabled) sel.offer(val_loss(), 0, base, model);

  LossLog log;
  std::mt19937_64 rng(derive_seed(train.seed, 100));
  const std::size_t bs = static_cast<std::size_t>(train.batch_size);
  for (int epoch = 1; epoch <= train.epochs; ++epoch) {
    const auto perm = shuffled(imgs.size(), rng);
    double s_bce = 0, s_dice = 0, s_tot = 0;
    int steps = 0;
    for (std::size_t start = 0; start < imgs.size(); start += bs) {
      std::vector<const FloatImage*> bi;
      std::vector<const BinaryImage*> bm;
      for (std::size_t k = start; k < std::min(start + bs, imgs.size()); ++k) {
        bi.push_back(&imgs[perm[k]]);
        bm.push_back(&masks[perm[k]]);
      }
      Var<float> x(images_to_tensor(bi, size));
      SegmentationTerms terms;
      Var<float> loss = segmentation_loss(model, x, masks_to_tensor(bm, size), weights, &terms);
      check_finite(loss.item(), "segmentation", epoch);
      opt.zero_grad();
      nn::backward(loss);
      opt.step();
      s_bce += terms.bce;
      s_dice += terms.dice;
      s_tot += loss.item();
      ++steps;
    }
    log.add(epoch, "bce", s_bce / steps);
    log.add(epoch, "dice", s_dice / steps);
    log.add(epoch, "total", s_tot / steps);
    if (sel.enabled) {
      const double v = val_loss();
      check_finite(v, "validation segmentation", epoch);
      log.add(epoch, "val_total", v);
      sel.offer(v, epoch, base, model);
    }
  }
  return TrainResult{sel.finish(base, model, train.epochs), std::move(log)};
}

TrainResult train_pix2pix(const TranslationSet& pairs, const NetConfig& net, const TrainConfig& train,
                          const LossWeights& weights, const TranslationSet* validation) {
  net.validate(Arch::UNetGenerator);
  net.validate(Arch::PatchDiscriminator);
  train.validate();
  weights.validate();
  require_nonempty(pairs.inputs.size(), "translation training set");
  if (pairs.inputs.size() != pairs.targets.size()) throw DataError("translation inputs and targets differ in count");
  const int size = net.input_size;
  const auto xs = prepare_all(pairs.inputs, size);
  const auto ys = prepare_all(pairs.targets, size);

  Pix2PixNets<float> nets(net, train.seed);
  const Checkpoint base = base_checkpoint("pix2pix", net, train, weights);
  nn::Adam<float> opt_g(nets.g.params().vars(), adam_config(train));
  nn::Adam<float> opt_d(nets.d.params().vars(), adam_config(train));

  std::vector<FloatImage> val_x, val_y;
  if (validation) {
    if (validation->inputs.size() != validation->targets.size()) {
      throw DataError("validation inputs and targets differ in count");
    }
    val_x = prepare_all(validation->inputs, size);
    val_y = prepare_all(validation->targets, size);
  }
  auto val_l1 = [&]() {
    nn::NoGradGuard ng;
    double sum = 0;
    for (std::size_t i = 0; i < val_x.size(); ++i) {
      Var<float> x(images_to_tensor({&val_x[i]}, size));
      Var<float> y(images_to_tensor({&val_y[i]}, size));
      sum += nn::l1_loss(nets.g.forward(x), y).item();
    }
    return sum / static_cast<double>(val_x.size());
  };

  Selector sel;
  sel.enabled = !val_x.empty();
  if (sel.enabled) sel.offer(val_l1(), 0, base, nets);

  LossLog log;
  std::mt19937_64 rng(derive_seed(train.seed, 100));
  const std::size_t bs = static_cast<std::size_t>(train.batch_size);
  for (int epoch = 1; epoch <= train.epochs; ++epoch) {
    const auto perm = shuffled(xs.size(), rng);
    double s_gan = 0, s_l1 = 0, s_d = 0, s_tot = 0;
    int steps = 0;
    for (std::size_t start = 0; start < xs.size(); start += bs) {
      std::vector<const FloatImage*> bx, by;
      for (std::size_t k = start; k < std::min(start + bs, xs.size()); ++k) {
        bx.push_back(&xs[perm[k]]);
        by.push_back(&ys[perm[k]]);
      }
      Var<float> x(images_to_tensor(bx, size));
      Var<float> y(images_to_tensor(by, size));

      nets.d.params().set_requires_grad(false);
      Pix2PixTerms terms;
      Var<float> fake;
      Var<float> g_loss = pix2pix_generator_loss(nets, x, y, weights, &terms, &fake);
      check_finite(g_loss.item(), "generator", epoch);
      fake = nn::detach(fake);
      opt_g.zero_grad();
      nn::backward(g_loss);
      opt_g.step();
      nets.d.params().set_requires_grad(true);

      Var<float> d_loss = pix2pix_discriminator_loss(nets, x, y, fake);
      check_finite(d_loss.item(), "discriminator", epoch);
      opt_d.zero_grad();
      nn::backward(d_loss);
      opt_d.step();

      s_gan += terms.gan;
      s_l1 += terms.l1;
      s_d += d_loss.item();
      s_tot += g_loss.item();
      ++steps;
    }
    log.add(epoch, "gan_G", s_gan / steps);
    log.add(epoch, "l1", s_l1 / steps);
    log.add(epoch, "D", s_d / steps);
    log.add(epoch, "total", s_tot / steps);
    if (sel.enabled) {
      const double v = val_l1();
      check_finite(v, "validation L1", epoch);
      log.add(epoch, "val_l1", v);
      sel.offer(v, epoch, base, nets);
    }
  }
  return TrainResult{sel.finish(base, nets, train.epochs), std::move(log)};
}

// ---------------------------------------------------------------------------------------

namespace {

void require_stage(const Checkpoint& ck, const char* stage) {
  if (ck.stage != stage) throw FormatError("expected a " + std::string(stage) + " checkpoint, got '" + ck.stage + "'");
}

void require_input(const FloatImage& img, int size) {
  if (img.width() != size || img.height() != size) {
    throw ShapeError("model expects " + std::to_string(size) + "x" + std::to_string(size) + " input, got " +
                     std::to_string(img.width()) + "x" + std::to_string(img.height()));
  }
}

}  // namespace

CycleGanModel::CycleGanModel(const Checkpoint& ckpt) : cfg_(ckpt.net) {
  require_stage(ckpt, "cyclegan");
  g_ab_ = std::make_shared<nn::ResnetGenerator<float>>(cfg_, 0);
  g_ba_ = std::make_shared<nn::ResnetGenerator<float>>(cfg_, 0);
  import_params(g_ab_->params(), "G_AB", ckpt);
  import_params(g_ba_->params(), "G_BA", ckpt);
}

FloatImage CycleGanModel::translate(const FloatImage& img, Direction dir) const {
  require_input(img, cfg_.input_size);
  nn::NoGradGuard ng;
  Var<float> x(images_to_tensor({&img}, cfg_.input_size));
  const auto& g = dir == Direction::AtoB ? *g_ab_ : *g_ba_;
  return tensor_to_image(g.forward(x).value());
}

UNetModel::UNetModel(const Checkpoint& ckpt) : cfg_(ckpt.net) {
  require_stage(ckpt, "unet");
  net_ = std::make_shared<nn::UNetSegmenter<float>>(cfg_, 0);
  import_params(net_->params(), "S", ckpt);
}

FloatImage UNetModel::probabilities(const FloatImage& img) const {
  require_input(img, cfg_.input_size);
  nn::NoGradGuard ng;
  Var<float> x(images_to_tensor({&img}, cfg_.input_size));
  return tensor_to_image(nn::sigmoid(net_->forward(x)).value());
}

BinaryImage UNetModel::segment(const FloatImage& img) const { return to_binary(probabilities(img), 0.5); }

Pix2PixModel::Pix2PixModel(const Checkpoint& ckpt) : cfg_(ckpt.net) {
  require_stage(ckpt, "pix2pix");
  g_ = std::make_shared<nn::UNetGenerator<float>>(cfg_, 0);
  import_params(g_->params(), "G", ckpt);
}

FloatImage Pix2PixModel::translate(const FloatImage& img) const {
  require_input(img, cfg_.input_size);
  nn::NoGradGuard ng;
  Var<float> x(images_to_tensor({&img}, cfg_.input_size));
  return tensor_to_image(g_->forward(x).value());
}

FloatImage cyclegan_translate(const Checkpoint& ckpt, const FloatImage& img, Direction dir) {
  return CycleGanModel(ckpt).translate(img, dir);
}

BinaryImage unet_segment(const Checkpoint& ckpt, const FloatImage& img) { return UNetModel(ckpt).segment(img); }

FloatImage pix2pix_translate(const Checkpoint& ckpt, const FloatImage& img) {
  return Pix2PixModel(ckpt).translate(img);
}

}  // namespace pfci
