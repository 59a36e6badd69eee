#include "pfci/model_config.hpp"

#include <algorithm>
#include <cmath>

#include "pfci/errors.hpp"

namespace pfci {

namespace {

bool is_pow2(int v) { return v > 0 && (v & (v - 1)) == 0; }

int log2i(int v) {
  int l = 0;
  while ((1 << (l + 1)) <= v) ++l;
  return l;
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw ParameterError(msg);
}

}  // namespace

void NetConfig::validate(Arch arch) const {
  require(is_pow2(input_size) && input_size >= 8, "input size must be a power of two >= 8");
  require(in_channels >= 1 && out_channels >= 1, "channel counts must be >= 1");
  require(base_width >= 1 && disc_base_width >= 1, "feature widths must be >= 1");
  require(is_pow2(max_width_mult), "width multiplier cap must be a power of two");
  require(disc_receptive_field >= 1, "discriminator receptive field must be >= 1");
  switch (arch) {
    case Arch::ResnetGenerator:
      require(depth >= 0, "residual block count must be >= 0");
      break;
    case Arch::PatchDiscriminator:
      break;
    case Arch::UNetSegmenter:
    case Arch::UNetGenerator:
      require(depth >= 1, "U-Net depth must be >= 1");
      require(depth <= log2i(input_size), "U-Net depth " + std::to_string(depth) + " collapses a " +
                                              std::to_string(input_size) + "-pixel input below 1x1");
      break;
  }
}

void TrainConfig::validate() const {
  require(std::isfinite(learning_rate) && learning_rate > 0, "learning rate must be > 0");
  require(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1, "Adam betas must lie in [0, 1)");
  require(epochs >= 0, "epochs must be >= 0");
  require(batch_size >= 1, "batch size must be >= 1");
}

void LossWeights::validate() const {
  for (double w : {cycle, gan, l1, bce, dice}) {
    require(std::isfinite(w) && w >= 0, "loss weights must be finite and >= 0");
  }
}

TrainConfig cyclegan_train_defaults() { return TrainConfig{2e-4, 0.5, 0.999, 200, 1, 0, true}; }
TrainConfig unet_train_defaults() { return TrainConfig{1e-3, 0.9, 0.999, 100, 12, 0, true}; }
TrainConfig pix2pix_train_defaults() { return TrainConfig{1e-3, 0.5, 0.999, 400, 10, 0, true}; }

NetConfig cyclegan_net_defaults(int input_size) {
  NetConfig c;
  c.input_size = input_size;
  c.depth = input_size >= 256 ? 9 : 3;
  c.base_width = 64;
  c.disc_base_width = 64;
  c.disc_receptive_field = std::max(1, 70 * input_size / 256);
  return c;
}

NetConfig unet_net_defaults(int input_size) {
  NetConfig c;
  c.input_size = input_size;
  c.depth = std::max(1, std::min(8, log2i(std::max(input_size, 2))));
  c.base_width = 64;
  return c;
}

NetConfig pix2pix_net_defaults(int input_size) {
  NetConfig c;
  c.input_size = input_size;
  c.depth = std::max(1, std::min(8, log2i(std::max(input_size, 2))));
  c.base_width = 64;
  c.disc_base_width = 64;
  c.disc_receptive_field = std::max(1, 96 * input_size / 256);
  return c;
}

void to_json(nlohmann::json& j, const NetConfig& c) {
  j = nlohmann::json{{"input_size", c.input_size},       {"in_channels", c.in_channels},
                     {"out_channels", c.out_channels},   {"depth", c.depth},
                     {"base_width", c.base_width},       {"max_width_mult", c.max_width_mult},
                     {"disc_receptive_field", c.disc_receptive_field},
                     {"disc_base_width", c.disc_base_width}};
}

void from_json(const nlohmann::json& j, NetConfig& c) {
  c.input_size = j.value("input_size", c.input_size);
  c.in_channels = j.value("in_channels", c.in_channels);
  c.out_channels = j.value("out_channels", c.out_channels);
  c.depth = j.value("depth", c.depth);
  c.base_width = j.value("base_width", c.base_width);
  c.max_width_mult = j.value("max_width_mult", c.max_width_mult);
  c.disc_receptive_field = j.value("disc_receptive_field", c.disc_receptive_field);
  c.disc_base_width = j.value("disc_base_width", c.disc_base_width);
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"learning_rate", c.learning_rate}, {"beta1", c.beta1},
                     {"beta2", c.beta2},                 {"epochs", c.epochs},
                     {"batch_size", c.batch_size},       {"seed", c.seed},
                     {"deterministic", c.deterministic}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.seed = j.value("seed", c.seed);
  c.deterministic = j.value("deterministic", c.deterministic);
}

void to_json(nlohmann::json& j, const LossWeights& c) {
  j = nlohmann::json{{"cycle", c.cycle}, {"gan", c.gan}, {"l1", c.l1}, {"bce", c.bce}, {"dice", c.dice}};
}

void from_json(const nlohmann::json& j, LossWeights& c) {
  c.cycle = j.value("cycle", c.cycle);
  c.gan = j.value("gan", c.gan);
  c.l1 = j.value("l1", c.l1);
  c.bce = j.value("bce", c.bce);
  c.dice = j.value("dice", c.dice);
}

}  // namespace pfci
