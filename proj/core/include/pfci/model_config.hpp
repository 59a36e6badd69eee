#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

namespace pfci {

enum class Arch { ResnetGenerator, PatchDiscriminator, UNetSegmenter, UNetGenerator };

/// Architecture knobs shared by the three stages.
struct NetConfig {
  /// Square input side; a power of two.
  int input_size = 64;
  int in_channels = 1;
  int out_channels = 1;
  /// Residual blocks for the ResNet generator; skip-connected resolution levels for the U-Nets.
  int depth = 3;
  int base_width = 16;
  /// Feature width is capped at base_width * max_width_mult.
  int max_width_mult = 8;
  int disc_receptive_field = 34;
  int disc_base_width = 16;

  /// Throws ParameterError when the configuration cannot be built for `arch`.
  void validate(Arch arch) const;
  bool operator==(const NetConfig&) const = default;
};

struct TrainConfig {
  double learning_rate = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  int epochs = 200;
  int batch_size = 1;
  std::uint64_t seed = 0;
  bool deterministic = true;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct LossWeights {
  double cycle = 10.0;
  double gan = 1.0;
  double l1 = 10.0;
  double bce = 1.0;
  double dice = 1.0;

  void validate() const;
  bool operator==(const LossWeights&) const = default;
};

/// Full-scale defaults for each stage.
TrainConfig cyclegan_train_defaults();
TrainConfig unet_train_defaults();
TrainConfig pix2pix_train_defaults();
NetConfig cyclegan_net_defaults(int input_size = 256);
NetConfig unet_net_defaults(int input_size = 256);
NetConfig pix2pix_net_defaults(int input_size = 256);

void to_json(nlohmann::json& j, const NetConfig& c);
void from_json(const nlohmann::json& j, NetConfig& c);
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);
void to_json(nlohmann::json& j, const LossWeights& c);
void from_json(const nlohmann::json& j, LossWeights& c);

}  // namespace pfci
