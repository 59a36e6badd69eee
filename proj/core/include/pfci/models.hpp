#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "pfci/checkpoint.hpp"
#include "pfci/image.hpp"
#include "pfci/model_config.hpp"
#include "pfci/stage_losses.hpp"

namespace pfci {

/// Per-image min/max mapped onto [-1, 1]; a constant image maps to zeros.
FloatImage normalize_pm1(const FloatImage& img);
/// Linear map of a model output from [-1, 1] to [0, 1].
FloatImage pm1_to_unit(const FloatImage& img);
/// Resize to `size` x `size` (bilinear) when needed, then normalize_pm1.
FloatImage prepare_image(const FloatImage& img, int size);
/// Nearest-neighbour resize to `size` x `size` when needed.
BinaryImage prepare_mask(const BinaryImage& mask, int size);

/// 1 - (2 sum(p t) + eps) / (sum p + sum t + eps), eps = 1e-6. Pixels of `pred` must lie in [0, 1].
double dice_loss(const FloatImage& pred, const BinaryImage& target);

enum class Direction { AtoB, BtoA };

/// Per-epoch loss terms, written as "epoch,term,value".
class LossLog {
 public:
  struct Row {
    int epoch;
    std::string term;
    double value;
  };

  void add(int epoch, const std::string& term, double value);
  const std::vector<Row>& rows() const noexcept { return rows_; }
  /// Values of one term in epoch order.
  std::vector<double> values(const std::string& term) const;
  std::string to_csv() const;
  void write_csv(const std::filesystem::path& path) const;

 private:
  std::vector<Row> rows_;
};

struct TrainResult {
  Checkpoint checkpoint;
  LossLog log;
};

/// Optional held-out data. When present the checkpoint keeps the epoch with the lowest
/// validation loss (epoch 0 = initialization competes too).
struct ImageSets {
  std::vector<FloatImage> a;
  std::vector<FloatImage> b;
};

struct SegmentationSet {
  std::vector<FloatImage> images;
  std::vector<BinaryImage> masks;
};

struct TranslationSet {
  std::vector<FloatImage> inputs;
  std::vector<FloatImage> targets;
};

/// Unpaired translation between domain A and domain B. Images are resized and normalized on
/// ingest. One epoch is max(|A|, |B|) samples, each domain reshuffled every epoch.
TrainResult train_cyclegan(const std::vector<FloatImage>& domain_a, const std::vector<FloatImage>& domain_b,
                           const NetConfig& net, const TrainConfig& train, const LossWeights& weights = {},
                           const ImageSets* validation = nullptr);

TrainResult train_unet(const SegmentationSet& pairs, const NetConfig& net, const TrainConfig& train,
                       const LossWeights& weights = {}, const SegmentationSet* validation = nullptr);

TrainResult train_pix2pix(const TranslationSet& pairs, const NetConfig& net, const TrainConfig& train,
                          const LossWeights& weights = {}, const TranslationSet* validation = nullptr);

/// Inference wrappers; construction rebuilds the networks once. Inputs must already be
/// input_size square and normalized to [-1, 1].
class CycleGanModel {
 public:
  explicit CycleGanModel(const Checkpoint& ckpt);
  FloatImage translate(const FloatImage& img, Direction dir) const;
  int input_size() const noexcept { return cfg_.input_size; }

 private:
  NetConfig cfg_;
  std::shared_ptr<nn::ResnetGenerator<float>> g_ab_;
  std::shared_ptr<nn::ResnetGenerator<float>> g_ba_;
};

class UNetModel {
 public:
  explicit UNetModel(const Checkpoint& ckpt);
  /// Sigmoid probability per pixel.
  FloatImage probabilities(const FloatImage& img) const;
  /// Probability >= 0.5.
  BinaryImage segment(const FloatImage& img) const;
  int input_size() const noexcept { return cfg_.input_size; }

 private:
  NetConfig cfg_;
  std::shared_ptr<nn::UNetSegmenter<float>> net_;
};

class Pix2PixModel {
 public:
  explicit Pix2PixModel(const Checkpoint& ckpt);
  FloatImage translate(const FloatImage& img) const;
  int input_size() const noexcept { return cfg_.input_size; }

 private:
  NetConfig cfg_;
  std::shared_ptr<nn::UNetGenerator<float>> g_;
};

FloatImage cyclegan_translate(const Checkpoint& ckpt, const FloatImage& img, Direction dir);
BinaryImage unet_segment(const Checkpoint& ckpt, const FloatImage& img);
FloatImage pix2pix_translate(const Checkpoint& ckpt, const FloatImage& img);

/// Seeded, untrained networks of each stage as a checkpoint.
Checkpoint init_cyclegan_checkpoint(const NetConfig& net, const TrainConfig& train, const LossWeights& weights = {});
Checkpoint init_unet_checkpoint(const NetConfig& net, const TrainConfig& train, const LossWeights& weights = {});
Checkpoint init_pix2pix_checkpoint(const NetConfig& net, const TrainConfig& train, const LossWeights& weights = {});

/// NCHW batch of single-channel images; all must be square of side `size`.
nn::Tensor<float> images_to_tensor(const std::vector<const FloatImage*>& imgs, int size);
FloatImage tensor_to_image(const nn::Tensor<float>& t, int sample = 0);

}  // namespace pfci
