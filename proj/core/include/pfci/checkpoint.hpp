#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "pfci/errors.hpp"
#include "pfci/model_config.hpp"
#include "pfci/nn/layers.hpp"

namespace pfci {

struct NamedTensor {
  std::string name;
  std::vector<int> shape;
  std::vector<float> data;

  std::size_t numel() const;
  bool operator==(const NamedTensor&) const = default;
};

/// Serialized weights of one trained stage plus everything needed to rebuild it.
struct Checkpoint {
  /// "cyclegan", "unet" or "pix2pix".
  std::string stage;
  NetConfig net;
  TrainConfig train;
  LossWeights weights;
  /// Epochs actually run.
  int epochs = 0;
  /// Free-form provenance (selected epoch, training case ids, partition hash).
  nlohmann::json meta = nlohmann::json::object();
  std::vector<NamedTensor> tensors;

  const NamedTensor& tensor(const std::string& name) const;
  bool has_tensor(const std::string& name) const;
  bool operator==(const Checkpoint&) const = default;
};

/// NNCK1 byte image: "NNCK1\n", one JSON header line, then float32 LE payloads in table order.
std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(std::string_view bytes);

/// Written to a temporary sibling and renamed into place.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

/// Appends every parameter of `ps` as "<prefix>/<name>".
template <class T>
void export_params(const nn::ParamStore<T>& ps, const std::string& prefix, Checkpoint& ckpt) {
  for (const auto& [name, var] : ps.entries()) {
    const auto& s = var.shape();
    NamedTensor t{prefix + "/" + name, {s.n, s.c, s.h, s.w}, {}};
    t.data.reserve(var.value().numel());
    for (std::size_t i = 0; i < var.value().numel(); ++i) t.data.push_back(static_cast<float>(var.value()[i]));
    ckpt.tensors.push_back(std::move(t));
  }
}

/// Overwrites every parameter of `ps` from "<prefix>/<name>" tensors of `ckpt`.
template <class T>
void import_params(nn::ParamStore<T>& ps, const std::string& prefix, const Checkpoint& ckpt) {
  for (const auto& [name, var] : ps.entries()) {
    const std::string full = prefix + "/" + name;
    if (!ckpt.has_tensor(full)) throw FormatError("checkpoint lacks tensor " + full);
    const NamedTensor& t = ckpt.tensor(full);
    const auto& s = var.shape();
    if (t.shape != std::vector<int>{s.n, s.c, s.h, s.w}) {
      throw ShapeError("checkpoint tensor " + full + " does not match the configured network");
    }
    auto& dst = var.mutable_value();
    for (std::size_t i = 0; i < t.data.size(); ++i) dst[i] = static_cast<T>(t.data[i]);
  }
}

}  // namespace pfci
