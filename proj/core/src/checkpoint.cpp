#include "pfci/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>

namespace pfci {

static_assert(std::endian::native == std::endian::little, "checkpoint payloads assume a little-endian host");

namespace {

constexpr std::string_view kMagic = "NNCK1\n";

}  // namespace

std::size_t NamedTensor::numel() const {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

const NamedTensor& Checkpoint::tensor(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return t;
  throw FormatError("checkpoint lacks tensor " + name);
}

bool Checkpoint::has_tensor(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return true;
  return false;
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  nlohmann::json table = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& t : ckpt.tensors) {
    if (t.data.size() != t.numel()) throw SizeMismatchError("tensor " + t.name + " payload does not match its shape");
    table.push_back({{"name", t.name}, {"shape", t.shape}, {"offset", offset}});
    offset += t.data.size() * sizeof(float);
  }
  nlohmann::json header{{"stage", ckpt.stage},   {"net", ckpt.net},       {"train", ckpt.train},
                        {"weights", ckpt.weights}, {"seed", ckpt.train.seed}, {"epochs", ckpt.epochs},
                        {"meta", ckpt.meta},     {"tensors", table}};
  std::string out(kMagic);
  out += header.dump();
  out += '\n';
  const std::size_t start = out.size();
  out.resize(start + offset);
  char* p = out.data() + start;
  for (const auto& t : ckpt.tensors) {
    std::memcpy(p, t.data.data(), t.data.size() * sizeof(float));
    p += t.data.size() * sizeof(float);
  }
  return out;
}

Checkpoint parse_checkpoint(std::string_view bytes) {
  if (bytes.substr(0, kMagic.size()) != kMagic) throw FormatError("not an NNCK1 checkpoint");
  const std::size_t eol = bytes.find('\n', kMagic.size());
  if (eol == std::string_view::npos) throw FormatError("checkpoint header is not terminated");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(kMagic.size(), eol - kMagic.size()));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what());
  }
  const std::string_view payload = bytes.substr(eol + 1);
  Checkpoint ck;
  try {
    ck.stage = header.at("stage").get<std::string>();
    ck.net = header.at("net").get<NetConfig>();
    ck.train = header.at("train").get<TrainConfig>();
    ck.weights = header.at("weights").get<LossWeights>();
    ck.epochs = header.at("epochs").get<int>();
    ck.meta = header.at("meta");
    std::size_t expected = 0;
    for (const auto& e : header.at("tensors")) {
      NamedTensor t;
      t.name = e.at("name").get<std::string>();
      t.shape = e.at("shape").get<std::vector<int>>();
      const auto offset = e.at("offset").get<std::size_t>();
      for (int d : t.shape)
        if (d < 0) throw FormatError("negative extent in tensor " + t.name);
      if (offset != expected) throw FormatError("tensor " + t.name + " offset breaks table order");
      const std::size_t len = t.numel() * sizeof(float);
      if (offset + len > payload.size()) throw SizeMismatchError("checkpoint payload truncated at " + t.name);
      t.data.resize(t.numel());
      std::memcpy(t.data.data(), payload.data() + offset, len);
      expected = offset + len;
      ck.tensors.push_back(std::move(t));
    }
    if (expected != payload.size()) throw SizeMismatchError("checkpoint payload has trailing bytes");
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what());
  }
  return ck;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  const std::string bytes = serialize_checkpoint(ckpt);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write " + tmp);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("short write to " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into " + path + ": " + ec.message());
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return parse_checkpoint(bytes);
}

}  // namespace pfci
