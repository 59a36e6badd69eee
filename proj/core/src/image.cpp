#include "pfci/image.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cstdlib>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include "pfci/errors.hpp"

namespace pfci {

namespace {

void check_dims(int w, int h) {
  if (w < 0 || h < 0) throw ShapeError("image dimensions must be non-negative");
}

std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void write_all(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

// Netpbm header tokenizer: whitespace separated, '#' comments to end of line.
class HeaderReader {
 public:
  HeaderReader(const std::string& blob, const std::filesystem::path& path) : blob_(blob), path_(path) {}

  std::string token() {
    skip_space();
    std::size_t start = pos_;
    while (pos_ < blob_.size() && !std::isspace(static_cast<unsigned char>(blob_[pos_]))) ++pos_;
    if (start == pos_) throw FormatError(path_.string() + ": truncated header");
    return blob_.substr(start, pos_ - start);
  }

  long integer() {
    auto tok = token();
    char* end = nullptr;
    long v = std::strtol(tok.c_str(), &end, 10);
    if (end != tok.c_str() + tok.size()) throw FormatError(path_.string() + ": bad header integer '" + tok + "'");
    return v;
  }

  double real() {
    auto tok = token();
    char* end = nullptr;
    double v = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size()) throw FormatError(path_.string() + ": bad header number '" + tok + "'");
    return v;
  }

  // Exactly one whitespace byte separates the header from the raster.
  std::size_t payload_offset() {
    if (pos_ >= blob_.size() || !std::isspace(static_cast<unsigned char>(blob_[pos_]))) {
      throw FormatError(path_.string() + ": missing raster separator");
    }
    return pos_ + 1;
  }

 private:
  void skip_space() {
    while (pos_ < blob_.size()) {
      char c = blob_[pos_];
      if (c == '#') {
        while (pos_ < blob_.size() && blob_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  const std::string& blob_;
  const std::filesystem::path& path_;
  std::size_t pos_ = 0;
};

}  // namespace

FloatImage::FloatImage(int width, int height, double fill) : width_(width), height_(height) {
  check_dims(width, height);
  if (!std::isfinite(fill)) throw RangeError("non-finite fill value");
  pixels_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
}

FloatImage::FloatImage(int width, int height, std::vector<double> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  check_dims(width, height);
  if (pixels_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw ShapeError("pixel count does not match " + std::to_string(width) + "x" + std::to_string(height));
  }
  for (double v : pixels_) {
    if (!std::isfinite(v)) throw RangeError("image pixels must be finite");
  }
}

void FloatImage::set(int x, int z, double v) {
  if (!std::isfinite(v)) throw RangeError("image pixels must be finite");
  pixels_[index(x, z)] = v;
}

BinaryImage::BinaryImage(int width, int height, bool fill) : width_(width), height_(height) {
  check_dims(width, height);
  bits_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill ? 1 : 0);
}

BinaryImage::BinaryImage(int width, int height, std::vector<std::uint8_t> bits)
    : width_(width), height_(height), bits_(std::move(bits)) {
  check_dims(width, height);
  if (bits_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw ShapeError("mask size does not match " + std::to_string(width) + "x" + std::to_string(height));
  }
  for (auto& b : bits_) b = b != 0 ? 1 : 0;
}

std::size_t BinaryImage::popcount() const noexcept {
  std::size_t n = 0;
  for (auto b : bits_) n += b;
  return n;
}

void save_pfm(const FloatImage& img, const std::filesystem::path& path) {
  std::ostringstream head;
  head << "Pf\n" << img.width() << ' ' << img.height() << "\n-1.0\n";
  std::string bytes = head.str();
  const std::size_t off = bytes.size();
  bytes.resize(off + img.size() * 4);
  char* dst = bytes.data() + off;
  for (int row = img.height() - 1; row >= 0; --row) {
    for (int x = 0; x < img.width(); ++x) {
      const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(img.at(x, row)));
      dst[0] = static_cast<char>(bits & 0xFF);
      dst[1] = static_cast<char>((bits >> 8) & 0xFF);
      dst[2] = static_cast<char>((bits >> 16) & 0xFF);
      dst[3] = static_cast<char>(bits >> 24);
      dst += 4;
    }
  }
  write_all(path, bytes);
}

FloatImage load_pfm(const std::filesystem::path& path) {
  const std::string blob = read_all(path);
  HeaderReader hr(blob, path);
  if (hr.token() != "Pf") throw FormatError(path.string() + ": not a grayscale PFM");
  const long w = hr.integer();
  const long h = hr.integer();
  const double scale = hr.real();
  if (w < 0 || h < 0) throw FormatError(path.string() + ": negative dimensions");
  if (scale == 0.0 || !std::isfinite(scale)) throw FormatError(path.string() + ": invalid scale");
  const bool little = scale < 0.0;
  const std::size_t off = hr.payload_offset();
  const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  if (blob.size() - off != n * 4) {
    throw SizeMismatchError(path.string() + ": raster holds " + std::to_string((blob.size() - off) / 4) +
                            " samples, expected " + std::to_string(n));
  }
  std::vector<double> pixels(n);
  const auto* p = reinterpret_cast<const unsigned char*>(blob.data() + off);
  for (long row = h - 1; row >= 0; --row) {
    for (long x = 0; x < w; ++x) {
      std::uint32_t bits = little ? (std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
                                     std::uint32_t(p[3]) << 24)
                                  : (std::uint32_t(p[3]) | std::uint32_t(p[2]) << 8 | std::uint32_t(p[1]) << 16 |
                                     std::uint32_t(p[0]) << 24);
      p += 4;
      const float v = std::bit_cast<float>(bits);
      if (!std::isfinite(v)) throw RangeError(path.string() + ": non-finite sample");
      pixels[static_cast<std::size_t>(row) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x)] = v;
    }
  }
  return FloatImage(static_cast<int>(w), static_cast<int>(h), std::move(pixels));
}

void save_pgm(const BinaryImage& img, const std::filesystem::path& path) {
  std::ostringstream head;
  head << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
  std::string bytes = head.str();
  bytes.reserve(bytes.size() + img.size());
  for (auto b : img.bits()) bytes.push_back(b ? static_cast<char>(255) : '\0');
  write_all(path, bytes);
}

BinaryImage load_pgm(const std::filesystem::path& path) {
  const std::string blob = read_all(path);
  HeaderReader hr(blob, path);
  if (hr.token() != "P5") throw FormatError(path.string() + ": not a binary PGM");
  const long w = hr.integer();
  const long h = hr.integer();
  const long maxval = hr.integer();
  if (w < 0 || h < 0) throw FormatError(path.string() + ": negative dimensions");
  if (maxval != 255) throw FormatError(path.string() + ": expected maxval 255");
  const std::size_t off = hr.payload_offset();
  const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  if (blob.size() - off != n) {
    throw SizeMismatchError(path.string() + ": raster holds " + std::to_string(blob.size() - off) +
                            " samples, expected " + std::to_string(n));
  }
  std::vector<std::uint8_t> bits(n);
  for (std::size_t i = 0; i < n; ++i) bits[i] = blob[off + i] != 0 ? 1 : 0;
  return BinaryImage(static_cast<int>(w), static_cast<int>(h), std::move(bits));
}

FloatImage resize_bilinear(const FloatImage& img, int width, int height) {
  if (width < 1 || height < 1) throw ShapeError("resize target must be at least 1x1");
  if (img.width() == width && img.height() == height) return img;
  if (img.width() < 1 || img.height() < 1) throw ShapeError("cannot resize an empty image");
  std::vector<double> out(static_cast<std::size_t>(width) * static_cast<std::size_t>(height));
  const double sx = static_cast<double>(img.width()) / width;
  const double sz = static_cast<double>(img.height()) / height;
  for (int z = 0; z < height; ++z) {
    const double fz = std::clamp((z + 0.5) * sz - 0.5, 0.0, img.height() - 1.0);
    const int z0 = static_cast<int>(fz);
    const int z1 = std::min(z0 + 1, img.height() - 1);
    const double tz = fz - z0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, img.width() - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, img.width() - 1);
      const double tx = fx - x0;
      const double top = img.at(x0, z0) * (1.0 - tx) + img.at(x1, z0) * tx;
      const double bot = img.at(x0, z1) * (1.0 - tx) + img.at(x1, z1) * tx;
      out[static_cast<std::size_t>(z) * width + x] = top * (1.0 - tz) + bot * tz;
    }
  }
  return FloatImage(width, height, std::move(out));
}

BinaryImage resize_nearest(const BinaryImage& img, int width, int height) {
  if (width < 1 || height < 1) throw ShapeError("resize target must be at least 1x1");
  if (img.width() == width && img.height() == height) return img;
  if (img.width() < 1 || img.height() < 1) throw ShapeError("cannot resize an empty mask");
  BinaryImage out(width, height);
  for (int z = 0; z < height; ++z) {
    const int sz = std::min(img.height() - 1, static_cast<int>((z + 0.5) * img.height() / height));
    for (int x = 0; x < width; ++x) {
      const int sx = std::min(img.width() - 1, static_cast<int>((x + 0.5) * img.width() / width));
      out.set(x, z, img.at(sx, sz));
    }
  }
  return out;
}

BinaryImage to_binary(const FloatImage& img, double threshold) {
  BinaryImage out(img.width(), img.height());
  for (int z = 0; z < img.height(); ++z)
    for (int x = 0; x < img.width(); ++x) out.set(x, z, img.at(x, z) >= threshold);
  return out;
}

FloatImage to_float(const BinaryImage& img) {
  FloatImage out(img.width(), img.height());
  for (int z = 0; z < img.height(); ++z)
    for (int x = 0; x < img.width(); ++x) out.set(x, z, img.at(x, z) ? 1.0 : 0.0);
  return out;
}

}  // namespace pfci
