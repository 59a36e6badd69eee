#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace pfci {

/// Real-valued coronal image. width runs along x, height along z; row-major, row 0 is the
/// first z slice. Only finite values are ever stored.
class FloatImage {
 public:
  FloatImage() = default;
  FloatImage(int width, int height, double fill = 0.0);
  /// Throws ShapeError on a size mismatch and RangeError on non-finite pixels.
  FloatImage(int width, int height, std::vector<double> pixels);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return pixels_.size(); }

  double at(int x, int z) const noexcept { return pixels_[index(x, z)]; }
  /// Throws RangeError on a non-finite value.
  void set(int x, int z, double v);

  std::span<const double> pixels() const& noexcept { return pixels_; }
  std::span<const double> pixels() && = delete;

  bool same_dims(const FloatImage& o) const noexcept { return width_ == o.width_ && height_ == o.height_; }
  bool operator==(const FloatImage&) const = default;

 private:
  std::size_t index(int x, int z) const noexcept {
    return static_cast<std::size_t>(z) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<double> pixels_;
};

/// One flag per pixel, same layout as FloatImage.
class BinaryImage {
 public:
  BinaryImage() = default;
  BinaryImage(int width, int height, bool fill = false);
  BinaryImage(int width, int height, std::vector<std::uint8_t> bits);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return bits_.size(); }

  bool at(int x, int z) const noexcept { return bits_[index(x, z)] != 0; }
  void set(int x, int z, bool v) noexcept { bits_[index(x, z)] = v ? 1 : 0; }
  std::span<const std::uint8_t> bits() const& noexcept { return bits_; }
  std::span<const std::uint8_t> bits() && = delete;
  std::size_t popcount() const noexcept;

  bool operator==(const BinaryImage&) const = default;

 private:
  std::size_t index(int x, int z) const noexcept {
    return static_cast<std::size_t>(z) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// Grayscale PFM, little-endian float32, bottom row first. Pixels are narrowed to float.
void save_pfm(const FloatImage& img, const std::filesystem::path& path);
FloatImage load_pfm(const std::filesystem::path& path);

/// Binary PGM (P5), maxval 255, payload 0 or 255.
void save_pgm(const BinaryImage& img, const std::filesystem::path& path);
/// Any nonzero sample reads as true.
BinaryImage load_pgm(const std::filesystem::path& path);

/// Bilinear resampling with pixel-center alignment; identity when sizes already match.
FloatImage resize_bilinear(const FloatImage& img, int width, int height);
/// Nearest-neighbour resampling of a mask.
BinaryImage resize_nearest(const BinaryImage& img, int width, int height);

BinaryImage to_binary(const FloatImage& img, double threshold);
FloatImage to_float(const BinaryImage& img);

}  // namespace pfci
