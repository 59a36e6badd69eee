#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace pfci {

/// Voxel counts of a volume. x = left-right, y = anterior-posterior, z = cranio-caudal.
struct Dims3 {
  int nx = 0;
  int ny = 0;
  int nz = 0;

  std::size_t count() const noexcept {
    return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) * static_cast<std::size_t>(nz);
  }
  /// Linear offset in x-fastest, then y, then z order.
  std::size_t index(int x, int y, int z) const noexcept {
    return (static_cast<std::size_t>(z) * static_cast<std::size_t>(ny) + static_cast<std::size_t>(y)) *
               static_cast<std::size_t>(nx) +
           static_cast<std::size_t>(x);
  }
  bool operator==(const Dims3&) const = default;
};

struct Spacing3 {
  double x = 1.0;
  double y = 1.0;
  double z = 1.0;
  bool operator==(const Spacing3&) const = default;
};

inline constexpr int kMinHu = -4096;
inline constexpr int kMaxHu = 4095;

/// Signed HU voxel grid. Immutable once constructed.
class CtVolume {
 public:
  CtVolume() = default;
  /// Throws ParameterError on empty dims, SizeMismatchError on a wrong voxel count and
  /// RangeError when any voxel leaves [kMinHu, kMaxHu].
  CtVolume(Dims3 dims, Spacing3 spacing, std::vector<std::int16_t> voxels);

  const Dims3& dims() const noexcept { return dims_; }
  const Spacing3& spacing() const noexcept { return spacing_; }
  std::span<const std::int16_t> voxels() const& noexcept { return voxels_; }
  std::span<const std::int16_t> voxels() && = delete;
  std::int16_t at(int x, int y, int z) const noexcept { return voxels_[dims_.index(x, y, z)]; }

  bool operator==(const CtVolume&) const = default;

 private:
  Dims3 dims_;
  Spacing3 spacing_;
  std::vector<std::int16_t> voxels_;
};

/// Inclusive HU interval.
struct HuRange {
  int lo = -190;
  int hi = -30;

  bool contains(int hu) const noexcept { return lo <= hu && hu <= hi; }
};

/// The pericardial fat window, [-190, -30] HU.
inline constexpr HuRange kFatWindow{-190, -30};

/// One byte per voxel (0 or 1), same layout as CtVolume. The tag keeps the ROI and the
/// extracted fat mask distinct at the type level.
template <class Tag>
class MaskVolume {
 public:
  MaskVolume() = default;
  explicit MaskVolume(Dims3 dims, Spacing3 spacing = {}) : dims_(dims), spacing_(spacing), bits_(dims.count(), 0) {}
  MaskVolume(Dims3 dims, Spacing3 spacing, std::vector<std::uint8_t> bits);

  const Dims3& dims() const noexcept { return dims_; }
  const Spacing3& spacing() const noexcept { return spacing_; }
  std::span<const std::uint8_t> bits() const& noexcept { return bits_; }
  std::span<std::uint8_t> bits() & noexcept { return bits_; }
  std::span<const std::uint8_t> bits() && = delete;

  bool at(int x, int y, int z) const noexcept { return bits_[dims_.index(x, y, z)] != 0; }
  void set(int x, int y, int z, bool v) noexcept { bits_[dims_.index(x, y, z)] = v ? 1 : 0; }
  std::size_t popcount() const noexcept;

  bool operator==(const MaskVolume&) const = default;

 private:
  Dims3 dims_;
  Spacing3 spacing_;
  std::vector<std::uint8_t> bits_;
};

struct RoiTag {};
struct FatTag {};

/// Pericardial region of interest.
using Roi3D = MaskVolume<RoiTag>;
/// Voxels classified as pericardial fat.
using BinaryVolume = MaskVolume<FatTag>;

extern template class MaskVolume<RoiTag>;
extern template class MaskVolume<FatTag>;

/// Reads a CTV1 file.
CtVolume load_ctv(const std::filesystem::path& path);
void save_ctv(const CtVolume& vol, const std::filesystem::path& path);

/// Reads a CTM1 mask file.
Roi3D load_ctm(const std::filesystem::path& path);
void save_ctm(const Roi3D& roi, const std::filesystem::path& path);
void save_ctm(const BinaryVolume& mask, const std::filesystem::path& path);

/// output[v] = roi[v] && window.lo <= vol[v] <= window.hi. Throws ShapeError on a dims mismatch.
BinaryVolume extract_fat_mask(const CtVolume& vol, const Roi3D& roi, HuRange window = kFatWindow);

}  // namespace pfci
