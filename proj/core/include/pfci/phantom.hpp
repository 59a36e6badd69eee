#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "pfci/image.hpp"
#include "pfci/projection.hpp"
#include "pfci/volume.hpp"

namespace pfci {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool operator==(const Interval&) const = default;
};

/// Knobs of the procedural chest phantom. Geometry fractions are relative to the grid half
/// extent along each axis, so the same parameters scale to any grid size.
struct PhantomParams {
  Dims3 dims{64, 64, 64};
  Spacing3 spacing{1.0, 1.0, 1.0};

  Interval thorax_x{0.78, 0.90};
  Interval thorax_y{0.60, 0.72};
  Interval thorax_z{1.15, 1.35};

  Interval heart_x{0.28, 0.36};
  Interval heart_y{0.26, 0.34};
  Interval heart_z{0.30, 0.40};
  /// Heart center offset from the grid center, as a fraction of the half extent.
  Interval heart_shift_x{0.02, 0.12};
  Interval heart_shift_y{-0.12, -0.04};
  Interval heart_shift_z{-0.08, 0.08};
  /// Fat shell thickness per axis, in voxels.
  Interval fat_thickness{1.5, 4.5};

  int lung_hu = -850;
  int soft_tissue_hu = 40;
  int fat_hu = -100;
  int spine_hu = 700;
  int background_hu = -2048;
  double noise_sd = 8.0;

  /// Throws ParameterError when an invariant is violated.
  void validate() const;
  bool operator==(const PhantomParams&) const = default;
};

/// Axis-aligned ellipsoid in voxel coordinates. A voxel center is inside when
/// ((x-cx)/ax)^2 + ((y-cy)/ay)^2 + ((z-cz)/az)^2 <= 1.
struct Ellipsoid {
  double cx = 0, cy = 0, cz = 0;
  double ax = 1, ay = 1, az = 1;

  bool contains(double x, double y, double z) const noexcept;
  /// Number of integer y in [0, ny) inside the ellipsoid at column (x, z).
  int column_count(int x, int z, int ny) const noexcept;
};

struct PhantomSpec {
  std::uint64_t seed = 0;
  Dims3 dims;
  Ellipsoid thorax;
  Ellipsoid heart;
  /// Heart plus fat shell; also the pericardial ROI.
  Ellipsoid pericardium;
  Ellipsoid lung_left;
  Ellipsoid lung_right;
  /// Spine cylinder along z: center (x, y) and radius in voxels.
  double spine_cx = 0, spine_cy = 0, spine_r = 0;
  /// Analytic fat voxels per column, nx * nz, row-major over (x, z).
  std::vector<int> fat_table;

  int fat_at(int x, int z) const noexcept { return fat_table[static_cast<std::size_t>(z) * dims.nx + x]; }
  FloatImage fat_image() const;
};

struct Phantom {
  CtVolume volume;
  Roi3D roi;
  PhantomSpec spec;
};

/// Deterministic in (seed, params). Throws ParameterError when the geometry leaves the grid.
Phantom generate_phantom(std::uint64_t seed, const PhantomParams& params = {});

struct CaseRecord {
  int case_id = 0;
  std::string volume;
  std::string roi;
  /// Empty for CT-only cases.
  std::string cxr;
  bool paired = false;
  std::uint64_t seed = 0;
};

/// Case list plus the directory its relative paths resolve against.
struct CorpusManifest {
  std::uint64_t corpus_seed = 0;
  std::vector<CaseRecord> cases;
  std::filesystem::path root;

  std::filesystem::path volume_path(const CaseRecord& c) const { return root / c.volume; }
  std::filesystem::path roi_path(const CaseRecord& c) const { return root / c.roi; }
  std::filesystem::path cxr_path(const CaseRecord& c) const { return root / c.cxr; }
  const CaseRecord& find(int case_id) const;
  std::vector<int> paired_ids() const;
  std::vector<int> ct_only_ids() const;
};

/// Per-case seed derived from the corpus seed.
std::uint64_t case_seed(std::uint64_t corpus_seed, int case_id);

/// Writes case_{id:04}.ctv / .ctm for every case, case_{id:04}_cxr.pfm for the first
/// n_paired cases and manifest.json. Throws ParameterError if n_paired > n_total and
/// IoError if out_dir cannot be written.
CorpusManifest generate_corpus(int n_total, int n_paired, std::uint64_t seed, const PhantomParams& params,
                               const std::filesystem::path& out_dir, const AttenuationParams& att = {},
                               int jobs = 1);

void save_manifest(const CorpusManifest& manifest, const std::filesystem::path& path);
/// Throws FormatError on a malformed manifest, DataError on duplicate ids and IoError
/// when a referenced file is missing.
CorpusManifest load_manifest(const std::filesystem::path& path);

}  // namespace pfci
