#include "pfci/projection.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "pfci/errors.hpp"
#include "pfci/parallel.hpp"

namespace pfci {

namespace {

// Visits every (x, z) column and writes row z of the output. Within a column the
// accumulation runs y = 0 .. ny-1 so the result is independent of `jobs`.
template <class RowFn>
std::vector<double> project_rows(const Dims3& d, int jobs, RowFn&& row_fn) {
  std::vector<double> out(static_cast<std::size_t>(d.nx) * static_cast<std::size_t>(d.nz));
  parallel_for(d.nz, jobs, [&](int z) { row_fn(z, out.data() + static_cast<std::size_t>(z) * d.nx); });
  return out;
}

}  // namespace

FloatImage cwrs(const CtVolume& vol, const ProjectionParams& params) {
  const Dims3& d = vol.dims();
  const int n = params.denominator == 0 ? d.ny : params.denominator;
  if (n != d.ny) {
    throw ParameterError("CWRS denominator " + std::to_string(n) + " must equal ny = " + std::to_string(d.ny));
  }
  if (!std::isfinite(params.alpha) || 1.0 - params.alpha * n < 0.0) {
    throw ParameterError("attenuation weight 1 - alpha*N is negative at the last voxel");
  }

  std::vector<double> weight(static_cast<std::size_t>(d.ny));
  for (int y = 0; y < d.ny; ++y) weight[static_cast<std::size_t>(y)] = 1.0 - params.alpha * (y + 1);

  const auto hu = vol.voxels();
  const double denom = static_cast<double>(n);
  auto pixels = project_rows(d, params.jobs, [&](int z, double* row) {
    std::fill(row, row + d.nx, 0.0);
    for (int y = 0; y < d.ny; ++y) {
      const std::int16_t* src = hu.data() + d.index(0, y, z);
      const double w = weight[static_cast<std::size_t>(y)];
      for (int x = 0; x < d.nx; ++x) {
        if (src[x] >= params.exclude_below) row[x] += static_cast<double>(src[x]) * w;
      }
    }
    for (int x = 0; x < d.nx; ++x) row[x] /= denom;
  });
  return FloatImage(d.nx, d.nz, std::move(pixels));
}

FloatImage pfci_gt(const BinaryVolume& fat, int jobs) {
  const Dims3& d = fat.dims();
  const auto bits = fat.bits();
  auto pixels = project_rows(d, jobs, [&](int z, double* row) {
    std::vector<int> acc(static_cast<std::size_t>(d.nx), 0);
    for (int y = 0; y < d.ny; ++y) {
      const std::uint8_t* src = bits.data() + d.index(0, y, z);
      for (int x = 0; x < d.nx; ++x) acc[static_cast<std::size_t>(x)] += src[x];
    }
    for (int x = 0; x < d.nx; ++x) row[x] = acc[static_cast<std::size_t>(x)];
  });
  return FloatImage(d.nx, d.nz, std::move(pixels));
}

BinaryImage roi_coronal_projection(const Roi3D& roi) {
  const Dims3& d = roi.dims();
  const auto bits = roi.bits();
  std::vector<std::uint8_t> out(static_cast<std::size_t>(d.nx) * static_cast<std::size_t>(d.nz), 0);
  for (int z = 0; z < d.nz; ++z) {
    std::uint8_t* row = out.data() + static_cast<std::size_t>(z) * d.nx;
    for (int y = 0; y < d.ny; ++y) {
      const std::uint8_t* src = bits.data() + d.index(0, y, z);
      for (int x = 0; x < d.nx; ++x) row[x] |= src[x];
    }
  }
  return BinaryImage(d.nx, d.nz, std::move(out));
}

FloatImage pseudo_cxr(const CtVolume& vol, const AttenuationParams& att, int jobs) {
  if (!(att.mu_air >= 0.0) || !(att.mu_water >= 0.0) || !(att.mu_air < att.mu_water)) {
    throw ParameterError("pseudo-CXR requires 0 <= mu_air < mu_water");
  }
  const Dims3& d = vol.dims();
  const auto hu = vol.voxels();
  const double slope = (att.mu_water - att.mu_air) / 1000.0;
  const double sy = vol.spacing().y;
  auto pixels = project_rows(d, jobs, [&](int z, double* row) {
    std::fill(row, row + d.nx, 0.0);
    for (int y = 0; y < d.ny; ++y) {
      const std::int16_t* src = hu.data() + d.index(0, y, z);
      for (int x = 0; x < d.nx; ++x) {
        const double mu = std::max(0.0, att.mu_air + slope * (static_cast<double>(src[x]) + 1000.0));
        row[x] += mu * sy;
      }
    }
    for (int x = 0; x < d.nx; ++x) row[x] = std::exp(-row[x]);
  });
  return FloatImage(d.nx, d.nz, std::move(pixels));
}

}  // namespace pfci
