#pragma once

#include "pfci/image.hpp"
#include "pfci/volume.hpp"

namespace pfci {

/// Attenuation-weighted ray sum parameters. Rays run along y (anterior to posterior).
struct ProjectionParams {
  /// Attenuation slope per voxel index; the weight of the y-th voxel (1-based) is 1 - alpha*y.
  double alpha = 0.0018;
  /// Voxels strictly below this HU value contribute nothing.
  int exclude_below = -1000;
  /// Denominator; 0 means "use the volume's ny". A nonzero value must equal ny.
  int denominator = 0;
  /// Worker threads across z rows. Output does not depend on this.
  int jobs = 1;

  bool operator==(const ProjectionParams&) const = default;
};

/// CT-weighted ray sum: I[x,z] = sum_{y=1..N, v >= exclude_below} v * (1 - alpha*y) / N.
/// Excluded voxels leave N unchanged. Throws ParameterError if 1 - alpha*N < 0 or the
/// denominator disagrees with ny.
FloatImage cwrs(const CtVolume& vol, const ProjectionParams& params = {});

/// Fat count image: number of fat voxels along y at each (x, z).
FloatImage pfci_gt(const BinaryVolume& fat, int jobs = 1);

/// True where any ROI voxel along y is set.
BinaryImage roi_coronal_projection(const Roi3D& roi);

/// Linear attenuation coefficients used by the radiograph surrogate, per millimetre.
struct AttenuationParams {
  double mu_air = 0.0;
  double mu_water = 0.02;

  bool operator==(const AttenuationParams&) const = default;
};

/// Beer-Lambert transmission along y: exp(-sum_y mu(v) * spacing_y), with
/// mu(h) = max(0, mu_air + (mu_water - mu_air) * (h + 1000) / 1000). Values lie in (0, 1].
/// Throws ParameterError unless 0 <= mu_air < mu_water.
FloatImage pseudo_cxr(const CtVolume& vol, const AttenuationParams& att = {}, int jobs = 1);

}  // namespace pfci
