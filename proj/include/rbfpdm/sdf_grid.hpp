#pragma once

#include "rbfpdm/types.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

namespace rbfpdm {

/// Signed distance samples on a regular lattice. Sample (i, j, k) sits at
/// origin + spacing * (i, j, k); values are stored x-fastest. Distances are
/// negative inside the shape and positive outside.
///
/// Immutable after construction, so every query is safe to call from any
/// number of threads.
class SdfGrid {
 public:
  SdfGrid(const Point3 &origin, const Vec3 &spacing, const Index3 &dims,
          std::vector<float> values);

  const Point3 &origin() const { return origin_; }
  const Vec3 &spacing() const { return spacing_; }
  const Index3 &dims() const { return dims_; }
  std::span<const float> values() const { return values_; }

  std::size_t voxel_count() const { return values_.size(); }
  std::size_t linear_index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(dims_[0]) *
               (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims_[1]) * static_cast<std::size_t>(k));
  }
  float at(int i, int j, int k) const { return values_[linear_index(i, j, k)]; }
  Point3 voxel_center(int i, int j, int k) const {
    return origin_ + spacing_.cwiseProduct(Vec3(i, j, k));
  }

  /// Box spanned by the voxel centers; queries outside are clamped onto it.
  Box3 bounds() const { return {origin_, origin_ + spacing_.cwiseProduct((dims_ - 1).cast<double>().matrix())}; }
  double voxel_diagonal() const { return spacing_.norm(); }
  double mean_spacing() const { return spacing_.mean(); }
  double min_spacing() const { return spacing_.minCoeff(); }

  /// Trilinear interpolation at the clamped location.
  double distance(const Point3 &x) const;

  /// Exact gradient of the trilinear interpolant at the clamped location.
  /// Components along clamped axes are zero. Inside a cell face the gradient
  /// of the lower-index cell is returned.
  Vec3 gradient(const Point3 &x) const;

  /// Central-difference gradient with a one-voxel step per axis, normalized.
  /// Throws DegenerateGradient when its norm is <= 1e-8.
  Normal3 normal(const Point3 &x) const;

 private:
  // Cell containing the clamped point, and local coordinates in [0, 1].
  void locate(const Point3 &x, Index3 &cell, Vec3 &frac) const;

  Point3 origin_;
  Vec3 spacing_;
  Index3 dims_;
  std::vector<float> values_;
};

double query_distance(const SdfGrid &grid, const Point3 &x);
Normal3 query_normal(const SdfGrid &grid, const Point3 &x);

/// Points sampled within +-s of the zero level set.
struct NarrowBand {
  std::vector<Point3> points;
  double band_width = 0.0;
};

/// Linear indices of all voxels whose stored value satisfies |D| <= s.
/// Compute once per grid and band width, then sample repeatedly from it.
std::vector<std::size_t> band_voxels(const SdfGrid &grid, double s);

/// R points drawn uniformly from the band voxels, each jittered uniformly
/// inside its voxel and clamped to the grid box. Deterministic in `seed`.
NarrowBand sample_narrow_band(const SdfGrid &grid, double s, int count, std::uint64_t seed);
NarrowBand sample_narrow_band(const SdfGrid &grid, std::span<const std::size_t> voxels, double s,
                              int count, std::uint64_t seed);

/// Analytic grid: D(x) evaluated at every voxel center.
template <typename Field>
SdfGrid sample_field(const Point3 &origin, const Vec3 &spacing, const Index3 &dims, Field &&field) {
  std::vector<float> values(static_cast<std::size_t>(dims.prod()));
  std::size_t n = 0;
  for (int k = 0; k < dims[2]; ++k)
    for (int j = 0; j < dims[1]; ++j)
      for (int i = 0; i < dims[0]; ++i)
        values[n++] = static_cast<float>(field(Point3(origin + spacing.cwiseProduct(Vec3(i, j, k)))));
  return SdfGrid(origin, spacing, dims, std::move(values));
}

/// Scaled-sphere approximation of the ellipsoid signed distance:
/// (|x / axes| - 1) * min(axes). Exact when all axes are equal.
double ellipsoid_distance(const Point3 &x, const Vec3 &semi_axes);

struct EllipsoidCohort {
  std::vector<SdfGrid> grids;
  std::vector<Vec3> semi_axes;
};

/// Ellipsoids centered at the origin whose x semi-axis is linearly spaced over
/// `x_range`, with fixed y/z semi-axes. All grids share one cubic lattice that
/// covers the largest member with a 25% margin.
EllipsoidCohort make_ellipsoid_cohort(int count, std::pair<double, double> x_range,
                                      std::pair<double, double> fixed_axes, const Index3 &dims,
                                      std::uint64_t seed);

/// `.sdfgrid` persistence: magic `SDFGRID1`, one header line, float32 LE payload.
SdfGrid load_grid(const std::filesystem::path &path);
void save_grid(const SdfGrid &grid, const std::filesystem::path &path);

}  // namespace rbfpdm
