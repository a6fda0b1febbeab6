#pragma once

#include "rbfpdm/sdf_grid.hpp"
#include "rbfpdm/types.hpp"

#include <filesystem>
#include <functional>
#include <span>

namespace rbfpdm {

/// Scalar samples on a regular lattice, x-fastest, spanning `box` with
/// `resolution` samples per axis.
struct ScalarLattice {
  Box3 box;
  Index3 resolution;
  std::vector<double> values;

  Vec3 step() const { return (box.hi - box.lo).cwiseQuotient((resolution - 1).cast<double>().matrix()); }
  Point3 position(int i, int j, int k) const { return box.lo + step().cwiseProduct(Vec3(i, j, k)); }
};

ScalarLattice sample_lattice(const Box3 &box, const Index3 &resolution,
                             const std::function<double(const Point3 &)> &field);

/// Zero level set of the lattice. Each cube is split into six tetrahedra
/// around its main diagonal, so neighbouring cubes always agree on shared
/// faces and the output has no cracks. Vertices are placed by linear
/// interpolation along lattice edges and shared between adjacent cells;
/// triangles are oriented with normals pointing toward positive values.
/// Throws EmptyIsosurface when no edge changes sign.
TriangleMesh marching_cubes(const ScalarLattice &lattice);

/// Zero level set of the grid's own samples (the ground-truth surface).
TriangleMesh grid_isosurface(const SdfGrid &grid);

/// ASCII OBJ with `v x y z` and 1-based `f i j k` lines.
void write_obj(const TriangleMesh &mesh, const std::filesystem::path &path);

}  // namespace rbfpdm
