#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>
#include <vector>

namespace rbfpdm {

using Vec3 = Eigen::Vector3d;
using Point3 = Eigen::Vector3d;
using Normal3 = Eigen::Vector3d;
using Index3 = Eigen::Array3i;

/// Axis-aligned box given by its min and max corners.
struct Box3 {
  Point3 lo;
  Point3 hi;

  bool contains(const Point3 &x) const {
    return (x.array() >= lo.array()).all() && (x.array() <= hi.array()).all();
  }
  Point3 clamp(const Point3 &x) const { return x.cwiseMax(lo).cwiseMin(hi); }
};

/// Indexed triangle mesh. Faces index into vertices, 0-based.
struct TriangleMesh {
  std::vector<Point3> vertices;
  std::vector<Eigen::Array3i> faces;

  bool empty() const { return faces.empty(); }
};

}  // namespace rbfpdm
