#pragma once

#include "rbfpdm/types.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <vector>

namespace rbfpdm {

/// PCA of flattened particle vectors (each 3J long).
struct ShapeModel {
  Eigen::VectorXd mean;
  Eigen::MatrixXd modes;        // 3J x M, orthonormal columns
  Eigen::VectorXd eigenvalues;  // M, descending, >= 0
  int training_size = 0;

  int mode_count() const { return static_cast<int>(eigenvalues.size()); }
  /// Keeps the leading m modes.
  ShapeModel truncated(int m) const;
};

/// Sample covariance (1 / (I - 1)) of the cohort, M = min(I - 1, 3J) modes.
/// Throws DegenerateCohort when fewer than two shapes are given.
ShapeModel pca_fit(std::span<const Eigen::VectorXd> cohort);

/// Fraction of the total variance in the leading m modes.
/// Throws ZeroVariance when every eigenvalue is zero.
double compactness(const ShapeModel &model, int m);

/// Mean over particles of the Euclidean distance between corresponding points.
double mean_particle_distance(const Eigen::VectorXd &a, const Eigen::VectorXd &b);

/// Average over n_samples Gaussian draws from the model of the distance to
/// the nearest training shape.
double specificity(const ShapeModel &model, std::span<const Eigen::VectorXd> training, int n_samples,
                   std::uint64_t seed);

/// Leave-one-out reconstruction error with m modes, averaged over folds.
/// m is capped at the I - 2 modes each fold can provide.
double generalization(std::span<const Eigen::VectorXd> cohort, int m);

struct SurfaceDistance {
  double mean = 0.0;
  double max = 0.0;
};

/// Closest point on triangle (a, b, c) to p.
Point3 closest_point_on_triangle(const Point3 &p, const Point3 &a, const Point3 &b, const Point3 &c);

/// Bounding-volume hierarchy over a mesh's triangles for exact closest-point queries.
class TriangleIndex {
 public:
  explicit TriangleIndex(const TriangleMesh &mesh);
  double distance(const Point3 &p) const;

 private:
  struct Node {
    Eigen::AlignedBox3d box;
    int left = -1, right = -1;
    int first = 0, count = 0;
  };
  int build(int first, int count, std::vector<Point3> &centroids);
  void query(int node, const Point3 &p, double &best_sq) const;

  const TriangleMesh &mesh_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
};

/// Two-way distance: vertices and triangle centroids of each mesh are measured
/// against the other mesh; mean and max are taken over both directions.
/// Throws EmptyMesh if either mesh has no triangles.
SurfaceDistance surface_to_surface_distance(const TriangleMesh &a, const TriangleMesh &b);

}  // namespace rbfpdm
