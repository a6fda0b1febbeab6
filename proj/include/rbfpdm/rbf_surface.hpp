#pragma once

#include "rbfpdm/sdf_grid.hpp"
#include "rbfpdm/types.hpp"

#include <Eigen/Dense>

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rbfpdm {

enum class Kernel { biharmonic, triharmonic, thin_plate_spline };

std::string_view kernel_name(Kernel kind);
/// Accepts the names produced by kernel_name(); throws PreconditionError otherwise.
Kernel parse_kernel(std::string_view name);

/// phi as a function of the distance r = |x - y|.
double kernel_radial(Kernel kind, double r);
/// d phi / d r.
double kernel_radial_derivative(Kernel kind, double r);
double kernel_eval(Kernel kind, const Point3 &x, const Point3 &y);
/// Gradient of phi(x, y) with respect to x; zero at coincident points.
Vec3 kernel_gradient(Kernel kind, const Point3 &x, const Point3 &y);

inline constexpr double kDuplicateSiteTolerance = 1e-9;
/// 3J + 4 for J = 512 control points.
inline constexpr int kMaxSystemSize = 3 * 512 + 4;

/// Control points of one shape and their outward unit normals. Row j of every
/// shape's particle system is the same landmark.
struct ParticleSystem {
  std::vector<Point3> points;
  std::vector<Normal3> normals;
  int shape_id = 0;

  int size() const { return static_cast<int>(points.size()); }
  /// Checks J >= 4, matching lengths, unit normals and distinct points.
  void validate() const;
};

/// Control points plus their +-s offsets along the normal: sites[3j] = p_j,
/// sites[3j+1] = p_j + s n_j, sites[3j+2] = p_j - s n_j with values (0, +s, -s).
struct DipoleSet {
  std::vector<Point3> sites;
  std::vector<double> values;
  double s = 0.0;

  int control_count() const { return static_cast<int>(sites.size() / 3); }
};

DipoleSet build_dipoles(const ParticleSystem &ps, double s);

/// Polyharmonic implicit surface
///   f(x) = sum_m w_m phi(x, site_m) + c . x + c0
/// interpolating the dipole values. The LU factors of the saddle-point system
/// are kept so that gradients with respect to the sites can be pulled back
/// through the solve.
class RbfSurface {
 public:
  static RbfSurface fit(DipoleSet dipoles, Kernel kind, double lambda = 0.0, int max_system_size = kMaxSystemSize);

  double evaluate(const Point3 &x) const;
  Eigen::VectorXd evaluate(std::span<const Point3> xs) const;

  const DipoleSet &dipoles() const { return dipoles_; }
  Kernel kernel() const { return kind_; }
  double lambda() const { return lambda_; }
  /// One weight per dipole site.
  Eigen::Ref<const Eigen::VectorXd> weights() const { return solution_.head(site_count()); }
  Vec3 linear() const { return solution_.segment<3>(site_count() + 1); }
  double constant() const { return solution_[site_count()]; }
  int site_count() const { return static_cast<int>(dipoles_.sites.size()); }

  /// Vector-Jacobian product of the values f(x_r) with respect to the control
  /// points: returns, for every control point j, sum_r cotangent_r * d f(x_r) / d p_j,
  /// where each dipole site moves rigidly with its control point (normals held fixed).
  std::vector<Vec3> control_point_vjp(std::span<const Point3> xs, std::span<const double> cotangent) const;

 private:
  RbfSurface() = default;

  DipoleSet dipoles_;
  Kernel kind_ = Kernel::biharmonic;
  double lambda_ = 0.0;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
  // [w_0 .. w_{N-1}, c0, c1, c2, c3]
  Eigen::VectorXd solution_;
};

/// Squared differences between the surface and the grid at every band point.
std::vector<double> band_error(const RbfSurface &surface, const NarrowBand &band, const SdfGrid &grid);

/// Marching-cubes triangulation of the zero level set of the surface sampled
/// on a lattice of `resolution` samples per axis spanning `box`.
/// Throws EmptyIsosurface when no lattice edge changes sign.
TriangleMesh extract_mesh(const RbfSurface &surface, const Box3 &box, const Index3 &resolution);

}  // namespace rbfpdm
