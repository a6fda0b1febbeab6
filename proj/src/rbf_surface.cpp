#include "rbfpdm/rbf_surface.hpp"

#include "rbfpdm/errors.hpp"
#include "rbfpdm/mesh.hpp"

#include <cmath>
#include <string>

namespace rbfpdm {

std::string_view kernel_name(Kernel kind) {
  switch (kind) {
    case Kernel::biharmonic: return "biharmonic";
    case Kernel::triharmonic: return "triharmonic";
    case Kernel::thin_plate_spline: return "thin-plate-spline";
  }
  return "unknown";
}

Kernel parse_kernel(std::string_view name) {
  for (Kernel k : {Kernel::biharmonic, Kernel::triharmonic, Kernel::thin_plate_spline})
    if (name == kernel_name(k)) return k;
  throw PreconditionError("unknown kernel '" + std::string(name) + "'");
}

double kernel_radial(Kernel kind, double r) {
  switch (kind) {
    case Kernel::biharmonic: return r;
    case Kernel::triharmonic: return r * r * r;
    case Kernel::thin_plate_spline: return r > 0.0 ? r * r * std::log(r) : 0.0;
  }
  return 0.0;
}

double kernel_radial_derivative(Kernel kind, double r) {
  switch (kind) {
    case Kernel::biharmonic: return 1.0;
    case Kernel::triharmonic: return 3.0 * r * r;
    case Kernel::thin_plate_spline: return r > 0.0 ? r * (2.0 * std::log(r) + 1.0) : 0.0;
  }
  return 0.0;
}

double kernel_eval(Kernel kind, const Point3 &x, const Point3 &y) { return kernel_radial(kind, (x - y).norm()); }

Vec3 kernel_gradient(Kernel kind, const Point3 &x, const Point3 &y) {
  const Vec3 d = x - y;
  const double r = d.norm();
  if (r == 0.0) return Vec3::Zero();
  return (kernel_radial_derivative(kind, r) / r) * d;
}

void ParticleSystem::validate() const {
  require(points.size() == normals.size(), "ParticleSystem: points and normals differ in length");
  require(points.size() >= 4, "ParticleSystem: at least 4 control points are required");
  for (const auto &n : normals)
    require(std::abs(n.norm() - 1.0) <= 1e-6, "ParticleSystem: normals must be unit length");
  for (std::size_t a = 0; a < points.size(); ++a)
    for (std::size_t b = a + 1; b < points.size(); ++b)
      require((points[a] - points[b]).norm() > kDuplicateSiteTolerance, "ParticleSystem: duplicate control points");
}

DipoleSet build_dipoles(const ParticleSystem &ps, double s) {
  if (!(s > 0.0)) throw InvalidBand("build_dipoles: dipole offset must be positive");
  require(ps.points.size() == ps.normals.size(), "build_dipoles: points and normals differ in length");
  DipoleSet d;
  d.s = s;
  d.sites.reserve(3 * ps.points.size());
  d.values.reserve(3 * ps.points.size());
  for (std::size_t j = 0; j < ps.points.size(); ++j) {
    d.sites.push_back(ps.points[j]);
    d.sites.push_back(ps.points[j] + s * ps.normals[j]);
    d.sites.push_back(ps.points[j] - s * ps.normals[j]);
    d.values.insert(d.values.end(), {0.0, s, -s});
  }
  for (std::size_t a = 0; a < d.sites.size(); ++a)
    for (std::size_t b = a + 1; b < d.sites.size(); ++b)
      if ((d.sites[a] - d.sites[b]).norm() <= kDuplicateSiteTolerance)
        throw DuplicateSite("build_dipoles: sites " + std::to_string(a) + " and " + std::to_string(b) + " coincide");
  return d;
}

RbfSurface RbfSurface::fit(DipoleSet dipoles, Kernel kind, double lambda, int max_system_size) {
  require(lambda >= 0.0, "fit: regularization must be non-negative");
  const int n = static_cast<int>(dipoles.sites.size());
  require(n >= 1 && dipoles.values.size() == dipoles.sites.size(), "fit: malformed dipole set");
  const int size = n + 4;
  require(size <= max_system_size, "fit: system size " + std::to_string(size) + " exceeds the configured maximum");

  // [Phi + lambda I   Q] [w]   [v]
  // [Q^T              0] [c] = [0],   Q = [1 | x y z]
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(size, size);
  for (int m = 0; m < n; ++m) {
    a(m, m) = kernel_radial(kind, 0.0) + lambda;
    for (int l = m + 1; l < n; ++l) a(m, l) = a(l, m) = kernel_eval(kind, dipoles.sites[m], dipoles.sites[l]);
    a(m, n) = a(n, m) = 1.0;
    for (int c = 0; c < 3; ++c) a(m, n + 1 + c) = a(n + 1 + c, m) = dipoles.sites[m][c];
  }
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(size);
  for (int m = 0; m < n; ++m) rhs[m] = dipoles.values[m];

  RbfSurface surface;
  surface.kind_ = kind;
  surface.lambda_ = lambda;
  surface.lu_.compute(a);
  const double rcond = surface.lu_.rcond();
  if (!(rcond > 1e-14))
    throw SingularSystem("fit: saddle-point system is singular (rcond " + std::to_string(rcond) + ")");
  surface.solution_ = surface.lu_.solve(rhs);
  if (!surface.solution_.allFinite()) throw SingularSystem("fit: non-finite solution");
  surface.dipoles_ = std::move(dipoles);
  return surface;
}

double RbfSurface::evaluate(const Point3 &x) const {
  const int n = site_count();
  double f = constant() + linear().dot(x);
  for (int m = 0; m < n; ++m) f += solution_[m] * kernel_eval(kind_, x, dipoles_.sites[m]);
  return f;
}

Eigen::VectorXd RbfSurface::evaluate(std::span<const Point3> xs) const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(xs.size()));
  for (std::size_t r = 0; r < xs.size(); ++r) out[static_cast<Eigen::Index>(r)] = evaluate(xs[r]);
  return out;
}

std::vector<Vec3> RbfSurface::control_point_vjp(std::span<const Point3> xs, std::span<const double> cotangent) const {
  require(xs.size() == cotangent.size(), "control_point_vjp: points and cotangents differ in length");
  const int n = site_count();
  const auto &sites = dipoles_.sites;
  const Eigen::VectorXd w = weights();

  // f(x_r) = g(x_r)^T solution with A solution = rhs, so the adjoint
  // z = A^{-T} sum_r u_r g(x_r) carries the dependence through the solve.
  Eigen::VectorXd q = Eigen::VectorXd::Zero(n + 4);
  std::vector<Vec3> site_grad(static_cast<std::size_t>(n), Vec3::Zero());
  for (std::size_t r = 0; r < xs.size(); ++r) {
    const double u = cotangent[r];
    if (u == 0.0) continue;
    const Point3 &x = xs[r];
    for (int m = 0; m < n; ++m) {
      q[m] += u * kernel_eval(kind_, x, sites[m]);
      // Explicit dependence of phi(x_r, site_m) on the site.
      site_grad[m] -= (u * w[m]) * kernel_gradient(kind_, x, sites[m]);
    }
    q[n] += u;
    q.segment<3>(n + 1) += u * x;
  }
  const Eigen::VectorXd z = lu_.transpose().solve(q);
  const Vec3 c_lin = linear();
  const Vec3 z_lin = z.segment<3>(n + 1);

  // - z^T (dA / d site_m) solution
  for (int m = 0; m < n; ++m) {
    Vec3 g = z[m] * c_lin + w[m] * z_lin;
    for (int l = 0; l < n; ++l) {
      if (l == m) continue;
      g += (z[m] * w[l] + z[l] * w[m]) * kernel_gradient(kind_, sites[m], sites[l]);
    }
    site_grad[m] -= g;
  }

  std::vector<Vec3> out(static_cast<std::size_t>(n / 3), Vec3::Zero());
  for (int m = 0; m < n; ++m) out[static_cast<std::size_t>(m / 3)] += site_grad[m];
  return out;
}

std::vector<double> band_error(const RbfSurface &surface, const NarrowBand &band, const SdfGrid &grid) {
  std::vector<double> e;
  e.reserve(band.points.size());
  for (const auto &b : band.points) {
    const double diff = surface.evaluate(b) - grid.distance(b);
    e.push_back(diff * diff);
  }
  return e;
}

TriangleMesh extract_mesh(const RbfSurface &surface, const Box3 &box, const Index3 &resolution) {
  return marching_cubes(sample_lattice(box, resolution, [&](const Point3 &x) { return surface.evaluate(x); }));
}

}  // namespace rbfpdm
