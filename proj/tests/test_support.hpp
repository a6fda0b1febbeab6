#pragma once

// Shared fixtures and oracles for the unit and acceptance suites. Nothing here
// calls into the gradient code paths it is used to check.

#include "rbfpdm/losses.hpp"
#include "rbfpdm/optimizer.hpp"
#include "rbfpdm/sdf_grid.hpp"

#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

namespace rbfpdm::testing {

/// Exact sphere SDF sampled on a cube [-half, half]^3.
inline SdfGrid sphere_grid(double radius, double half, int dims, Point3 center = Point3::Zero()) {
  const double h = 2.0 * half / (dims - 1);
  return sample_field(Point3::Constant(-half), Vec3::Constant(h), Index3::Constant(dims),
                      [&](const Point3 &x) { return (x - center).norm() - radius; });
}

/// D(x) = z on a cube [-half, half]^3.
inline SdfGrid plane_grid(double half, int dims) {
  const double h = 2.0 * half / (dims - 1);
  return sample_field(Point3::Constant(-half), Vec3::Constant(h), Index3::Constant(dims),
                      [](const Point3 &x) { return x[2]; });
}

/// Near-uniform points on a sphere (Fibonacci lattice).
inline std::vector<Point3> fibonacci_sphere(int n, double radius = 1.0, Point3 center = Point3::Zero()) {
  std::vector<Point3> pts;
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i) {
    const double y = 1.0 - 2.0 * (i + 0.5) / n;
    const double r = std::sqrt(1.0 - y * y);
    const double t = golden * i;
    pts.push_back(center + radius * Point3(r * std::cos(t), y, r * std::sin(t)));
  }
  return pts;
}

inline ParticleSystem sphere_particles(int n, double radius = 1.0, Point3 center = Point3::Zero()) {
  ParticleSystem ps;
  for (const auto &p : fibonacci_sphere(n, radius, center)) {
    ps.points.push_back(p);
    ps.normals.push_back((p - center).normalized());
  }
  return ps;
}

/// Moves every coordinate at least `margin` (in cell units) away from the
/// lattice cell faces, where the trilinear field has kinks.
inline Point3 away_from_cell_faces(const SdfGrid &grid, Point3 x, double margin = 0.05) {
  for (int a = 0; a < 3; ++a) {
    const double u = (x[a] - grid.origin()[a]) / grid.spacing()[a];
    const double f = u - std::floor(u);
    if (f < margin) x[a] += (margin - f) * grid.spacing()[a];
    if (f > 1.0 - margin) x[a] -= (f - (1.0 - margin)) * grid.spacing()[a];
  }
  return x;
}

/// Central differences of `f` with respect to every particle coordinate.
inline std::vector<std::vector<Vec3>> finite_difference_gradient(
    std::vector<ParticleSystem> shapes, const std::function<double(const std::vector<ParticleSystem> &)> &f,
    double h = 1e-4) {
  std::vector<std::vector<Vec3>> grad(shapes.size());
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    grad[i].assign(shapes[i].points.size(), Vec3::Zero());
    for (std::size_t j = 0; j < shapes[i].points.size(); ++j)
      for (int a = 0; a < 3; ++a) {
        const double x0 = shapes[i].points[j][a];
        shapes[i].points[j][a] = x0 + h;
        const double up = f(shapes);
        shapes[i].points[j][a] = x0 - h;
        const double down = f(shapes);
        shapes[i].points[j][a] = x0;
        grad[i][j][a] = (up - down) / (2.0 * h);
      }
  }
  return grad;
}

/// Largest per-component relative error, with `floor` as the absolute tolerance.
/// Returns the ratio error / allowed, so <= 1 passes.
inline double gradient_mismatch(const std::vector<std::vector<Vec3>> &analytic,
                                const std::vector<std::vector<Vec3>> &numeric, double rel = 1e-3,
                                double floor = 1e-8) {
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i)
    for (std::size_t j = 0; j < analytic[i].size(); ++j)
      for (int a = 0; a < 3; ++a) {
        const double x = analytic[i][j][a], y = numeric[i][j][a];
        const double allowed = std::max(rel * std::max(std::abs(x), std::abs(y)), floor);
        worst = std::max(worst, std::abs(x - y) / allowed);
      }
  return worst;
}

/// Random small gradient-check problem: K ellipsoid-like shapes with J
/// particles near each surface, kept clear of trilinear kinks.
struct GradientProblem {
  std::vector<SdfGrid> grids;
  std::vector<ParticleSystem> shapes;
  std::vector<NarrowBand> bands;
  CohortMean mean;
  double band_width = 0.0;
  double covariance_floor = 1e-3;
};

inline GradientProblem make_gradient_problem(int particles, int shapes, std::uint64_t seed, int band_points = 150) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  GradientProblem p;
  for (int k = 0; k < shapes; ++k) {
    const Vec3 axes(1.0 + 0.15 * k, 0.8, 0.7);
    p.grids.push_back(sample_field(Point3::Constant(-1.6), Vec3::Constant(0.1), Index3::Constant(33),
                                   [&](const Point3 &x) { return ellipsoid_distance(x, axes); }));
  }
  p.band_width = 0.15;
  const auto base = fibonacci_sphere(particles);
  for (int k = 0; k < shapes; ++k) {
    const SdfGrid &grid = p.grids[static_cast<std::size_t>(k)];
    const Vec3 axes(1.0 + 0.15 * k, 0.8, 0.7);
    ParticleSystem ps;
    ps.shape_id = k;
    for (const auto &u : base) {
      Point3 x = u.cwiseProduct(axes) * (1.0 + 0.08 * unit(rng)) + 0.05 * Vec3(unit(rng), unit(rng), unit(rng));
      x = away_from_cell_faces(grid, x);
      if (std::abs(grid.distance(x)) < 2e-3) x = away_from_cell_faces(grid, x * 1.01);
      ps.points.push_back(x);
      ps.normals.push_back(grid.normal(x));
    }
    p.shapes.push_back(std::move(ps));
    p.bands.push_back(sample_narrow_band(grid, p.band_width, band_points, seed * 31 + static_cast<std::uint64_t>(k)));
  }
  if (shapes >= 2) {
    p.mean = cohort_mean(p.shapes, 1);
    for (Eigen::Index n = 0; n < p.mean.mu.size(); ++n) p.mean.mu[n] += 0.03 * unit(rng);
  }
  return p;
}

}  // namespace rbfpdm::testing
