#include "doctest.h"
#include "test_support.hpp"

#include "rbfpdm/errors.hpp"
#include "rbfpdm/mesh.hpp"
#include "rbfpdm/metrics.hpp"

#include <random>

using namespace rbfpdm;
using namespace rbfpdm::testing;

namespace {

// Particles at fixed parametric positions on ellipsoids with x semi-axis a.
std::vector<Eigen::VectorXd> ellipsoid_family(int count, int particles) {
  const auto base = fibonacci_sphere(particles);
  std::vector<Eigen::VectorXd> out;
  for (int i = 0; i < count; ++i) {
    const double a = 1.0 + static_cast<double>(i) / (count - 1);
    Eigen::VectorXd v(3 * particles);
    for (int j = 0; j < particles; ++j) v.segment<3>(3 * j) = base[static_cast<std::size_t>(j)].cwiseProduct(Vec3(a, 0.5, 0.5));
    out.push_back(v);
  }
  return out;
}

std::vector<Eigen::VectorXd> random_affine_cohort(int count, int dim, int rank, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  Eigen::MatrixXd basis(dim, rank);
  for (int i = 0; i < dim; ++i)
    for (int r = 0; r < rank; ++r) basis(i, r) = n(rng);
  Eigen::VectorXd origin(dim);
  for (int i = 0; i < dim; ++i) origin[i] = n(rng);
  std::vector<Eigen::VectorXd> out;
  for (int k = 0; k < count; ++k) {
    Eigen::VectorXd c(rank);
    for (int r = 0; r < rank; ++r) c[r] = n(rng);
    out.push_back(origin + basis * c);
  }
  return out;
}

TriangleMesh sphere_mesh(double r) {
  const Box3 box{Point3::Constant(-1.5), Point3::Constant(1.5)};
  return marching_cubes(sample_lattice(box, Index3::Constant(64), [r](const Point3 &x) { return x.norm() - r; }));
}

TriangleMesh square(double z, double half, int n) {
  TriangleMesh m;
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i) m.vertices.emplace_back(-half + 2 * half * i / n, -half + 2 * half * j / n, z);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      const int a = j * (n + 1) + i;
      m.faces.push_back(Eigen::Array3i(a, a + 1, a + n + 2));
      m.faces.push_back(Eigen::Array3i(a, a + n + 2, a + n + 1));
    }
  return m;
}

}  // namespace

TEST_CASE("pca") {
  SUBCASE("identical shapes") {
    const std::vector<Eigen::VectorXd> c(4, Eigen::VectorXd::LinSpaced(12, 0, 1));
    const ShapeModel m = pca_fit(c);
    CHECK(m.eigenvalues.cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS_AS(compactness(m, 1), ZeroVariance);
  }
  SUBCASE("one-parameter family has one mode") {
    const ShapeModel m = pca_fit(ellipsoid_family(10, 16));
    REQUIRE(m.mode_count() == 9);
    CHECK(m.eigenvalues[0] > 0.0);
    CHECK(m.eigenvalues.tail(8).maxCoeff() <= 1e-8 * m.eigenvalues[0]);
  }
  SUBCASE("all modes reconstruct the training set") {
    const auto c = random_affine_cohort(6, 15, 5, 2);
    const ShapeModel m = pca_fit(c);
    CHECK((m.modes.transpose() * m.modes - Eigen::MatrixXd::Identity(m.mode_count(), m.mode_count())).norm() < 1e-8);
    for (int i = 1; i < m.mode_count(); ++i) CHECK(m.eigenvalues[i] <= m.eigenvalues[i - 1]);
    for (const auto &v : c) {
      const Eigen::VectorXd r = m.mean + m.modes * (m.modes.transpose() * (v - m.mean));
      CHECK((r - v).cwiseAbs().maxCoeff() < 1e-8);
    }
  }
  SUBCASE("rotation leaves eigenvalues unchanged") {
    const auto c = random_affine_cohort(7, 18, 6, 3);
    const Eigen::Matrix3d R = Eigen::AngleAxisd(1.1, Vec3(0.2, -1, 0.5).normalized()).toRotationMatrix();
    std::vector<Eigen::VectorXd> rc;
    for (auto v : c) {
      for (int j = 0; j < 6; ++j) v.segment<3>(3 * j) = R * v.segment<3>(3 * j);
      rc.push_back(v);
    }
    CHECK((pca_fit(c).eigenvalues - pca_fit(rc).eigenvalues).cwiseAbs().maxCoeff() < 1e-8);
  }
  SUBCASE("too few shapes") {
    const std::vector<Eigen::VectorXd> one(1, Eigen::VectorXd::Zero(12));
    CHECK_THROWS_AS(pca_fit(one), DegenerateCohort);
  }
}

TEST_CASE("compactness") {
  ShapeModel m;
  m.eigenvalues = Eigen::Vector3d(3, 1, 0);
  m.modes = Eigen::MatrixXd::Identity(3, 3);
  m.mean = Eigen::VectorXd::Zero(3);
  m.training_size = 4;
  CHECK(compactness(m, 1) == 0.75);
  CHECK(compactness(m, 3) == 1.0);

  const ShapeModel r = pca_fit(random_affine_cohort(8, 21, 7, 5));
  double prev = 0.0;
  for (int k = 1; k <= r.mode_count(); ++k) {
    const double c = compactness(r, k);
    CHECK(c >= prev);
    prev = c;
  }
  CHECK(compactness(r, r.mode_count()) == 1.0);
  CHECK_THROWS(compactness(r, 0));
  CHECK_THROWS(compactness(r, r.mode_count() + 1));
}

TEST_CASE("specificity") {
  SUBCASE("identical cohort") {
    const std::vector<Eigen::VectorXd> c(3, Eigen::VectorXd::LinSpaced(9, -1, 1));
    CHECK(specificity(pca_fit(c), c, 20, 1) == 0.0);
  }
  SUBCASE("degenerate Gaussian returns the mean's nearest distance") {
    const auto c = ellipsoid_family(5, 8);
    const ShapeModel m = pca_fit(c).truncated(0);
    double nearest = 1e300;
    for (const auto &v : c) nearest = std::min(nearest, mean_particle_distance(m.mean, v));
    CHECK(specificity(m, c, 25, 3) == doctest::Approx(nearest).epsilon(1e-12));
  }
  SUBCASE("one-mode family model stays close to the training family") {
    const auto c = ellipsoid_family(20, 16);
    double spacing = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
      double best = 1e300;
      for (std::size_t k = 0; k < c.size(); ++k)
        if (k != i) best = std::min(best, mean_particle_distance(c[i], c[k]));
      spacing += best / static_cast<double>(c.size());
    }
    CHECK(specificity(pca_fit(c).truncated(1), c, 100, 9) < spacing);
  }
  SUBCASE("seeded") {
    const auto c = random_affine_cohort(6, 12, 3, 1);
    const ShapeModel m = pca_fit(c);
    CHECK(specificity(m, c, 50, 4) == specificity(m, c, 50, 4));
  }
}

TEST_CASE("generalization") {
  SUBCASE("affine subspace is closed under leave-one-out") {
    const int I = 7;
    const auto c = random_affine_cohort(I, 24, I - 2, 8);
    CHECK(generalization(c, I - 2) <= 1e-8);
  }
  SUBCASE("identical shapes") {
    const std::vector<Eigen::VectorXd> c(4, Eigen::VectorXd::LinSpaced(6, 0, 2));
    CHECK(generalization(c, 1) < 1e-12);
  }
  SUBCASE("one-parameter family with one mode") {
    const auto c = ellipsoid_family(10, 16);
    CHECK(generalization(c, 1) <= 1e-6 * 2.0);
  }
  SUBCASE("non-increasing in the mode count") {
    const auto c = random_affine_cohort(9, 30, 8, 12);
    double prev = 1e300;
    for (int m = 1; m <= 7; ++m) {
      const double g = generalization(c, m);
      CHECK(g <= prev + 1e-8);
      prev = g;
    }
  }
  SUBCASE("too few shapes") {
    const std::vector<Eigen::VectorXd> c(2, Eigen::VectorXd::Zero(6));
    CHECK_THROWS_AS(generalization(c, 1), DegenerateCohort);
  }
}

TEST_CASE("closest point on a triangle") {
  const Point3 a(0, 0, 0), b(1, 0, 0), c(0, 1, 0);
  CHECK((closest_point_on_triangle(Point3(0.2, 0.2, 3), a, b, c) - Point3(0.2, 0.2, 0)).norm() < 1e-15);
  CHECK((closest_point_on_triangle(Point3(-1, -1, 0), a, b, c) - a).norm() < 1e-15);
  CHECK((closest_point_on_triangle(Point3(2, -1, 1), a, b, c) - b).norm() < 1e-15);
  CHECK((closest_point_on_triangle(Point3(1, 1, 0), a, b, c) - Point3(0.5, 0.5, 0)).norm() < 1e-15);
  CHECK((closest_point_on_triangle(Point3(0.5, -2, 0), a, b, c) - Point3(0.5, 0, 0)).norm() < 1e-15);
}

TEST_CASE("triangle index agrees with brute force") {
  const TriangleMesh m = sphere_mesh(1.0);
  const TriangleIndex index(m);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int t = 0; t < 30; ++t) {
    const Point3 p(u(rng), u(rng), u(rng));
    double best = 1e300;
    for (const auto &f : m.faces)
      best = std::min(best, (p - closest_point_on_triangle(p, m.vertices[static_cast<std::size_t>(f[0])],
                                                            m.vertices[static_cast<std::size_t>(f[1])],
                                                            m.vertices[static_cast<std::size_t>(f[2])]))
                                .norm());
    CHECK(index.distance(p) == doctest::Approx(best).epsilon(1e-12));
  }
}

TEST_CASE("surface to surface distance") {
  SUBCASE("identical meshes") {
    const TriangleMesh m = sphere_mesh(1.0);
    const SurfaceDistance d = surface_to_surface_distance(m, m);
    CHECK(d.mean < 1e-12);
    CHECK(d.max < 1e-12);
  }
  SUBCASE("parallel planes") {
    const SurfaceDistance d = surface_to_surface_distance(square(0.0, 50.0, 20), square(0.3, 50.0, 20));
    CHECK(d.mean == doctest::Approx(0.3).epsilon(0.01));
    CHECK(d.max == doctest::Approx(0.3).epsilon(0.01));
  }
  SUBCASE("concentric spheres") {
    const TriangleMesh a = sphere_mesh(1.0), b = sphere_mesh(1.1);
    const SurfaceDistance d = surface_to_surface_distance(a, b);
    CHECK(std::abs(d.mean - 0.1) <= 0.01);
    const SurfaceDistance e = surface_to_surface_distance(b, a);
    CHECK(d.mean == e.mean);
    CHECK(d.max == e.max);
  }
  SUBCASE("empty mesh") { CHECK_THROWS_AS(surface_to_surface_distance(TriangleMesh{}, sphere_mesh(1.0)), EmptyMesh); }
}
