#include "doctest.h"
#include "test_support.hpp"

#include "rbfpdm/errors.hpp"
#include "rbfpdm/sdf_grid.hpp"

#include <filesystem>
#include <fstream>

using namespace rbfpdm;
using namespace rbfpdm::testing;

namespace {

std::filesystem::path scratch(const std::string &name) {
  const auto dir = std::filesystem::temp_directory_path() / "rbfpdm_unit";
  std::filesystem::create_directories(dir);
  return dir / name;
}

// Bisection on the interpolated field along +x from the origin.
double root_along_x(const SdfGrid &grid, double hi) {
  double lo = 0.0;
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    (grid.distance(Point3(mid, 0, 0)) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("trilinear distance queries") {
  SUBCASE("constant field") {
    const SdfGrid g = sample_field(Point3::Zero(), Vec3::Constant(0.5), Index3(4, 5, 6), [](const Point3 &) { return 0.7; });
    CHECK(g.distance(Point3(0.3, 1.1, 2.2)) == doctest::Approx(0.7).epsilon(1e-7));
    CHECK(g.distance(Point3(-9, 40, 2)) == doctest::Approx(0.7).epsilon(1e-7));
  }
  SUBCASE("analytic sphere") {
    const SdfGrid g = sphere_grid(1.0, 2.5, 101);
    CHECK(std::abs(g.distance(Point3(2, 0, 0)) - 1.0) <= g.mean_spacing());
  }
  SUBCASE("midpoint between two samples") {
    const SdfGrid g(Point3::Zero(), Vec3::Ones(), Index3(2, 2, 2), {0.0f, 1.0f, 0.0f, 1.0f, 0.0f, 1.0f, 0.0f, 1.0f});
    CHECK(g.distance(Point3(0.5, 0.3, 0.8)) == 0.5);
  }
  SUBCASE("reproduces linear fields exactly") {
    const SdfGrid g = sample_field(Point3(-1, -2, 0), Vec3(0.25, 0.5, 0.125), Index3(9, 9, 9),
                                   [](const Point3 &x) { return 0.5 * x[0] - 0.25 * x[1] + x[2]; });
    for (const Point3 &x : {Point3(0.1, -0.7, 0.33), Point3(0.9, 1.9, 0.99), Point3(-0.8, 0.0, 0.5)})
      CHECK(g.distance(x) == doctest::Approx(0.5 * x[0] - 0.25 * x[1] + x[2]).epsilon(1e-6));
  }
  SUBCASE("free function forwards") {
    const SdfGrid g = plane_grid(1.0, 5);
    CHECK(query_distance(g, Point3(0.1, 0.2, 0.3)) == g.distance(Point3(0.1, 0.2, 0.3)));
  }
}

TEST_CASE("normals") {
  SUBCASE("sphere") {
    const SdfGrid g = sphere_grid(1.0, 2.5, 101);
    CHECK((query_normal(g, Point3(2, 0, 0)) - Vec3(1, 0, 0)).norm() < 1e-3);
  }
  SUBCASE("half space") {
    const SdfGrid g = plane_grid(1.0, 9);
    for (const Point3 &x : {Point3(0, 0, 0), Point3(0.3, -0.6, 0.2), Point3(0.99, 0.99, -0.99)})
      CHECK((query_normal(g, x) - Vec3(0, 0, 1)).norm() < 1e-6);
  }
  SUBCASE("constant field is degenerate") {
    const SdfGrid g = sample_field(Point3::Zero(), Vec3::Ones(), Index3(3, 3, 3), [](const Point3 &) { return 1.0; });
    CHECK_THROWS_AS(query_normal(g, Point3(1, 1, 1)), DegenerateGradient);
  }
  SUBCASE("analytic gradient matches finite differences inside a cell") {
    const SdfGrid g = sphere_grid(1.0, 2.0, 21);
    const Point3 x(0.63, -0.41, 0.27);
    const double h = 1e-6;
    const Vec3 a = g.gradient(x);
    for (int i = 0; i < 3; ++i) {
      const Vec3 e = Vec3::Unit(i) * h;
      CHECK(a[i] == doctest::Approx((g.distance(x + e) - g.distance(x - e)) / (2 * h)).epsilon(1e-6));
    }
  }
}

TEST_CASE("narrow band sampling") {
  const SdfGrid g = sphere_grid(1.0, 2.0, 41);
  SUBCASE("postcondition") {
    const NarrowBand band = sample_narrow_band(g, 0.1, 100, 4);
    REQUIRE(band.points.size() == 100);
    for (const auto &p : band.points) CHECK(std::abs(query_distance(g, p)) <= 0.1 + g.voxel_diagonal());
  }
  SUBCASE("deterministic in the seed") {
    const auto a = sample_narrow_band(g, 0.1, 50, 99).points;
    const auto b = sample_narrow_band(g, 0.1, 50, 99).points;
    const auto c = sample_narrow_band(g, 0.1, 50, 100).points;
    CHECK(a == b);
    CHECK(a != c);
  }
  SUBCASE("no near-surface voxel") {
    const SdfGrid coarse = sphere_grid(1.02, 2.0, 5);
    CHECK_THROWS_AS(sample_narrow_band(coarse, 0.01, 10, 0), EmptyBand);
  }
  SUBCASE("non-positive width") { CHECK_THROWS(sample_narrow_band(g, 0.0, 10, 0)); }
}

TEST_CASE("ellipsoid cohort") {
  SUBCASE("zero crossings follow the x semi-axis") {
    const EllipsoidCohort c = make_ellipsoid_cohort(20, {1.0, 2.0}, {0.5, 0.5}, Index3::Constant(64), 7);
    REQUIRE(c.grids.size() == 20);
    const double h = c.grids[0].mean_spacing();
    CHECK(std::abs(root_along_x(c.grids[0], 2.4) - 1.0) <= h);
    CHECK(std::abs(root_along_x(c.grids[19], 2.4) - 2.0) <= h);
    CHECK(c.semi_axes[19][0] == doctest::Approx(2.0));
    for (const auto &g : c.grids) CHECK(g.bounds().contains(Point3(2.4, 0.6, -0.6)));
  }
  SUBCASE("count of one is rejected") {
    CHECK_THROWS_AS(make_ellipsoid_cohort(1, {1.0, 2.0}, {0.5, 0.5}, Index3::Constant(32), 0), PreconditionError);
  }
  SUBCASE("spheres are exact") {
    const EllipsoidCohort c = make_ellipsoid_cohort(2, {1.0, 1.0}, {1.0, 1.0}, Index3::Constant(48), 0);
    CHECK(std::abs(c.grids[0].distance(Point3(1, 0, 0))) <= c.grids[0].mean_spacing());
  }
  SUBCASE("axes too thin for the lattice") {
    CHECK_THROWS_AS(make_ellipsoid_cohort(3, {1.0, 2.0}, {0.05, 0.5}, Index3::Constant(16), 0), InvalidAxis);
  }
}

TEST_CASE("grid files") {
  const SdfGrid g = sample_field(Point3(-1.25, 0.5, 3.0), Vec3(0.1, 0.2, 0.3), Index3(7, 5, 3),
                                 [](const Point3 &x) { return std::sin(x[0]) * x[1] - x[2] / 3.0; });
  const auto path = scratch("roundtrip.sdfgrid");
  save_grid(g, path);

  SUBCASE("round trip is bit exact") {
    const SdfGrid r = load_grid(path);
    CHECK(r.origin() == g.origin());
    CHECK(r.spacing() == g.spacing());
    CHECK((r.dims() == g.dims()).all());
    REQUIRE(r.voxel_count() == g.voxel_count());
    CHECK(std::equal(r.values().begin(), r.values().end(), g.values().begin()));
  }
  SUBCASE("truncated payload") {
    const auto cut = scratch("truncated.sdfgrid");
    std::filesystem::copy_file(path, cut, std::filesystem::copy_options::overwrite_existing);
    std::filesystem::resize_file(cut, std::filesystem::file_size(path) - 3);
    CHECK_THROWS_AS(load_grid(cut), FormatError);
  }
  SUBCASE("payload longer than the header says") {
    const auto longer = scratch("long.sdfgrid");
    std::filesystem::copy_file(path, longer, std::filesystem::copy_options::overwrite_existing);
    std::ofstream(longer, std::ios::binary | std::ios::app).write("\0\0\0\0", 4);
    CHECK_THROWS_AS(load_grid(longer), FormatError);
  }
  SUBCASE("bad magic") {
    const auto bad = scratch("bad.sdfgrid");
    std::ofstream(bad) << "NOTAGRID\n1 2 3\n";
    CHECK_THROWS_AS(load_grid(bad), FormatError);
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(load_grid(scratch("absent.sdfgrid")), IoError); }
}
