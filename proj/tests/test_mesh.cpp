#include "doctest.h"
#include "test_support.hpp"

#include "rbfpdm/errors.hpp"
#include "rbfpdm/mesh.hpp"
#include "rbfpdm/rbf_surface.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <string>

using namespace rbfpdm;
using namespace rbfpdm::testing;

namespace {

// Every undirected edge of a closed, consistently oriented mesh appears
// exactly twice, once in each direction.
bool closed_and_oriented(const TriangleMesh &m) {
  std::map<std::pair<int, int>, int> directed;
  for (const auto &f : m.faces)
    for (int e = 0; e < 3; ++e) ++directed[{f[e], f[(e + 1) % 3]}];
  for (const auto &[edge, count] : directed) {
    if (count != 1) return false;
    const auto it = directed.find({edge.second, edge.first});
    if (it == directed.end() || it->second != 1) return false;
  }
  return true;
}

double signed_volume(const TriangleMesh &m) {
  double v = 0.0;
  for (const auto &f : m.faces)
    v += m.vertices[static_cast<std::size_t>(f[0])].dot(
             m.vertices[static_cast<std::size_t>(f[1])].cross(m.vertices[static_cast<std::size_t>(f[2])])) /
         6.0;
  return v;
}

}  // namespace

TEST_CASE("lattice isosurface of an analytic sphere") {
  const Box3 box{Point3::Constant(-2), Point3::Constant(2)};
  const ScalarLattice lat = sample_lattice(box, Index3::Constant(40), [](const Point3 &x) { return x.norm() - 1.0; });
  const TriangleMesh m = marching_cubes(lat);
  CHECK(closed_and_oriented(m));
  // outward orientation: positive values are outside, so enclosed volume is positive
  CHECK(signed_volume(m) == doctest::Approx(4.0 / 3.0 * std::numbers::pi).epsilon(0.03));
}

TEST_CASE("extract_mesh") {
  SUBCASE("sphere") {
    const RbfSurface f = RbfSurface::fit(build_dipoles(sphere_particles(100), 0.05), Kernel::biharmonic);
    const TriangleMesh m = extract_mesh(f, {Point3::Constant(-2), Point3::Constant(2)}, Index3::Constant(64));
    REQUIRE_FALSE(m.empty());
    for (const auto &v : m.vertices) CHECK(std::abs(v.norm() - 1.0) <= 0.05);
    CHECK(closed_and_oriented(m));
  }
  SUBCASE("box inside the shape") {
    const RbfSurface f = RbfSurface::fit(build_dipoles(sphere_particles(40), 0.05), Kernel::biharmonic);
    CHECK_THROWS_AS(extract_mesh(f, {Point3::Constant(-0.2), Point3::Constant(0.2)}, Index3::Constant(8)),
                    EmptyIsosurface);
  }
  SUBCASE("plane") {
    ParticleSystem ps;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        ps.points.emplace_back(-1.0 + i, -1.0 + j + 0.1 * i, 0.0);
        ps.normals.emplace_back(0, 0, 1);
      }
    const RbfSurface f = RbfSurface::fit(build_dipoles(ps, 0.25), Kernel::biharmonic);
    const Box3 box{Point3(-1, -1, -0.53), Point3(1, 1, 0.61)};
    const Index3 res = Index3::Constant(17);
    const TriangleMesh m = extract_mesh(f, box, res);
    const double edge = (box.hi - box.lo).cwiseQuotient((res - 1).cast<double>().matrix()).maxCoeff();
    for (const auto &v : m.vertices) CHECK(std::abs(v[2]) <= edge);
  }
}

TEST_CASE("grid isosurface and OBJ output") {
  const SdfGrid g = sphere_grid(1.0, 1.5, 16);
  const TriangleMesh m = grid_isosurface(g);
  CHECK(closed_and_oriented(m));
  const auto path = std::filesystem::temp_directory_path() / "rbfpdm_unit_sphere.obj";
  write_obj(m, path);
  std::ifstream in(path);
  std::string line;
  std::size_t v = 0, f = 0;
  while (std::getline(in, line)) {
    if (line.rfind("v ", 0) == 0) ++v;
    if (line.rfind("f ", 0) == 0) ++f;
  }
  CHECK(v == m.vertices.size());
  CHECK(f == m.faces.size());
}
