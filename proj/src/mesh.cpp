#include "rbfpdm/mesh.hpp"

#include "rbfpdm/errors.hpp"

#include <array>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <unordered_map>

namespace rbfpdm {

namespace {

// Cube corners are numbered by bits: x = 1, y = 2, z = 4.
constexpr std::array<std::array<int, 4>, 6> kTetrahedra = {{
    {0, 1, 3, 7},
    {0, 3, 2, 7},
    {0, 2, 6, 7},
    {0, 6, 4, 7},
    {0, 4, 5, 7},
    {0, 5, 1, 7},
}};

class MeshBuilder {
 public:
  explicit MeshBuilder(const ScalarLattice &lattice) : lattice_(lattice) {}

  void polygonize(const std::array<std::size_t, 4> &ids) {
    std::array<int, 4> inside{};
    std::array<int, 4> outside{};
    int n_in = 0, n_out = 0;
    for (int c = 0; c < 4; ++c) {
      if (lattice_.values[ids[c]] < 0.0)
        inside[n_in++] = c;
      else
        outside[n_out++] = c;
    }
    if (n_in == 0 || n_out == 0) return;

    const Point3 toward_outside = position(ids[outside[0]]) - position(ids[inside[0]]);
    if (n_in == 1) {
      const int a = inside[0];
      add_triangle(vertex(ids[a], ids[outside[0]]), vertex(ids[a], ids[outside[1]]), vertex(ids[a], ids[outside[2]]),
                   toward_outside);
    } else if (n_out == 1) {
      const int b = outside[0];
      add_triangle(vertex(ids[inside[0]], ids[b]), vertex(ids[inside[1]], ids[b]), vertex(ids[inside[2]], ids[b]),
                   toward_outside);
    } else {
      // Quad spanned by the four edges between the two inside and two outside corners.
      const int q0 = vertex(ids[inside[0]], ids[outside[0]]);
      const int q1 = vertex(ids[inside[0]], ids[outside[1]]);
      const int q2 = vertex(ids[inside[1]], ids[outside[1]]);
      const int q3 = vertex(ids[inside[1]], ids[outside[0]]);
      add_triangle(q0, q1, q2, toward_outside);
      add_triangle(q0, q2, q3, toward_outside);
    }
  }

  TriangleMesh take() { return std::move(mesh_); }

 private:
  Point3 position(std::size_t id) const {
    const auto nx = static_cast<std::size_t>(lattice_.resolution[0]);
    const auto ny = static_cast<std::size_t>(lattice_.resolution[1]);
    return lattice_.position(static_cast<int>(id % nx), static_cast<int>((id / nx) % ny),
                             static_cast<int>(id / (nx * ny)));
  }

  int vertex(std::size_t a, std::size_t b) {
    if (a > b) std::swap(a, b);
    const std::uint64_t key = static_cast<std::uint64_t>(a) * lattice_.values.size() + b;
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    const double va = lattice_.values[a], vb = lattice_.values[b];
    const double t = va / (va - vb);
    mesh_.vertices.push_back(position(a) + t * (position(b) - position(a)));
    const int index = static_cast<int>(mesh_.vertices.size()) - 1;
    cache_.emplace(key, index);
    return index;
  }

  void add_triangle(int a, int b, int c, const Vec3 &toward_outside) {
    if (a == b || b == c || a == c) return;
    const auto &v = mesh_.vertices;
    const Vec3 n = (v[b] - v[a]).cross(v[c] - v[a]);
    if (n.dot(toward_outside) < 0.0) std::swap(b, c);
    mesh_.faces.emplace_back(a, b, c);
  }

  const ScalarLattice &lattice_;
  TriangleMesh mesh_;
  std::unordered_map<std::uint64_t, int> cache_;
};

}  // namespace

ScalarLattice sample_lattice(const Box3 &box, const Index3 &resolution,
                             const std::function<double(const Point3 &)> &field) {
  require((resolution >= 2).all(), "sample_lattice: resolution must be >= 2 per axis");
  require((box.hi.array() > box.lo.array()).all(), "sample_lattice: degenerate box");
  ScalarLattice lattice{box, resolution, {}};
  lattice.values.resize(static_cast<std::size_t>(resolution.prod()));
  std::size_t n = 0;
  for (int k = 0; k < resolution[2]; ++k)
    for (int j = 0; j < resolution[1]; ++j)
      for (int i = 0; i < resolution[0]; ++i) lattice.values[n++] = field(lattice.position(i, j, k));
  return lattice;
}

TriangleMesh marching_cubes(const ScalarLattice &lattice) {
  const auto &res = lattice.resolution;
  require((res >= 2).all(), "marching_cubes: resolution must be >= 2 per axis");
  const auto nx = static_cast<std::size_t>(res[0]);
  const auto nxy = nx * static_cast<std::size_t>(res[1]);
  MeshBuilder builder(lattice);
  for (int k = 0; k + 1 < res[2]; ++k)
    for (int j = 0; j + 1 < res[1]; ++j)
      for (int i = 0; i + 1 < res[0]; ++i) {
        std::array<std::size_t, 8> corner;
        for (int c = 0; c < 8; ++c)
          corner[c] = static_cast<std::size_t>(i + (c & 1)) + nx * static_cast<std::size_t>(j + ((c >> 1) & 1)) +
                      nxy * static_cast<std::size_t>(k + ((c >> 2) & 1));
        for (const auto &tet : kTetrahedra)
          builder.polygonize({corner[tet[0]], corner[tet[1]], corner[tet[2]], corner[tet[3]]});
      }
  TriangleMesh mesh = builder.take();
  if (mesh.empty()) throw EmptyIsosurface("marching_cubes: no sign change on the lattice");
  return mesh;
}

TriangleMesh grid_isosurface(const SdfGrid &grid) {
  ScalarLattice lattice{grid.bounds(), grid.dims(), {}};
  lattice.values.assign(grid.values().begin(), grid.values().end());
  return marching_cubes(lattice);
}

void write_obj(const TriangleMesh &mesh, const std::filesystem::path &path) {
  std::FILE *f = std::fopen(path.c_str(), "w");
  if (!f) throw IoError("cannot write mesh file " + path.string());
  for (const auto &v : mesh.vertices) std::fprintf(f, "v %.9g %.9g %.9g\n", v[0], v[1], v[2]);
  for (const auto &t : mesh.faces) std::fprintf(f, "f %d %d %d\n", t[0] + 1, t[1] + 1, t[2] + 1);
  const bool failed = std::ferror(f) != 0;
  std::fclose(f);
  if (failed) throw IoError("failed writing mesh file " + path.string());
}

}  // namespace rbfpdm
