#include "rbfpdm/sdf_grid.hpp"

#include "rbfpdm/errors.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

namespace rbfpdm {

namespace {

static_assert(std::endian::native == std::endian::little, "grid payload is stored little-endian");

constexpr char kMagic[8] = {'S', 'D', 'F', 'G', 'R', 'I', 'D', '1'};

}  // namespace

SdfGrid::SdfGrid(const Point3 &origin, const Vec3 &spacing, const Index3 &dims, std::vector<float> values)
    : origin_(origin), spacing_(spacing), dims_(dims), values_(std::move(values)) {
  require((spacing_.array() > 0.0).all(), "SdfGrid: spacing must be strictly positive");
  require((dims_ >= 2).all(), "SdfGrid: every dimension must be >= 2");
  require(values_.size() == static_cast<std::size_t>(dims_.cast<std::int64_t>().prod()),
          "SdfGrid: value count does not match dims");
  for (float v : values_) require(std::isfinite(v), "SdfGrid: values must be finite");
}

void SdfGrid::locate(const Point3 &x, Index3 &cell, Vec3 &frac) const {
  const Vec3 u = (bounds().clamp(x) - origin_).cwiseQuotient(spacing_);
  for (int a = 0; a < 3; ++a) {
    int c = static_cast<int>(std::floor(u[a]));
    c = std::clamp(c, 0, dims_[a] - 2);
    cell[a] = c;
    frac[a] = u[a] - c;
  }
}

double SdfGrid::distance(const Point3 &x) const {
  Index3 c;
  Vec3 t;
  locate(x, c, t);
  const double c000 = at(c[0], c[1], c[2]), c100 = at(c[0] + 1, c[1], c[2]);
  const double c010 = at(c[0], c[1] + 1, c[2]), c110 = at(c[0] + 1, c[1] + 1, c[2]);
  const double c001 = at(c[0], c[1], c[2] + 1), c101 = at(c[0] + 1, c[1], c[2] + 1);
  const double c011 = at(c[0], c[1] + 1, c[2] + 1), c111 = at(c[0] + 1, c[1] + 1, c[2] + 1);
  const double c00 = c000 + t[0] * (c100 - c000);
  const double c10 = c010 + t[0] * (c110 - c010);
  const double c01 = c001 + t[0] * (c101 - c001);
  const double c11 = c011 + t[0] * (c111 - c011);
  const double c0 = c00 + t[1] * (c10 - c00);
  const double c1 = c01 + t[1] * (c11 - c01);
  return c0 + t[2] * (c1 - c0);
}

Vec3 SdfGrid::gradient(const Point3 &x) const {
  Index3 c;
  Vec3 t;
  locate(x, c, t);
  const double v[2][2][2] = {
      {{at(c[0], c[1], c[2]), at(c[0], c[1], c[2] + 1)}, {at(c[0], c[1] + 1, c[2]), at(c[0], c[1] + 1, c[2] + 1)}},
      {{at(c[0] + 1, c[1], c[2]), at(c[0] + 1, c[1], c[2] + 1)},
       {at(c[0] + 1, c[1] + 1, c[2]), at(c[0] + 1, c[1] + 1, c[2] + 1)}}};
  const auto w = [&](int a, int bit) { return bit ? t[a] : 1.0 - t[a]; };
  Vec3 g = Vec3::Zero();
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k) {
        const double s = v[i][j][k];
        g[0] += s * (i ? 1.0 : -1.0) * w(1, j) * w(2, k);
        g[1] += s * w(0, i) * (j ? 1.0 : -1.0) * w(2, k);
        g[2] += s * w(0, i) * w(1, j) * (k ? 1.0 : -1.0);
      }
  g = g.cwiseQuotient(spacing_);
  // The clamped field is constant along axes where x left the box.
  const Box3 box = bounds();
  for (int a = 0; a < 3; ++a)
    if (x[a] < box.lo[a] || x[a] > box.hi[a]) g[a] = 0.0;
  return g;
}

Normal3 SdfGrid::normal(const Point3 &x) const {
  Vec3 g;
  for (int a = 0; a < 3; ++a) {
    Vec3 h = Vec3::Zero();
    h[a] = spacing_[a];
    g[a] = (distance(x + h) - distance(x - h)) / (2.0 * spacing_[a]);
  }
  const double n = g.norm();
  if (!(n > 1e-8)) throw DegenerateGradient("query_normal: distance gradient vanishes");
  return g / n;
}

double query_distance(const SdfGrid &grid, const Point3 &x) { return grid.distance(x); }
Normal3 query_normal(const SdfGrid &grid, const Point3 &x) { return grid.normal(x); }

std::vector<std::size_t> band_voxels(const SdfGrid &grid, double s) {
  require(s > 0.0, "band_voxels: band width must be positive");
  std::vector<std::size_t> out;
  const auto values = grid.values();
  for (std::size_t n = 0; n < values.size(); ++n)
    if (std::abs(static_cast<double>(values[n])) <= s) out.push_back(n);
  return out;
}

NarrowBand sample_narrow_band(const SdfGrid &grid, std::span<const std::size_t> voxels, double s, int count,
                              std::uint64_t seed) {
  require(s > 0.0, "sample_narrow_band: band width must be positive");
  require(count >= 1, "sample_narrow_band: count must be >= 1");
  if (voxels.empty()) throw EmptyBand("sample_narrow_band: no voxel within the band");

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, voxels.size() - 1);
  std::uniform_real_distribution<double> jitter(-0.5, 0.5);
  const Box3 box = grid.bounds();
  const auto nx = static_cast<std::size_t>(grid.dims()[0]);
  const auto nxy = nx * static_cast<std::size_t>(grid.dims()[1]);

  NarrowBand band;
  band.band_width = s;
  band.points.reserve(static_cast<std::size_t>(count));
  for (int r = 0; r < count; ++r) {
    const std::size_t n = voxels[pick(rng)];
    const int i = static_cast<int>(n % nx);
    const int j = static_cast<int>((n / nx) % static_cast<std::size_t>(grid.dims()[1]));
    const int k = static_cast<int>(n / nxy);
    Vec3 offset;
    for (int a = 0; a < 3; ++a) offset[a] = jitter(rng) * grid.spacing()[a];
    band.points.push_back(box.clamp(grid.voxel_center(i, j, k) + offset));
  }
  return band;
}

NarrowBand sample_narrow_band(const SdfGrid &grid, double s, int count, std::uint64_t seed) {
  const auto voxels = band_voxels(grid, s);
  return sample_narrow_band(grid, voxels, s, count, seed);
}

double ellipsoid_distance(const Point3 &x, const Vec3 &semi_axes) {
  return (x.cwiseQuotient(semi_axes).norm() - 1.0) * semi_axes.minCoeff();
}

EllipsoidCohort make_ellipsoid_cohort(int count, std::pair<double, double> x_range,
                                      std::pair<double, double> fixed_axes, const Index3 &dims,
                                      std::uint64_t /*seed*/) {
  require(count >= 2, "make_ellipsoid_cohort: count must be >= 2");
  require(x_range.first > 0.0 && x_range.second >= x_range.first, "make_ellipsoid_cohort: invalid x range");
  require(fixed_axes.first > 0.0 && fixed_axes.second > 0.0, "make_ellipsoid_cohort: fixed axes must be positive");
  require((dims >= 2).all(), "make_ellipsoid_cohort: dims must be >= 2");

  const double largest = std::max({x_range.second, fixed_axes.first, fixed_axes.second});
  const double half = 1.25 * largest;
  const Vec3 spacing = (2.0 * half) * (dims - 1).cast<double>().matrix().cwiseInverse();
  const Point3 origin = Point3::Constant(-half);
  const double smallest = std::min({x_range.first, fixed_axes.first, fixed_axes.second});
  if (smallest <= 2.0 * spacing.maxCoeff())
    throw InvalidAxis("make_ellipsoid_cohort: semi-axis not larger than two voxel spacings");

  EllipsoidCohort cohort;
  for (int n = 0; n < count; ++n) {
    const double t = static_cast<double>(n) / (count - 1);
    const Vec3 axes(x_range.first + t * (x_range.second - x_range.first), fixed_axes.first, fixed_axes.second);
    cohort.semi_axes.push_back(axes);
    cohort.grids.push_back(
        sample_field(origin, spacing, dims, [&](const Point3 &x) { return ellipsoid_distance(x, axes); }));
  }
  return cohort;
}

SdfGrid load_grid(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open grid file " + path.string());

  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
    throw FormatError("bad magic in grid file " + path.string());
  std::string header;
  if (!std::getline(in, header)) throw FormatError("missing header in grid file " + path.string());

  Index3 dims;
  Point3 origin;
  Vec3 spacing;
  {
    // dims=<nx> <ny> <nz>;origin=<ox> <oy> <oz>;spacing=<sx> <sy> <sz>
    std::string h = header;
    std::replace(h.begin(), h.end(), ';', ' ');
    std::replace(h.begin(), h.end(), '=', ' ');
    std::istringstream ss(h);
    ss.imbue(std::locale::classic());
    std::string k1, k2, k3;
    ss >> k1 >> dims[0] >> dims[1] >> dims[2] >> k2 >> origin[0] >> origin[1] >> origin[2] >> k3 >> spacing[0] >>
        spacing[1] >> spacing[2];
    std::string rest;
    if (!ss || k1 != "dims" || k2 != "origin" || k3 != "spacing" || (ss >> rest))
      throw FormatError("malformed header in grid file " + path.string());
  }
  if (!(dims >= 2).all() || !(spacing.array() > 0.0).all())
    throw FormatError("invalid dims or spacing in grid file " + path.string());

  const auto count = static_cast<std::size_t>(dims.cast<std::int64_t>().prod());
  std::vector<float> values(count);
  in.read(reinterpret_cast<char *>(values.data()), static_cast<std::streamsize>(count * sizeof(float)));
  if (static_cast<std::size_t>(in.gcount()) != count * sizeof(float))
    throw FormatError("payload shorter than header dims in grid file " + path.string());
  if (in.peek() != std::char_traits<char>::eof())
    throw FormatError("payload longer than header dims in grid file " + path.string());
  for (float v : values)
    if (!std::isfinite(v)) throw FormatError("non-finite value in grid file " + path.string());
  return SdfGrid(origin, spacing, dims, std::move(values));
}

void save_grid(const SdfGrid &grid, const std::filesystem::path &path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write grid file " + path.string());
  std::ostringstream header;
  header.imbue(std::locale::classic());
  header.precision(17);
  const auto &d = grid.dims();
  const auto &o = grid.origin();
  const auto &s = grid.spacing();
  header << "dims=" << d[0] << ' ' << d[1] << ' ' << d[2] << ";origin=" << o[0] << ' ' << o[1] << ' ' << o[2]
         << ";spacing=" << s[0] << ' ' << s[1] << ' ' << s[2] << '\n';
  out.write(kMagic, 8);
  const std::string h = header.str();
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  out.write(reinterpret_cast<const char *>(grid.values().data()),
            static_cast<std::streamsize>(grid.voxel_count() * sizeof(float)));
  if (!out) throw IoError("failed writing grid file " + path.string());
}

}  // namespace rbfpdm
