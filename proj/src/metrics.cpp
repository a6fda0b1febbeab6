#include "rbfpdm/metrics.hpp"

#include "rbfpdm/errors.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace rbfpdm {

ShapeModel ShapeModel::truncated(int m) const {
  require(m >= 0 && m <= mode_count(), "ShapeModel::truncated: mode count out of range");
  ShapeModel out;
  out.mean = mean;
  out.modes = modes.leftCols(m);
  out.eigenvalues = eigenvalues.head(m);
  out.training_size = training_size;
  return out;
}

ShapeModel pca_fit(std::span<const Eigen::VectorXd> cohort) {
  if (cohort.size() < 2) throw DegenerateCohort("pca_fit: at least two shapes are required");
  const auto count = static_cast<Eigen::Index>(cohort.size());
  const auto dim = cohort.front().size();
  Eigen::MatrixXd x(count, dim);
  for (Eigen::Index i = 0; i < count; ++i) {
    require(cohort[static_cast<std::size_t>(i)].size() == dim, "pca_fit: shape vectors differ in length");
    x.row(i) = cohort[static_cast<std::size_t>(i)].transpose();
  }
  ShapeModel model;
  model.training_size = static_cast<int>(count);
  // Shifting by the first shape keeps the mean exact for identical shapes.
  const Eigen::RowVectorXd first = x.row(0);
  model.mean = first.transpose() + (x.rowwise() - first).colwise().mean().transpose();
  const double scale = x.cwiseAbs().maxCoeff();
  x.rowwise() -= model.mean.transpose();

  // Right singular vectors of the centered data are the covariance
  // eigenvectors; working on the I x 3J data keeps the cost at O(I^2 J).
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinV);
  const auto modes = std::min<Eigen::Index>(count - 1, dim);
  model.modes = svd.matrixV().leftCols(modes);
  // Centering identical rows leaves rounding noise of order eps * |x|.
  const double noise = static_cast<double>(count * dim) * std::numeric_limits<double>::epsilon() * scale;
  Eigen::VectorXd sv = svd.singularValues().head(modes);
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv[i] <= noise) sv[i] = 0.0;
  model.eigenvalues = sv.array().square() / static_cast<double>(count - 1);
  return model;
}

double compactness(const ShapeModel &model, int m) {
  require(m >= 1 && m <= model.mode_count(), "compactness: mode count out of range");
  const double total = model.eigenvalues.sum();
  if (!(total > 0.0)) throw ZeroVariance("compactness: the model has no variance");
  return model.eigenvalues.head(m).sum() / total;
}

double mean_particle_distance(const Eigen::VectorXd &a, const Eigen::VectorXd &b) {
  require(a.size() == b.size() && a.size() % 3 == 0 && a.size() > 0, "mean_particle_distance: bad vector lengths");
  const auto j = a.size() / 3;
  double sum = 0.0;
  for (Eigen::Index p = 0; p < j; ++p) sum += (a.segment<3>(3 * p) - b.segment<3>(3 * p)).norm();
  return sum / static_cast<double>(j);
}

double specificity(const ShapeModel &model, std::span<const Eigen::VectorXd> training, int n_samples,
                   std::uint64_t seed) {
  require(n_samples >= 1, "specificity: at least one sample is required");
  require(!training.empty(), "specificity: empty training cohort");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Eigen::VectorXd scale = model.eigenvalues.cwiseMax(0.0).cwiseSqrt();
  double total = 0.0;
  for (int s = 0; s < n_samples; ++s) {
    Eigen::VectorXd z(model.mode_count());
    for (Eigen::Index m = 0; m < z.size(); ++m) z[m] = normal(rng);
    const Eigen::VectorXd shape = model.mean + model.modes * z.cwiseProduct(scale);
    double best = std::numeric_limits<double>::infinity();
    for (const auto &t : training) best = std::min(best, mean_particle_distance(shape, t));
    total += best;
  }
  return total / n_samples;
}

double generalization(std::span<const Eigen::VectorXd> cohort, int m) {
  if (cohort.size() < 3) throw DegenerateCohort("generalization: at least three shapes are required");
  require(m >= 1, "generalization: mode count must be >= 1");
  double total = 0.0;
  std::vector<Eigen::VectorXd> rest;
  rest.reserve(cohort.size() - 1);
  for (std::size_t held = 0; held < cohort.size(); ++held) {
    rest.clear();
    for (std::size_t i = 0; i < cohort.size(); ++i)
      if (i != held) rest.push_back(cohort[i]);
    const ShapeModel fold = pca_fit(rest);
    const Eigen::MatrixXd basis = fold.modes.leftCols(std::min(m, fold.mode_count()));
    const Eigen::VectorXd centered = cohort[held] - fold.mean;
    const Eigen::VectorXd reconstructed = fold.mean + basis * (basis.transpose() * centered);
    total += mean_particle_distance(reconstructed, cohort[held]);
  }
  return total / static_cast<double>(cohort.size());
}

Point3 closest_point_on_triangle(const Point3 &p, const Point3 &a, const Point3 &b, const Point3 &c) {
  // Voronoi-region walk over vertices, edges and face.
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;

  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return b;

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + (d1 / (d1 - d3)) * ab;

  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return c;

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + (d2 / (d2 - d6)) * ac;

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0)
    return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);

  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

TriangleIndex::TriangleIndex(const TriangleMesh &mesh) : mesh_(mesh) {
  if (mesh.empty()) throw EmptyMesh("TriangleIndex: mesh has no triangles");
  std::vector<Point3> centroids;
  centroids.reserve(mesh.faces.size());
  for (const auto &f : mesh.faces)
    centroids.push_back((mesh.vertices[f[0]] + mesh.vertices[f[1]] + mesh.vertices[f[2]]) / 3.0);
  order_.resize(mesh.faces.size());
  std::iota(order_.begin(), order_.end(), 0);
  nodes_.reserve(2 * mesh.faces.size());
  build(0, static_cast<int>(order_.size()), centroids);
}

int TriangleIndex::build(int first, int count, std::vector<Point3> &centroids) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.emplace_back();
  Eigen::AlignedBox3d box;
  Eigen::AlignedBox3d centroid_box;
  for (int n = first; n < first + count; ++n) {
    const auto &f = mesh_.faces[static_cast<std::size_t>(order_[static_cast<std::size_t>(n)])];
    for (int v = 0; v < 3; ++v) box.extend(mesh_.vertices[f[v]]);
    centroid_box.extend(centroids[static_cast<std::size_t>(order_[static_cast<std::size_t>(n)])]);
  }
  nodes_[static_cast<std::size_t>(id)].box = box;
  if (count <= 4) {
    nodes_[static_cast<std::size_t>(id)].first = first;
    nodes_[static_cast<std::size_t>(id)].count = count;
    return id;
  }
  int axis;
  centroid_box.sizes().maxCoeff(&axis);
  const int half = count / 2;
  std::nth_element(order_.begin() + first, order_.begin() + first + half, order_.begin() + first + count,
                   [&](int a, int b) {
                     return centroids[static_cast<std::size_t>(a)][axis] < centroids[static_cast<std::size_t>(b)][axis];
                   });
  const int left = build(first, half, centroids);
  const int right = build(first + half, count - half, centroids);
  nodes_[static_cast<std::size_t>(id)].left = left;
  nodes_[static_cast<std::size_t>(id)].right = right;
  return id;
}

void TriangleIndex::query(int node, const Point3 &p, double &best_sq) const {
  const Node &n = nodes_[static_cast<std::size_t>(node)];
  if (n.box.squaredExteriorDistance(p) >= best_sq) return;
  if (n.left < 0) {
    for (int i = n.first; i < n.first + n.count; ++i) {
      const auto &f = mesh_.faces[static_cast<std::size_t>(order_[static_cast<std::size_t>(i)])];
      const Point3 q = closest_point_on_triangle(p, mesh_.vertices[f[0]], mesh_.vertices[f[1]], mesh_.vertices[f[2]]);
      best_sq = std::min(best_sq, (q - p).squaredNorm());
    }
    return;
  }
  const Node &l = nodes_[static_cast<std::size_t>(n.left)];
  const Node &r = nodes_[static_cast<std::size_t>(n.right)];
  if (l.box.squaredExteriorDistance(p) <= r.box.squaredExteriorDistance(p)) {
    query(n.left, p, best_sq);
    query(n.right, p, best_sq);
  } else {
    query(n.right, p, best_sq);
    query(n.left, p, best_sq);
  }
}

double TriangleIndex::distance(const Point3 &p) const {
  double best = std::numeric_limits<double>::infinity();
  query(0, p, best);
  return std::sqrt(best);
}

namespace {

std::vector<Point3> surface_samples(const TriangleMesh &mesh) {
  std::vector<Point3> pts = mesh.vertices;
  for (const auto &f : mesh.faces) pts.push_back((mesh.vertices[f[0]] + mesh.vertices[f[1]] + mesh.vertices[f[2]]) / 3.0);
  return pts;
}

}  // namespace

SurfaceDistance surface_to_surface_distance(const TriangleMesh &a, const TriangleMesh &b) {
  if (a.empty() || b.empty()) throw EmptyMesh("surface_to_surface_distance: empty mesh");
  const TriangleIndex index_a(a), index_b(b);
  // Each direction is summed on its own so that swapping the arguments
  // gives bit-identical results.
  const auto one_way = [](const TriangleMesh &from, const TriangleIndex &to, double &max) {
    double sum = 0.0;
    for (const auto &p : surface_samples(from)) {
      const double d = to.distance(p);
      sum += d;
      max = std::max(max, d);
    }
    return sum;
  };
  SurfaceDistance out;
  const double ab = one_way(a, index_b, out.max);
  const double ba = one_way(b, index_a, out.max);
  const auto samples = [](const TriangleMesh &m) { return static_cast<double>(m.vertices.size() + m.faces.size()); };
  out.mean = (ab + ba) / (samples(a) + samples(b));
  return out;
}

}  // namespace rbfpdm
