#include "rbfpdm/losses.hpp"

#include "rbfpdm/errors.hpp"
#include "rbfpdm/parallel.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace rbfpdm {

void LossConfig::validate() const {
  require(alpha >= 0.0 && beta >= 0.0 && gamma >= 0.0 && zeta >= 0.0, "LossConfig: weights must be non-negative");
  require(alpha > 0.0 || beta > 0.0 || gamma > 0.0 || zeta > 0.0, "LossConfig: at least one weight must be positive");
  require(error_weight >= 0.0, "LossConfig: error weight c must be non-negative");
  require(batch_size >= 1, "LossConfig: batch size must be >= 1");
  require(band_samples >= 1, "LossConfig: band sample count must be >= 1");
  require(!band_width || *band_width > 0.0, "LossConfig: band width must be positive");
  require(!covariance_floor || *covariance_floor >= 0.0, "LossConfig: covariance floor must be non-negative");
  require(regularization >= 0.0, "LossConfig: regularization must be non-negative");
}

Eigen::VectorXd flatten(const ParticleSystem &ps) {
  Eigen::VectorXd v(3 * ps.size());
  for (int j = 0; j < ps.size(); ++j) v.segment<3>(3 * j) = ps.points[static_cast<std::size_t>(j)];
  return v;
}

CohortMean cohort_mean(std::span<const ParticleSystem> cohort, int epoch_stamp) {
  require(!cohort.empty(), "cohort_mean: empty cohort");
  CohortMean mean;
  mean.mu = Eigen::VectorXd::Zero(3 * cohort.front().size());
  for (const auto &ps : cohort) {
    require(ps.size() == cohort.front().size(), "cohort_mean: particle counts differ");
    mean.mu += flatten(ps);
  }
  mean.mu /= static_cast<double>(cohort.size());
  mean.epoch_stamp = epoch_stamp;
  return mean;
}

double surface_loss(const ParticleSystem &ps, const SdfGrid &grid) {
  double sum = 0.0;
  for (const auto &p : ps.points) sum += std::abs(grid.distance(p));
  return sum;
}

std::vector<Vec3> surface_loss_gradient(const ParticleSystem &ps, const SdfGrid &grid) {
  std::vector<Vec3> g;
  g.reserve(ps.points.size());
  for (const auto &p : ps.points) {
    const double d = grid.distance(p);
    g.push_back(d > 0.0 ? grid.gradient(p) : d < 0.0 ? Vec3(-grid.gradient(p)) : Vec3::Zero());
  }
  return g;
}

namespace {

// K x 3J matrix of deviations from the cohort mean.
Eigen::MatrixXd deviations(std::span<const Eigen::VectorXd> batch, const CohortMean &mean) {
  if (!mean.available()) throw MeanUnavailable("cohort mean is not available before the second epoch");
  require(batch.size() >= 2, "cohort terms need a batch of at least two shapes");
  const auto dim = mean.mu.size();
  Eigen::MatrixXd g(static_cast<Eigen::Index>(batch.size()), dim);
  for (std::size_t k = 0; k < batch.size(); ++k) {
    require(batch[k].size() == dim, "batch vector length does not match the cohort mean");
    g.row(static_cast<Eigen::Index>(k)) = (batch[k] - mean.mu).transpose();
  }
  return g;
}

}  // namespace

double correspondence_loss(std::span<const Eigen::VectorXd> batch, const CohortMean &mean) {
  const Eigen::MatrixXd g = deviations(batch, mean);
  return (g * g.transpose()).norm();
}

CohortTerm correspondence_term(std::span<const Eigen::VectorXd> batch, const CohortMean &mean) {
  const Eigen::MatrixXd g = deviations(batch, mean);
  // ||G^T G||_F == ||G G^T||_F
  const Eigen::MatrixXd gram = g * g.transpose();
  CohortTerm term;
  term.value = gram.norm();
  term.gradient = term.value > 0.0 ? Eigen::MatrixXd((2.0 / term.value) * gram * g)
                                   : Eigen::MatrixXd::Zero(g.rows(), g.cols());
  return term;
}

Eigen::VectorXd batch_covariance_eigenvalues(std::span<const Eigen::VectorXd> batch, const CohortMean &mean) {
  const Eigen::MatrixXd g = deviations(batch, mean);
  const auto k = g.rows();
  const auto dim = g.cols();
  const double n = static_cast<double>(dim * k);
  Eigen::VectorXd nonzero;
  if (k <= dim) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(g * g.transpose() / n, Eigen::EigenvaluesOnly);
    nonzero = eig.eigenvalues();
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(g.transpose() * g / n, Eigen::EigenvaluesOnly);
    nonzero = eig.eigenvalues();
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(dim);
  // Ascending from the solver; clip round-off below zero.
  for (Eigen::Index i = 0; i < nonzero.size(); ++i) out[i] = std::max(0.0, nonzero[nonzero.size() - 1 - i]);
  return out;
}

double eigenshape_loss(std::span<const Eigen::VectorXd> batch, const CohortMean &mean, double floor) {
  return eigenshape_term(batch, mean, floor).value;
}

CohortTerm eigenshape_term(std::span<const Eigen::VectorXd> batch, const CohortMean &mean, double floor) {
  const Eigen::MatrixXd g = deviations(batch, mean);
  const auto k = g.rows();
  const auto dim = g.cols();
  if (floor < 0.0 || (floor == 0.0 && k - 1 < dim))
    throw NonPositiveFloor("eigenshape loss: covariance is rank deficient and the eigenvalue floor is not positive");
  const double n = static_cast<double>(dim * k);

  CohortTerm term;
  const Eigen::VectorXd lambdas = batch_covariance_eigenvalues(batch, mean);
  for (Eigen::Index i = 0; i < lambdas.size(); ++i) term.value += 0.5 * std::log(lambdas[i] + floor);

  // d/dG 1/2 log det(floor I + G G^T / n) = (floor I + G G^T / n)^{-1} G / n
  if (k <= dim) {
    const Eigen::MatrixXd b = floor * Eigen::MatrixXd::Identity(k, k) + g * g.transpose() / n;
    term.gradient = b.ldlt().solve(g) / n;
  } else {
    const Eigen::MatrixXd c = floor * Eigen::MatrixXd::Identity(dim, dim) + g.transpose() * g / n;
    term.gradient = c.ldlt().solve(g.transpose()).transpose() / n;
  }
  return term;
}

Eigen::MatrixXd softmin_rows(const Eigen::MatrixXd &distances) {
  Eigen::MatrixXd s(distances.rows(), distances.cols());
  for (Eigen::Index r = 0; r < distances.rows(); ++r) {
    const double shift = distances.row(r).minCoeff();
    s.row(r) = (-(distances.row(r).array() - shift)).exp();
    s.row(r) /= s.row(r).sum();
  }
  return s;
}

SamplingTerm sampling_term(std::span<const Point3> points, std::span<const Point3> band, std::span<const double> errors,
                           double c) {
  require(!points.empty() && !band.empty(), "sampling loss: needs at least one particle and one band point");
  require(errors.size() == band.size(), "sampling loss: one error per band point is required");
  const auto rows = static_cast<Eigen::Index>(band.size());
  const auto cols = static_cast<Eigen::Index>(points.size());
  const double scale = 1.0 / static_cast<double>(rows * cols);

  SamplingTerm term;
  term.distance_gradient.assign(points.size(), Vec3::Zero());
  term.error_gradient.assign(band.size(), 0.0);

  Eigen::VectorXd k(cols);
  Eigen::VectorXd s(cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Point3 &b = band[static_cast<std::size_t>(r)];
    for (Eigen::Index j = 0; j < cols; ++j) k[j] = (b - points[static_cast<std::size_t>(j)]).norm();
    s = (-(k.array() - k.minCoeff())).exp();
    s /= s.sum();
    const double kbar = s.dot(k);
    const double pull = c * errors[static_cast<std::size_t>(r)] + 1.0;
    term.value += pull * kbar;
    term.error_gradient[static_cast<std::size_t>(r)] = scale * c * kbar;
    // d(sum_j s_j k_j) / d k_l = s_l (1 - k_l + kbar)
    for (Eigen::Index j = 0; j < cols; ++j) {
      if (k[j] == 0.0) continue;
      const double dk = scale * pull * s[j] * (1.0 - k[j] + kbar);
      term.distance_gradient[static_cast<std::size_t>(j)] += (dk / k[j]) * (points[static_cast<std::size_t>(j)] - b);
    }
  }
  term.value *= scale;
  return term;
}

double sampling_loss(const ParticleSystem &ps, const NarrowBand &band, std::span<const double> errors, double c) {
  return sampling_term(ps.points, band.points, errors, c).value;
}

RbfSurface fit_surface(const ParticleSystem &ps, const LossConfig &config, double band_width,
                       std::optional<double> regularization) {
  return RbfSurface::fit(build_dipoles(ps, band_width), config.kernel, regularization.value_or(config.regularization));
}

LossBreakdown total_loss(std::span<const BatchShape> batch, const CohortMean &mean, const LossConfig &config,
                         double covariance_floor, bool with_gradients) {
  require(!batch.empty(), "total_loss: empty batch");
  const int count = static_cast<int>(batch.size());
  const int particles = batch.front().particles.size();
  for (const auto &item : batch) require(item.particles.size() == particles, "total_loss: particle counts differ");

  LossBreakdown out;
  out.gradients.assign(batch.size(), std::vector<Vec3>(static_cast<std::size_t>(particles), Vec3::Zero()));
  std::vector<double> surface(batch.size(), 0.0), sampling(batch.size(), 0.0);

  parallel_for(count, [&](int i) {
    const BatchShape &item = batch[static_cast<std::size_t>(i)];
    auto &grad = out.gradients[static_cast<std::size_t>(i)];
    if (config.alpha > 0.0) {
      surface[static_cast<std::size_t>(i)] = surface_loss(item.particles, item.grid);
      if (with_gradients) {
        const auto g = surface_loss_gradient(item.particles, item.grid);
        for (int j = 0; j < particles; ++j) grad[static_cast<std::size_t>(j)] += config.alpha * g[static_cast<std::size_t>(j)];
      }
    }
    if (config.beta > 0.0) {
      require(item.surface != nullptr, "total_loss: a fitted surface is required when beta > 0");
      const auto &pts = item.band.points;
      const Eigen::VectorXd f = item.surface->evaluate(pts);
      std::vector<double> residual(pts.size()), errors(pts.size());
      for (std::size_t r = 0; r < pts.size(); ++r) {
        residual[r] = f[static_cast<Eigen::Index>(r)] - item.grid.distance(pts[r]);
        errors[r] = residual[r] * residual[r];
      }
      const SamplingTerm term = sampling_term(item.particles.points, pts, errors, config.error_weight);
      sampling[static_cast<std::size_t>(i)] = term.value;
      if (with_gradients) {
        std::vector<double> cotangent(pts.size());
        for (std::size_t r = 0; r < pts.size(); ++r) cotangent[r] = term.error_gradient[r] * 2.0 * residual[r];
        const auto through_surface = item.surface->control_point_vjp(pts, cotangent);
        for (int j = 0; j < particles; ++j) {
          const auto jj = static_cast<std::size_t>(j);
          grad[jj] += config.beta * (term.distance_gradient[jj] + through_surface[jj]);
        }
      }
    }
  });

  for (int i = 0; i < count; ++i) {
    out.surface += surface[static_cast<std::size_t>(i)];
    out.sampling += sampling[static_cast<std::size_t>(i)];
  }

  out.cohort_terms_active = mean.available() && count >= 2 && (config.gamma > 0.0 || config.zeta > 0.0);
  if (out.cohort_terms_active) {
    std::vector<Eigen::VectorXd> vectors;
    vectors.reserve(batch.size());
    for (const auto &item : batch) vectors.push_back(flatten(item.particles));
    const auto accumulate = [&](const CohortTerm &term, double weight) {
      if (!with_gradients) return;
      for (int i = 0; i < count; ++i)
        for (int j = 0; j < particles; ++j)
          out.gradients[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] +=
              weight * term.gradient.row(i).segment<3>(3 * j).transpose();
    };
    if (config.gamma > 0.0) {
      const CohortTerm term = eigenshape_term(vectors, mean, covariance_floor);
      out.eigenshape = term.value;
      accumulate(term, config.gamma);
    }
    if (config.zeta > 0.0) {
      const CohortTerm term = correspondence_term(vectors, mean);
      out.correspondence = term.value;
      accumulate(term, config.zeta);
    }
  }

  out.total = config.alpha * out.surface + config.beta * out.sampling + config.gamma * out.eigenshape +
              config.zeta * out.correspondence;
  if (!with_gradients) out.gradients.clear();
  return out;
}

LossBreakdown evaluate_objective(std::span<const ParticleSystem> batch, std::span<const SdfGrid *const> grids,
                                 std::span<const NarrowBand> bands, const CohortMean &mean, const LossConfig &config,
                                 double band_width, double covariance_floor, bool with_gradients) {
  require(grids.size() == batch.size() && bands.size() == batch.size(),
          "evaluate_objective: one grid and one band per batch shape");
  std::vector<std::optional<RbfSurface>> surfaces(batch.size());
  if (config.beta > 0.0) {
    parallel_for(static_cast<int>(batch.size()), [&](int i) {
      const auto ii = static_cast<std::size_t>(i);
      surfaces[ii] = fit_surface(batch[ii], config, band_width);
    });
  }
  std::vector<BatchShape> items;
  items.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i)
    items.push_back({batch[i], *grids[i], bands[i], surfaces[i] ? &*surfaces[i] : nullptr});
  return total_loss(items, mean, config, covariance_floor, with_gradients);
}

}  // namespace rbfpdm
