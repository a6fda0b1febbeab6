#pragma once

#include "rbfpdm/rbf_surface.hpp"
#include "rbfpdm/sdf_grid.hpp"

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <vector>

namespace rbfpdm {

/// Loss weights and the parameters shared by the four terms.
struct LossConfig {
  double alpha = 1.0;   // surface
  double beta = 1.0;    // sampling
  double gamma = 0.0;   // eigenshape
  double zeta = 0.0;    // correspondence
  double error_weight = 1.0;  // c, error pull in the sampling loss
  /// Dipole offset and narrow-band half-width. Unset: twice the mean voxel spacing.
  std::optional<double> band_width;
  int batch_size = 1;
  int band_samples = 10000;
  /// Eigenvalue floor of the batch covariance. Unset: 1e-6 times the mean
  /// squared shape extent of the initialization.
  std::optional<double> covariance_floor;
  Kernel kernel = Kernel::biharmonic;
  double regularization = 0.0;

  void validate() const;
  double band_width_for(const SdfGrid &grid) const { return band_width.value_or(2.0 * grid.mean_spacing()); }
};

/// Arithmetic mean of all flattened particle vectors of one epoch.
/// Default-constructed means "not available yet".
struct CohortMean {
  Eigen::VectorXd mu;
  int epoch_stamp = 0;

  bool available() const { return mu.size() > 0; }
};

/// [x0 y0 z0 x1 y1 z1 ...]
Eigen::VectorXd flatten(const ParticleSystem &ps);
CohortMean cohort_mean(std::span<const ParticleSystem> cohort, int epoch_stamp);

double surface_loss(const ParticleSystem &ps, const SdfGrid &grid);
/// sign(D) grad D per particle, with the subgradient 0 where D == 0.
std::vector<Vec3> surface_loss_gradient(const ParticleSystem &ps, const SdfGrid &grid);

/// A batch-level term and its gradient, one row per batch shape (K x 3J).
struct CohortTerm {
  double value = 0.0;
  Eigen::MatrixXd gradient;
};

/// Frobenius norm of the unnormalized scatter sum_k (P_k - mu)(P_k - mu)^T,
/// evaluated through the K x K Gram matrix of the deviations.
double correspondence_loss(std::span<const Eigen::VectorXd> batch, const CohortMean &mean);
CohortTerm correspondence_term(std::span<const Eigen::VectorXd> batch, const CohortMean &mean);

/// All 3J eigenvalues (descending) of (1 / (3JK)) sum_k d_k d_k^T.
Eigen::VectorXd batch_covariance_eigenvalues(std::span<const Eigen::VectorXd> batch, const CohortMean &mean);

/// 1/2 sum_m log(lambda_m + floor) over all 3J covariance eigenvalues.
double eigenshape_loss(std::span<const Eigen::VectorXd> batch, const CohortMean &mean, double floor);
CohortTerm eigenshape_term(std::span<const Eigen::VectorXd> batch, const CohortMean &mean, double floor);

/// Row-wise softmin over control points: exp(-k_rj) / sum_j' exp(-k_rj').
Eigen::MatrixXd softmin_rows(const Eigen::MatrixXd &distances);

struct SamplingTerm {
  double value = 0.0;
  /// d L / d p_j through the band-to-particle distances only.
  std::vector<Vec3> distance_gradient;
  /// d L / d e_r.
  std::vector<double> error_gradient;
};

/// mean over R x J of softmin(K) * K * (c e_r + 1).
double sampling_loss(const ParticleSystem &ps, const NarrowBand &band, std::span<const double> errors, double c);
SamplingTerm sampling_term(std::span<const Point3> points, std::span<const Point3> band, std::span<const double> errors,
                           double c);

/// One minibatch member with its surface already fit to the current particles.
struct BatchShape {
  const ParticleSystem &particles;
  const SdfGrid &grid;
  const NarrowBand &band;
  /// Required when beta > 0.
  const RbfSurface *surface = nullptr;
};

struct LossBreakdown {
  double surface = 0.0;      // summed over the batch
  double sampling = 0.0;     // summed over the batch
  double eigenshape = 0.0;
  double correspondence = 0.0;
  double total = 0.0;
  bool cohort_terms_active = false;
  /// d total / d p_{k,j}, one J-vector per batch shape.
  std::vector<std::vector<Vec3>> gradients;
};

/// alpha * sum surface + beta * sum sampling + gamma * eigenshape + zeta * correspondence.
/// The cohort terms are skipped while the mean is unavailable or the batch has
/// a single shape. `covariance_floor` must already be resolved.
LossBreakdown total_loss(std::span<const BatchShape> batch, const CohortMean &mean, const LossConfig &config,
                         double covariance_floor, bool with_gradients = true);

/// Builds dipoles and fits the RBF surface for a particle system.
RbfSurface fit_surface(const ParticleSystem &ps, const LossConfig &config, double band_width,
                       std::optional<double> regularization = std::nullopt);

/// Fits every surface at the given positions, then evaluates total_loss.
/// Normals are taken as given, bands and grids are held fixed.
LossBreakdown evaluate_objective(std::span<const ParticleSystem> batch, std::span<const SdfGrid *const> grids,
                                 std::span<const NarrowBand> bands, const CohortMean &mean, const LossConfig &config,
                                 double band_width, double covariance_floor, bool with_gradients = true);

}  // namespace rbfpdm
