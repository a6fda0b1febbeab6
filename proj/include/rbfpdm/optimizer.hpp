#pragma once

#include "rbfpdm/losses.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace rbfpdm {

struct OptimizerConfig {
  double learning_rate = 1.0;
  int epochs = 100;
  std::uint64_t seed = 0;
  int pre_opt_epochs = 0;
  int particles = 64;  // J
  /// Cohort member whose band seeds the shared initialization.
  int reference_shape = 0;
  /// Per-step displacement cap, in mean voxel spacings of the shape's grid.
  double max_step_voxels = 2.0;
  LossConfig loss;

  void validate(int cohort_size) const;
};

/// Loss values summed over every minibatch of one epoch, measured before the
/// SGD step of each batch.
struct EpochRecord {
  int epoch = 0;
  double surface = 0.0;
  double sampling = 0.0;
  double eigenshape = 0.0;
  double correspondence = 0.0;
  double total = 0.0;
};

struct CohortState {
  std::vector<ParticleSystem> shapes;
  CohortMean mean;
  int epoch = 0;  // completed epochs
  std::vector<EpochRecord> history;
  double covariance_floor = 0.0;
};

/// J points drawn from the band of `grid`, each projected onto the zero set by
/// up to five Newton steps x <- x - D(x) grad D / |grad D|^2; normals from the
/// distance gradient.
ParticleSystem initialize_particles(const SdfGrid &grid, int count, std::uint64_t seed, double band_width);

/// Runs the epoch loop on a single shape with the cohort terms disabled.
ParticleSystem pre_optimize(ParticleSystem ps, const SdfGrid &grid, const OptimizerConfig &config);

/// Copies one particle system to every cohort member (shape ids 0..count-1).
/// The covariance floor is resolved here from the initialization when unset.
CohortState broadcast_initialization(const ParticleSystem &init, int count, const LossConfig &loss);

/// One pass over the cohort in shuffled minibatches; refreshes the mean at the end.
void run_epoch(CohortState &state, std::span<const SdfGrid> grids, const OptimizerConfig &config);

using EpochCallback = std::function<void(const CohortState &)>;

/// Runs `epochs` epochs on an existing state, calling `on_epoch` after each.
void run_epochs(CohortState &state, std::span<const SdfGrid> grids, const OptimizerConfig &config, int epochs,
                const EpochCallback &on_epoch = {});

/// initialize -> pre_optimize -> broadcast -> config.epochs epochs.
CohortState optimize(std::span<const SdfGrid> grids, const OptimizerConfig &config, const EpochCallback &on_epoch = {});

/// Mean over particles of the squared distance to the shape centroid, averaged over shapes.
double mean_squared_extent(std::span<const ParticleSystem> shapes);

}  // namespace rbfpdm
