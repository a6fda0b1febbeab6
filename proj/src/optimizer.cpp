#include "rbfpdm/optimizer.hpp"

#include "rbfpdm/errors.hpp"
#include "rbfpdm/parallel.hpp"

#include <algorithm>
#include <numeric>
#include <optional>
#include <random>

namespace rbfpdm {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  return splitmix64(splitmix64(splitmix64(seed) ^ a) ^ b);
}

enum class SeedStream : std::uint64_t { shuffle = 1, band = 2, init = 3 };

RbfSurface fit_with_retry(const ParticleSystem &ps, const LossConfig &loss, double band_width) {
  try {
    return fit_surface(ps, loss, band_width);
  } catch (const SingularSystem &) {
    return fit_surface(ps, loss, band_width, std::max(loss.regularization, 1e-8));
  }
}

}  // namespace

void OptimizerConfig::validate(int cohort_size) const {
  require(learning_rate > 0.0, "OptimizerConfig: learning rate must be positive");
  require(epochs >= 0, "OptimizerConfig: epochs must be non-negative");
  require(pre_opt_epochs >= 0, "OptimizerConfig: pre-optimization epochs must be non-negative");
  require(particles >= 4, "OptimizerConfig: at least 4 particles are required");
  require(max_step_voxels > 0.0, "OptimizerConfig: step cap must be positive");
  require(cohort_size >= 1, "OptimizerConfig: empty cohort");
  require(reference_shape >= 0 && reference_shape < cohort_size, "OptimizerConfig: reference shape out of range");
  require(loss.batch_size <= cohort_size, "OptimizerConfig: batch size exceeds the cohort size");
  loss.validate();
}

double mean_squared_extent(std::span<const ParticleSystem> shapes) {
  double total = 0.0;
  for (const auto &ps : shapes) {
    Vec3 centroid = Vec3::Zero();
    for (const auto &p : ps.points) centroid += p;
    centroid /= static_cast<double>(ps.points.size());
    double sum = 0.0;
    for (const auto &p : ps.points) sum += (p - centroid).squaredNorm();
    total += sum / static_cast<double>(ps.points.size());
  }
  return shapes.empty() ? 0.0 : total / static_cast<double>(shapes.size());
}

ParticleSystem initialize_particles(const SdfGrid &grid, int count, std::uint64_t seed, double band_width) {
  require(count >= 4, "initialize_particles: at least 4 particles are required");
  const NarrowBand band = sample_narrow_band(grid, band_width, count, seed);
  const Box3 box = grid.bounds();
  ParticleSystem ps;
  for (Point3 x : band.points) {
    for (int it = 0; it < 5; ++it) {
      const double d = grid.distance(x);
      const Vec3 g = grid.gradient(x);
      const double g2 = g.squaredNorm();
      if (d == 0.0 || g2 <= 1e-16) break;
      x = box.clamp(x - (d / g2) * g);
    }
    ps.points.push_back(x);
    ps.normals.push_back(grid.normal(x));
  }
  return ps;
}

CohortState broadcast_initialization(const ParticleSystem &init, int count, const LossConfig &loss) {
  require(count >= 1, "broadcast_initialization: count must be >= 1");
  CohortState state;
  for (int i = 0; i < count; ++i) {
    ParticleSystem ps = init;
    ps.shape_id = i;
    state.shapes.push_back(std::move(ps));
  }
  state.covariance_floor = loss.covariance_floor.value_or(1e-6 * mean_squared_extent(state.shapes));
  return state;
}

void run_epoch(CohortState &state, std::span<const SdfGrid> grids, const OptimizerConfig &config) {
  const int count = static_cast<int>(state.shapes.size());
  require(count == static_cast<int>(grids.size()), "run_epoch: one grid per cohort member is required");
  config.validate(count);
  const LossConfig &loss = config.loss;
  const int epoch = state.epoch + 1;

  std::vector<int> order(static_cast<std::size_t>(count));
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 shuffle_rng(derive_seed(config.seed, static_cast<std::uint64_t>(SeedStream::shuffle),
                                          static_cast<std::uint64_t>(epoch)));
  std::shuffle(order.begin(), order.end(), shuffle_rng);

  EpochRecord record;
  record.epoch = epoch;
  for (int start = 0; start < count; start += loss.batch_size) {
    const int size = std::min(loss.batch_size, count - start);
    std::vector<int> members(order.begin() + start, order.begin() + start + size);

    std::vector<NarrowBand> bands(static_cast<std::size_t>(size));
    std::vector<std::optional<RbfSurface>> surfaces(static_cast<std::size_t>(size));
    parallel_for(size, [&](int b) {
      const auto bb = static_cast<std::size_t>(b);
      const int i = members[bb];
      const SdfGrid &grid = grids[static_cast<std::size_t>(i)];
      const double s = loss.band_width_for(grid);
      if (loss.beta > 0.0) {
        const std::uint64_t band_seed = derive_seed(config.seed, static_cast<std::uint64_t>(SeedStream::band),
                                                    (static_cast<std::uint64_t>(epoch) << 32) | static_cast<std::uint64_t>(i));
        bands[bb] = sample_narrow_band(grid, s, loss.band_samples, band_seed);
        surfaces[bb] = fit_with_retry(state.shapes[static_cast<std::size_t>(i)], loss, s);
      }
    });

    std::vector<BatchShape> batch;
    batch.reserve(members.size());
    for (std::size_t b = 0; b < members.size(); ++b) {
      const auto i = static_cast<std::size_t>(members[b]);
      batch.push_back({state.shapes[i], grids[i], bands[b], surfaces[b] ? &*surfaces[b] : nullptr});
    }
    const LossBreakdown terms = total_loss(batch, state.mean, loss, state.covariance_floor);
    record.surface += terms.surface;
    record.sampling += terms.sampling;
    record.eigenshape += terms.eigenshape;
    record.correspondence += terms.correspondence;
    record.total += terms.total;

    parallel_for(size, [&](int b) {
      const auto bb = static_cast<std::size_t>(b);
      const auto i = static_cast<std::size_t>(members[bb]);
      const SdfGrid &grid = grids[i];
      const Box3 box = grid.bounds();
      const double cap = config.max_step_voxels * grid.mean_spacing();
      ParticleSystem &ps = state.shapes[i];
      for (std::size_t j = 0; j < ps.points.size(); ++j) {
        Vec3 step = -config.learning_rate * terms.gradients[bb][j];
        const double length = step.norm();
        if (length > cap) step *= cap / length;
        ps.points[j] = box.clamp(ps.points[j] + step);
        try {
          ps.normals[j] = grid.normal(ps.points[j]);
        } catch (const DegenerateGradient &) {
          // keep the previous normal
        }
      }
    });
  }

  state.mean = cohort_mean(state.shapes, epoch);
  state.epoch = epoch;
  state.history.push_back(record);
}

void run_epochs(CohortState &state, std::span<const SdfGrid> grids, const OptimizerConfig &config, int epochs,
                const EpochCallback &on_epoch) {
  for (int e = 0; e < epochs; ++e) {
    run_epoch(state, grids, config);
    if (on_epoch) on_epoch(state);
  }
}

ParticleSystem pre_optimize(ParticleSystem ps, const SdfGrid &grid, const OptimizerConfig &config) {
  if (config.pre_opt_epochs == 0) return ps;
  OptimizerConfig single = config;
  single.loss.gamma = 0.0;
  single.loss.zeta = 0.0;
  single.loss.batch_size = 1;
  single.reference_shape = 0;
  if (single.loss.alpha == 0.0 && single.loss.beta == 0.0) return ps;
  const int id = ps.shape_id;
  CohortState state = broadcast_initialization(ps, 1, single.loss);
  run_epochs(state, std::span<const SdfGrid>(&grid, 1), single, config.pre_opt_epochs);
  ParticleSystem out = std::move(state.shapes.front());
  out.shape_id = id;
  return out;
}

CohortState optimize(std::span<const SdfGrid> grids, const OptimizerConfig &config, const EpochCallback &on_epoch) {
  const int count = static_cast<int>(grids.size());
  config.validate(count);
  const SdfGrid &reference = grids[static_cast<std::size_t>(config.reference_shape)];
  ParticleSystem init =
      initialize_particles(reference, config.particles,
                           derive_seed(config.seed, static_cast<std::uint64_t>(SeedStream::init)),
                           config.loss.band_width_for(reference));
  init = pre_optimize(std::move(init), reference, config);
  CohortState state = broadcast_initialization(init, count, config.loss);
  run_epochs(state, grids, config, config.epochs, on_epoch);
  return state;
}

}  // namespace rbfpdm
