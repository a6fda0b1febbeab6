#pragma once

#include "rbfpdm/optimizer.hpp"
#include "rbfpdm/rbf_surface.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace rbfpdm {

/// One particle per line, `x y z nx ny nz` with 17 significant digits. Line j
/// of every shape's file is particle j.
void save_particles(const ParticleSystem &ps, const std::filesystem::path &path);
/// Throws FormatError (naming the line) on bad arity or an empty file.
ParticleSystem load_particles(const std::filesystem::path &path, int shape_id = 0);

struct MetricOptions {
  int max_modes = 10;
  int specificity_samples = 1000;
  std::uint64_t seed = 0;
  int mesh_resolution = 64;
};

/// Run description read from a flat `key = value` file with `[section]` headers:
///
///   [data]       grid (repeatable, ordered), output
///   [optimizer]  particles, learning_rate, epochs, pre_opt_epochs, seed,
///                reference_shape, max_step_voxels, checkpoint_every
///   [loss]       alpha, beta, gamma, zeta, c, band_width, batch_size,
///                band_samples, covariance_floor, kernel, regularization
///   [metrics]    max_modes, specificity_samples, seed, mesh_resolution
///
/// `band_width` and `covariance_floor` accept `auto`. `#` starts a comment.
/// Relative paths are resolved against the config file's directory.
struct RunConfig {
  std::vector<std::string> grids;
  std::string output_dir = "out";
  OptimizerConfig optimizer;
  int checkpoint_every = 0;
  MetricOptions metrics;

  static RunConfig parse(std::string_view text);
  static RunConfig load(const std::filesystem::path &path);
  std::string serialize() const;
  /// Checks every referenced grid exists (relative to `base`) and the optimizer settings.
  void validate(const std::filesystem::path &base) const;
};

std::filesystem::path resolve_path(const std::filesystem::path &base, const std::string &path);

/// `epoch,surface,sampling,eigenshape,correspondence,total`
void write_loss_history(const std::vector<EpochRecord> &history, const std::filesystem::path &path);

/// One line of the model manifest written by `optimize` and read by `evaluate`.
struct ManifestEntry {
  int shape_id = 0;
  std::string grid;
  std::string particles;
  Kernel kernel = Kernel::biharmonic;
  double band_width = 0.0;
};

/// `shape_id,grid,particles,kernel,band_width`; paths are stored as given.
void write_model_manifest(const std::vector<ManifestEntry> &entries, const std::filesystem::path &path);
std::vector<ManifestEntry> read_model_manifest(const std::filesystem::path &path);

/// Rows of the metrics report. Scalar rows use `metric,mode_count,value`;
/// distance rows use `distance,shape_id,mean,max`.
struct MetricRow {
  std::string metric;
  int mode_count = 0;
  double value = 0.0;
};
struct DistanceRow {
  int shape_id = 0;
  double mean = 0.0;
  double max = 0.0;
};
void write_metrics_csv(const std::vector<MetricRow> &metrics, const std::vector<DistanceRow> &distances,
                       std::ostream &out);

std::string format_double(double v);

}  // namespace rbfpdm
