#include "rbfpdm/cli.hpp"

#include "rbfpdm/errors.hpp"
#include "rbfpdm/io.hpp"
#include "rbfpdm/losses.hpp"
#include "rbfpdm/mesh.hpp"
#include "rbfpdm/metrics.hpp"
#include "rbfpdm/optimizer.hpp"
#include "rbfpdm/sdf_grid.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

namespace rbfpdm::cli {

namespace {

namespace fs = std::filesystem;

std::string shape_file(const std::string &stem, int i, const std::string &ext) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "_%03d", i);
  return stem + buf + ext;
}

struct GenDataArgs {
  int count = 20;
  std::vector<double> x_range{1.0, 2.0};
  std::vector<double> yz{0.5};
  std::vector<int> dims{64};
  std::uint64_t seed = 0;
  std::string out;
};

int gen_data(const GenDataArgs &a, std::ostream &out) {
  const Index3 dims = a.dims.size() == 1 ? Index3::Constant(a.dims[0]) : Index3(a.dims[0], a.dims[1], a.dims[2]);
  const std::pair<double, double> fixed{a.yz.front(), a.yz.back()};
  const EllipsoidCohort cohort = make_ellipsoid_cohort(a.count, {a.x_range[0], a.x_range[1]}, fixed, dims, a.seed);
  fs::create_directories(a.out);
  std::ofstream manifest(fs::path(a.out) / "manifest.csv", std::ios::trunc);
  if (!manifest) throw IoError("cannot write " + (fs::path(a.out) / "manifest.csv").string());
  manifest << "shape_id,file,semi_axis_x,semi_axis_y,semi_axis_z\n";
  for (int i = 0; i < a.count; ++i) {
    const std::string name = shape_file("ellipsoid", i, ".sdfgrid");
    save_grid(cohort.grids[static_cast<std::size_t>(i)], fs::path(a.out) / name);
    const Vec3 &axes = cohort.semi_axes[static_cast<std::size_t>(i)];
    manifest << i << ',' << name << ',' << format_double(axes[0]) << ',' << format_double(axes[1]) << ','
             << format_double(axes[2]) << '\n';
  }
  out << "wrote " << a.count << " grids to " << a.out << '\n';
  return 0;
}

std::vector<SdfGrid> load_grids(const std::vector<fs::path> &paths) {
  std::vector<SdfGrid> grids;
  grids.reserve(paths.size());
  for (const auto &p : paths) {
    try {
      grids.push_back(load_grid(p));
    } catch (const Error &e) {
      throw Error("failed to load grid " + p.string() + ": " + e.what());
    }
  }
  return grids;
}

void write_shapes(const std::vector<ParticleSystem> &shapes, const fs::path &dir) {
  fs::create_directories(dir);
  for (const auto &ps : shapes) save_particles(ps, dir / shape_file("shape", ps.shape_id, ".particles"));
}

int optimize_cmd(const std::string &config_path, std::ostream &out) {
  const fs::path cfg_path(config_path);
  const RunConfig cfg = RunConfig::load(cfg_path);
  const fs::path base = cfg_path.parent_path();
  cfg.validate(base);

  std::vector<fs::path> grid_paths;
  for (const auto &g : cfg.grids) grid_paths.push_back(resolve_path(base, g));
  const std::vector<SdfGrid> grids = load_grids(grid_paths);
  const fs::path out_dir = resolve_path(base, cfg.output_dir);
  fs::create_directories(out_dir);

  const auto on_epoch = [&](const CohortState &state) {
    const auto &r = state.history.back();
    out << "epoch " << r.epoch << " total " << format_double(r.total) << '\n';
    if (cfg.checkpoint_every > 0 && state.epoch % cfg.checkpoint_every == 0) {
      char name[32];
      std::snprintf(name, sizeof(name), "epoch_%05d", state.epoch);
      write_shapes(state.shapes, out_dir / "checkpoints" / name);
    }
  };
  const CohortState state = optimize(grids, cfg.optimizer, on_epoch);

  write_shapes(state.shapes, out_dir);
  write_loss_history(state.history, out_dir / "loss_history.csv");
  std::vector<ManifestEntry> entries;
  for (const auto &ps : state.shapes) {
    const auto i = static_cast<std::size_t>(ps.shape_id);
    entries.push_back({ps.shape_id, fs::absolute(grid_paths[i]).lexically_normal().string(),
                       shape_file("shape", ps.shape_id, ".particles"), cfg.optimizer.loss.kernel,
                       cfg.optimizer.loss.band_width_for(grids[i])});
  }
  write_model_manifest(entries, out_dir / "model_manifest.csv");
  out << "wrote " << state.shapes.size() << " particle files to " << out_dir.string() << '\n';
  return 0;
}

struct EvaluateArgs {
  std::string manifest;
  std::string out;
  int max_modes = 10;
  int samples = 1000;
  std::uint64_t seed = 0;
  int resolution = 64;
};

int evaluate_cmd(const EvaluateArgs &a, std::ostream &out, std::ostream &err) {
  const fs::path manifest_path(a.manifest);
  const fs::path base = manifest_path.parent_path();
  const auto entries = read_model_manifest(manifest_path);

  std::vector<ParticleSystem> shapes;
  std::vector<Eigen::VectorXd> vectors;
  for (const auto &e : entries) {
    shapes.push_back(load_particles(resolve_path(base, e.particles), e.shape_id));
    if (shapes.back().size() != shapes.front().size())
      throw FormatError("particle count mismatch: " + e.particles + " has " + std::to_string(shapes.back().size()) +
                        " particles, expected " + std::to_string(shapes.front().size()));
    vectors.push_back(flatten(shapes.back()));
  }

  std::vector<MetricRow> metrics;
  if (vectors.size() >= 2) {
    const ShapeModel model = pca_fit(vectors);
    const int available = model.mode_count();
    const int modes = std::min(a.max_modes, available);
    if (modes < a.max_modes) {
      metrics.push_back({"warning_modes_capped", modes, static_cast<double>(a.max_modes)});
      err << "warning: " << a.max_modes << " modes requested, cohort supports " << modes << '\n';
    }
    bool zero_variance = false;
    for (int m = 1; m <= modes; ++m) {
      try {
        metrics.push_back({"compactness", m, compactness(model, m)});
      } catch (const ZeroVariance &) {
        zero_variance = true;
        metrics.push_back({"compactness", m, std::numeric_limits<double>::quiet_NaN()});
      }
    }
    if (zero_variance) metrics.push_back({"error_zero_variance", 0, std::numeric_limits<double>::quiet_NaN()});
    for (int m = 1; m <= modes; ++m)
      metrics.push_back({"specificity", m, specificity(model.truncated(m), vectors, a.samples, a.seed)});
    if (vectors.size() >= 3)
      for (int m = 1; m <= modes; ++m) metrics.push_back({"generalization", m, generalization(vectors, m)});
  }

  std::vector<DistanceRow> distances;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const SdfGrid grid = load_grid(resolve_path(base, entries[i].grid));
    LossConfig loss;
    loss.kernel = entries[i].kernel;
    const RbfSurface surface = fit_surface(shapes[i], loss, entries[i].band_width);
    const TriangleMesh reconstructed = extract_mesh(surface, grid.bounds(), Index3::Constant(a.resolution));
    const TriangleMesh truth = grid_isosurface(grid);
    const SurfaceDistance d = surface_to_surface_distance(reconstructed, truth);
    distances.push_back({entries[i].shape_id, d.mean, d.max});
  }

  std::ofstream file(a.out, std::ios::trunc);
  if (!file) throw IoError("cannot write " + a.out);
  write_metrics_csv(metrics, distances, file);
  if (!file) throw IoError("failed writing " + a.out);
  out << "wrote metrics for " << entries.size() << " shapes to " << a.out << '\n';
  return 0;
}

struct ReconstructArgs {
  std::string particles;
  std::string grid;
  std::string out;
  std::string kernel = "biharmonic";
  std::optional<double> band_width;
  int resolution = 64;
};

int reconstruct_cmd(const ReconstructArgs &a, std::ostream &out) {
  const ParticleSystem ps = load_particles(a.particles);
  std::optional<SdfGrid> grid;
  if (!a.grid.empty()) grid = load_grid(a.grid);
  require(grid || a.band_width, "reconstruct: --band-width is required without --grid");
  const double s = a.band_width ? *a.band_width : 2.0 * grid->mean_spacing();

  Box3 box;
  if (grid) {
    box = grid->bounds();
  } else {
    Eigen::AlignedBox3d bb;
    for (const auto &p : ps.points) bb.extend(p);
    const Vec3 pad = 0.25 * bb.sizes() + Vec3::Constant(2.0 * s);
    box = {bb.min() - pad, bb.max() + pad};
  }
  LossConfig loss;
  loss.kernel = parse_kernel(a.kernel);
  const RbfSurface surface = fit_surface(ps, loss, s);
  const TriangleMesh mesh = extract_mesh(surface, box, Index3::Constant(a.resolution));
  write_obj(mesh, a.out);
  out << "wrote " << mesh.faces.size() << " triangles to " << a.out << '\n';
  return 0;
}

}  // namespace

int run(int argc, const char *const *argv, std::ostream &out, std::ostream &err) {
  CLI::App app{"Statistical shape models from RBF implicit surfaces"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto *gen_cmd = app.add_subcommand("gen-data", "Write an ellipsoid cohort of .sdfgrid files");
  gen_cmd->add_option("--count", gen.count, "Number of shapes")->check(CLI::Range(2, 1 << 20));
  gen_cmd->add_option("--x-range", gen.x_range, "Min and max x semi-axis")->expected(2);
  gen_cmd->add_option("--yz", gen.yz, "Fixed y (and z) semi-axis")->expected(1, 2);
  gen_cmd->add_option("--dims", gen.dims, "Grid samples per axis (1 or 3 values)")->expected(1, 3);
  gen_cmd->add_option("--seed", gen.seed, "Seed (recorded; the cohort is analytic)");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();

  std::string config_path;
  auto *opt_cmd = app.add_subcommand("optimize", "Optimize particles for the cohort described by a config file");
  opt_cmd->add_option("config", config_path, "Run config file")->required();

  EvaluateArgs eval;
  auto *eval_cmd = app.add_subcommand("evaluate", "Write compactness, specificity, generalization and distances");
  eval_cmd->add_option("--manifest", eval.manifest, "model_manifest.csv written by optimize")->required();
  eval_cmd->add_option("--out", eval.out, "Metrics CSV")->required();
  eval_cmd->add_option("--modes", eval.max_modes, "Largest mode count to report")->check(CLI::PositiveNumber);
  eval_cmd->add_option("--samples", eval.samples, "Specificity samples")->check(CLI::PositiveNumber);
  eval_cmd->add_option("--seed", eval.seed, "Specificity seed");
  eval_cmd->add_option("--resolution", eval.resolution, "Marching-cubes samples per axis")->check(CLI::Range(2, 1024));

  ReconstructArgs rec;
  double band_width = 0.0;
  auto *rec_cmd = app.add_subcommand("reconstruct", "Fit the RBF surface of a particle file and write an OBJ mesh");
  rec_cmd->add_option("--particles", rec.particles, "Particle file")->required();
  rec_cmd->add_option("--grid", rec.grid, "Grid supplying the mesh box and default band width");
  rec_cmd->add_option("--out", rec.out, "Output OBJ")->required();
  rec_cmd->add_option("--kernel", rec.kernel, "biharmonic, triharmonic or thin-plate-spline");
  auto *bw = rec_cmd->add_option("--band-width", band_width, "Dipole offset s")->check(CLI::PositiveNumber);
  rec_cmd->add_option("--resolution", rec.resolution, "Marching-cubes samples per axis")->check(CLI::Range(2, 1024));

  try {
    app.parse(argc, argv);
    if (gen_cmd->parsed()) {
      if (gen.x_range.size() != 2) throw CLI::ValidationError("--x-range", "expects two values");
      if (gen.dims.size() == 2) throw CLI::ValidationError("--dims", "expects 1 or 3 values");
    }
  } catch (const CLI::CallForHelp &e) {
    app.exit(e, out, err);
    return 0;
  } catch (const CLI::ParseError &e) {
    app.exit(e, out, err);
    return 2;
  }

  try {
    if (gen_cmd->parsed()) return gen_data(gen, out);
    if (opt_cmd->parsed()) return optimize_cmd(config_path, out);
    if (eval_cmd->parsed()) return evaluate_cmd(eval, out, err);
    if (rec_cmd->parsed()) {
      if (bw->count() > 0) rec.band_width = band_width;
      return reconstruct_cmd(rec, out);
    }
  } catch (const std::exception &e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace rbfpdm::cli
