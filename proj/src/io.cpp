#include "rbfpdm/io.hpp"

#include "rbfpdm/errors.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace rbfpdm {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto result = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, result.ptr);
}

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_ws(const std::string &line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

double parse_number(const std::string &s, const std::string &where) {
  double v = 0.0;
  const auto result = std::from_chars(s.data(), s.data() + s.size(), v);
  if (result.ec != std::errc() || result.ptr != s.data() + s.size())
    throw FormatError(where + ": '" + s + "' is not a number");
  return v;
}

template <typename Int>
Int parse_integer(const std::string &s, const std::string &where) {
  Int v{};
  const auto result = std::from_chars(s.data(), s.data() + s.size(), v);
  if (result.ec != std::errc() || result.ptr != s.data() + s.size())
    throw FormatError(where + ": '" + s + "' is not an integer");
  return v;
}

std::vector<std::string> split_csv(const std::string &line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::ofstream open_for_write(const std::filesystem::path &path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

}  // namespace

void save_particles(const ParticleSystem &ps, const std::filesystem::path &path) {
  std::ofstream out = open_for_write(path);
  for (std::size_t j = 0; j < ps.points.size(); ++j) {
    const auto &p = ps.points[j];
    const auto &n = ps.normals[j];
    out << format_double(p[0]) << ' ' << format_double(p[1]) << ' ' << format_double(p[2]) << ' '
        << format_double(n[0]) << ' ' << format_double(n[1]) << ' ' << format_double(n[2]) << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

ParticleSystem load_particles(const std::filesystem::path &path, int shape_id) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open particle file " + path.string());
  ParticleSystem ps;
  ps.shape_id = shape_id;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string where = path.string() + ":" + std::to_string(number);
    if (trim(line).empty()) throw FormatError(where + ": empty line");
    const auto fields = split_ws(line);
    if (fields.size() != 6)
      throw FormatError(where + ": expected 6 fields, found " + std::to_string(fields.size()));
    double v[6];
    for (int f = 0; f < 6; ++f) v[f] = parse_number(fields[static_cast<std::size_t>(f)], where);
    ps.points.emplace_back(v[0], v[1], v[2]);
    ps.normals.emplace_back(v[3], v[4], v[5]);
  }
  if (ps.points.empty()) throw FormatError(path.string() + ": no particles");
  return ps;
}

std::filesystem::path resolve_path(const std::filesystem::path &base, const std::string &path) {
  const std::filesystem::path p(path);
  return p.is_absolute() ? p : base / p;
}

RunConfig RunConfig::parse(std::string_view text) {
  RunConfig cfg;
  auto &opt = cfg.optimizer;
  auto &loss = opt.loss;
  auto &met = cfg.metrics;

  using Setter = std::function<void(const std::string &, const std::string &)>;
  const auto real = [](double &field) {
    return Setter([&field](const std::string &v, const std::string &w) { field = parse_number(v, w); });
  };
  const auto integer = [](int &field) {
    return Setter([&field](const std::string &v, const std::string &w) { field = parse_integer<int>(v, w); });
  };
  const auto seed = [](std::uint64_t &field) {
    return Setter([&field](const std::string &v, const std::string &w) { field = parse_integer<std::uint64_t>(v, w); });
  };
  const auto optional_real = [](std::optional<double> &field) {
    return Setter([&field](const std::string &v, const std::string &w) {
      if (v == "auto")
        field.reset();
      else
        field = parse_number(v, w);
    });
  };

  std::map<std::string, Setter> setters = {
      {"data.grid", [&cfg](const std::string &v, const std::string &) { cfg.grids.push_back(v); }},
      {"data.output", [&cfg](const std::string &v, const std::string &) { cfg.output_dir = v; }},
      {"optimizer.particles", integer(opt.particles)},
      {"optimizer.learning_rate", real(opt.learning_rate)},
      {"optimizer.epochs", integer(opt.epochs)},
      {"optimizer.pre_opt_epochs", integer(opt.pre_opt_epochs)},
      {"optimizer.seed", seed(opt.seed)},
      {"optimizer.reference_shape", integer(opt.reference_shape)},
      {"optimizer.max_step_voxels", real(opt.max_step_voxels)},
      {"optimizer.checkpoint_every", integer(cfg.checkpoint_every)},
      {"loss.alpha", real(loss.alpha)},
      {"loss.beta", real(loss.beta)},
      {"loss.gamma", real(loss.gamma)},
      {"loss.zeta", real(loss.zeta)},
      {"loss.c", real(loss.error_weight)},
      {"loss.band_width", optional_real(loss.band_width)},
      {"loss.batch_size", integer(loss.batch_size)},
      {"loss.band_samples", integer(loss.band_samples)},
      {"loss.covariance_floor", optional_real(loss.covariance_floor)},
      {"loss.kernel", [&loss](const std::string &v, const std::string &) { loss.kernel = parse_kernel(v); }},
      {"loss.regularization", real(loss.regularization)},
      {"metrics.max_modes", integer(met.max_modes)},
      {"metrics.specificity_samples", integer(met.specificity_samples)},
      {"metrics.seed", seed(met.seed)},
      {"metrics.mesh_resolution", integer(met.mesh_resolution)},
  };

  std::istringstream in{std::string(text)};
  std::string raw;
  std::string section;
  int number = 0;
  while (std::getline(in, raw)) {
    ++number;
    const std::string where = "config line " + std::to_string(number);
    std::string line = raw;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw FormatError(where + ": unterminated section header");
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError(where + ": expected key = value");
    const std::string key = section + "." + trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    const auto it = setters.find(key);
    if (it == setters.end()) throw FormatError(where + ": unknown key '" + key + "'");
    try {
      it->second(value, where);
    } catch (const PreconditionError &e) {
      throw FormatError(where + ": " + e.what());
    }
  }
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse(ss.str());
  } catch (const FormatError &e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::string RunConfig::serialize() const {
  const auto &opt = optimizer;
  const auto &loss = opt.loss;
  const auto optional = [](const std::optional<double> &v) { return v ? format_double(*v) : std::string("auto"); };
  std::ostringstream out;
  out << "[data]\n";
  for (const auto &g : grids) out << "grid = " << g << '\n';
  out << "output = " << output_dir << "\n\n";
  out << "[optimizer]\n"
      << "particles = " << opt.particles << '\n'
      << "learning_rate = " << format_double(opt.learning_rate) << '\n'
      << "epochs = " << opt.epochs << '\n'
      << "pre_opt_epochs = " << opt.pre_opt_epochs << '\n'
      << "seed = " << opt.seed << '\n'
      << "reference_shape = " << opt.reference_shape << '\n'
      << "max_step_voxels = " << format_double(opt.max_step_voxels) << '\n'
      << "checkpoint_every = " << checkpoint_every << "\n\n";
  out << "[loss]\n"
      << "alpha = " << format_double(loss.alpha) << '\n'
      << "beta = " << format_double(loss.beta) << '\n'
      << "gamma = " << format_double(loss.gamma) << '\n'
      << "zeta = " << format_double(loss.zeta) << '\n'
      << "c = " << format_double(loss.error_weight) << '\n'
      << "band_width = " << optional(loss.band_width) << '\n'
      << "batch_size = " << loss.batch_size << '\n'
      << "band_samples = " << loss.band_samples << '\n'
      << "covariance_floor = " << optional(loss.covariance_floor) << '\n'
      << "kernel = " << kernel_name(loss.kernel) << '\n'
      << "regularization = " << format_double(loss.regularization) << "\n\n";
  out << "[metrics]\n"
      << "max_modes = " << metrics.max_modes << '\n'
      << "specificity_samples = " << metrics.specificity_samples << '\n'
      << "seed = " << metrics.seed << '\n'
      << "mesh_resolution = " << metrics.mesh_resolution << '\n';
  return out.str();
}

void RunConfig::validate(const std::filesystem::path &base) const {
  require(!grids.empty(), "config: at least one grid is required");
  for (const auto &g : grids)
    if (!std::filesystem::exists(resolve_path(base, g))) throw IoError("config: grid file not found: " + g);
  require(checkpoint_every >= 0, "config: checkpoint_every must be non-negative");
  require(metrics.max_modes >= 1, "config: max_modes must be >= 1");
  require(metrics.specificity_samples >= 1, "config: specificity_samples must be >= 1");
  require(metrics.mesh_resolution >= 2, "config: mesh_resolution must be >= 2");
  optimizer.validate(static_cast<int>(grids.size()));
}

void write_loss_history(const std::vector<EpochRecord> &history, const std::filesystem::path &path) {
  std::ofstream out = open_for_write(path);
  out << "epoch,surface,sampling,eigenshape,correspondence,total\n";
  for (const auto &r : history)
    out << r.epoch << ',' << format_double(r.surface) << ',' << format_double(r.sampling) << ','
        << format_double(r.eigenshape) << ',' << format_double(r.correspondence) << ',' << format_double(r.total)
        << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

void write_model_manifest(const std::vector<ManifestEntry> &entries, const std::filesystem::path &path) {
  std::ofstream out = open_for_write(path);
  out << "shape_id,grid,particles,kernel,band_width\n";
  for (const auto &e : entries)
    out << e.shape_id << ',' << e.grid << ',' << e.particles << ',' << kernel_name(e.kernel) << ','
        << format_double(e.band_width) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<ManifestEntry> read_model_manifest(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  std::string line;
  if (!std::getline(in, line) || trim(line) != "shape_id,grid,particles,kernel,band_width")
    throw FormatError(path.string() + ": unexpected manifest header");
  std::vector<ManifestEntry> entries;
  int number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (trim(line).empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(number);
    const auto f = split_csv(line);
    if (f.size() != 5) throw FormatError(where + ": expected 5 fields");
    ManifestEntry e;
    e.shape_id = parse_integer<int>(f[0], where);
    e.grid = f[1];
    e.particles = f[2];
    try {
      e.kernel = parse_kernel(f[3]);
    } catch (const PreconditionError &err) {
      throw FormatError(where + ": " + err.what());
    }
    e.band_width = parse_number(f[4], where);
    entries.push_back(std::move(e));
  }
  if (entries.empty()) throw FormatError(path.string() + ": manifest lists no shapes");
  return entries;
}

void write_metrics_csv(const std::vector<MetricRow> &metrics, const std::vector<DistanceRow> &distances,
                       std::ostream &out) {
  out << "metric,mode_count,value\n";
  for (const auto &m : metrics) out << m.metric << ',' << m.mode_count << ',' << format_double(m.value) << '\n';
  out << "distance,shape_id,mean,max\n";
  for (const auto &d : distances)
    out << "distance," << d.shape_id << ',' << format_double(d.mean) << ',' << format_double(d.max) << '\n';
}

}  // namespace rbfpdm
