#include "artifacts.hpp"

#include <algorithm>
#include <fstream>

#include "ubpod/io.hpp"

#ifndef UBPOD_VERSION
#define UBPOD_VERSION "unknown"
#endif

namespace ubpod::cli {

namespace {

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError("malformed " + path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

Matrix as_column(const Vector& v) { return Matrix(v); }

Vector as_vector(const Matrix& m) {
  if (m.cols() != 1) throw ValidationError("expected a column vector");
  return m.col(0);
}

}  // namespace

std::string version_string() { return UBPOD_VERSION; }

StageRun::StageRun(const RunOptions& options, std::string name,
                   std::vector<std::string> upstream)
    : options_(options),
      name_(std::move(name)),
      upstream_(std::move(upstream)),
      dir_(options.out / name_),
      start_(std::chrono::steady_clock::now()) {
  const PipelineConfig& cfg = options_.config;
  config_hash_ = hex_digest(stage_config_hash(cfg, name_));
  std::string chain = name_ + ":" + config_hash_;

  for (const std::string& up : upstream_) {
    const fs::path manifest_path = options_.out / up / "manifest.json";
    if (!fs::exists(manifest_path)) {
      throw ValidationError("'" + name_ + "' needs the output of '" + up +
                            "'; run `ubpod " + up + "` first (missing " +
                            manifest_path.string() + ")");
    }
    const json m = read_json(manifest_path);
    const std::string expected = hex_digest(stage_config_hash(cfg, up));
    std::vector<std::string> problems;
    if (m.value("config_hash", "") != expected) {
      problems.push_back("it was produced with a different configuration");
    }
    for (const auto& [file, digest] : m.at("outputs").items()) {
      const fs::path p = options_.out / up / file;
      if (!fs::exists(p)) {
        problems.push_back(file + " is missing");
      } else if (hex_digest(hash_file(p)) != digest.get<std::string>()) {
        problems.push_back(file + " changed after it was written");
      }
    }
    if (!problems.empty() && !options_.force) {
      std::string msg = "stale upstream '" + up + "' for '" + name_ + "': ";
      for (std::size_t i = 0; i < problems.size(); ++i) {
        msg += (i ? "; " : "") + problems[i];
      }
      throw ValidationError(msg + ". Rerun `ubpod " + up +
                            "` or pass --force");
    }
    const std::string up_run = m.value("run_hash", "");
    inputs_[up] = up_run;
    chain += "|" + up + ":" + up_run;
  }
  run_hash_ = hex_digest(fnv1a(chain));

  fs::remove_all(dir_);
  fs::create_directories(dir_);
}

fs::path StageRun::input(const std::string& stage,
                         const std::string& file) const {
  const fs::path p = options_.out / stage / file;
  if (!fs::exists(p)) {
    throw ValidationError("'" + name_ + "' needs " + p.string() +
                          "; run `ubpod " + stage + "` first");
  }
  return p;
}

void StageRun::write_table(const std::string& file,
                           const CsvTable& table) const {
  const fs::path p = output(file);
  fs::create_directories(p.parent_path());
  table.write(p, run_hash_);
}

void StageRun::finish(const json& summary) const {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir_)) {
    if (e.is_regular_file() && e.path().filename() != "manifest.json") {
      files.push_back(fs::relative(e.path(), dir_));
    }
  }
  std::sort(files.begin(), files.end());
  json outputs = json::object();
  for (const auto& f : files) {
    outputs[f.generic_string()] = hex_digest(hash_file(dir_ / f));
  }
  const json full = to_json(options_.config);
  json config = json::object();
  for (const auto& s : stage_sections(name_)) config[s] = full.at(s);

  const double wall = std::chrono::duration<double>(
                          std::chrono::steady_clock::now() - start_)
                          .count();
  json m;
  m["stage"] = name_;
  m["version"] = version_string();
  m["seed"] = options_.config.seed;
  m["config"] = config;
  m["config_hash"] = config_hash_;
  m["run_hash"] = run_hash_;
  m["inputs"] = inputs_;
  m["outputs"] = outputs;
  m["summary"] = summary;
  m["wall_time_s"] = wall;
  write_json(dir_ / "manifest.json", m);
}

void save_snapshots(const SnapshotMatrix& s, const fs::path& dir,
                    const std::string& run_hash) {
  fs::create_directories(dir);
  write_matrix(dir / "columns.txt", s.columns);
  write_matrix(dir / "times.txt", as_column(s.times));
  write_matrix(dir / "weights.txt", as_column(s.weights));
  Matrix source(static_cast<Eigen::Index>(s.source.size()), 1);
  for (std::size_t i = 0; i < s.source.size(); ++i) {
    source(static_cast<Eigen::Index>(i), 0) = s.source[i];
  }
  write_matrix(dir / "source.txt", source);
  json meta;
  meta["run_hash"] = run_hash;
  meta["states"] = s.columns.rows();
  meta["columns"] = s.columns.cols();
  meta["dt"] = s.dt;
  meta["spacing"] = s.spacing;
  meta["quadrature"] = to_string(s.quadrature);
  meta["projector_hash"] = hex_digest(s.projector_hash);
  meta["hash"] = hex_digest(s.hash());
  write_json(dir / "meta.json", meta);
}

SnapshotMatrix load_snapshots(const fs::path& dir,
                              const InnerProductWeight& w) {
  const json meta = read_json(dir / "meta.json");
  SnapshotMatrix s;
  s.columns = read_matrix(dir / "columns.txt");
  s.times = as_vector(read_matrix(dir / "times.txt"));
  s.weights = as_vector(read_matrix(dir / "weights.txt"));
  const Vector source = as_vector(read_matrix(dir / "source.txt"));
  s.source.resize(static_cast<std::size_t>(source.size()));
  for (Eigen::Index i = 0; i < source.size(); ++i) {
    s.source[static_cast<std::size_t>(i)] = static_cast<int>(source(i));
  }
  s.W = w;
  s.dt = meta.at("dt").get<double>();
  s.spacing = meta.at("spacing").get<int>();
  s.quadrature = parse_quadrature(meta.at("quadrature").get<std::string>());
  s.projector_hash =
      std::stoull(meta.at("projector_hash").get<std::string>(), nullptr, 16);
  if (s.columns.rows() != w.size() || s.times.size() != s.columns.cols() ||
      s.weights.size() != s.columns.cols() ||
      static_cast<Eigen::Index>(s.source.size()) != s.columns.cols()) {
    throw ValidationError("inconsistent snapshot set in " + dir.string());
  }
  if (hex_digest(s.hash()) != meta.at("hash").get<std::string>()) {
    throw ValidationError("snapshot set in " + dir.string() +
                          " does not match its recorded hash");
  }
  return s;
}

void save_pod(const PODBasis& basis, const fs::path& dir,
              const std::string& run_hash) {
  fs::create_directories(dir);
  write_matrix(dir / "modes.txt", basis.modes);
  write_matrix(dir / "energies.txt", as_column(basis.energies));
  write_matrix(dir / "fractions.txt", as_column(basis.fractions));
  CsvTable t({"mode", "energy", "cumulative_fraction"});
  for (Eigen::Index i = 0; i < basis.energies.size(); ++i) {
    t.add_row(std::vector<double>{static_cast<double>(i + 1),
                                  basis.energies(i), basis.fractions(i)});
  }
  t.write(dir / "pod.csv", run_hash);
}

PODBasis load_pod(const fs::path& dir, const InnerProductWeight& w) {
  PODBasis b;
  b.modes = read_matrix(dir / "modes.txt");
  b.energies = as_vector(read_matrix(dir / "energies.txt"));
  b.fractions = as_vector(read_matrix(dir / "fractions.txt"));
  b.W = w;
  if (b.modes.rows() != w.size()) {
    throw ValidationError("output basis in " + dir.string() +
                          " does not match the output dimension");
  }
  return b;
}

}  // namespace ubpod::cli
