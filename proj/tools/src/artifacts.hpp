#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "config.hpp"
#include "ubpod/io.hpp"
#include "ubpod/snapshots.hpp"
#include "ubpod/spectral.hpp"

namespace ubpod::cli {

namespace fs = std::filesystem;

struct RunOptions {
  PipelineConfig config;
  fs::path out = "out";
  int jobs = 1;
  bool force = false;
};

/// One stage run: checks upstream manifests, owns the stage directory and
/// writes the manifest on finish.
class StageRun {
 public:
  StageRun(const RunOptions& options, std::string name,
           std::vector<std::string> upstream);

  const std::string& name() const { return name_; }
  const fs::path& dir() const { return dir_; }
  const PipelineConfig& config() const { return options_.config; }
  int jobs() const { return options_.jobs; }
  /// Deterministic digest of the stage config and its upstream runs; it is
  /// the comment line of every table this stage writes.
  const std::string& run_hash() const { return run_hash_; }

  /// Path of an upstream artifact.
  fs::path input(const std::string& stage, const std::string& file) const;
  /// Path of an output, relative to the stage directory.
  fs::path output(const std::string& file) const { return dir_ / file; }

  void write_table(const std::string& file, const CsvTable& table) const;

  /// Hashes every output file and writes manifest.json.
  void finish(const json& summary = json::object()) const;

 private:
  RunOptions options_;
  std::string name_;
  std::vector<std::string> upstream_;
  fs::path dir_;
  std::string config_hash_;
  std::string run_hash_;
  json inputs_ = json::object();
  std::chrono::steady_clock::time_point start_;
};

/// Snapshot sets on disk: columns.txt plus an index table and meta.json.
void save_snapshots(const SnapshotMatrix& s, const fs::path& dir,
                    const std::string& run_hash);
SnapshotMatrix load_snapshots(const fs::path& dir, const InnerProductWeight& w);

void save_pod(const PODBasis& basis, const fs::path& dir,
              const std::string& run_hash);
PODBasis load_pod(const fs::path& dir, const InnerProductWeight& w);

std::string version_string();

}  // namespace ubpod::cli
