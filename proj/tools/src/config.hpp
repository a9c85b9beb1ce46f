#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "ubpod/testbed.hpp"

namespace ubpod::cli {

using nlohmann::json;

struct TestbedConfig {
  std::string kind = "hopf-pde";  // or "random-lti"
  HopfSpec hopf;
  RandomLtiSpec lti;
};

struct SteadyConfig {
  double dt = 0.01;
  int steps = 50;
  double tol = 1e-10;
  double gmres_tol = 1e-6;
  int gmres_restart = 50;
  int max_newton = 50;
  bool line_search = true;
};

struct EigsConfig {
  int k_max = 6;
  double tol = 1e-10;
  double dt = 0.01;
};

struct SnapshotConfig {
  double dt = 0.01;
  int n_snapshots = 200;
  int spacing = 50;
  std::string quadrature = "trapezoid";
  /// Output projection order; zero keeps the full output.
  int m = 20;
};

struct RomConfig {
  /// Stable-block order; -1 keeps every numerically positive HSV.
  int r = 20;
};

struct OracleConfig {
  double tol = 0.02;
  /// HSVs below this fraction of the largest are not compared.
  double hsv_floor = 1e-6;
};

struct ControlConfig {
  double c = 1e5;
  bool unstable_only = false;
  /// Rows of the full output used as sensors; empty means the testbed default.
  std::vector<int> sensors;
  double noise_transient = 0.0;
  double noise_window = 150.0;
  double noise_perturbation = 1e-3;
};

struct SimulateConfig {
  std::string mode = "full-state";
  std::string plant = "nonlinear";  // or "linear"
  std::vector<double> turn_on{0.0};
  double dt = 0.01;
  double horizon = 200.0;
  int record_every = 10;
  /// Run-in before the control horizon starts (nonlinear plants start on
  /// their limit cycle).
  double transient = 300.0;
};

struct BifurcationConfig {
  double mu_min = 0.8;
  double mu_max = 1.6;
  double step = 0.1;
  /// When positive, each branch point also gets a limit-cycle amplitude
  /// after this much run-in.
  double cycle_transient = 0.0;
  double cycle_window = 30.0;
};

struct PipelineConfig {
  std::uint64_t seed = 1;
  TestbedConfig testbed;
  SteadyConfig steady;
  EigsConfig eigs;
  SnapshotConfig snapshots;
  RomConfig rom;
  OracleConfig oracle;
  ControlConfig control;
  SimulateConfig simulate;
  BifurcationConfig bifurcation;

  void validate() const;
};

/// Parses a config document; unknown keys and out-of-range values throw
/// ValidationError naming the offending path.
PipelineConfig parse_config(const json& doc);
PipelineConfig load_config(const std::filesystem::path& path);

/// Effective config, every default spelled out.
json to_json(const PipelineConfig& cfg);

/// Names of the config sections each stage depends on, upstream first.
std::vector<std::string> stage_sections(const std::string& stage);

/// Hash of the effective config restricted to a stage's sections.
std::uint64_t stage_config_hash(const PipelineConfig& cfg,
                                const std::string& stage);

}  // namespace ubpod::cli
