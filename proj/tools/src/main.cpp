// ubpod: pipeline driver. Each stage reads the artifacts of earlier stages
// from the output directory and writes its own, plus a manifest.
//
// Exit codes: 0 success, 2 invalid input or stale/missing upstream,
// 3 numerical failure (including an oracle comparison outside tolerance),
// 1 anything else.

#include <iostream>
#include <optional>
#include <thread>

#include "CLI11.hpp"
#include "config.hpp"
#include "stages.hpp"

namespace {

constexpr int kValidation = 2;
constexpr int kNumerical = 3;

}  // namespace

int main(int argc, char** argv) {
  using namespace ubpod;
  using namespace ubpod::cli;

  CLI::App app{"Balanced POD model reduction and feedback control pipeline"};
  app.set_version_flag("--version", version_string());

  std::string stage;
  std::string config_path;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  bool force = false;
  bool strict_paper = false;
  bool print_config = false;
  std::string mode;
  std::vector<double> turn_on;

  app.add_option("stage", stage, "Stage to run")
      ->check(CLI::IsMember(stage_names()));
  app.add_option("--config", config_path, "JSON config file (defaults if omitted)")
      ->check(CLI::ExistingFile);
  app.add_option("--out", out, "Output directory")->capture_default_str();
  app.add_option("--seed", seed, "Override the config seed");
  app.add_option("--jobs", jobs, "Concurrent work items (0: hardware threads)")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  app.add_flag("--force", force, "Run even if upstream artifacts are stale");
  app.add_flag("--strict-paper", strict_paper,
               "Disable safeguards not in the original method (Newton line search)");
  app.add_option("--mode", mode, "Feedback mode for simulate: full-state or observer");
  app.add_option("--turn-on", turn_on, "Control turn-on time (repeatable)")
      ->allow_extra_args(false);
  app.add_flag("--print-config", print_config,
               "Print the effective config with every default and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kValidation;
  }

  try {
    PipelineConfig cfg =
        config_path.empty() ? PipelineConfig{} : load_config(config_path);
    if (seed) {
      cfg.seed = *seed;
      cfg.testbed.hopf.seed = *seed;
      cfg.testbed.lti.seed = *seed;
    }
    if (strict_paper) cfg.steady.line_search = false;
    if (!mode.empty()) cfg.simulate.mode = mode;
    if (!turn_on.empty()) cfg.simulate.turn_on = turn_on;
    cfg.validate();

    if (print_config) {
      std::cout << to_json(cfg).dump(2) << "\n";
      return 0;
    }
    if (stage.empty()) {
      std::cerr << "error: a stage is required (one of";
      for (const auto& s : stage_names()) std::cerr << " " << s;
      std::cerr << ")\n";
      return kValidation;
    }

    RunOptions options;
    options.config = cfg;
    options.out = out;
    options.jobs = jobs == 0
                       ? static_cast<int>(std::max(1u, std::thread::hardware_concurrency()))
                       : jobs;
    options.force = force;
    return run_stage(stage, options);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
}
