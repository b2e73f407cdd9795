#include "trajmbm/cli.hpp"

#include "trajmbm/config.hpp"
#include "trajmbm/report.hpp"
#include "trajmbm/simulation.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <string>

namespace trajmbm::cli {

int run(int argc, const char* const* argv) {
  CLI::App app{"PMBM trajectory filter benchmark runner"};

  std::string config_path;
  std::string preset;
  int trials = -1;
  long long seed = -1;
  int nscan = -1;
  std::string window;
  std::string out_dir;
  bool debug_dual = false;

  app.add_option("--config", config_path, "JSON run configuration file");
  app.add_option("--preset", preset, "named preset configuration")
      ->check(CLI::IsMember(preset_names()));
  app.add_option("--trials", trials, "number of Monte Carlo trials");
  app.add_option("--seed", seed, "master RNG seed");
  app.add_option("--nscan", nscan, "N-scan pruning depth");
  app.add_option("--window", window, "retained trajectory steps: 1 or full")
      ->check(CLI::IsMember({"1", "full"}));
  app.add_option("--out", out_dir, "output directory");
  app.add_flag("--debug-dual", debug_dual, "dump dual-decomposition convergence");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  RunConfig cfg;
  try {
    if (!config_path.empty()) {
      cfg = load_run_config(config_path);
    } else if (!preset.empty()) {
      cfg = preset_config(preset);
    } else {
      std::fprintf(stderr, "error: either --config or --preset is required\n");
      return 1;
    }
  } catch (const std::runtime_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }

  // Flag overrides take precedence over file values.
  if (trials >= 0) cfg.trials = trials;
  if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
  if (nscan >= 0) cfg.filter.nscan = nscan;
  if (!window.empty()) cfg.filter.window = (window == "full") ? 0 : 1;
  if (!out_dir.empty()) cfg.output_dir = out_dir;
  if (debug_dual) cfg.debug_dual = true;

  try {
    validate(cfg);
    const McReport report = run_monte_carlo(cfg, cfg.trials);
    emit_results(report, cfg.output_dir);
    std::printf("%s", summary_csv(report).c_str());
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}

}  // namespace trajmbm::cli
