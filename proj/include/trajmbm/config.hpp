#pragma once

#include "trajmbm/gaussian.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace trajmbm {

/// Ground-truth scenario: six coalescing targets by default, with per-target
/// midpoints drawn near the origin and dynamics run forward and backward.
struct ScenarioConfig {
  int steps = 101;
  std::vector<int> births{1, 11, 21, 31, 41, 51};
  std::vector<int> deaths{61, 71, 81, 91, 101, 101};
  Vec midpoint_mean = Vec::Zero(4);
  Mat midpoint_cov = 1e-6 * Mat::Identity(4, 4);
  double region_min_x = -100.0;
  double region_max_x = 100.0;
  double region_min_y = -100.0;
  double region_max_y = 100.0;
  double pd = 0.9;
  double ps = 0.99;
  double clutter_rate = 10.0;

  double area() const {
    return (region_max_x - region_min_x) * (region_max_y - region_min_y);
  }
};

struct FilterConfig {
  int nscan = 5;
  int window = 1;  // L retained steps; 0 = full history
  double r_threshold = 0.1;
  int max_consecutive_misses = 3;
  double eps_gap = 0.01;
  int max_iter = 200;
  double ppp_prune = 1e-4;
  double gate_quantile = 0.999;
  double birth_weight = 0.05;
};

struct RunConfig {
  std::string name = "custom";
  ScenarioConfig scenario;
  FilterConfig filter;
  int trials = 100;
  std::uint64_t seed = 1;
  std::string output_dir = "out";
  bool debug_dual = false;
};

/// Throws std::invalid_argument naming the offending field.
void validate(const RunConfig& cfg);

std::string run_config_to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const std::string& text);

/// Reads and validates a JSON config file. Throws std::runtime_error naming
/// the path when the file cannot be read.
RunConfig load_run_config(const std::string& path);

/// The four (pd, clutter rate) grid points of the benchmark scenario.
std::vector<std::string> preset_names();
RunConfig preset_config(const std::string& name);

}  // namespace trajmbm
