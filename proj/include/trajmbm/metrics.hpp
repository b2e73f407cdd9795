#pragma once

#include "trajmbm/gaussian.hpp"

#include <optional>
#include <vector>

namespace trajmbm {

/// Estimated or true trajectory: birth time, time of the last state, and one
/// state per step in between.
struct Trajectory {
  int birth = 0;
  int last = 0;
  std::vector<Vec> states;

  bool alive_at(int k) const { return k >= birth && k <= last; }
  const Vec& state_at(int k) const { return states.at(static_cast<std::size_t>(k - birth)); }
};

struct GospaConfig {
  double c = 20.0;     // cutoff distance
  double p = 1.0;      // order exponent
  double alpha = 2.0;  // only alpha = 2 is supported
};

struct GospaResult {
  double total = 0.0;
  double localization = 0.0;
  double missed = 0.0;
  double false_targets = 0.0;
};

/// GOSPA metric at alpha = 2 between two point sets (Euclidean distance on
/// the vectors as given). The optimal partial assignment is found with the
/// auction solver; pairs further apart than c are never matched. For p = 1
/// the decomposition satisfies total = localization + missed + false_targets.
GospaResult gospa(const std::vector<Vec>& truth, const std::vector<Vec>& estimate,
                  const GospaConfig& cfg);

/// Coarse trajectory diagnostic, not the full trajectory metric: greedily
/// matches estimated to true trajectories by time overlap and mean position
/// distance (positions extracted with H), then reports the RMSE over all
/// matched time-position pairs. Empty when nothing matches.
std::optional<double> matched_position_rmse(const std::vector<Trajectory>& truth,
                                            const std::vector<Trajectory>& estimate,
                                            const Mat& h);

}  // namespace trajmbm
