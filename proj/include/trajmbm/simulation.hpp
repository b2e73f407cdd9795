#pragma once

#include "trajmbm/config.hpp"
#include "trajmbm/metrics.hpp"
#include "trajmbm/pmbm.hpp"

#include <random>
#include <vector>

namespace trajmbm {

/// Constant-velocity model with state [px, vx, py, vy] and noise intensity q.
MotionModel make_cv_motion(double t, double q, double ps);

/// Position-only measurement model with R = I and uniform clutter over the
/// given area. gate_threshold = 0 defers to the filter's gate quantile.
MeasurementModel make_position_measurement(double pd, double clutter_rate, double area,
                                           double gate_threshold = 0.0);

/// Birth PPP: a single broad component per scan centred on the origin with
/// covariance diag([100^2, 1, 100^2, 1]).
PoissonIntensity make_birth_intensity(double weight);

struct Scan {
  int time = 0;
  std::vector<Vec> measurements;
};

/// Draws a midpoint state per target and runs the dynamics forward to the
/// death time and backward (inverse dynamics, sampled noise) to the birth.
std::vector<Trajectory> generate_truth(const ScenarioConfig& cfg, const MotionModel& motion,
                                       std::mt19937_64& rng);

/// Detections with probability pd plus Poisson clutter uniform over the
/// region, in shuffled order.
Scan generate_scan(const std::vector<Trajectory>& truth, int k, const ScenarioConfig& cfg,
                   const MeasurementModel& meas, std::mt19937_64& rng);

struct ConvergenceRecord {
  int scan = 0;
  int iteration = 0;
  double dual = 0.0;
  double best_primal = 0.0;
  double gap = 0.0;
};

struct TrialResult {
  std::vector<GospaResult> per_scan;
  std::vector<Trajectory> filtered;
  std::vector<Trajectory> smoothed;  // empty unless L = full
  double seconds = 0.0;
  int infeasible_hypotheses = 0;
  std::vector<ConvergenceRecord> convergence;
};

/// One full predict/update/solve/prune pass over all scans, scoring GOSPA
/// against the alive truth each scan and collecting the trajectory estimates
/// of every track that was ever part of the reported estimate.
TrialResult run_trial(const RunConfig& cfg, int trial_index);

struct McReport {
  RunConfig config;
  int trials = 0;
  std::vector<GospaResult> per_scan_mean;
  GospaResult overall_mean;  // average per scan across trials
  double mean_trial_seconds = 0.0;
  std::vector<TrialResult> trial_results;
};

/// Monte Carlo harness; trials run in parallel (capped by TRAJMBM_THREADS)
/// on per-trial RNG streams, so results do not depend on scheduling.
McReport run_monte_carlo(const RunConfig& cfg, int trials);

/// Deterministic per-trial generator seeded from (master seed, trial index).
std::mt19937_64 make_trial_rng(std::uint64_t seed, int trial_index);

}  // namespace trajmbm
