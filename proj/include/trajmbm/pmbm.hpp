#pragma once

#include "trajmbm/assignment.hpp"
#include "trajmbm/gaussian.hpp"
#include "trajmbm/hypothesis.hpp"
#include "trajmbm/metrics.hpp"

#include <optional>
#include <vector>

namespace trajmbm {

/// Gaussian-mixture intensity of undetected trajectories; also used to
/// describe the birth model. Each component carries the time it was born.
struct PoissonComponent {
  double weight = 0.0;
  GaussianDensity density;
  int birth = 0;
};

struct PoissonIntensity {
  std::vector<PoissonComponent> components;

  bool empty() const { return components.empty(); }
};

/// Removes components with weight below `threshold`.
PoissonIntensity prune_ppp(const PoissonIntensity& intensity, double threshold);

struct FilterParams {
  int nscan = 5;                      // N-scan pruning depth
  int window = 1;                     // L retained steps; 0 = full history
  double r_threshold = 0.1;           // miss-only policy existence threshold
  int max_consecutive_misses = 3;
  double eps_gap = 0.01;              // dual-decomposition relative gap
  int max_iter = 200;
  double ppp_prune_threshold = 1e-4;
  double gate_quantile = 0.999;       // chi-square quantile for the gate
  int max_leaves_per_track = 256;     // weight-ordered STH cap, 0 = unlimited
};

struct FilterState {
  PoissonIntensity undetected;
  HypothesisForest forest;
  int time = 0;
  std::vector<int> scan_meas_counts;  // measurement count of scan k at [k-1]
};

/// Missed-detection update, Bernoulli weights L = 1 - r + r(1 - pd). Returns
/// nothing when L = 0 (certain existence and certain detection).
std::optional<Sth> sth_miss_update(const Sth& h, const MeasurementModel& m, int new_id);

/// Measurement update, weight factor r <f, l(z|.) pd>. The caller must have
/// gated z. Returns nothing when the factor is zero (r = 0).
std::optional<Sth> sth_meas_update(const Sth& h, const Vec& z, MeasIndex index,
                                   const MeasurementModel& m, int new_id);

/// New track for measurement z: a non-existence hypothesis (weight 1, r = 0)
/// plus a first-detection hypothesis with weight kappa(z) + <D_u, l(z|.) pd>
/// whose density moment-matches the measurement-updated intensity mixture.
/// Returns nothing when that weight is zero.
std::optional<Track> new_track(const Vec& z, MeasIndex index,
                               const PoissonIntensity& undetected,
                               const MeasurementModel& m, int track_id,
                               int nonexistence_sth_id, int detection_sth_id,
                               int window);

enum class EstimateMode { kFiltered, kSmoothed };

/// MAP cardinality of a multi-Bernoulli with the given existence
/// probabilities (argmax of the Poisson-binomial pmf; ties go to fewer).
int map_cardinality(const std::vector<double>& rs);

/// Estimates from the best global hypothesis: the n* highest-existence
/// Bernoullis where n* is the MAP cardinality. Smoothed extraction runs the
/// RTS pass over the stored moments and requires the full window (L = 0);
/// it throws when the filter only retains the latest step.
std::vector<Trajectory> extract_estimates(const FilterState& state,
                                          const GlobalHypothesis& best,
                                          EstimateMode mode, const MotionModel& motion);

struct SolveStats {
  double gap = 0.0;
  int iterations = 0;
  bool converged = true;
  std::vector<IterationRecord> trace;
};

/// The PMBM trajectory filter: a PPP over undetected trajectories plus a
/// track/STH forest whose global hypotheses form the implicit MBM over
/// detected trajectories. Per scan: predict(), update(), solve(), prune().
class TrajectoryPmbmFilter {
 public:
  TrajectoryPmbmFilter(MotionModel motion, MeasurementModel meas,
                       PoissonIntensity birth, FilterParams params);

  /// Advances to the next scan: survival-thinned Kalman prediction of the
  /// PPP and of every STH Bernoulli, then the birth components are appended.
  void predict();

  /// Measurement update at the current scan: every live STH spawns one
  /// miss-update child and one child per gated measurement, one new track is
  /// created per measurement, and the PPP is thinned by 1 - pd.
  void update(const std::vector<Vec>& measurements);

  /// Finds the most likely global hypothesis by dual decomposition over the
  /// scans of the sliding window and stores it as `best`.
  SolveStats solve(bool record_trace = false);

  /// N-scan pruning conditioned on `best`, the low-existence miss-only
  /// policy, and PPP component pruning.
  void prune();

  std::vector<Trajectory> estimates(EstimateMode mode) const;

  /// (track id, Bernoulli) of the MAP-cardinality selection from `best`.
  std::vector<std::pair<int, const TrajectoryBernoulli*>> selected_bernoullis() const;

  /// Partition check of `best` over the current window (Eq.-style feasibility).
  bool best_is_feasible() const;

  MultiFrameProblem build_problem() const;

  const FilterState& state() const { return state_; }
  FilterState& mutable_state() { return state_; }
  const FilterParams& params() const { return params_; }
  const MeasurementModel& measurement_model() const { return meas_; }
  const MotionModel& motion_model() const { return motion_; }
  int window_start() const;

 private:
  MotionModel motion_;
  MeasurementModel meas_;
  PoissonIntensity birth_;
  FilterParams params_;
  FilterState state_;
};

}  // namespace trajmbm
