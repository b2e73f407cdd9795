#pragma once

#include "trajmbm/gaussian.hpp"

#include <optional>
#include <vector>

namespace trajmbm {

/// Index of a measurement: scan time k plus position j within that scan.
struct MeasIndex {
  int scan = 0;
  int index = 0;

  friend bool operator==(const MeasIndex&, const MeasIndex&) = default;
  friend auto operator<=>(const MeasIndex&, const MeasIndex&) = default;
};

/// Bernoulli component over one trajectory: existence probability plus a
/// Gaussian moment per retained time step. `window` is the number of latest
/// steps kept (0 = keep the full history, 1 = current state only).
struct TrajectoryBernoulli {
  double r = 0.0;
  int birth = 0;  // estimated birth time
  int last = 0;   // time of the most recent state
  int window = 0;
  std::vector<GaussianDensity> moments;

  int first_moment_time() const { return last - static_cast<int>(moments.size()) + 1; }
};

/// One measurement-assignment history of one track. Leaves of the per-track
/// hypothesis tree; `lineage` records the node id at each scan since creation
/// so that ancestors at a given scan can be compared in O(1).
struct Sth {
  int id = 0;
  int parent = -1;
  double log_weight = 0.0;  // log w; the assignment cost is -log_weight
  TrajectoryBernoulli bern;
  std::vector<MeasIndex> meas_set;  // ascending scan, at most one entry per scan
  std::vector<int> lineage;
  int created_at = 0;
  int consecutive_misses = 0;
  bool miss_only = false;

  bool is_nonexistence() const { return meas_set.empty() && bern.r == 0.0; }
  int last_meas_scan() const { return meas_set.empty() ? -1 : meas_set.back().scan; }
  bool has_meas_at(int scan) const;
  std::optional<int> meas_at(int scan) const;

  /// Node id of this hypothesis' ancestor at `scan`; -1 if the track did not
  /// exist yet. Hypotheses that stopped branching keep their latest node.
  int ancestor_at(int scan) const;
};

struct Track {
  int id = 0;
  int created_at = 0;
  std::vector<Sth> sths;  // current leaves
};

/// One STH id per track. Feasible when the chosen measurement sets are
/// pairwise disjoint and jointly cover every received measurement.
struct GlobalHypothesis {
  std::vector<std::pair<int, int>> choice;  // (track id, sth id), sorted by track id
  double log_weight = 0.0;

  std::optional<int> sth_for(int track_id) const;
};

/// The track/STH forest. Retained global hypotheses are represented
/// implicitly by the surviving leaves; only the best one is materialized.
struct HypothesisForest {
  std::vector<Track> tracks;
  GlobalHypothesis best;
  int next_sth_id = 0;
  int next_track_id = 0;

  int new_sth_id() { return next_sth_id++; }
  int new_track_id() { return next_track_id++; }
  const Track* find_track(int track_id) const;
  const Sth* find_sth(int track_id, int sth_id) const;
};

/// Track-oriented N-scan pruning at current scan tau: every STH whose
/// ancestor at scan tau - N differs from the best hypothesis' ancestor at
/// that scan is removed, freezing association decisions at scans <= tau - N.
/// Tracks reduced to only their non-existence STH are deleted.
void n_scan_prune(HypothesisForest& forest, const GlobalHypothesis& best, int nscan, int tau);

/// Complexity controls on low-existence hypotheses. STHs whose existence
/// dropped below r_threshold and whose last measurement predates
/// `window_start` are flagged miss-only (no measurement children in later
/// updates); STHs with more than max_consecutive_misses in a row are removed
/// unless they are chosen by `best` or removal would leave some in-window
/// measurement uncovered or some window scan without a no-measurement option.
/// Tracks whose every leaf is a stale, flagged, near-zero-existence miss
/// chain are deleted outright.
void apply_miss_only_policy(HypothesisForest& forest, const GlobalHypothesis& best,
                            double r_threshold, int max_consecutive_misses,
                            int window_start);

/// Keeps at most `cap` highest-weight STHs per track (0 = unlimited). The
/// best hypothesis' choice, the last claimant of any in-window measurement,
/// and the last no-measurement option of any in-window scan are never
/// dropped, so solver feasibility is preserved.
void cap_track_hypotheses(HypothesisForest& forest, const GlobalHypothesis& best, int cap,
                          int window_start);

/// Exhaustive oracle for small forests: all feasible global hypotheses with
/// weights normalized to sum to one (log_weight holds the normalized log).
/// Throws if the product of per-track STH counts exceeds `cap`.
std::vector<GlobalHypothesis> enumerate_global_hypotheses(const HypothesisForest& forest,
                                                          long long cap);

/// Feasibility check for a hypothesis: chosen measurement sets pairwise
/// disjoint, and every measurement of `scan_meas_counts` within
/// [window_start, window_end] that some leaf claims is covered exactly once.
bool hypothesis_is_feasible(const HypothesisForest& forest, const GlobalHypothesis& hyp,
                            const std::vector<int>& scan_meas_counts, int window_start,
                            int window_end);

}  // namespace trajmbm
