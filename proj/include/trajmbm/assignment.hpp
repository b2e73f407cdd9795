#pragma once

#include "trajmbm/gaussian.hpp"
#include "trajmbm/hypothesis.hpp"

#include <limits>
#include <vector>

namespace trajmbm {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// 2-D assignment instance: rows are the measurements of one scan, columns
/// are tracks (or, for the GOSPA metric, estimates plus dummies). +inf marks
/// a forbidden pairing.
struct AssignmentMatrix {
  Mat costs;

  int rows() const { return static_cast<int>(costs.rows()); }
  int cols() const { return static_cast<int>(costs.cols()); }
};

/// Forward auction for the rectangular min-cost assignment problem. Every
/// row is assigned to a distinct column; columns may stay free. `eps` is the
/// final complementary-slackness tolerance of the epsilon-scaling schedule;
/// with integer costs and eps < 1/rows the result is optimal.
/// `price_io`, when given, warm-starts the column prices and receives the
/// final ones (the epsilon-scaling schedule is skipped).
/// Throws if the instance is infeasible.
std::vector<int> auction_solve(const AssignmentMatrix& m, double eps,
                               std::vector<double>* price_io = nullptr);

/// Exact minimum-cost assignment of arbitrary real costs: scales to
/// integers, multiplies by (cols+1) and runs the auction down to eps = 1,
/// which guarantees optimality of the scaled problem.
std::vector<int> solve_assignment(const AssignmentMatrix& m,
                                  std::vector<double>* price_io = nullptr);

/// One scan slot of a multi-frame problem.
struct ScanSlot {
  int scan = 0;
  int num_meas = 0;
};

struct SthCost {
  int sth_id = 0;
  double cost = 0.0;                // c(a) = -log w(a)
  std::vector<MeasIndex> meas_set;  // restricted to the optimization window
};

struct TrackCosts {
  int track_id = 0;
  std::vector<SthCost> sths;
};

/// Multi-frame assignment instance over the scans of the sliding window:
/// pick one STH per track such that every window measurement is used exactly
/// once, minimizing the summed costs.
struct MultiFrameProblem {
  std::vector<TrackCosts> tracks;
  std::vector<ScanSlot> scans;
};

/// Lagrange multipliers and subproblem bookkeeping. delta[s][t][a] is the
/// multiplier of STH a of track t in the subproblem of scan slot s; for each
/// STH the multipliers sum to zero across slots. rho[s][t] is the STH index
/// selected for track t when solving slot s.
struct DualState {
  std::vector<std::vector<std::vector<double>>> delta;
  std::vector<std::vector<int>> rho;
  std::vector<double> subproblem_cost;
  double dual_cost = -kInf;
  double best_primal = kInf;
  std::vector<int> best_selection;  // STH index per track
  int iteration = 0;
};

DualState make_dual_state(const MultiFrameProblem& p);

/// Per-scan 2-D reduction: entry (j, i) is the cheapest penalized cost of
/// track i's STHs containing measurement (k, j), minus the cheapest penalized
/// cost of its STHs with no scan-k measurement; +inf where no STH matches.
/// Tracks whose every STH uses some scan-k measurement are forced and get a
/// large bonus instead of the (infinite) baseline.
AssignmentMatrix build_subproblem(const MultiFrameProblem& p, int slot, const DualState& d);

/// Solves slot `slot` exactly and stores the selected STH per track in
/// d.rho[slot] and the subproblem value in d.subproblem_cost[slot].
void solve_subproblem(const MultiFrameProblem& p, int slot, DualState& d);

/// Projected subgradient update of the multipliers with the adaptive step
/// (best primal - dual) / ||g||^2. Returns false when the subproblems agree
/// (zero subgradient), in which case the solution is feasible and optimal.
bool subgradient_step(const MultiFrameProblem& p, DualState& d);

/// Branch-and-bound primal recovery: tracks on which all subproblems agree
/// are fixed; the remaining tracks are resolved subject to the partition
/// constraints with bound = partial cost + per-track minima. Returns the STH
/// index per track; throws if no feasible completion exists.
std::vector<int> recover_primal(const MultiFrameProblem& p, const DualState& d);

double selection_cost(const MultiFrameProblem& p, const std::vector<int>& selection);

/// Relative duality gap (best_primal - dual) / |best_primal|.
double relative_gap(double best_primal, double dual);

struct IterationRecord {
  int iteration = 0;
  double dual = 0.0;
  double best_primal = 0.0;
  double gap = 0.0;
};

struct MultiFrameSolution {
  std::vector<int> selection;  // STH index per track
  double primal_cost = kInf;
  double dual_cost = -kInf;
  double gap = kInf;
  int iterations = 0;
  bool converged = false;
  std::vector<IterationRecord> trace;  // filled when record_trace is set
};

/// Dual-decomposition solve of the multi-frame problem: iterate subproblem
/// solves, primal recovery and subgradient steps until the relative gap drops
/// below eps_gap or max_iter is reached.
MultiFrameSolution solve(const MultiFrameProblem& p, double eps_gap, int max_iter,
                         bool record_trace = false);

}  // namespace trajmbm
