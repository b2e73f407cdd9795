#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "trajmbm/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

using namespace trajmbm;

namespace {

// Permutation brute force: cheapest injection of rows into columns.
double brute_force_assignment(const Mat& costs) {
  const int nr = static_cast<int>(costs.rows());
  const int nc = static_cast<int>(costs.cols());
  std::vector<int> cols(nc);
  std::iota(cols.begin(), cols.end(), 0);
  double best = kInf;
  do {
    double total = 0.0;
    for (int r = 0; r < nr; ++r) total += costs(r, cols[r]);
    best = std::min(best, total);
  } while (std::next_permutation(cols.begin(), cols.end()));
  return best;
}

double assignment_cost(const Mat& costs, const std::vector<int>& row_to_col) {
  double total = 0.0;
  for (std::size_t r = 0; r < row_to_col.size(); ++r) {
    total += costs(static_cast<int>(r), row_to_col[r]);
  }
  return total;
}

// Exhaustive oracle over all per-track STH selections subject to the
// partition constraints of the window.
struct Exhaustive {
  double best_cost = kInf;
  std::vector<int> best;
  long long feasible_count = 0;
};

bool selection_feasible(const MultiFrameProblem& p, const std::vector<int>& sel) {
  std::vector<MeasIndex> used;
  for (std::size_t t = 0; t < p.tracks.size(); ++t) {
    for (const MeasIndex& m : p.tracks[t].sths[sel[t]].meas_set) {
      if (std::find(used.begin(), used.end(), m) != used.end()) return false;
      used.push_back(m);
    }
  }
  std::vector<MeasIndex> claimable;
  for (const TrackCosts& t : p.tracks) {
    for (const SthCost& s : t.sths) {
      for (const MeasIndex& m : s.meas_set) {
        if (std::find(claimable.begin(), claimable.end(), m) == claimable.end()) {
          claimable.push_back(m);
        }
      }
    }
  }
  return used.size() == claimable.size();
}

Exhaustive enumerate_optimum(const MultiFrameProblem& p) {
  Exhaustive out;
  std::vector<int> sel(p.tracks.size(), 0);
  while (true) {
    if (selection_feasible(p, sel)) {
      ++out.feasible_count;
      const double cost = selection_cost(p, sel);
      if (cost < out.best_cost) {
        out.best_cost = cost;
        out.best = sel;
      }
    }
    int pos = static_cast<int>(sel.size()) - 1;
    while (pos >= 0) {
      if (++sel[pos] < static_cast<int>(p.tracks[pos].sths.size())) break;
      sel[pos] = 0;
      --pos;
    }
    if (pos < 0) break;
  }
  return out;
}

// Random instance with the structure the filter produces: pre-existing
// tracks always keep a no-measurement option, and every measurement owns a
// new track with a non-existence and a first-detection hypothesis.
MultiFrameProblem random_problem(std::mt19937_64& rng, int max_scans = 3,
                                 int max_meas = 3, int max_pre_tracks = 2) {
  std::uniform_int_distribution<int> scans_dist(1, max_scans);
  std::uniform_int_distribution<int> meas_dist(0, max_meas);
  std::uniform_real_distribution<double> cost_dist(-5.0, 5.0);
  std::uniform_real_distribution<double> coin(0.0, 1.0);

  MultiFrameProblem p;
  const int num_scans = scans_dist(rng);
  for (int s = 0; s < num_scans; ++s) {
    p.scans.push_back({10 + s, meas_dist(rng)});
  }

  int next_sth = 0;
  const int pre_tracks = std::uniform_int_distribution<int>(0, max_pre_tracks)(rng);
  for (int t = 0; t < pre_tracks; ++t) {
    TrackCosts tc;
    tc.track_id = t;
    tc.sths.push_back({next_sth++, cost_dist(rng), {}});  // all-miss chain
    const int extra = std::uniform_int_distribution<int>(1, 3)(rng);
    for (int e = 0; e < extra; ++e) {
      SthCost s{next_sth++, cost_dist(rng), {}};
      for (const ScanSlot& slot : p.scans) {
        if (slot.num_meas == 0 || coin(rng) < 0.4) continue;
        const int j = std::uniform_int_distribution<int>(0, slot.num_meas - 1)(rng);
        s.meas_set.push_back({slot.scan, j});
      }
      tc.sths.push_back(std::move(s));
    }
    p.tracks.push_back(std::move(tc));
  }
  int next_track = pre_tracks;
  for (const ScanSlot& slot : p.scans) {
    for (int j = 0; j < slot.num_meas; ++j) {
      TrackCosts tc;
      tc.track_id = next_track++;
      tc.sths.push_back({next_sth++, 0.0, {}});  // non-existence
      tc.sths.push_back({next_sth++, cost_dist(rng), {MeasIndex{slot.scan, j}}});
      p.tracks.push_back(std::move(tc));
    }
  }
  return p;
}

}  // namespace

TEST_CASE("auction 2x2 example against permutation brute force") {
  AssignmentMatrix m;
  m.costs = Mat{{1.0, 2.0}, {2.0, 1.0}};
  const auto assignment = solve_assignment(m);
  CHECK(assignment[0] == 0);
  CHECK(assignment[1] == 1);
  CHECK(assignment_cost(m.costs, assignment) ==
        doctest::Approx(brute_force_assignment(m.costs)));
}

TEST_CASE("auction respects forbidden entries") {
  AssignmentMatrix m;
  m.costs = Mat::Constant(3, 3, kInf);
  m.costs(0, 0) = 5.0;
  m.costs(1, 1) = 7.0;
  m.costs(2, 2) = 9.0;
  const auto assignment = solve_assignment(m);
  CHECK(assignment == std::vector<int>{0, 1, 2});
}

TEST_CASE("auction detects infeasible matrices") {
  AssignmentMatrix no_finite;
  no_finite.costs = Mat::Constant(2, 2, kInf);
  CHECK_THROWS_AS(solve_assignment(no_finite), std::runtime_error);

  AssignmentMatrix no_matching;
  no_matching.costs = Mat::Constant(2, 2, kInf);
  no_matching.costs(0, 0) = 1.0;
  no_matching.costs(1, 0) = 1.0;  // both rows need column 0
  CHECK_THROWS_AS(solve_assignment(no_matching), std::runtime_error);

  AssignmentMatrix too_many_rows;
  too_many_rows.costs = Mat::Zero(3, 2);
  CHECK_THROWS_AS(solve_assignment(too_many_rows), std::runtime_error);
}

TEST_CASE("auction equals brute force on random instances") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> cost(-10.0, 10.0);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = std::uniform_int_distribution<int>(1, 6)(rng);
    const int extra = std::uniform_int_distribution<int>(0, 2)(rng);
    AssignmentMatrix m;
    m.costs = Mat(n, n + extra);
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < n + extra; ++c) m.costs(r, c) = cost(rng);
    }
    const auto assignment = solve_assignment(m);
    std::vector<char> seen(static_cast<std::size_t>(n + extra), 0);
    for (int c : assignment) {
      CHECK_FALSE(seen[static_cast<std::size_t>(c)]);
      seen[static_cast<std::size_t>(c)] = 1;
    }
    CHECK(assignment_cost(m.costs, assignment) ==
          doctest::Approx(brute_force_assignment(m.costs)).epsilon(1e-9));
  }
}

TEST_CASE("build_subproblem entries") {
  // One scan (tau_w = 1), one measurement. Track 0 existed at the scan with a
  // matching STH (cost 3) and a no-measurement STH (cost 1); track 1 was
  // created later and never saw the measurement.
  MultiFrameProblem p;
  p.scans.push_back({5, 1});
  p.tracks.push_back({0, {{0, 1.0, {}}, {1, 3.0, {MeasIndex{5, 0}}}}});
  p.tracks.push_back({1, {{2, 0.0, {}}, {3, 2.0, {MeasIndex{6, 0}}}}});

  const DualState d = make_dual_state(p);
  const AssignmentMatrix m = build_subproblem(p, 0, d);
  REQUIRE(m.rows() == 1);
  REQUIRE(m.cols() == 2);
  CHECK(m.costs(0, 0) == doctest::Approx(2.0));  // 3 - 1
  CHECK(m.costs(0, 1) == kInf);                  // never updated by scan-5 measurement
}

TEST_CASE("zero multipliers and a one-scan window reproduce the plain 2-D costs") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> cost(-4.0, 4.0);
  MultiFrameProblem p;
  p.scans.push_back({3, 2});
  for (int t = 0; t < 3; ++t) {
    TrackCosts tc;
    tc.track_id = t;
    tc.sths.push_back({3 * t, cost(rng), {}});
    tc.sths.push_back({3 * t + 1, cost(rng), {MeasIndex{3, 0}}});
    tc.sths.push_back({3 * t + 2, cost(rng), {MeasIndex{3, 1}}});
    p.tracks.push_back(std::move(tc));
  }
  const DualState d = make_dual_state(p);
  const AssignmentMatrix m = build_subproblem(p, 0, d);
  for (int j = 0; j < 2; ++j) {
    for (int t = 0; t < 3; ++t) {
      const double direct = p.tracks[t].sths[j + 1].cost - p.tracks[t].sths[0].cost;
      CHECK(m.costs(j, t) == doctest::Approx(direct));
    }
  }
}

TEST_CASE("solve_subproblem equals brute force over the slot constraints") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    MultiFrameProblem p = random_problem(rng, 2, 2, 2);
    DualState d = make_dual_state(p);
    std::uniform_real_distribution<double> noise(-1.0, 1.0);
    for (auto& track : d.delta[0]) {
      for (double& v : track) v = noise(rng);
    }
    solve_subproblem(p, 0, d);

    // Oracle: enumerate every selection obeying the slot's constraints.
    const int scan = p.scans[0].scan;
    std::vector<int> sel(p.tracks.size(), 0);
    double best = kInf;
    while (true) {
      bool ok = true;
      std::vector<int> claimed(static_cast<std::size_t>(p.scans[0].num_meas), 0);
      double total = 0.0;
      for (std::size_t t = 0; t < p.tracks.size() && ok; ++t) {
        const SthCost& s = p.tracks[t].sths[sel[t]];
        total += s.cost / static_cast<double>(p.scans.size()) + d.delta[0][t][sel[t]];
        for (const MeasIndex& m : s.meas_set) {
          if (m.scan == scan) {
            if (++claimed[static_cast<std::size_t>(m.index)] > 1) ok = false;
          }
        }
      }
      if (ok) {
        for (std::size_t j = 0; j < claimed.size(); ++j) {
          bool claimable = false;
          for (const TrackCosts& t : p.tracks) {
            for (const SthCost& s : t.sths) {
              for (const MeasIndex& m : s.meas_set) {
                if (m.scan == scan && m.index == static_cast<int>(j)) claimable = true;
              }
            }
          }
          if (claimable && claimed[j] != 1) ok = false;
        }
      }
      if (ok) best = std::min(best, total);
      int pos = static_cast<int>(sel.size()) - 1;
      while (pos >= 0) {
        if (++sel[pos] < static_cast<int>(p.tracks[pos].sths.size())) break;
        sel[pos] = 0;
        --pos;
      }
      if (pos < 0) break;
    }
    CHECK(d.subproblem_cost[0] == doctest::Approx(best).epsilon(1e-6));
  }
}

TEST_CASE("non-existence STH is selected at zero cost for unassigned new tracks") {
  MultiFrameProblem p;
  p.scans.push_back({1, 1});
  p.tracks.push_back({0, {{0, 0.0, {}}, {1, 4.0, {MeasIndex{1, 0}}}}});
  p.tracks.push_back({1, {{2, 0.0, {}}, {3, -2.0, {MeasIndex{1, 0}}}}});
  DualState d = make_dual_state(p);
  solve_subproblem(p, 0, d);
  CHECK(d.rho[0][0] == 0);  // non-existence, cost 0 (w = 1)
  CHECK(d.rho[0][1] == 1);
  CHECK(d.subproblem_cost[0] == doctest::Approx(-2.0));
}

TEST_CASE("subgradient arithmetic on a two-slot disagreement") {
  // One track, two STHs, two slots that disagree: g(slot 0, sth 0) = 1 - 1/2
  // and the step is (best primal - dual) / ||g||^2 = (10 - 8) / 1 = 2.
  MultiFrameProblem p;
  p.scans.push_back({1, 1});
  p.scans.push_back({2, 1});
  p.tracks.push_back({0,
                      {{0, 1.0, {MeasIndex{1, 0}, MeasIndex{2, 0}}},
                       {1, 2.0, {MeasIndex{1, 0}}}}});
  DualState d = make_dual_state(p);
  d.rho = {{0}, {1}};
  d.best_primal = 10.0;
  d.dual_cost = 8.0;
  REQUIRE(subgradient_step(p, d));
  CHECK(d.delta[0][0][0] == doctest::Approx(1.0));
  CHECK(d.delta[1][0][0] == doctest::Approx(-1.0));
  CHECK(d.delta[0][0][1] == doctest::Approx(-1.0));
  CHECK(d.delta[1][0][1] == doctest::Approx(1.0));
  for (std::size_t a = 0; a < 2; ++a) {
    CHECK(d.delta[0][0][a] + d.delta[1][0][a] == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("consensus is a subgradient fixed point") {
  MultiFrameProblem p;
  p.scans.push_back({1, 0});
  p.scans.push_back({2, 0});
  p.tracks.push_back({0, {{0, 1.0, {}}, {1, 2.0, {}}}});
  DualState d = make_dual_state(p);
  d.rho = {{0}, {0}};
  d.best_primal = 1.0;
  d.dual_cost = 1.0;
  CHECK_FALSE(subgradient_step(p, d));
  CHECK(d.delta[0][0][0] == 0.0);
}

TEST_CASE("relative gap arithmetic") {
  CHECK(relative_gap(10.0, 9.0) == doctest::Approx(0.1));
  CHECK(relative_gap(10.0, 10.0) == 0.0);
  CHECK(relative_gap(10.0, 11.0) == 0.0);  // numerical overshoot clamps to zero
}

TEST_CASE("recover_primal fixes agreeing tracks and repairs conflicts") {
  SUBCASE("full agreement returned unchanged") {
    MultiFrameProblem p;
    p.scans.push_back({1, 1});
    p.scans.push_back({2, 0});
    p.tracks.push_back({0, {{0, 0.0, {}}, {1, -1.0, {MeasIndex{1, 0}}}}});
    DualState d = make_dual_state(p);
    d.rho = {{1}, {1}};
    const auto sel = recover_primal(p, d);
    CHECK(sel == std::vector<int>{1});
  }

  SUBCASE("two-leaf conflict resolved to the cheaper feasible option") {
    MultiFrameProblem p;
    p.scans.push_back({1, 1});
    p.scans.push_back({2, 0});
    p.tracks.push_back({0, {{0, 3.0, {}}, {1, 1.0, {MeasIndex{1, 0}}}}});
    p.tracks.push_back({1, {{2, 0.0, {}}, {3, 5.0, {MeasIndex{1, 0}}}}});
    DualState d = make_dual_state(p);
    d.rho = {{1, 0}, {0, 0}};  // the slots disagree on track 0
    const auto sel = recover_primal(p, d);
    CHECK(sel == std::vector<int>{1, 0});  // cost 1 beats 3 + 5
  }
}

TEST_CASE("recover_primal cost brackets: above dual, at or above optimum") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 60; ++trial) {
    MultiFrameProblem p = random_problem(rng);
    const Exhaustive oracle = enumerate_optimum(p);
    REQUIRE(oracle.feasible_count > 0);

    DualState d = make_dual_state(p);
    for (std::size_t s = 0; s < p.scans.size(); ++s) {
      solve_subproblem(p, static_cast<int>(s), d);
    }
    d.dual_cost = 0.0;
    for (double c : d.subproblem_cost) d.dual_cost += c;

    const auto sel = recover_primal(p, d);
    const double cost = selection_cost(p, sel);
    CHECK(selection_feasible(p, sel));
    CHECK(cost >= oracle.best_cost - 1e-9);
    CHECK(cost >= d.dual_cost - 1e-6);
  }
}

TEST_CASE("solve: single-scan window converges in one iteration with zero gap") {
  std::mt19937_64 rng(41);
  MultiFrameProblem p = random_problem(rng, 1, 3, 2);
  const MultiFrameSolution sol = solve(p, 0.01, 50);
  CHECK(sol.iterations == 1);
  CHECK(sol.converged);
  CHECK(sol.gap == doctest::Approx(0.0).epsilon(1e-9));
  const Exhaustive oracle = enumerate_optimum(p);
  CHECK(sol.primal_cost == doctest::Approx(oracle.best_cost).epsilon(1e-6));
}

TEST_CASE("solve matches exhaustive enumeration within the gap tolerance") {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 60; ++trial) {
    MultiFrameProblem p = random_problem(rng);
    const Exhaustive oracle = enumerate_optimum(p);
    REQUIRE(oracle.feasible_count > 0);

    const MultiFrameSolution sol = solve(p, 0.01, 300, /*record_trace=*/true);
    CHECK(selection_feasible(p, sol.selection));
    CHECK(sol.primal_cost >= oracle.best_cost - 1e-9);
    CHECK(sol.primal_cost - oracle.best_cost <=
          0.01 * std::max(1.0, std::abs(oracle.best_cost)) + 1e-9);

    for (const IterationRecord& rec : sol.trace) {
      CHECK(rec.dual <= rec.best_primal + 1e-6);
      CHECK(rec.dual <= oracle.best_cost + 1e-6);
    }
  }
}

TEST_CASE("per-track cost shifts move every hypothesis cost equally") {
  std::mt19937_64 rng(47);
  MultiFrameProblem p = random_problem(rng, 2, 2, 2);
  const Exhaustive before = enumerate_optimum(p);
  REQUIRE(before.feasible_count > 0);

  MultiFrameProblem shifted = p;
  double shift_total = 0.0;
  std::uniform_real_distribution<double> shift_dist(-3.0, 3.0);
  for (TrackCosts& t : shifted.tracks) {
    const double shift = shift_dist(rng);
    shift_total += shift;
    for (SthCost& s : t.sths) s.cost += shift;
  }
  const Exhaustive after = enumerate_optimum(shifted);
  CHECK(after.best_cost == doctest::Approx(before.best_cost + shift_total).epsilon(1e-9));
  CHECK(after.best == before.best);

  const MultiFrameSolution sol_before = solve(p, 1e-4, 500);
  const MultiFrameSolution sol_after = solve(shifted, 1e-4, 500);
  CHECK(selection_cost(shifted, sol_after.selection) ==
        doctest::Approx(selection_cost(p, sol_before.selection) + shift_total)
            .epsilon(1e-4));
}
