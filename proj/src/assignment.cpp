#include "trajmbm/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <map>
#include <set>
#include <stdexcept>

namespace trajmbm {

namespace {

// Hopcroft-style augmenting-path matching on the finite entries, used to
// reject infeasible instances before bidding starts.
bool perfect_row_matching(const AssignmentMatrix& m) {
  const int nr = m.rows();
  const int nc = m.cols();
  if (nr > nc) return false;
  std::vector<int> col_owner(nc, -1);
  std::vector<char> visited(nc);
  std::function<bool(int)> augment = [&](int row) -> bool {
    for (int c = 0; c < nc; ++c) {
      if (visited[c] || !std::isfinite(m.costs(row, c))) continue;
      visited[c] = 1;
      if (col_owner[c] == -1 || augment(col_owner[c])) {
        col_owner[c] = row;
        return true;
      }
    }
    return false;
  };
  for (int r = 0; r < nr; ++r) {
    std::fill(visited.begin(), visited.end(), 0);
    if (!augment(r)) return false;
  }
  return true;
}

}  // namespace

std::vector<int> auction_solve(const AssignmentMatrix& m, double eps,
                               std::vector<double>* price_io) {
  const int nr = m.rows();
  const int nc = m.cols();
  if (nr == 0) return {};
  if (eps <= 0.0) throw std::invalid_argument("auction_solve: eps must be positive");
  for (int r = 0; r < nr; ++r) {
    bool any = false;
    for (int c = 0; c < nc; ++c) {
      if (std::isfinite(m.costs(r, c))) {
        any = true;
        break;
      }
    }
    if (!any) throw std::runtime_error("auction_solve: row without finite entry");
  }
  if (!perfect_row_matching(m)) {
    throw std::runtime_error("auction_solve: infeasible assignment matrix");
  }

  double lo = kInf, hi = -kInf;
  for (int r = 0; r < nr; ++r) {
    for (int c = 0; c < nc; ++c) {
      const double v = m.costs(r, c);
      if (std::isfinite(v)) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
  }
  const double range = std::max(1.0, hi - lo);

  // Pad to a square problem with zero-cost dummy rows; a column taken by a
  // dummy row is simply unassigned. The plain forward auction is only exact
  // when every column is bid on.
  const int n = nc;
  auto cost_at = [&](int row, int col) {
    return row < nr ? m.costs(row, col) : 0.0;
  };

  const bool warm = price_io != nullptr && price_io->size() == static_cast<std::size_t>(nc);
  std::vector<double> price(static_cast<std::size_t>(n), 0.0);
  if (warm) price = *price_io;
  std::vector<int> row_to_col(static_cast<std::size_t>(n), -1);
  std::vector<int> col_to_row(static_cast<std::size_t>(n), -1);

  double phase_eps = warm ? eps : std::max(eps, range / 4.0);
  while (true) {
    std::fill(row_to_col.begin(), row_to_col.end(), -1);
    std::fill(col_to_row.begin(), col_to_row.end(), -1);
    std::deque<int> unassigned;
    for (int r = 0; r < n; ++r) unassigned.push_back(r);

    while (!unassigned.empty()) {
      const int row = unassigned.front();
      unassigned.pop_front();
      double best = -kInf, second = -kInf;
      int best_col = -1;
      for (int c = 0; c < n; ++c) {
        const double cost = cost_at(row, c);
        if (!std::isfinite(cost)) continue;
        const double value = -cost - price[c];
        if (value > best) {
          second = best;
          best = value;
          best_col = c;
        } else if (value > second) {
          second = value;
        }
      }
      // A single finite option still needs a decisive bid.
      if (second == -kInf) second = best - range - phase_eps;
      price[best_col] += (best - second) + phase_eps;
      if (col_to_row[best_col] != -1) {
        row_to_col[col_to_row[best_col]] = -1;
        unassigned.push_back(col_to_row[best_col]);
      }
      col_to_row[best_col] = row;
      row_to_col[row] = best_col;
    }

    if (phase_eps <= eps) break;
    phase_eps = std::max(eps, phase_eps / 4.0);
  }
  if (price_io != nullptr) *price_io = price;
  row_to_col.resize(static_cast<std::size_t>(nr));
  return row_to_col;
}

std::vector<int> solve_assignment(const AssignmentMatrix& m,
                                  std::vector<double>* price_io) {
  const int nr = m.rows();
  if (nr == 0) return {};
  double lo = kInf, hi = -kInf;
  for (int r = 0; r < nr; ++r) {
    for (int c = 0; c < m.cols(); ++c) {
      const double v = m.costs(r, c);
      if (std::isfinite(v)) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
  }
  if (!std::isfinite(lo)) throw std::runtime_error("solve_assignment: no finite entries");
  const double range = std::max(1.0, hi - lo);

  // Integerize so that all values (and the prices they induce) stay exactly
  // representable in doubles. The auction runs on the column-padded square
  // problem, so scaling by cols+1 makes the final eps = 1 exact.
  const int n = static_cast<int>(m.cols());
  const double scale = 1e14 / ((n + 1) * range);
  AssignmentMatrix scaled;
  scaled.costs = Mat::Constant(nr, m.cols(), kInf);
  for (int r = 0; r < nr; ++r) {
    for (int c = 0; c < m.cols(); ++c) {
      const double v = m.costs(r, c);
      if (std::isfinite(v)) {
        scaled.costs(r, c) = std::round((v - lo) * scale) * (n + 1);
      }
    }
  }

  // Warm prices carry over between calls in raw cost units; starting prices
  // do not affect the eps-CS optimality of the result, only the bid count.
  std::vector<double> scaled_prices;
  if (price_io != nullptr && price_io->size() == static_cast<std::size_t>(n)) {
    scaled_prices.resize(static_cast<std::size_t>(n));
    for (int c = 0; c < n; ++c) {
      scaled_prices[static_cast<std::size_t>(c)] =
          std::round((*price_io)[static_cast<std::size_t>(c)] * scale) * (n + 1);
    }
  }
  const std::vector<int> result =
      auction_solve(scaled, 1.0, scaled_prices.empty() ? nullptr : &scaled_prices);
  if (price_io != nullptr) {
    price_io->assign(static_cast<std::size_t>(n), 0.0);
    if (!scaled_prices.empty()) {
      for (int c = 0; c < n; ++c) {
        (*price_io)[static_cast<std::size_t>(c)] =
            scaled_prices[static_cast<std::size_t>(c)] / (scale * (n + 1));
      }
    }
  }
  return result;
}

namespace {

// Per-slot lookup tables: STH indices of each track that contain measurement
// (k, j), and those that contain no scan-k measurement at all.
struct SlotIndex {
  std::vector<std::vector<std::vector<int>>> with;  // [track][j] -> sth indices
  std::vector<std::vector<int>> without;            // [track] -> sth indices
};

SlotIndex index_slot(const MultiFrameProblem& p, int slot) {
  const int scan = p.scans[slot].scan;
  const int m = p.scans[slot].num_meas;
  SlotIndex idx;
  idx.with.resize(p.tracks.size());
  idx.without.resize(p.tracks.size());
  for (std::size_t t = 0; t < p.tracks.size(); ++t) {
    idx.with[t].assign(m, {});
    for (std::size_t a = 0; a < p.tracks[t].sths.size(); ++a) {
      const SthCost& s = p.tracks[t].sths[a];
      int j = -1;
      for (const MeasIndex& mi : s.meas_set) {
        if (mi.scan == scan) {
          j = mi.index;
          break;
        }
      }
      if (j < 0) {
        idx.without[t].push_back(static_cast<int>(a));
      } else if (j < m) {
        idx.with[t][j].push_back(static_cast<int>(a));
      }
    }
  }
  return idx;
}

struct SubproblemParts {
  AssignmentMatrix matrix;                   // rows x claimant columns
  std::vector<int> base_arg;                 // argmin no-measurement STH per track
  std::vector<double> base_cost;             // +inf when forced
  std::vector<std::vector<int>> with_arg;    // [track][j] argmin
  std::vector<std::vector<double>> with_cost;
  std::vector<int> rows;                     // measurement j per matrix row
  std::vector<int> cols;                     // track index per matrix column
};

SubproblemParts build_subproblem_parts(const MultiFrameProblem& p, int slot,
                                       const DualState& d, const SlotIndex& idx) {
  const int num_tracks = static_cast<int>(p.tracks.size());
  const int m = p.scans[slot].num_meas;
  const double tau_w = static_cast<double>(p.scans.size());

  SubproblemParts parts;
  parts.base_arg.assign(num_tracks, -1);
  parts.base_cost.assign(num_tracks, kInf);
  parts.with_arg.assign(num_tracks, std::vector<int>(m, -1));
  parts.with_cost.assign(num_tracks, std::vector<double>(m, kInf));

  auto penalized = [&](int t, int a) {
    return p.tracks[t].sths[a].cost / tau_w + d.delta[slot][t][a];
  };

  for (int t = 0; t < num_tracks; ++t) {
    for (int a : idx.without[t]) {
      const double c = penalized(t, a);
      if (c < parts.base_cost[t]) {
        parts.base_cost[t] = c;
        parts.base_arg[t] = a;
      }
    }
    bool claimant = false;
    for (int j = 0; j < m; ++j) {
      for (int a : idx.with[t][j]) {
        claimant = true;
        const double c = penalized(t, a);
        if (c < parts.with_cost[t][j]) {
          parts.with_cost[t][j] = c;
          parts.with_arg[t][j] = a;
        }
      }
    }
    if (claimant) parts.cols.push_back(t);
  }

  // Rows only for measurements claimed by at least one STH.
  for (int j = 0; j < m; ++j) {
    bool claimable = false;
    for (int t = 0; t < num_tracks && !claimable; ++t) {
      claimable = !idx.with[t][j].empty();
    }
    if (claimable) parts.rows.push_back(j);
  }

  // Tracks whose every STH claims some scan-k measurement have no finite
  // baseline. Their columns get a bonus large enough that covering them
  // dominates any rearrangement of true costs, yet small enough to keep the
  // integer resolution of the auction.
  double lo = kInf, hi = -kInf;
  for (int t : parts.cols) {
    if (std::isfinite(parts.base_cost[t])) {
      lo = std::min(lo, parts.base_cost[t]);
      hi = std::max(hi, parts.base_cost[t]);
    }
    for (int j : parts.rows) {
      if (parts.with_arg[t][j] >= 0) {
        lo = std::min(lo, parts.with_cost[t][j]);
        hi = std::max(hi, parts.with_cost[t][j]);
      }
    }
  }
  const double spread = std::max(1.0, hi - lo);
  const double forced_baseline =
      lo + (3.0 * static_cast<double>(parts.rows.size()) + 4.0) * spread;

  parts.matrix.costs =
      Mat::Constant(static_cast<int>(parts.rows.size()),
                    static_cast<int>(parts.cols.size()), kInf);
  for (std::size_t r = 0; r < parts.rows.size(); ++r) {
    const int j = parts.rows[r];
    for (std::size_t c = 0; c < parts.cols.size(); ++c) {
      const int t = parts.cols[c];
      if (parts.with_arg[t][j] < 0) continue;
      const double baseline =
          std::isfinite(parts.base_cost[t]) ? parts.base_cost[t] : forced_baseline;
      parts.matrix.costs(static_cast<int>(r), static_cast<int>(c)) =
          parts.with_cost[t][j] - baseline;
    }
  }
  return parts;
}

void solve_subproblem_impl(const MultiFrameProblem& p, int slot, DualState& d,
                           const SlotIndex& idx) {
  SubproblemParts parts = build_subproblem_parts(p, slot, d, idx);
  const int num_tracks = static_cast<int>(p.tracks.size());
  const double tau_w = static_cast<double>(p.scans.size());

  std::vector<int> row_to_col = solve_assignment(parts.matrix);

  std::vector<int>& rho = d.rho[slot];
  rho.assign(num_tracks, -1);
  for (std::size_t r = 0; r < row_to_col.size(); ++r) {
    const int t = parts.cols[static_cast<std::size_t>(row_to_col[r])];
    rho[t] = parts.with_arg[t][parts.rows[r]];
  }
  for (int t = 0; t < num_tracks; ++t) {
    if (rho[t] >= 0) continue;
    if (parts.base_arg[t] < 0) {
      throw std::logic_error("solve_subproblem: forced track left unassigned");
    }
    rho[t] = parts.base_arg[t];
  }

  double value = 0.0;
  for (int t = 0; t < num_tracks; ++t) {
    value += p.tracks[t].sths[rho[t]].cost / tau_w + d.delta[slot][t][rho[t]];
  }
  d.subproblem_cost[slot] = value;
}

}  // namespace

DualState make_dual_state(const MultiFrameProblem& p) {
  DualState d;
  d.delta.resize(p.scans.size());
  d.rho.assign(p.scans.size(), std::vector<int>(p.tracks.size(), -1));
  d.subproblem_cost.assign(p.scans.size(), 0.0);
  for (auto& slot : d.delta) {
    slot.resize(p.tracks.size());
    for (std::size_t t = 0; t < p.tracks.size(); ++t) {
      slot[t].assign(p.tracks[t].sths.size(), 0.0);
    }
  }
  return d;
}

AssignmentMatrix build_subproblem(const MultiFrameProblem& p, int slot, const DualState& d) {
  const SlotIndex idx = index_slot(p, slot);
  const SubproblemParts parts = build_subproblem_parts(p, slot, d, idx);
  AssignmentMatrix full;
  full.costs = Mat::Constant(static_cast<int>(parts.rows.size()),
                             static_cast<int>(p.tracks.size()), kInf);
  for (std::size_t c = 0; c < parts.cols.size(); ++c) {
    full.costs.col(parts.cols[c]) = parts.matrix.costs.col(static_cast<int>(c));
  }
  return full;
}

void solve_subproblem(const MultiFrameProblem& p, int slot, DualState& d) {
  const SlotIndex idx = index_slot(p, slot);
  solve_subproblem_impl(p, slot, d, idx);
}

bool subgradient_step(const MultiFrameProblem& p, DualState& d) {
  const int num_slots = static_cast<int>(p.scans.size());
  const double tau_w = static_cast<double>(num_slots);

  double g_norm_sq = 0.0;
  for (std::size_t t = 0; t < p.tracks.size(); ++t) {
    std::map<int, int> times_selected;
    for (int s = 0; s < num_slots; ++s) ++times_selected[d.rho[s][t]];
    for (const auto& [a, n] : times_selected) {
      (void)a;
      g_norm_sq += static_cast<double>(n) * (tau_w - n) / tau_w;
    }
  }
  if (g_norm_sq == 0.0) return false;

  const double step =
      std::max(0.0, (d.best_primal - d.dual_cost) / g_norm_sq);
  for (std::size_t t = 0; t < p.tracks.size(); ++t) {
    std::vector<double> avg(p.tracks[t].sths.size(), 0.0);
    for (int s = 0; s < num_slots; ++s) avg[d.rho[s][t]] += 1.0 / tau_w;
    for (int s = 0; s < num_slots; ++s) {
      for (std::size_t a = 0; a < p.tracks[t].sths.size(); ++a) {
        const double g = (d.rho[s][t] == static_cast<int>(a) ? 1.0 : 0.0) - avg[a];
        d.delta[s][t][a] += step * g;
      }
    }
  }
  return true;
}

double selection_cost(const MultiFrameProblem& p, const std::vector<int>& selection) {
  double cost = 0.0;
  for (std::size_t t = 0; t < p.tracks.size(); ++t) {
    cost += p.tracks[t].sths[selection[t]].cost;
  }
  return cost;
}

double relative_gap(double best_primal, double dual) {
  const double diff = best_primal - dual;
  if (diff <= 0.0) return 0.0;
  return diff / std::max(std::abs(best_primal), 1e-9);
}

namespace {

// Problem-constant tables for primal recovery, built once per solve.
struct PrimalContext {
  std::vector<std::vector<std::vector<int>>> claims;  // [track][sth] -> meas ids
  std::vector<std::vector<std::pair<int, int>>> options;  // [meas id] -> (track, sth)
  std::vector<double> any_min;    // per track, over all STHs
  std::vector<double> empty_min;  // per track, over claim-free STHs (inf if none)
  std::vector<int> empty_arg;
  std::vector<int> forced;  // tracks with no claim-free STH
  int num_meas = 0;
};

PrimalContext make_primal_context(const MultiFrameProblem& p) {
  PrimalContext ctx;
  std::map<MeasIndex, int> meas_id;
  for (const TrackCosts& track : p.tracks) {
    for (const SthCost& s : track.sths) {
      for (const MeasIndex& m : s.meas_set) {
        meas_id.emplace(m, static_cast<int>(meas_id.size()));
      }
    }
  }
  ctx.num_meas = static_cast<int>(meas_id.size());
  const std::size_t num_tracks = p.tracks.size();

  ctx.claims.resize(num_tracks);
  ctx.options.assign(static_cast<std::size_t>(ctx.num_meas), {});
  ctx.any_min.assign(num_tracks, 0.0);
  ctx.empty_min.assign(num_tracks, kInf);
  ctx.empty_arg.assign(num_tracks, -1);
  for (std::size_t t = 0; t < num_tracks; ++t) {
    ctx.claims[t].resize(p.tracks[t].sths.size());
    double mn = kInf;
    for (std::size_t a = 0; a < p.tracks[t].sths.size(); ++a) {
      const SthCost& s = p.tracks[t].sths[a];
      mn = std::min(mn, s.cost);
      for (const MeasIndex& m : s.meas_set) {
        const int id = meas_id.at(m);
        ctx.claims[t][a].push_back(id);
        ctx.options[static_cast<std::size_t>(id)].emplace_back(static_cast<int>(t),
                                                               static_cast<int>(a));
      }
      if (s.meas_set.empty() && s.cost < ctx.empty_min[t]) {
        ctx.empty_min[t] = s.cost;
        ctx.empty_arg[t] = static_cast<int>(a);
      }
    }
    ctx.any_min[t] = mn;
    if (ctx.empty_arg[t] < 0) ctx.forced.push_back(static_cast<int>(t));
  }
  return ctx;
}

// Coverage-driven branch and bound over densely indexed measurements: branch
// on the uncovered measurement with the fewest live claimants (taking forced
// ones immediately); once everything is covered, undecided tracks take their
// cheapest claim-free hypothesis. Bound = cost so far + per-track minima.
struct CoverSearch {
  const MultiFrameProblem& p;
  const PrimalContext& ctx;
  std::vector<int> selection;  // -1 = undecided
  std::vector<char> used;      // by meas id
  std::vector<int> uncovered;  // meas ids, lazily filtered through `used`
  std::vector<int> forced;     // open forced tracks
  double best_cost = kInf;
  std::vector<int> best;
  long long nodes = 0;
  static constexpr long long kNodeCap = 20'000;

  CoverSearch(const MultiFrameProblem& prob, const PrimalContext& context)
      : p(prob), ctx(context) {}

  bool conflicts(int t, int a) const {
    for (int id : ctx.claims[static_cast<std::size_t>(t)][static_cast<std::size_t>(a)]) {
      if (used[static_cast<std::size_t>(id)]) return true;
    }
    return false;
  }

  void complete(double cost) {
    double total = cost;
    for (std::size_t t = 0; t < p.tracks.size(); ++t) {
      if (selection[t] >= 0) continue;
      if (!std::isfinite(ctx.empty_min[t])) return;  // forced track left unassigned
      total += ctx.empty_min[t];
    }
    if (total >= best_cost) return;
    best_cost = total;
    best = selection;
    for (std::size_t t = 0; t < p.tracks.size(); ++t) {
      if (best[t] < 0) best[t] = ctx.empty_arg[t];
    }
  }

  void search(double cost, double bound) {
    if (++nodes > kNodeCap) return;
    if (cost + bound >= best_cost) return;

    // Most constrained entity first: an uncovered measurement or an
    // undecided forced track, whichever has fewer live options. Zero live
    // options is a dead end, one is a unit propagation.
    int pick_meas = -1;
    int meas_count = 0;
    for (int id : uncovered) {
      if (used[static_cast<std::size_t>(id)]) continue;
      int count = 0;
      for (const auto& [t, a] : ctx.options[static_cast<std::size_t>(id)]) {
        if (selection[static_cast<std::size_t>(t)] < 0 && !conflicts(t, a)) ++count;
      }
      if (pick_meas < 0 || count < meas_count) {
        pick_meas = id;
        meas_count = count;
      }
      if (count <= 1) break;
    }
    int pick_track = -1;
    int track_count = 0;
    if (pick_meas < 0 || meas_count > 1) {
      for (int t : forced) {
        if (selection[static_cast<std::size_t>(t)] >= 0) continue;
        int count = 0;
        for (std::size_t a = 0; a < p.tracks[static_cast<std::size_t>(t)].sths.size(); ++a) {
          if (!conflicts(t, static_cast<int>(a))) ++count;
        }
        if (pick_track < 0 || count < track_count) {
          pick_track = t;
          track_count = count;
        }
        if (count <= 1) break;
      }
    }
    if (pick_meas < 0 && pick_track < 0) {
      complete(cost);
      return;
    }

    std::vector<std::pair<int, int>> live;
    if (pick_track >= 0 && (pick_meas < 0 || track_count < meas_count)) {
      if (track_count == 0) return;
      for (std::size_t a = 0; a < p.tracks[static_cast<std::size_t>(pick_track)].sths.size(); ++a) {
        if (!conflicts(pick_track, static_cast<int>(a))) {
          live.emplace_back(pick_track, static_cast<int>(a));
        }
      }
    } else {
      if (meas_count == 0) return;
      for (const auto& [t, a] : ctx.options[static_cast<std::size_t>(pick_meas)]) {
        if (selection[static_cast<std::size_t>(t)] < 0 && !conflicts(t, a)) {
          live.emplace_back(t, a);
        }
      }
    }
    std::sort(live.begin(), live.end(), [&](const auto& x, const auto& y) {
      return p.tracks[static_cast<std::size_t>(x.first)].sths[static_cast<std::size_t>(x.second)].cost <
             p.tracks[static_cast<std::size_t>(y.first)].sths[static_cast<std::size_t>(y.second)].cost;
    });

    for (const auto& [t, a] : live) {
      const SthCost& s = p.tracks[static_cast<std::size_t>(t)].sths[static_cast<std::size_t>(a)];
      selection[static_cast<std::size_t>(t)] = a;
      const auto& ids = ctx.claims[static_cast<std::size_t>(t)][static_cast<std::size_t>(a)];
      for (int id : ids) used[static_cast<std::size_t>(id)] = 1;
      search(cost + s.cost, bound - ctx.any_min[static_cast<std::size_t>(t)]);
      for (int id : ids) used[static_cast<std::size_t>(id)] = 0;
      selection[static_cast<std::size_t>(t)] = -1;
    }
  }
};

// Seeding with the incumbent keeps the bound tight from the first node; the
// search then only explores improvements.
std::vector<int> recover_primal_impl(const MultiFrameProblem& p, const DualState& d,
                                     const PrimalContext& ctx,
                                     const std::vector<int>* seed, double seed_cost) {
  const int num_tracks = static_cast<int>(p.tracks.size());
  const int num_slots = static_cast<int>(p.scans.size());
  if (num_tracks == 0) return {};

  auto attempt = [&](bool fix_consensus) -> std::vector<int> {
    CoverSearch cs(p, ctx);
    cs.selection.assign(static_cast<std::size_t>(num_tracks), -1);
    cs.used.assign(static_cast<std::size_t>(ctx.num_meas), 0);
    if (seed != nullptr) {
      cs.best = *seed;
      cs.best_cost = seed_cost;
    }

    double fixed_cost = 0.0;
    bool conflict = false;
    for (int t = 0; t < num_tracks && !conflict; ++t) {
      bool consensus = d.rho[0][t] >= 0;
      for (int s = 1; consensus && s < num_slots; ++s) {
        consensus = (d.rho[s][t] == d.rho[0][t]);
      }
      if (fix_consensus && consensus) {
        cs.selection[static_cast<std::size_t>(t)] = d.rho[0][t];
        fixed_cost += p.tracks[t].sths[d.rho[0][t]].cost;
        for (int id :
             ctx.claims[static_cast<std::size_t>(t)][static_cast<std::size_t>(d.rho[0][t])]) {
          if (cs.used[static_cast<std::size_t>(id)]) {
            conflict = true;  // fixed tracks clash; fall back to the seed
            break;
          }
          cs.used[static_cast<std::size_t>(id)] = 1;
        }
      }
    }
    if (conflict) return cs.best;

    double open_bound = 0.0;
    for (int t = 0; t < num_tracks; ++t) {
      if (cs.selection[static_cast<std::size_t>(t)] < 0) {
        open_bound += ctx.any_min[static_cast<std::size_t>(t)];
      }
    }
    for (int id = 0; id < ctx.num_meas; ++id) {
      if (cs.used[static_cast<std::size_t>(id)]) continue;
      bool live = false;
      for (const auto& [t, a] : ctx.options[static_cast<std::size_t>(id)]) {
        if (cs.selection[static_cast<std::size_t>(t)] < 0) {
          live = true;
          break;
        }
      }
      if (!live) return cs.best;  // a fixed choice orphaned this measurement
      cs.uncovered.push_back(id);
    }
    for (int t : ctx.forced) {
      if (cs.selection[static_cast<std::size_t>(t)] < 0) cs.forced.push_back(t);
    }

    cs.search(fixed_cost, open_bound);
    return cs.best;
  };

  std::vector<int> sel = attempt(true);
  if (sel.empty()) sel = attempt(false);
  if (sel.empty()) {
    throw std::runtime_error("recover_primal: no feasible completion");
  }
  return sel;
}

}  // namespace

std::vector<int> recover_primal(const MultiFrameProblem& p, const DualState& d) {
  const PrimalContext ctx = make_primal_context(p);
  return recover_primal_impl(p, d, ctx, nullptr, kInf);
}

MultiFrameSolution solve(const MultiFrameProblem& p, double eps_gap, int max_iter,
                         bool record_trace) {
  if (eps_gap <= 0.0) throw std::invalid_argument("solve: eps_gap must be positive");
  if (p.tracks.empty()) {
    MultiFrameSolution empty;
    empty.primal_cost = 0.0;
    empty.dual_cost = 0.0;
    empty.gap = 0.0;
    empty.converged = true;
    return empty;
  }

  DualState d = make_dual_state(p);
  std::vector<SlotIndex> indices;
  indices.reserve(p.scans.size());
  for (std::size_t s = 0; s < p.scans.size(); ++s) {
    indices.push_back(index_slot(p, static_cast<int>(s)));
  }
  const PrimalContext primal_ctx = make_primal_context(p);

  MultiFrameSolution out;
  double best_dual = -kInf;
  int stalled = 0;
  constexpr int kStallLimit = 30;  // neither bound moved: stop early

  for (int iter = 1; iter <= max_iter; ++iter) {
    d.iteration = iter;
    for (std::size_t s = 0; s < p.scans.size(); ++s) {
      solve_subproblem_impl(p, static_cast<int>(s), d, indices[s]);
    }
    d.dual_cost = 0.0;
    for (double c : d.subproblem_cost) d.dual_cost += c;
    const bool dual_improved =
        d.dual_cost > best_dual + 1e-7 * std::max(1.0, std::abs(best_dual));
    best_dual = std::max(best_dual, d.dual_cost);

    std::vector<int> sel = recover_primal_impl(
        p, d, primal_ctx, d.best_selection.empty() ? nullptr : &d.best_selection,
        d.best_primal);
    const double primal = selection_cost(p, sel);
    bool primal_improved = false;
    if (primal < d.best_primal - 1e-7 * std::max(1.0, std::abs(primal))) {
      d.best_primal = primal;
      d.best_selection = std::move(sel);
      primal_improved = true;
    } else if (d.best_selection.empty()) {
      d.best_primal = primal;
      d.best_selection = std::move(sel);
    }

    const double gap = relative_gap(d.best_primal, d.dual_cost);
    if (record_trace) {
      out.trace.push_back({iter, d.dual_cost, d.best_primal, gap});
    }
    out.iterations = iter;
    if (gap <= eps_gap) {
      out.converged = true;
      break;
    }
    if (!subgradient_step(p, d)) {
      // Subproblems agree: the common selection is feasible and optimal.
      out.converged = true;
      break;
    }
    stalled = (dual_improved || primal_improved) ? 0 : stalled + 1;
    if (stalled >= kStallLimit) break;
  }

  out.selection = d.best_selection;
  out.primal_cost = d.best_primal;
  out.dual_cost = best_dual;
  out.gap = relative_gap(d.best_primal, best_dual);
  return out;
}

}  // namespace trajmbm
