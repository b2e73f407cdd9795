#include "trajmbm/hypothesis.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

namespace trajmbm {

bool Sth::has_meas_at(int scan) const {
  return std::any_of(meas_set.begin(), meas_set.end(),
                     [scan](const MeasIndex& m) { return m.scan == scan; });
}

std::optional<int> Sth::meas_at(int scan) const {
  for (const MeasIndex& m : meas_set) {
    if (m.scan == scan) return m.index;
  }
  return std::nullopt;
}

int Sth::ancestor_at(int scan) const {
  if (scan < created_at) return -1;
  const auto idx = static_cast<std::size_t>(scan - created_at);
  if (idx >= lineage.size()) return lineage.back();
  return lineage[idx];
}

std::optional<int> GlobalHypothesis::sth_for(int track_id) const {
  auto it = std::lower_bound(choice.begin(), choice.end(), track_id,
                             [](const auto& p, int id) { return p.first < id; });
  if (it == choice.end() || it->first != track_id) return std::nullopt;
  return it->second;
}

const Track* HypothesisForest::find_track(int track_id) const {
  for (const Track& t : tracks) {
    if (t.id == track_id) return &t;
  }
  return nullptr;
}

const Sth* HypothesisForest::find_sth(int track_id, int sth_id) const {
  const Track* t = find_track(track_id);
  if (t == nullptr) return nullptr;
  for (const Sth& s : t->sths) {
    if (s.id == sth_id) return &s;
  }
  return nullptr;
}

void n_scan_prune(HypothesisForest& forest, const GlobalHypothesis& best, int nscan, int tau) {
  if (nscan < 1) throw std::invalid_argument("n_scan_prune: N must be >= 1");
  const int horizon = tau - nscan;
  if (horizon >= 1) {
    for (Track& track : forest.tracks) {
      if (track.created_at > horizon) continue;
      const auto chosen = best.sth_for(track.id);
      if (!chosen) continue;
      int keep_ancestor = -1;
      for (const Sth& s : track.sths) {
        if (s.id == *chosen) {
          keep_ancestor = s.ancestor_at(horizon);
          break;
        }
      }
      if (keep_ancestor == -1) continue;
      std::erase_if(track.sths, [&](const Sth& s) {
        return s.ancestor_at(horizon) != keep_ancestor;
      });
    }
  }
  std::erase_if(forest.tracks, [](const Track& t) {
    return t.sths.size() == 1 && t.sths.front().is_nonexistence();
  });
}

void apply_miss_only_policy(HypothesisForest& forest, const GlobalHypothesis& best,
                            double r_threshold, int max_consecutive_misses,
                            int window_start) {
  // Flag pass: stale low-existence hypotheses stop spawning measurement
  // children. Hypotheses with an in-window measurement are left alone; their
  // confirmation is still being decided by the assignment solver.
  for (Track& track : forest.tracks) {
    for (Sth& s : track.sths) {
      if (s.bern.r < r_threshold && s.last_meas_scan() < window_start &&
          !s.is_nonexistence()) {
        s.miss_only = true;
      }
    }
  }

  // Claimant counts for in-window measurements, across the whole forest.
  std::map<MeasIndex, int> claimants;
  for (const Track& track : forest.tracks) {
    for (const Sth& s : track.sths) {
      for (const MeasIndex& m : s.meas_set) {
        if (m.scan >= window_start) ++claimants[m];
      }
    }
  }

  for (Track& track : forest.tracks) {
    const auto chosen = best.sth_for(track.id);
    // Per-scan count of leaves with no measurement at that scan; removing the
    // last such leaf would make the per-scan subproblems infeasible.
    std::map<int, int> no_meas_count;
    std::set<int> window_scans;
    for (const Sth& s : track.sths) {
      for (const MeasIndex& m : s.meas_set) {
        if (m.scan >= window_start) window_scans.insert(m.scan);
      }
    }
    for (int scan : window_scans) {
      for (const Sth& s : track.sths) {
        if (!s.has_meas_at(scan)) ++no_meas_count[scan];
      }
    }

    std::erase_if(track.sths, [&](const Sth& s) {
      if (s.consecutive_misses <= max_consecutive_misses) return false;
      if (chosen && s.id == *chosen) return false;
      for (const MeasIndex& m : s.meas_set) {
        if (m.scan >= window_start && claimants[m] <= 1) return false;
      }
      for (int scan : window_scans) {
        if (!s.has_meas_at(scan) && no_meas_count[scan] <= 1) return false;
      }
      for (const MeasIndex& m : s.meas_set) {
        if (m.scan >= window_start) --claimants[m];
      }
      for (int scan : window_scans) {
        if (!s.has_meas_at(scan)) --no_meas_count[scan];
      }
      return true;
    });
  }

  // Dead-track deletion: every leaf is a flagged, stale, near-zero-existence
  // miss chain. Such a track can never regain existence or claim an
  // in-window measurement, so it only adds a constant to every hypothesis.
  constexpr double kDeadExistence = 1e-4;
  std::erase_if(forest.tracks, [&](const Track& t) {
    return !t.sths.empty() &&
           std::all_of(t.sths.begin(), t.sths.end(), [&](const Sth& s) {
             return s.miss_only && s.bern.r < kDeadExistence &&
                    s.last_meas_scan() < window_start;
           });
  });
}

void cap_track_hypotheses(HypothesisForest& forest, const GlobalHypothesis& best, int cap,
                          int window_start) {
  if (cap <= 0) return;

  std::map<MeasIndex, int> claimants;
  for (const Track& track : forest.tracks) {
    for (const Sth& s : track.sths) {
      for (const MeasIndex& m : s.meas_set) {
        if (m.scan >= window_start) ++claimants[m];
      }
    }
  }

  for (Track& track : forest.tracks) {
    if (static_cast<int>(track.sths.size()) <= cap) continue;
    const auto chosen = best.sth_for(track.id);

    std::set<int> window_scans;
    for (const Sth& s : track.sths) {
      for (const MeasIndex& m : s.meas_set) {
        if (m.scan >= window_start) window_scans.insert(m.scan);
      }
    }
    std::map<int, int> no_meas_count;
    for (int scan : window_scans) {
      for (const Sth& s : track.sths) {
        if (!s.has_meas_at(scan)) ++no_meas_count[scan];
      }
    }

    std::vector<std::size_t> order(track.sths.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return track.sths[a].log_weight > track.sths[b].log_weight;
    });

    std::vector<char> drop(track.sths.size(), 0);
    int kept = 0;
    for (std::size_t i : order) {
      const Sth& s = track.sths[i];
      if (kept < cap || (chosen && s.id == *chosen)) {
        ++kept;
        continue;
      }
      bool removable = true;
      for (const MeasIndex& m : s.meas_set) {
        if (m.scan >= window_start && claimants[m] <= 1) removable = false;
      }
      for (int scan : window_scans) {
        if (!s.has_meas_at(scan) && no_meas_count[scan] <= 1) removable = false;
      }
      if (!removable) {
        ++kept;
        continue;
      }
      drop[i] = 1;
      for (const MeasIndex& m : s.meas_set) {
        if (m.scan >= window_start) --claimants[m];
      }
      for (int scan : window_scans) {
        if (!s.has_meas_at(scan)) --no_meas_count[scan];
      }
    }

    std::vector<Sth> survivors;
    survivors.reserve(static_cast<std::size_t>(kept));
    for (std::size_t i = 0; i < track.sths.size(); ++i) {
      if (!drop[i]) survivors.push_back(std::move(track.sths[i]));
    }
    track.sths = std::move(survivors);
  }
}

std::vector<GlobalHypothesis> enumerate_global_hypotheses(const HypothesisForest& forest,
                                                          long long cap) {
  long long combos = 1;
  for (const Track& t : forest.tracks) {
    combos *= static_cast<long long>(t.sths.size());
    if (combos > cap) throw std::runtime_error("enumerate_global_hypotheses: cap exceeded");
  }

  // Every measurement claimed anywhere in the forest must be covered.
  std::set<MeasIndex> all_meas;
  for (const Track& t : forest.tracks) {
    for (const Sth& s : t.sths) {
      for (const MeasIndex& m : s.meas_set) all_meas.insert(m);
    }
  }

  std::vector<GlobalHypothesis> result;
  const int n = static_cast<int>(forest.tracks.size());
  std::vector<std::size_t> pick(static_cast<std::size_t>(std::max(n, 1)), 0);

  auto feasible = [&](const std::vector<std::size_t>& sel) {
    std::set<MeasIndex> used;
    for (int i = 0; i < n; ++i) {
      for (const MeasIndex& m : forest.tracks[i].sths[sel[i]].meas_set) {
        if (!used.insert(m).second) return false;  // shared measurement
      }
    }
    return used == all_meas;
  };

  bool done = (n == 0);
  while (!done) {
    if (feasible(pick)) {
      GlobalHypothesis h;
      h.log_weight = 0.0;
      for (int i = 0; i < n; ++i) {
        const Sth& s = forest.tracks[i].sths[pick[i]];
        h.choice.emplace_back(forest.tracks[i].id, s.id);
        h.log_weight += s.log_weight;
      }
      std::sort(h.choice.begin(), h.choice.end());
      result.push_back(std::move(h));
    }
    int pos = n - 1;
    while (pos >= 0) {
      if (++pick[pos] < forest.tracks[pos].sths.size()) break;
      pick[pos] = 0;
      --pos;
    }
    done = (pos < 0);
  }
  if (n == 0 && all_meas.empty()) {
    result.push_back(GlobalHypothesis{});
  }

  if (!result.empty()) {
    double max_lw = result.front().log_weight;
    for (const auto& h : result) max_lw = std::max(max_lw, h.log_weight);
    double sum = 0.0;
    for (const auto& h : result) sum += std::exp(h.log_weight - max_lw);
    const double log_norm = max_lw + std::log(sum);
    for (auto& h : result) h.log_weight -= log_norm;
  }
  return result;
}

bool hypothesis_is_feasible(const HypothesisForest& forest, const GlobalHypothesis& hyp,
                            const std::vector<int>& scan_meas_counts, int window_start,
                            int window_end) {
  std::set<MeasIndex> used;
  for (const auto& [track_id, sth_id] : hyp.choice) {
    const Sth* s = forest.find_sth(track_id, sth_id);
    if (s == nullptr) return false;
    for (const MeasIndex& m : s->meas_set) {
      if (!used.insert(m).second) return false;
    }
  }
  // Coverage over the window, restricted to measurements some leaf claims
  // (a measurement gated by nothing cannot appear in any hypothesis).
  for (int scan = window_start; scan <= window_end; ++scan) {
    if (scan < 1 || scan > static_cast<int>(scan_meas_counts.size())) continue;
    for (int j = 0; j < scan_meas_counts[scan - 1]; ++j) {
      const MeasIndex m{scan, j};
      if (used.contains(m)) continue;
      bool claimable = false;
      for (const Track& t : forest.tracks) {
        for (const Sth& s : t.sths) {
          if (s.has_meas_at(scan) && s.meas_at(scan) == j) {
            claimable = true;
            break;
          }
        }
        if (claimable) break;
      }
      if (claimable) return false;
    }
  }
  return true;
}

}  // namespace trajmbm
