#include "trajmbm/pmbm.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace trajmbm {

namespace {

double logsumexp(const std::vector<double>& xs) {
  if (xs.empty()) return -kInf;
  const double mx = *std::max_element(xs.begin(), xs.end());
  if (!std::isfinite(mx)) return mx;
  double sum = 0.0;
  for (double x : xs) sum += std::exp(x - mx);
  return mx + std::log(sum);
}

}  // namespace

PoissonIntensity prune_ppp(const PoissonIntensity& intensity, double threshold) {
  if (threshold < 0.0) throw std::invalid_argument("prune_ppp: negative threshold");
  PoissonIntensity out;
  for (const PoissonComponent& c : intensity.components) {
    if (c.weight >= threshold) out.components.push_back(c);
  }
  return out;
}

std::optional<Sth> sth_miss_update(const Sth& h, const MeasurementModel& m, int new_id) {
  const double r = h.bern.r;
  const double miss_lik = 1.0 - r + r * (1.0 - m.pd);
  if (miss_lik <= 0.0) return std::nullopt;

  Sth child = h;
  child.id = new_id;
  child.parent = h.id;
  child.log_weight += std::log(miss_lik);
  child.bern.r = r * (1.0 - m.pd) / miss_lik;
  child.consecutive_misses = h.consecutive_misses + 1;
  child.lineage.push_back(new_id);
  return child;
}

std::optional<Sth> sth_meas_update(const Sth& h, const Vec& z, MeasIndex index,
                                   const MeasurementModel& m, int new_id) {
  if (h.bern.r <= 0.0) return std::nullopt;
  auto [posterior, log_lik] = kf_update(h.bern.moments.back(), z, m);

  Sth child = h;
  child.id = new_id;
  child.parent = h.id;
  child.log_weight += std::log(h.bern.r) + std::log(m.pd) + log_lik;
  child.bern.r = 1.0;
  child.bern.moments.back() = std::move(posterior);
  child.meas_set.push_back(index);
  child.consecutive_misses = 0;
  child.miss_only = false;
  child.lineage.push_back(new_id);
  return child;
}

std::optional<Track> new_track(const Vec& z, MeasIndex index,
                               const PoissonIntensity& undetected,
                               const MeasurementModel& m, int track_id,
                               int nonexistence_sth_id, int detection_sth_id,
                               int window) {
  std::vector<double> log_terms;
  std::vector<GaussianDensity> updated;
  std::vector<int> births;
  for (const PoissonComponent& c : undetected.components) {
    if (c.weight <= 0.0 || !gate(c.density, z, m)) continue;
    auto [posterior, log_lik] = kf_update(c.density, z, m);
    log_terms.push_back(std::log(c.weight) + std::log(m.pd) + log_lik);
    updated.push_back(std::move(posterior));
    births.push_back(c.birth);
  }

  const double log_detected = logsumexp(log_terms);
  const double kappa = m.clutter_intensity();
  double log_total;
  if (kappa <= 0.0) {
    if (!std::isfinite(log_detected)) return std::nullopt;
    log_total = log_detected;
  } else if (!std::isfinite(log_detected)) {
    log_total = std::log(kappa);
  } else {
    const double lk = std::log(kappa);
    const double mx = std::max(lk, log_detected);
    log_total = mx + std::log(std::exp(lk - mx) + std::exp(log_detected - mx));
  }
  const double r = std::isfinite(log_detected) ? std::exp(log_detected - log_total) : 0.0;

  Track track;
  track.id = track_id;
  track.created_at = index.scan;

  Sth nonexistence;
  nonexistence.id = nonexistence_sth_id;
  nonexistence.log_weight = 0.0;
  nonexistence.bern.r = 0.0;
  nonexistence.bern.birth = index.scan;
  nonexistence.bern.last = index.scan;
  nonexistence.bern.window = window;
  nonexistence.created_at = index.scan;
  nonexistence.lineage = {nonexistence_sth_id};
  track.sths.push_back(std::move(nonexistence));

  Sth detection;
  detection.id = detection_sth_id;
  detection.log_weight = log_total;
  detection.bern.r = r;
  detection.bern.last = index.scan;
  detection.bern.window = window;
  detection.created_at = index.scan;
  detection.meas_set = {index};
  detection.lineage = {detection_sth_id};
  if (r > 0.0) {
    // Moment-match the updated mixture; the birth time comes from the
    // highest-weight component.
    std::vector<double> gamma(log_terms.size());
    for (std::size_t i = 0; i < log_terms.size(); ++i) {
      gamma[i] = std::exp(log_terms[i] - log_detected);
    }
    Vec mean = Vec::Zero(updated.front().dim());
    for (std::size_t i = 0; i < updated.size(); ++i) mean += gamma[i] * updated[i].mean;
    Mat cov = Mat::Zero(mean.size(), mean.size());
    for (std::size_t i = 0; i < updated.size(); ++i) {
      const Vec d = updated[i].mean - mean;
      cov += gamma[i] * (updated[i].cov + d * d.transpose());
    }
    detection.bern.moments = {GaussianDensity{std::move(mean), symmetrize(cov)}};
    const auto best_term =
        std::max_element(log_terms.begin(), log_terms.end()) - log_terms.begin();
    detection.bern.birth = births[static_cast<std::size_t>(best_term)];
  } else {
    detection.bern.birth = index.scan;
  }
  track.sths.push_back(std::move(detection));
  return track;
}

int map_cardinality(const std::vector<double>& rs) {
  std::vector<double> pmf{1.0};
  for (double r : rs) {
    std::vector<double> next(pmf.size() + 1, 0.0);
    for (std::size_t n = 0; n < pmf.size(); ++n) {
      next[n] += pmf[n] * (1.0 - r);
      next[n + 1] += pmf[n] * r;
    }
    pmf = std::move(next);
  }
  return static_cast<int>(std::max_element(pmf.begin(), pmf.end()) - pmf.begin());
}

std::vector<Trajectory> extract_estimates(const FilterState& state,
                                          const GlobalHypothesis& best,
                                          EstimateMode mode, const MotionModel& motion) {
  struct Candidate {
    int track_id;
    const Sth* sth;
  };
  std::vector<Candidate> candidates;
  std::vector<double> rs;
  for (const auto& [track_id, sth_id] : best.choice) {
    const Sth* s = state.forest.find_sth(track_id, sth_id);
    if (s == nullptr || s->bern.r <= 0.0) continue;
    candidates.push_back({track_id, s});
    rs.push_back(s->bern.r);
  }
  const int n_star = map_cardinality(rs);
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.sth->bern.r != b.sth->bern.r) return a.sth->bern.r > b.sth->bern.r;
    return a.track_id < b.track_id;
  });
  candidates.resize(static_cast<std::size_t>(std::min<int>(n_star, candidates.size())));

  std::vector<Trajectory> out;
  for (const Candidate& c : candidates) {
    const TrajectoryBernoulli& bern = c.sth->bern;
    Trajectory traj;
    traj.birth = bern.first_moment_time();
    traj.last = bern.last;
    if (mode == EstimateMode::kSmoothed) {
      if (bern.window == 1) {
        throw std::logic_error(
            "extract_estimates: smoothing needs the full moment history (L = full)");
      }
      for (const GaussianDensity& d : rts_smooth(bern.moments, motion)) {
        traj.states.push_back(d.mean);
      }
    } else {
      for (const GaussianDensity& d : bern.moments) traj.states.push_back(d.mean);
    }
    out.push_back(std::move(traj));
  }
  return out;
}

TrajectoryPmbmFilter::TrajectoryPmbmFilter(MotionModel motion, MeasurementModel meas,
                                           PoissonIntensity birth, FilterParams params)
    : motion_(std::move(motion)),
      meas_(std::move(meas)),
      birth_(std::move(birth)),
      params_(params) {
  if (meas_.gate_threshold <= 0.0) {
    meas_.gate_threshold = chi_square_quantile(meas_.meas_dim(), params_.gate_quantile);
  }
}

int TrajectoryPmbmFilter::window_start() const {
  return std::max(1, state_.time - params_.nscan);
}

void TrajectoryPmbmFilter::predict() {
  ++state_.time;

  for (PoissonComponent& c : state_.undetected.components) {
    c.weight *= motion_.ps;
    c.density = kf_predict(c.density, motion_);
  }
  for (const PoissonComponent& b : birth_.components) {
    PoissonComponent c = b;
    c.birth = state_.time;
    state_.undetected.components.push_back(std::move(c));
  }

  for (Track& track : state_.forest.tracks) {
    for (Sth& s : track.sths) {
      if (s.bern.r <= 0.0) continue;
      s.bern.r *= motion_.ps;
      GaussianDensity pred = kf_predict(s.bern.moments.back(), motion_);
      if (params_.window == 1) {
        s.bern.moments = {std::move(pred)};
      } else {
        s.bern.moments.push_back(std::move(pred));
      }
      s.bern.last = state_.time;
    }
  }
}

void TrajectoryPmbmFilter::update(const std::vector<Vec>& measurements) {
  const int k = state_.time;
  if (k < 1) throw std::logic_error("update: predict() must run first");
  if (static_cast<int>(state_.scan_meas_counts.size()) < k) {
    state_.scan_meas_counts.resize(static_cast<std::size_t>(k), 0);
  }
  state_.scan_meas_counts[static_cast<std::size_t>(k - 1)] =
      static_cast<int>(measurements.size());

  for (Track& track : state_.forest.tracks) {
    std::vector<Sth> children;
    for (Sth& s : track.sths) {
      if (s.bern.r <= 0.0) {
        children.push_back(std::move(s));  // nothing to update
        continue;
      }
      if (auto miss = sth_miss_update(s, meas_, state_.forest.new_sth_id())) {
        children.push_back(std::move(*miss));
      }
      if (s.miss_only) continue;
      for (std::size_t j = 0; j < measurements.size(); ++j) {
        if (!gate(s.bern.moments.back(), measurements[j], meas_)) continue;
        if (auto det = sth_meas_update(s, measurements[j],
                                       MeasIndex{k, static_cast<int>(j)}, meas_,
                                       state_.forest.new_sth_id())) {
          children.push_back(std::move(*det));
        }
      }
    }
    track.sths = std::move(children);
  }
  std::erase_if(state_.forest.tracks, [](const Track& t) { return t.sths.empty(); });

  for (std::size_t j = 0; j < measurements.size(); ++j) {
    const int track_id = state_.forest.new_track_id();
    const int id0 = state_.forest.new_sth_id();
    const int id1 = state_.forest.new_sth_id();
    if (auto track = new_track(measurements[j], MeasIndex{k, static_cast<int>(j)},
                               state_.undetected, meas_, track_id, id0, id1,
                               params_.window)) {
      state_.forest.tracks.push_back(std::move(*track));
    }
  }

  for (PoissonComponent& c : state_.undetected.components) {
    c.weight *= (1.0 - meas_.pd);
  }
}

MultiFrameProblem TrajectoryPmbmFilter::build_problem() const {
  MultiFrameProblem p;
  const int start = window_start();
  for (int scan = start; scan <= state_.time; ++scan) {
    p.scans.push_back({scan, state_.scan_meas_counts[static_cast<std::size_t>(scan - 1)]});
  }
  for (const Track& track : state_.forest.tracks) {
    TrackCosts tc;
    tc.track_id = track.id;
    for (const Sth& s : track.sths) {
      SthCost sc;
      sc.sth_id = s.id;
      sc.cost = -s.log_weight;
      for (const MeasIndex& m : s.meas_set) {
        if (m.scan >= start) sc.meas_set.push_back(m);
      }
      tc.sths.push_back(std::move(sc));
    }
    p.tracks.push_back(std::move(tc));
  }
  return p;
}

SolveStats TrajectoryPmbmFilter::solve(bool record_trace) {
  SolveStats stats;
  if (state_.forest.tracks.empty()) {
    state_.forest.best = GlobalHypothesis{};
    return stats;
  }
  const MultiFrameProblem p = build_problem();
  const MultiFrameSolution sol =
      trajmbm::solve(p, params_.eps_gap, params_.max_iter, record_trace);

  GlobalHypothesis best;
  for (std::size_t t = 0; t < p.tracks.size(); ++t) {
    const int sth_id = p.tracks[t].sths[static_cast<std::size_t>(sol.selection[t])].sth_id;
    best.choice.emplace_back(p.tracks[t].track_id, sth_id);
    best.log_weight +=
        state_.forest.find_sth(p.tracks[t].track_id, sth_id)->log_weight;
  }
  std::sort(best.choice.begin(), best.choice.end());
  state_.forest.best = std::move(best);

  stats.gap = sol.gap;
  stats.iterations = sol.iterations;
  stats.converged = sol.converged;
  stats.trace = sol.trace;
  return stats;
}

void TrajectoryPmbmFilter::prune() {
  const int next_window_start = std::max(1, state_.time + 1 - params_.nscan);
  n_scan_prune(state_.forest, state_.forest.best, params_.nscan, state_.time);
  cap_track_hypotheses(state_.forest, state_.forest.best, params_.max_leaves_per_track,
                       next_window_start);
  apply_miss_only_policy(state_.forest, state_.forest.best, params_.r_threshold,
                         params_.max_consecutive_misses, next_window_start);
  state_.undetected = prune_ppp(state_.undetected, params_.ppp_prune_threshold);
}

std::vector<Trajectory> TrajectoryPmbmFilter::estimates(EstimateMode mode) const {
  return extract_estimates(state_, state_.forest.best, mode, motion_);
}

std::vector<std::pair<int, const TrajectoryBernoulli*>>
TrajectoryPmbmFilter::selected_bernoullis() const {
  struct Candidate {
    int track_id;
    const Sth* sth;
  };
  std::vector<Candidate> candidates;
  std::vector<double> rs;
  for (const auto& [track_id, sth_id] : state_.forest.best.choice) {
    const Sth* s = state_.forest.find_sth(track_id, sth_id);
    if (s == nullptr || s->bern.r <= 0.0) continue;
    candidates.push_back({track_id, s});
    rs.push_back(s->bern.r);
  }
  const int n_star = map_cardinality(rs);
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.sth->bern.r != b.sth->bern.r) return a.sth->bern.r > b.sth->bern.r;
    return a.track_id < b.track_id;
  });
  candidates.resize(static_cast<std::size_t>(std::min<int>(n_star, candidates.size())));

  std::vector<std::pair<int, const TrajectoryBernoulli*>> out;
  for (const Candidate& c : candidates) out.emplace_back(c.track_id, &c.sth->bern);
  return out;
}

bool TrajectoryPmbmFilter::best_is_feasible() const {
  return hypothesis_is_feasible(state_.forest, state_.forest.best,
                                state_.scan_meas_counts, window_start(), state_.time);
}

}  // namespace trajmbm
