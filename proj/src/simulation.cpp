#include "trajmbm/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <map>
#include <stdexcept>
#include <thread>

namespace trajmbm {

MotionModel make_cv_motion(double t, double q, double ps) {
  MotionModel m;
  m.T = t;
  m.ps = ps;
  Mat block_f(2, 2), block_q(2, 2);
  block_f << 1.0, t, 0.0, 1.0;
  block_q << t * t * t / 3.0, t * t / 2.0, t * t / 2.0, t;
  m.F = Mat::Zero(4, 4);
  m.Q = Mat::Zero(4, 4);
  m.F.block(0, 0, 2, 2) = block_f;
  m.F.block(2, 2, 2, 2) = block_f;
  m.Q.block(0, 0, 2, 2) = q * block_q;
  m.Q.block(2, 2, 2, 2) = q * block_q;
  return m;
}

MeasurementModel make_position_measurement(double pd, double clutter_rate, double area,
                                           double gate_threshold) {
  MeasurementModel m;
  m.H = Mat::Zero(2, 4);
  m.H(0, 0) = 1.0;
  m.H(1, 2) = 1.0;
  m.R = Mat::Identity(2, 2);
  m.pd = pd;
  m.clutter_rate = clutter_rate;
  m.clutter_density = 1.0 / area;
  m.gate_threshold = gate_threshold;
  return m;
}

PoissonIntensity make_birth_intensity(double weight) {
  PoissonIntensity birth;
  GaussianDensity d;
  d.mean = Vec::Zero(4);
  d.cov = Vec{{100.0 * 100.0, 1.0, 100.0 * 100.0, 1.0}}.asDiagonal();
  birth.components.push_back({weight, std::move(d), 0});
  return birth;
}

namespace {

// PSD-tolerant multivariate normal sampling (the midpoint covariance may be
// driven to zero in degenerate setups).
Vec sample_mvn(const Vec& mean, const Mat& cov, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::SelfAdjointEigenSolver<Mat> eig(cov);
  Vec stddev = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  Vec z(mean.size());
  for (int i = 0; i < z.size(); ++i) z(i) = normal(rng);
  return mean + eig.eigenvectors() * stddev.asDiagonal() * z;
}

}  // namespace

std::vector<Trajectory> generate_truth(const ScenarioConfig& cfg, const MotionModel& motion,
                                       std::mt19937_64& rng) {
  std::vector<Trajectory> out;
  const Mat f_inv = motion.F.inverse();
  for (std::size_t i = 0; i < cfg.births.size(); ++i) {
    const int birth = cfg.births[i];
    const int death = cfg.deaths[i];
    const int mid = (birth + death) / 2;
    Trajectory traj;
    traj.birth = birth;
    traj.last = death;
    traj.states.assign(static_cast<std::size_t>(death - birth + 1), Vec());
    traj.states[static_cast<std::size_t>(mid - birth)] =
        sample_mvn(cfg.midpoint_mean, cfg.midpoint_cov, rng);
    for (int k = mid + 1; k <= death; ++k) {
      const Vec noise = sample_mvn(Vec::Zero(4), motion.Q, rng);
      traj.states[static_cast<std::size_t>(k - birth)] =
          motion.F * traj.states[static_cast<std::size_t>(k - 1 - birth)] + noise;
    }
    for (int k = mid - 1; k >= birth; --k) {
      const Vec noise = sample_mvn(Vec::Zero(4), motion.Q, rng);
      traj.states[static_cast<std::size_t>(k - birth)] =
          f_inv * (traj.states[static_cast<std::size_t>(k + 1 - birth)] - noise);
    }
    out.push_back(std::move(traj));
  }
  return out;
}

Scan generate_scan(const std::vector<Trajectory>& truth, int k, const ScenarioConfig& cfg,
                   const MeasurementModel& meas, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  Scan scan;
  scan.time = k;
  for (const Trajectory& traj : truth) {
    if (!traj.alive_at(k)) continue;
    if (uniform(rng) < meas.pd) {
      const Vec noise = sample_mvn(Vec::Zero(meas.meas_dim()), meas.R, rng);
      scan.measurements.push_back(meas.H * traj.state_at(k) + noise);
    }
  }
  std::poisson_distribution<int> poisson(cfg.clutter_rate);
  const int n_clutter = cfg.clutter_rate > 0.0 ? poisson(rng) : 0;
  for (int i = 0; i < n_clutter; ++i) {
    Vec z(2);
    z(0) = cfg.region_min_x + uniform(rng) * (cfg.region_max_x - cfg.region_min_x);
    z(1) = cfg.region_min_y + uniform(rng) * (cfg.region_max_y - cfg.region_min_y);
    scan.measurements.push_back(std::move(z));
  }
  std::shuffle(scan.measurements.begin(), scan.measurements.end(), rng);
  return scan;
}

std::mt19937_64 make_trial_rng(std::uint64_t seed, int trial_index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(trial_index),
                    0x9e3779b9u};
  return std::mt19937_64(seq);
}

namespace {

// Per-track running estimate for L = 1 runs: connected current-state means.
struct ConnectedEstimate {
  int first_scan = 0;
  int last_scan = -1;
  std::vector<Vec> states;
};

}  // namespace

TrialResult run_trial(const RunConfig& cfg, int trial_index) {
  const auto t0 = std::chrono::steady_clock::now();

  std::mt19937_64 rng = make_trial_rng(cfg.seed, trial_index);
  const MotionModel motion = make_cv_motion(1.0, 0.002, cfg.scenario.ps);
  const MeasurementModel meas = make_position_measurement(
      cfg.scenario.pd, cfg.scenario.clutter_rate, cfg.scenario.area());
  const PoissonIntensity birth = make_birth_intensity(cfg.filter.birth_weight);

  FilterParams params;
  params.nscan = cfg.filter.nscan;
  params.window = cfg.filter.window;
  params.r_threshold = cfg.filter.r_threshold;
  params.max_consecutive_misses = cfg.filter.max_consecutive_misses;
  params.eps_gap = cfg.filter.eps_gap;
  params.max_iter = cfg.filter.max_iter;
  params.ppp_prune_threshold = cfg.filter.ppp_prune;
  params.gate_quantile = cfg.filter.gate_quantile;

  const std::vector<Trajectory> truth = generate_truth(cfg.scenario, motion, rng);
  TrajectoryPmbmFilter filter(motion, meas, birth, params);

  const GospaConfig gospa_cfg;  // alpha = 2, c = 20, p = 1
  TrialResult result;
  std::map<int, TrajectoryBernoulli> snapshots;       // L = full
  std::map<int, ConnectedEstimate> connected;         // L = 1

  for (int k = 1; k <= cfg.scenario.steps; ++k) {
    const Scan scan = generate_scan(truth, k, cfg.scenario, meas, rng);
    filter.predict();
    filter.update(scan.measurements);
    const SolveStats stats = filter.solve(cfg.debug_dual);
    if (!filter.best_is_feasible()) ++result.infeasible_hypotheses;
    filter.prune();

    if (cfg.debug_dual) {
      for (const IterationRecord& rec : stats.trace) {
        result.convergence.push_back(
            {k, rec.iteration, rec.dual, rec.best_primal, rec.gap});
      }
    }

    const auto selected = filter.selected_bernoullis();
    std::vector<Vec> est_positions;
    for (const auto& [track_id, bern] : selected) {
      est_positions.push_back(meas.H * bern->moments.back().mean);
      if (cfg.filter.window == 0) {
        snapshots[track_id] = *bern;
      } else {
        ConnectedEstimate& entry = connected[track_id];
        if (entry.last_scan < 0) {
          entry.first_scan = k;
        } else {
          for (int fill = entry.last_scan + 1; fill < k; ++fill) {
            entry.states.push_back(entry.states.back());
          }
        }
        entry.states.push_back(bern->moments.back().mean);
        entry.last_scan = k;
      }
    }

    std::vector<Vec> truth_positions;
    for (const Trajectory& traj : truth) {
      if (traj.alive_at(k)) truth_positions.push_back(meas.H * traj.state_at(k));
    }
    result.per_scan.push_back(gospa(truth_positions, est_positions, gospa_cfg));
  }

  if (cfg.filter.window == 0) {
    for (const auto& [track_id, bern] : snapshots) {
      Trajectory filtered;
      filtered.birth = bern.first_moment_time();
      filtered.last = bern.last;
      for (const GaussianDensity& d : bern.moments) filtered.states.push_back(d.mean);
      result.filtered.push_back(std::move(filtered));

      Trajectory smoothed;
      smoothed.birth = bern.first_moment_time();
      smoothed.last = bern.last;
      for (const GaussianDensity& d : rts_smooth(bern.moments, motion)) {
        smoothed.states.push_back(d.mean);
      }
      result.smoothed.push_back(std::move(smoothed));
    }
  } else {
    for (const auto& [track_id, entry] : connected) {
      Trajectory filtered;
      filtered.birth = entry.first_scan;
      filtered.last = entry.last_scan;
      filtered.states = entry.states;
      result.filtered.push_back(std::move(filtered));
    }
  }

  result.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

namespace {

int thread_budget(int trials) {
  int n = static_cast<int>(std::thread::hardware_concurrency());
  if (const char* env = std::getenv("TRAJMBM_THREADS")) {
    const int cap = std::atoi(env);
    if (cap >= 1) n = cap;
  }
  return std::max(1, std::min(n, trials));
}

}  // namespace

McReport run_monte_carlo(const RunConfig& cfg, int trials) {
  if (trials < 1) throw std::invalid_argument("run_monte_carlo: trials must be >= 1");

  McReport report;
  report.config = cfg;
  report.trials = trials;
  report.trial_results.resize(static_cast<std::size_t>(trials));

  const int n_threads = thread_budget(trials);
  std::atomic<int> next{0};
  auto worker = [&]() {
    while (true) {
      const int t = next.fetch_add(1);
      if (t >= trials) break;
      report.trial_results[static_cast<std::size_t>(t)] = run_trial(cfg, t);
    }
  };
  std::vector<std::thread> threads;
  for (int i = 1; i < n_threads; ++i) threads.emplace_back(worker);
  worker();
  for (std::thread& t : threads) t.join();

  report.per_scan_mean.assign(static_cast<std::size_t>(cfg.scenario.steps), GospaResult{});
  double seconds = 0.0;
  for (const TrialResult& trial : report.trial_results) {
    for (std::size_t k = 0; k < trial.per_scan.size(); ++k) {
      report.per_scan_mean[k].total += trial.per_scan[k].total / trials;
      report.per_scan_mean[k].localization += trial.per_scan[k].localization / trials;
      report.per_scan_mean[k].missed += trial.per_scan[k].missed / trials;
      report.per_scan_mean[k].false_targets += trial.per_scan[k].false_targets / trials;
    }
    seconds += trial.seconds;
  }
  for (const GospaResult& g : report.per_scan_mean) {
    report.overall_mean.total += g.total / cfg.scenario.steps;
    report.overall_mean.localization += g.localization / cfg.scenario.steps;
    report.overall_mean.missed += g.missed / cfg.scenario.steps;
    report.overall_mean.false_targets += g.false_targets / cfg.scenario.steps;
  }
  report.mean_trial_seconds = seconds / trials;
  return report;
}

}  // namespace trajmbm
