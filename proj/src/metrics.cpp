#include "trajmbm/metrics.hpp"

#include "trajmbm/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace trajmbm {

GospaResult gospa(const std::vector<Vec>& truth, const std::vector<Vec>& estimate,
                  const GospaConfig& cfg) {
  if (cfg.alpha != 2.0) throw std::invalid_argument("gospa: only alpha = 2 is supported");
  if (cfg.c <= 0.0 || cfg.p < 1.0) throw std::invalid_argument("gospa: bad parameters");

  const int n = static_cast<int>(truth.size());
  const int m = static_cast<int>(estimate.size());
  const double cp = std::pow(cfg.c, cfg.p);

  GospaResult out;
  if (n == 0 && m == 0) return out;

  // Matching a pair saves c^p (its two half-penalties) and pays d^p, so the
  // optimal partial assignment minimizes sum of (d^p - c^p) over chosen pairs.
  // Dummy columns let each truth point stay unmatched at cost 0.
  int matched_truth = 0;
  std::vector<int> match(n, -1);
  if (n > 0 && m > 0) {
    AssignmentMatrix mat;
    mat.costs = Mat::Constant(n, m + n, kInf);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < m; ++j) {
        const double d = (truth[i] - estimate[j]).norm();
        if (d < cfg.c) mat.costs(i, j) = std::pow(d, cfg.p) - cp;
      }
      mat.costs(i, m + i) = 0.0;
    }
    const std::vector<int> assignment = solve_assignment(mat);
    for (int i = 0; i < n; ++i) {
      if (assignment[i] < m) {
        match[i] = assignment[i];
        ++matched_truth;
        out.localization += std::pow((truth[i] - estimate[match[i]]).norm(), cfg.p);
      }
    }
  }
  out.missed = 0.5 * cp * (n - matched_truth);
  out.false_targets = 0.5 * cp * (m - matched_truth);
  out.total = std::pow(out.localization + out.missed + out.false_targets, 1.0 / cfg.p);
  return out;
}

namespace {

struct Overlap {
  int start = 0;
  int end = -1;
  int length() const { return end - start + 1; }
};

Overlap overlap_of(const Trajectory& a, const Trajectory& b) {
  Overlap o;
  o.start = std::max(a.birth, b.birth);
  o.end = std::min(a.last, b.last);
  return o;
}

}  // namespace

std::optional<double> matched_position_rmse(const std::vector<Trajectory>& truth,
                                            const std::vector<Trajectory>& estimate,
                                            const Mat& h) {
  struct Pair {
    std::size_t t, e;
    double mean_dist;
    int overlap;
  };
  std::vector<Pair> pairs;
  for (std::size_t t = 0; t < truth.size(); ++t) {
    for (std::size_t e = 0; e < estimate.size(); ++e) {
      const Overlap o = overlap_of(truth[t], estimate[e]);
      if (o.length() <= 0) continue;
      double sum = 0.0;
      for (int k = o.start; k <= o.end; ++k) {
        sum += (h * truth[t].state_at(k) - h * estimate[e].state_at(k)).norm();
      }
      pairs.push_back({t, e, sum / o.length(), o.length()});
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    if (a.mean_dist != b.mean_dist) return a.mean_dist < b.mean_dist;
    return a.overlap > b.overlap;
  });

  std::vector<char> truth_used(truth.size(), 0), est_used(estimate.size(), 0);
  double sq_sum = 0.0;
  long long count = 0;
  for (const Pair& p : pairs) {
    if (truth_used[p.t] || est_used[p.e]) continue;
    truth_used[p.t] = 1;
    est_used[p.e] = 1;
    const Overlap o = overlap_of(truth[p.t], estimate[p.e]);
    for (int k = o.start; k <= o.end; ++k) {
      sq_sum +=
          (h * truth[p.t].state_at(k) - h * estimate[p.e].state_at(k)).squaredNorm();
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  return std::sqrt(sq_sum / static_cast<double>(count));
}

}  // namespace trajmbm
