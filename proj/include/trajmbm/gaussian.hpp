#pragma once

#include <Eigen/Dense>

#include <utility>
#include <vector>

namespace trajmbm {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Linear Gaussian motion model x_k = F x_{k-1} + w, w ~ N(0, Q), with
/// survival probability ps and sampling period T.
struct MotionModel {
  Mat F;
  Mat Q;
  double ps = 1.0;
  double T = 1.0;

  int state_dim() const { return static_cast<int>(F.rows()); }
};

/// Linear Gaussian measurement model z = H x + v, v ~ N(0, R), detection
/// probability pd, and a clutter PPP that is uniform over the surveillance
/// region: intensity kappa(z) = clutter_rate * clutter_density.
struct MeasurementModel {
  Mat H;
  Mat R;
  double pd = 1.0;
  double clutter_rate = 0.0;
  double clutter_density = 0.0;
  double gate_threshold = 0.0;  // squared Mahalanobis gate

  int meas_dim() const { return static_cast<int>(H.rows()); }
  double clutter_intensity() const { return clutter_rate * clutter_density; }
};

struct GaussianDensity {
  Vec mean;
  Mat cov;

  int dim() const { return static_cast<int>(mean.size()); }
};

/// (P + P^T) / 2. Applied after every covariance-producing operation so that
/// asymmetry cannot accumulate over long runs.
Mat symmetrize(const Mat& p);

/// Chi-square quantile, used for the default ellipsoidal gate size.
double chi_square_quantile(int dof, double quantile);

/// log N(x; mean, cov) via Cholesky. Throws if cov is not positive definite.
double log_mvn_pdf(const Vec& x, const Vec& mean, const Mat& cov);

GaussianDensity kf_predict(const GaussianDensity& d, const MotionModel& m);

/// Kalman update in Joseph form. Returns the posterior density and the
/// marginal log-likelihood log N(z; H mean, H cov H^T + R).
std::pair<GaussianDensity, double> kf_update(const GaussianDensity& d,
                                             const Vec& z,
                                             const MeasurementModel& m);

/// Rauch-Tung-Striebel backward pass over a contiguous filtered sequence.
/// The last element is returned unchanged.
std::vector<GaussianDensity> rts_smooth(const std::vector<GaussianDensity>& filtered,
                                        const MotionModel& m);

/// Squared Mahalanobis distance of the innovation z - H mean.
double gate_distance(const GaussianDensity& d, const Vec& z, const MeasurementModel& m);

/// true iff gate_distance(d, z, m) <= m.gate_threshold.
bool gate(const GaussianDensity& d, const Vec& z, const MeasurementModel& m);

}  // namespace trajmbm
