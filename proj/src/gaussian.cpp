#include "trajmbm/gaussian.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace trajmbm {

Mat symmetrize(const Mat& p) { return 0.5 * (p + p.transpose()); }

double chi_square_quantile(int dof, double quantile) {
  if (dof < 1 || quantile <= 0.0 || quantile >= 1.0) {
    throw std::invalid_argument("chi_square_quantile: bad arguments");
  }
  boost::math::chi_squared dist(static_cast<double>(dof));
  return boost::math::quantile(dist, quantile);
}

double log_mvn_pdf(const Vec& x, const Vec& mean, const Mat& cov) {
  if (x.size() != mean.size() || cov.rows() != x.size() || cov.cols() != x.size()) {
    throw std::invalid_argument("log_mvn_pdf: dimension mismatch");
  }
  Eigen::LLT<Mat> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("log_mvn_pdf: covariance not positive definite");
  }
  const Vec diff = x - mean;
  const Vec alpha = llt.matrixL().solve(diff);
  double log_det = 0.0;
  for (int i = 0; i < cov.rows(); ++i) {
    log_det += std::log(llt.matrixL()(i, i));
  }
  const double d = static_cast<double>(x.size());
  return -0.5 * (d * std::log(2.0 * std::numbers::pi) + alpha.squaredNorm()) - log_det;
}

GaussianDensity kf_predict(const GaussianDensity& d, const MotionModel& m) {
  if (m.F.cols() != d.mean.size() || m.Q.rows() != m.F.rows()) {
    throw std::invalid_argument("kf_predict: dimension mismatch");
  }
  GaussianDensity out;
  out.mean = m.F * d.mean;
  out.cov = symmetrize(m.F * d.cov * m.F.transpose() + m.Q);
  return out;
}

std::pair<GaussianDensity, double> kf_update(const GaussianDensity& d,
                                             const Vec& z,
                                             const MeasurementModel& m) {
  if (m.H.cols() != d.mean.size() || z.size() != m.H.rows()) {
    throw std::invalid_argument("kf_update: dimension mismatch");
  }
  const Mat s = symmetrize(m.H * d.cov * m.H.transpose() + m.R);
  Eigen::LLT<Mat> llt(s);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("kf_update: innovation covariance not positive definite");
  }
  const Vec innovation = z - m.H * d.mean;
  const double log_lik = log_mvn_pdf(z, m.H * d.mean, s);

  const Mat ph = d.cov * m.H.transpose();
  const Mat gain = llt.solve(ph.transpose()).transpose();

  GaussianDensity out;
  out.mean = d.mean + gain * innovation;
  const Mat i_kh = Mat::Identity(d.dim(), d.dim()) - gain * m.H;
  out.cov = symmetrize(i_kh * d.cov * i_kh.transpose() + gain * m.R * gain.transpose());
  return {std::move(out), log_lik};
}

std::vector<GaussianDensity> rts_smooth(const std::vector<GaussianDensity>& filtered,
                                        const MotionModel& m) {
  if (filtered.empty()) {
    throw std::invalid_argument("rts_smooth: empty sequence");
  }
  std::vector<GaussianDensity> smoothed = filtered;
  for (int k = static_cast<int>(filtered.size()) - 2; k >= 0; --k) {
    const GaussianDensity& f = filtered[k];
    const Mat pred_cov = symmetrize(m.F * f.cov * m.F.transpose() + m.Q);
    Eigen::LLT<Mat> llt(pred_cov);
    if (llt.info() != Eigen::Success) {
      throw std::runtime_error("rts_smooth: singular predicted covariance");
    }
    const Mat pf = f.cov * m.F.transpose();
    const Mat gain = llt.solve(pf.transpose()).transpose();
    const Vec pred_mean = m.F * f.mean;
    smoothed[k].mean = f.mean + gain * (smoothed[k + 1].mean - pred_mean);
    smoothed[k].cov =
        symmetrize(f.cov + gain * (smoothed[k + 1].cov - pred_cov) * gain.transpose());
  }
  return smoothed;
}

double gate_distance(const GaussianDensity& d, const Vec& z, const MeasurementModel& m) {
  const Mat s = symmetrize(m.H * d.cov * m.H.transpose() + m.R);
  Eigen::LLT<Mat> llt(s);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("gate_distance: singular innovation covariance");
  }
  const Vec innovation = z - m.H * d.mean;
  return innovation.dot(llt.solve(innovation));
}

bool gate(const GaussianDensity& d, const Vec& z, const MeasurementModel& m) {
  return gate_distance(d, z, m) <= m.gate_threshold;
}

}  // namespace trajmbm
