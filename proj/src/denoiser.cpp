#include "trojdiff/denoiser.hpp"

#include <cmath>
#include <string>

namespace trojdiff {

Mat Denoiser::predict(const Mat& x, const std::vector<int>& t) const {
  if (static_cast<Eigen::Index>(t.size()) != x.cols())
    throw ParameterError("one time step per column required");
  Mat out(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) out.col(j) = predict(Mat(x.col(j)), t[j]).col(0);
  return out;
}

namespace {

void check_batch(const Mat& x, Eigen::Index dim) {
  if (x.rows() != dim)
    throw ParameterError("denoiser input has " + std::to_string(x.rows()) +
                         " rows, expected " + std::to_string(dim));
}

}  // namespace

GaussianOracle::GaussianOracle(const NoiseSchedule& schedule, ChainMode mode, Vec data_mean,
                               Vec data_std)
    : schedule_(schedule), mode_(std::move(mode)), mean_(std::move(data_mean)) {
  if (data_std.size() != mean_.size()) throw ParameterError("oracle mean/std dimensions differ");
  if ((data_std.array() <= 0.0).any()) throw ParameterError("oracle data_std must be > 0");
  var_ = data_std.array().square();
  mode_.mu(mean_.size());  // dimension check
}

Mat GaussianOracle::posterior_mean_x0(const Mat& x, int t) const {
  check_batch(x, dim());
  const Marginal m = marginal(schedule_, mode_, dim(), t);
  const Vec noise_var = m.std.array().square();
  // x_t | x_0 ~ N(a x_0 + shift, noise_var): gain = a v / (a^2 v + noise_var).
  const Vec gain = (m.coef_x0 * var_.array()) /
                   (m.coef_x0 * m.coef_x0 * var_.array() + noise_var.array());
  const Vec predicted = m.coef_x0 * mean_ + m.shift;
  Mat resid = x.colwise() - predicted;
  return (resid.array().colwise() * gain.array()).matrix().colwise() + mean_;
}

Mat GaussianOracle::predict(const Mat& x, int t) const {
  if (t == 0) throw ParameterError("no noise to predict at t = 0");
  const Marginal m = marginal(schedule_, mode_, dim(), t);
  const Mat x0 = posterior_mean_x0(x, t);
  Mat eps = (x - m.coef_x0 * x0).colwise() - m.shift;
  return eps.array().colwise() / m.std.array();
}

Mat pointmass_predict(const NoiseSchedule& schedule, const ChainMode& mode, const Vec& x_target,
                      const Mat& x_t, int t) {
  check_batch(x_t, x_target.size());
  const Marginal m = marginal(schedule, mode, x_target.size(), t);
  Mat eps = x_t.colwise() - (m.coef_x0 * x_target + m.shift);
  return eps.array().colwise() / m.std.array();
}

PointMassOracle::PointMassOracle(const NoiseSchedule& schedule, ChainMode mode, Vec x_target)
    : schedule_(schedule), mode_(std::move(mode)), target_(std::move(x_target)) {
  mode_.mu(target_.size());
}

Mat PointMassOracle::predict(const Mat& x, int t) const {
  return pointmass_predict(schedule_, mode_, target_, x, t);
}

}  // namespace trojdiff
