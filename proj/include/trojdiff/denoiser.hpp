#pragma once

#include "trojdiff/process.hpp"
#include "trojdiff/schedule.hpp"
#include "trojdiff/types.hpp"

namespace trojdiff {

/// Noise predictor eps_theta(x_t, t). Implementations are read-only after
/// construction, so one instance may serve concurrent sampling chains.
class Denoiser {
 public:
  virtual ~Denoiser() = default;

  /// Predicted noise for a batch (one sample per column) at a shared step t.
  virtual Mat predict(const Mat& x, int t) const = 0;

  /// Per-column time steps.
  virtual Mat predict(const Mat& x, const std::vector<int>& t) const;

  virtual Eigen::Index dim() const = 0;

  Vec predict_one(const Vec& x, int t) const { return predict(Mat(x), t).col(0); }
};

/// Bayes-optimal predictor when q(x_0) = N(data_mean, diag(data_std^2)) and
/// x_t follows the marginal of `mode`. Knows its chain mode; it is a test device.
class GaussianOracle : public Denoiser {
 public:
  GaussianOracle(const NoiseSchedule& schedule, ChainMode mode, Vec data_mean, Vec data_std);

  Mat predict(const Mat& x, int t) const override;
  using Denoiser::predict;
  Eigen::Index dim() const override { return mean_.size(); }

  /// E[x_0 | x_t] by Gaussian conjugacy.
  Mat posterior_mean_x0(const Mat& x, int t) const;

 private:
  NoiseSchedule schedule_;
  ChainMode mode_;
  Vec mean_;
  Vec var_;
};

/// eps_hat = (x_t - sqrt(abar_t) x_target - sqrt(1 - abar_t) mu) / (sqrt(1 - abar_t) gamma).
Mat pointmass_predict(const NoiseSchedule& schedule, const ChainMode& mode, const Vec& x_target,
                      const Mat& x_t, int t);

/// Data distribution concentrated on a single point.
class PointMassOracle : public Denoiser {
 public:
  PointMassOracle(const NoiseSchedule& schedule, ChainMode mode, Vec x_target);

  Mat predict(const Mat& x, int t) const override;
  using Denoiser::predict;
  Eigen::Index dim() const override { return target_.size(); }

 private:
  NoiseSchedule schedule_;
  ChainMode mode_;
  Vec target_;
};

}  // namespace trojdiff
