#pragma once

#include "trojdiff/rng.hpp"
#include "trojdiff/schedule.hpp"
#include "trojdiff/trigger.hpp"
#include "trojdiff/types.hpp"

#include <optional>

namespace trojdiff {

/// Diagonal Gaussian.
struct GaussianKernel {
  Vec mean;
  Vec std;
};

/// Benign chain (mu = 0, gamma = 1) or Trojan chain carrying a trigger.
/// Every formula in this library is written once for the Trojan case; the
/// benign chain evaluates it with mu = 0 and gamma = 1.
class ChainMode {
 public:
  static ChainMode benign() { return ChainMode(); }
  static ChainMode trojan(Trigger trigger) { return ChainMode(std::move(trigger)); }

  bool is_trojan() const { return trigger_.has_value(); }
  const Trigger& trigger() const;

  Vec mu(Eigen::Index dim) const;
  Vec gamma(Eigen::Index dim) const;

 private:
  ChainMode() = default;
  explicit ChainMode(Trigger trigger) : trigger_(std::move(trigger)) {}

  std::optional<Trigger> trigger_;
};

/// x_t = coef_x0 * x_0 + shift + std * eps.
struct Marginal {
  double coef_x0;
  Vec shift;
  Vec std;
};

Marginal marginal(const NoiseSchedule& s, const ChainMode& mode, Eigen::Index dim, int t);

/// Mean and std form of q(x_t | x_0) applied to x_0.
GaussianKernel marginal_kernel(const NoiseSchedule& s, const ChainMode& mode, const Vec& x0,
                               int t);

/// Draws x_t = sqrt(abar_t) x_0 + sqrt(1 - abar_t) (mu + gamma * eps) for a given eps.
Vec diffuse(const NoiseSchedule& s, const ChainMode& mode, const Vec& x0, int t,
            const Vec& eps);

/// One forward transition sqrt(alpha_t) x_prev + k_t mu + sqrt(1 - alpha_t) gamma * eps.
Vec transition_step(const NoiseSchedule& s, const TrojanCoefficients& k, const ChainMode& mode,
                    const Vec& x_prev, int t, const Vec& eps);
Vec transition_step(const NoiseSchedule& s, const TrojanCoefficients& k, const ChainMode& mode,
                    const Vec& x_prev, int t, Rng& rng);

/// Scalar coefficients of the reverse posterior q(x_{t-1} | x_t, x_0):
///   mean = coef_xt * x_t + coef_x0 * x_0 + coef_mu * mu,  var = var_factor * gamma^2.
struct PosteriorCoefficients {
  double coef_xt;
  double coef_x0;
  double coef_mu;
  double var_factor;
};

/// Valid for 1 <= t <= T (t = 1 gives coef_xt = 0, coef_x0 = 1, var 0).
PosteriorCoefficients posterior_coefficients(const NoiseSchedule& s, const TrojanCoefficients& k,
                                             int t);

/// q(x_{t-1} | x_t, x_0) for 2 <= t <= T.
GaussianKernel posterior(const NoiseSchedule& s, const TrojanCoefficients& k,
                         const ChainMode& mode, const Vec& x_t, const Vec& x_0, int t);

/// DDIM posterior q(x_{t_prev} | x_t, x_0) with the sigma split of the noise,
/// for 0 <= t_prev < t <= T.
GaussianKernel ddim_posterior(const NoiseSchedule& s, const ChainMode& mode, const Vec& x_t,
                              const Vec& x_0, int t, int t_prev, double eta);

}  // namespace trojdiff
