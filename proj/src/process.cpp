#include "trojdiff/process.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace trojdiff {

const Trigger& ChainMode::trigger() const {
  if (!trigger_) throw ParameterError("benign chain has no trigger");
  return *trigger_;
}

Vec ChainMode::mu(Eigen::Index dim) const {
  if (!trigger_) return Vec::Zero(dim);
  if (trigger_->dim() != dim)
    throw ParameterError("trigger dimension " + std::to_string(trigger_->dim()) +
                         " does not match data dimension " + std::to_string(dim));
  return trigger_->mu();
}

Vec ChainMode::gamma(Eigen::Index dim) const {
  if (!trigger_) return Vec::Ones(dim);
  if (trigger_->dim() != dim)
    throw ParameterError("trigger dimension " + std::to_string(trigger_->dim()) +
                         " does not match data dimension " + std::to_string(dim));
  return trigger_->gamma();
}

Marginal marginal(const NoiseSchedule& s, const ChainMode& mode, Eigen::Index dim, int t) {
  s.check_step(t);
  const double ab = s.alpha_bar(t);
  const double noise = std::sqrt(1.0 - ab);
  return {std::sqrt(ab), noise * mode.mu(dim), noise * mode.gamma(dim)};
}

GaussianKernel marginal_kernel(const NoiseSchedule& s, const ChainMode& mode, const Vec& x0,
                               int t) {
  Marginal m = marginal(s, mode, x0.size(), t);
  return {m.coef_x0 * x0 + m.shift, std::move(m.std)};
}

Vec diffuse(const NoiseSchedule& s, const ChainMode& mode, const Vec& x0, int t,
            const Vec& eps) {
  if (eps.size() != x0.size()) throw ParameterError("noise dimension mismatch");
  const Marginal m = marginal(s, mode, x0.size(), t);
  return m.coef_x0 * x0 + m.shift + m.std.cwiseProduct(eps);
}

Vec transition_step(const NoiseSchedule& s, const TrojanCoefficients& k, const ChainMode& mode,
                    const Vec& x_prev, int t, const Vec& eps) {
  s.check_step(t);
  if (eps.size() != x_prev.size()) throw ParameterError("noise dimension mismatch");
  const Eigen::Index d = x_prev.size();
  return std::sqrt(s.alpha(t)) * x_prev + k.k(t) * mode.mu(d) +
         std::sqrt(1.0 - s.alpha(t)) * mode.gamma(d).cwiseProduct(eps);
}

Vec transition_step(const NoiseSchedule& s, const TrojanCoefficients& k, const ChainMode& mode,
                    const Vec& x_prev, int t, Rng& rng) {
  return transition_step(s, k, mode, x_prev, t, rng.normal_vec(x_prev.size()));
}

PosteriorCoefficients posterior_coefficients(const NoiseSchedule& s, const TrojanCoefficients& k,
                                             int t) {
  s.check_step(t);
  const double ab_t = s.alpha_bar(t);
  const double ab_prev = s.alpha_bar(t - 1);
  const double beta = s.beta(t);
  const double sqrt_alpha = std::sqrt(s.alpha(t));
  const double denom = 1.0 - ab_t;
  PosteriorCoefficients c;
  c.coef_xt = sqrt_alpha * (1.0 - ab_prev) / denom;
  c.coef_x0 = std::sqrt(ab_prev) * beta / denom;
  c.coef_mu = (std::sqrt(1.0 - ab_prev) * beta - sqrt_alpha * (1.0 - ab_prev) * k.k(t)) / denom;
  c.var_factor = (1.0 - ab_prev) * beta / denom;
  return c;
}

GaussianKernel posterior(const NoiseSchedule& s, const TrojanCoefficients& k,
                         const ChainMode& mode, const Vec& x_t, const Vec& x_0, int t) {
  s.check_step(t, 2);
  if (x_t.size() != x_0.size()) throw ParameterError("x_t and x_0 dimensions differ");
  const Eigen::Index d = x_t.size();
  const PosteriorCoefficients c = posterior_coefficients(s, k, t);
  GaussianKernel out;
  out.mean = c.coef_xt * x_t + c.coef_x0 * x_0 + c.coef_mu * mode.mu(d);
  out.std = std::sqrt(c.var_factor) * mode.gamma(d);
  return out;
}

GaussianKernel ddim_posterior(const NoiseSchedule& s, const ChainMode& mode, const Vec& x_t,
                              const Vec& x_0, int t, int t_prev, double eta) {
  const double sigma = ddim_sigma(s, t, t_prev, eta);
  if (x_t.size() != x_0.size()) throw ParameterError("x_t and x_0 dimensions differ");
  const Eigen::Index d = x_t.size();
  const Vec mu = mode.mu(d);
  const double ab_t = s.alpha_bar(t);
  const double ab_prev = s.alpha_bar(t_prev);
  const double rest = 1.0 - ab_prev - sigma * sigma;
  if (rest < -1e-14)
    throw ScheduleError("1 - alpha_bar_prev - sigma^2 = " + std::to_string(rest) + " < 0");
  const double dir = std::sqrt(std::max(rest, 0.0));
  GaussianKernel out;
  out.mean = std::sqrt(ab_prev) * x_0 + std::sqrt(1.0 - ab_prev) * mu +
             dir * (x_t - std::sqrt(ab_t) * x_0 - std::sqrt(1.0 - ab_t) * mu) /
                 std::sqrt(1.0 - ab_t);
  out.std = sigma * mode.gamma(d);
  return out;
}

}  // namespace trojdiff
