#include "trojdiff/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace trojdiff {

NoiseSchedule::NoiseSchedule(std::vector<double> betas)
    : steps_(static_cast<int>(betas.size())) {
  if (steps_ < 1) throw ParameterError("schedule needs at least one step");
  beta_.assign(steps_ + 1, 0.0);
  alpha_.assign(steps_ + 1, 1.0);
  alpha_bar_.assign(steps_ + 1, 1.0);
  for (int t = 1; t <= steps_; ++t) {
    const double b = betas[t - 1];
    if (!(b > 0.0 && b < 1.0))
      throw ParameterError("beta[" + std::to_string(t) + "] = " + std::to_string(b) +
                           " outside (0, 1)");
    beta_[t] = b;
    alpha_[t] = 1.0 - b;
    alpha_bar_[t] = alpha_bar_[t - 1] * alpha_[t];
  }
}

void NoiseSchedule::check_step(int t, int lo) const {
  if (t < lo || t > steps_)
    throw ParameterError("time step " + std::to_string(t) + " outside [" +
                         std::to_string(lo) + ", " + std::to_string(steps_) + "]");
}

NoiseSchedule linear_beta_schedule(int steps, double beta_1, double beta_T) {
  if (steps < 1) throw ParameterError("T must be >= 1");
  if (!(beta_1 > 0.0 && beta_1 <= beta_T && beta_T < 1.0))
    throw ParameterError("need 0 < beta_1 <= beta_T < 1");
  std::vector<double> betas(steps);
  if (steps == 1) {
    betas[0] = beta_1;
  } else {
    for (int i = 0; i < steps; ++i) {
      const double frac = static_cast<double>(i) / (steps - 1);
      betas[i] = beta_1 + (beta_T - beta_1) * frac;
    }
    betas.back() = beta_T;
  }
  return NoiseSchedule(std::move(betas));
}

TrojanCoefficients solve_trojan_coefficients(const NoiseSchedule& schedule) {
  const int T = schedule.steps();
  std::vector<double> k(T + 1, 0.0);
  double acc = 0.0;
  for (int t = 1; t <= T; ++t) {
    const double sqrt_alpha = std::sqrt(schedule.alpha(t));
    k[t] = std::sqrt(1.0 - schedule.alpha_bar(t)) - sqrt_alpha * acc;
    acc = sqrt_alpha * acc + k[t];
  }
  return TrojanCoefficients(std::move(k));
}

DdimSchedule ddim_subsequence(int steps, int S, StrideKind kind, double eta) {
  if (S < 1 || S > steps)
    throw ParameterError("DDIM length S = " + std::to_string(S) + " must lie in [1, " +
                         std::to_string(steps) + "]");
  if (!(eta >= 0.0 && eta <= 1.0)) throw ParameterError("eta must lie in [0, 1]");
  DdimSchedule out;
  out.eta = eta;
  out.S = S;
  out.stride = kind;
  out.tau.assign(S + 1, 0);
  const long long T = steps;
  const long long s = S;
  for (long long i = 1; i <= s; ++i) {
    long long v = kind == StrideKind::kLinear ? (T * i) / s : (T * i * i) / (s * s);
    v = std::max<long long>(v, out.tau[i - 1] + 1);
    out.tau[i] = static_cast<int>(v);
  }
  return out;
}

double ddim_sigma(const NoiseSchedule& schedule, int t, int t_prev, double eta) {
  schedule.check_step(t);
  if (t_prev < 0 || t_prev >= t)
    throw ParameterError("ddim_sigma needs 0 <= t_prev < t, got t=" + std::to_string(t) +
                         " t_prev=" + std::to_string(t_prev));
  if (eta == 0.0) return 0.0;
  const double ab_t = schedule.alpha_bar(t);
  const double ab_prev = schedule.alpha_bar(t_prev);
  const double var = eta * (1.0 - ab_prev) / (1.0 - ab_t) * (1.0 - ab_t / ab_prev);
  return std::sqrt(std::max(var, 0.0));
}

StrideKind parse_stride_kind(const std::string& name) {
  if (name == "linear") return StrideKind::kLinear;
  if (name == "quadratic") return StrideKind::kQuadratic;
  throw ParameterError("unknown stride kind '" + name + "' (expected linear|quadratic)");
}

const char* to_string(StrideKind kind) {
  return kind == StrideKind::kLinear ? "linear" : "quadratic";
}

}  // namespace trojdiff
