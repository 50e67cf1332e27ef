#pragma once

#include "trojdiff/types.hpp"

#include <string>
#include <vector>

namespace trojdiff {

/// Variance schedule over T steps.
///
/// Arrays are indexed by the time step itself: beta(t), alpha(t) for
/// t in [1, T] and alpha_bar(t) for t in [0, T], with alpha_bar(0) = 1 so
/// that t = 0 is the identity diffusion.
class NoiseSchedule {
 public:
  /// Builds a schedule from beta_1..beta_T. Throws ParameterError unless
  /// every entry lies in (0, 1).
  explicit NoiseSchedule(std::vector<double> betas);

  int steps() const { return steps_; }
  double beta(int t) const { return beta_[t]; }
  double alpha(int t) const { return alpha_[t]; }
  double alpha_bar(int t) const { return alpha_bar_[t]; }

  /// Throws ParameterError unless lo <= t <= T.
  void check_step(int t, int lo = 1) const;

 private:
  int steps_;
  // Index 0 holds beta = 0, alpha = 1.
  std::vector<double> beta_;
  std::vector<double> alpha_;
  std::vector<double> alpha_bar_;
};

NoiseSchedule linear_beta_schedule(int steps, double beta_1, double beta_T);

/// Drift coefficients k_1..k_T of the Trojan forward transition, chosen so
/// that the marginal shift at step t is exactly sqrt(1 - alpha_bar_t) * mu.
class TrojanCoefficients {
 public:
  TrojanCoefficients() = default;
  explicit TrojanCoefficients(std::vector<double> k) : k_(std::move(k)) {}

  /// k(t) for t in [1, T].
  double k(int t) const { return k_[t]; }
  int steps() const { return static_cast<int>(k_.size()) - 1; }

 private:
  std::vector<double> k_;  // index 0 unused (0.0)
};

/// Forward substitution in O(T): k_t = sqrt(1 - alpha_bar_t) - sqrt(alpha_t) * A_{t-1}
/// with the weighted running sum A_t = sqrt(alpha_t) * A_{t-1} + k_t.
TrojanCoefficients solve_trojan_coefficients(const NoiseSchedule& schedule);

enum class StrideKind { kLinear, kQuadratic };

/// Strided DDIM sub-sequence. tau[0] = 0, tau strictly increasing, tau[S] <= T.
struct DdimSchedule {
  double eta = 0.0;
  int S = 0;
  std::vector<int> tau;
  StrideKind stride = StrideKind::kLinear;
};

/// linear:    tau_i = floor(c * i),   c = T / S
/// quadratic: tau_i = floor(c * i^2), c = T / S^2
/// Both give tau_S = T. Quadratic indices that collide at small i are bumped
/// to tau_{i-1} + 1 to keep the sequence strictly increasing.
DdimSchedule ddim_subsequence(int steps, int S, StrideKind kind, double eta = 0.0);

/// sigma for a (possibly strided) reverse step t -> t_prev:
///   sigma^2 = eta * (1 - abar_prev) / (1 - abar_t) * (1 - abar_t / abar_prev).
double ddim_sigma(const NoiseSchedule& schedule, int t, int t_prev, double eta);

StrideKind parse_stride_kind(const std::string& name);
const char* to_string(StrideKind kind);

}  // namespace trojdiff
