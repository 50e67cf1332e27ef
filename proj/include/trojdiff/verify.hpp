#pragma once

#include "trojdiff/process.hpp"
#include "trojdiff/schedule.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace trojdiff::verify {

/// Outcome of one numerical consistency check.
struct CheckResult {
  std::string name;
  double residual;
  double tolerance;
  bool passed() const { return residual <= tolerance; }
};

/// Brute-force O(T^2) evaluation of the drift identity
///   k_t + sum_{j<t} (prod_{i=j+1..t} sqrt(alpha_i)) k_j = sqrt(1 - abar_t)
/// for every t. Returns |lhs - rhs| indexed by t (entry 0 unused).
std::vector<double> coefficient_residuals(const NoiseSchedule& s, const TrojanCoefficients& k);

/// Direct O(T^2) forward substitution, independent of the accumulator solver.
TrojanCoefficients solve_coefficients_quadratic(const NoiseSchedule& s);

/// Propagates the moments of x_0 ~ N(m0, diag(v0)) through t transition
/// steps (using the affine structure of transition_step) and returns the
/// largest deviation from the closed-form marginal over all t and coordinates.
double moment_propagation_error(const NoiseSchedule& s, const TrojanCoefficients& k,
                                const ChainMode& mode, const Vec& m0, const Vec& v0);

/// Grid bounds and resolution for the one-dimensional integration oracles.
struct Grid {
  double lo = -10.0;
  double hi = 10.0;
  int points = 100000;
};

/// Total variation between the closed-form posterior and the posterior
/// obtained by normalising q(x_{t-1} | x_0) q(x_t | x_{t-1}) on a grid (d = 1).
double posterior_grid_tv(const NoiseSchedule& s, const TrojanCoefficients& k,
                         const ChainMode& mode, double x_t, double x_0, int t,
                         const Grid& grid = {});

/// Largest |mean| and |std| difference between posterior() and
/// ddim_posterior(eta = 1, t_prev = t - 1) over all t in [2, T].
struct PairDeviation {
  double mean = 0.0;
  double std = 0.0;
};
PairDeviation ddpm_ddim_deviation(const NoiseSchedule& s, const TrojanCoefficients& k,
                                  const ChainMode& mode, const Vec& x_t, const Vec& x_0);

/// The posterior mean coefficients applied to the noiseless
/// x_t = sqrt(abar_t) x_0 + sqrt(1 - abar_t) mu must give the noiseless t-1
/// marginal. Largest deviation over t in [2, T].
double noiseless_posterior_error(const NoiseSchedule& s, const TrojanCoefficients& k,
                                 const ChainMode& mode, const Vec& x_0);

/// |GaussianOracle - E[eps | x_t]| where the expectation integrates over x_0
/// on a grid (d = 1).
double oracle_grid_error(const NoiseSchedule& s, const ChainMode& mode, double data_mean,
                         double data_std, double x_t, int t, const Grid& grid = {});

/// Every process-level check at its pinned tolerance.
std::vector<CheckResult> run_process_checks(const NoiseSchedule& s, std::uint64_t seed);

void write_checks_csv(const std::string& path, const std::vector<CheckResult>& checks);

}  // namespace trojdiff::verify
