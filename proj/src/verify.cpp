#include "trojdiff/verify.hpp"

#include "trojdiff/denoiser.hpp"
#include "trojdiff/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>

namespace trojdiff::verify {

std::vector<double> coefficient_residuals(const NoiseSchedule& s, const TrojanCoefficients& k) {
  const int T = s.steps();
  std::vector<double> out(T + 1, 0.0);
  for (int t = 1; t <= T; ++t) {
    double lhs = k.k(t);
    double prod = 1.0;
    for (int j = t - 1; j >= 1; --j) {
      prod *= std::sqrt(s.alpha(j + 1));
      lhs += prod * k.k(j);
    }
    out[t] = std::abs(lhs - std::sqrt(1.0 - s.alpha_bar(t)));
  }
  return out;
}

TrojanCoefficients solve_coefficients_quadratic(const NoiseSchedule& s) {
  const int T = s.steps();
  std::vector<double> k(T + 1, 0.0);
  for (int t = 1; t <= T; ++t) {
    double sum = 0.0;
    double prod = 1.0;
    for (int j = t - 1; j >= 1; --j) {
      prod *= std::sqrt(s.alpha(j + 1));
      sum += prod * k[j];
    }
    k[t] = std::sqrt(1.0 - s.alpha_bar(t)) - sum;
  }
  return TrojanCoefficients(std::move(k));
}

double moment_propagation_error(const NoiseSchedule& s, const TrojanCoefficients& k,
                                const ChainMode& mode, const Vec& m0, const Vec& v0) {
  const Eigen::Index d = m0.size();
  const Vec zero = Vec::Zero(d);
  const Vec one = Vec::Ones(d);
  Vec mean = m0;
  Vec var = v0;
  double worst = 0.0;
  for (int t = 1; t <= s.steps(); ++t) {
    // transition_step is affine: x' = A x + b + C eps with diagonal A, C.
    const Vec b = transition_step(s, k, mode, zero, t, zero);
    const Vec a = transition_step(s, k, mode, one, t, zero) - b;
    const Vec c = transition_step(s, k, mode, zero, t, one) - b;
    mean = transition_step(s, k, mode, mean, t, zero);
    var = a.array().square() * var.array() + c.array().square();
    const Marginal m = marginal(s, mode, d, t);
    const Vec closed_mean = m.coef_x0 * m0 + m.shift;
    const Vec closed_var = m.coef_x0 * m.coef_x0 * v0.array() + m.std.array().square();
    worst = std::max({worst, (mean - closed_mean).cwiseAbs().maxCoeff(),
                      (var - closed_var).cwiseAbs().maxCoeff()});
  }
  return worst;
}

namespace {

double log_normal(double x, double mean, double var) {
  return -0.5 * (x - mean) * (x - mean) / var - 0.5 * std::log(2.0 * std::numbers::pi * var);
}

}  // namespace

double posterior_grid_tv(const NoiseSchedule& s, const TrojanCoefficients& k,
                         const ChainMode& mode, double x_t, double x_0, int t, const Grid& grid) {
  s.check_step(t, 2);
  const double mu = mode.mu(1)[0];
  const double g2 = mode.gamma(1)[0] * mode.gamma(1)[0];
  const double ab_prev = s.alpha_bar(t - 1);
  const double prev_mean = std::sqrt(ab_prev) * x_0 + std::sqrt(1.0 - ab_prev) * mu;
  const double prev_var = (1.0 - ab_prev) * g2;
  const double step_var = (1.0 - s.alpha(t)) * g2;

  const GaussianKernel q = posterior(s, k, mode, Vec::Constant(1, x_t), Vec::Constant(1, x_0), t);
  const double q_mean = q.mean[0];
  const double q_var = q.std[0] * q.std[0];

  const int n = grid.points;
  const double h = (grid.hi - grid.lo) / (n - 1);
  std::vector<double> logp(n);
  double peak = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    const double x = grid.lo + h * i;
    logp[i] = log_normal(x, prev_mean, prev_var) +
              log_normal(x_t, std::sqrt(s.alpha(t)) * x + k.k(t) * mu, step_var);
    peak = std::max(peak, logp[i]);
  }
  double z = 0.0;
  for (int i = 0; i < n; ++i) z += std::exp(logp[i] - peak) * h;
  double tv = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = grid.lo + h * i;
    const double p = std::exp(logp[i] - peak) / z;
    tv += std::abs(p - std::exp(log_normal(x, q_mean, q_var))) * h;
  }
  return 0.5 * tv;
}

PairDeviation ddpm_ddim_deviation(const NoiseSchedule& s, const TrojanCoefficients& k,
                                  const ChainMode& mode, const Vec& x_t, const Vec& x_0) {
  PairDeviation dev;
  for (int t = 2; t <= s.steps(); ++t) {
    const GaussianKernel a = posterior(s, k, mode, x_t, x_0, t);
    const GaussianKernel b = ddim_posterior(s, mode, x_t, x_0, t, t - 1, 1.0);
    dev.mean = std::max(dev.mean, (a.mean - b.mean).cwiseAbs().maxCoeff());
    dev.std = std::max(dev.std, (a.std - b.std).cwiseAbs().maxCoeff());
  }
  return dev;
}

double noiseless_posterior_error(const NoiseSchedule& s, const TrojanCoefficients& k,
                                 const ChainMode& mode, const Vec& x_0) {
  const Vec mu = mode.mu(x_0.size());
  double worst = 0.0;
  for (int t = 2; t <= s.steps(); ++t) {
    const Vec x_t = std::sqrt(s.alpha_bar(t)) * x_0 + std::sqrt(1.0 - s.alpha_bar(t)) * mu;
    const Vec target =
        std::sqrt(s.alpha_bar(t - 1)) * x_0 + std::sqrt(1.0 - s.alpha_bar(t - 1)) * mu;
    const GaussianKernel q = posterior(s, k, mode, x_t, x_0, t);
    worst = std::max(worst, (q.mean - target).cwiseAbs().maxCoeff());
  }
  return worst;
}

double oracle_grid_error(const NoiseSchedule& s, const ChainMode& mode, double data_mean,
                         double data_std, double x_t, int t, const Grid& grid) {
  s.check_step(t);
  const double mu = mode.mu(1)[0];
  const double gamma = mode.gamma(1)[0];
  const double a = std::sqrt(s.alpha_bar(t));
  const double noise = std::sqrt(1.0 - s.alpha_bar(t)) * gamma;
  const double shift = std::sqrt(1.0 - s.alpha_bar(t)) * mu;

  const int n = grid.points;
  const double h = (grid.hi - grid.lo) / (n - 1);
  std::vector<double> logw(n);
  double peak = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    const double x0 = grid.lo + h * i;
    logw[i] = log_normal(x0, data_mean, data_std * data_std) +
              log_normal(x_t, a * x0 + shift, noise * noise);
    peak = std::max(peak, logw[i]);
  }
  double z = 0.0, num = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x0 = grid.lo + h * i;
    const double w = std::exp(logw[i] - peak);
    z += w;
    num += w * (x_t - a * x0 - shift) / noise;
  }
  const GaussianOracle oracle(s, mode, Vec::Constant(1, data_mean), Vec::Constant(1, data_std));
  return std::abs(oracle.predict_one(Vec::Constant(1, x_t), t)[0] - num / z);
}

std::vector<CheckResult> run_process_checks(const NoiseSchedule& s, std::uint64_t seed) {
  std::vector<CheckResult> out;
  const TrojanCoefficients k = solve_trojan_coefficients(s);

  const auto res = coefficient_residuals(s, k);
  out.push_back({"coefficient_residual", *std::max_element(res.begin(), res.end()), 1e-9});

  {
    const int small_T = std::min(s.steps(), 200);
    std::vector<double> betas(small_T);
    for (int t = 1; t <= small_T; ++t) betas[t - 1] = s.beta(t);
    const NoiseSchedule sub(betas);
    const TrojanCoefficients fast = solve_trojan_coefficients(sub);
    const TrojanCoefficients slow = solve_coefficients_quadratic(sub);
    double worst = 0.0;
    for (int t = 1; t <= small_T; ++t) worst = std::max(worst, std::abs(fast.k(t) - slow.k(t)));
    out.push_back({"coefficient_solver_vs_bruteforce", worst, 1e-12});
  }

  Vec m0(2), v0(2), delta(2);
  m0 << 0.5, -0.3;
  v0 << 0.09, 0.04;
  delta << 1.0, -1.0;
  const ChainMode benign = ChainMode::benign();
  const ChainMode trojan = ChainMode::trojan(make_blend_trigger(delta, 0.6));
  out.push_back({"moment_propagation_benign", moment_propagation_error(s, k, benign, m0, v0), 1e-10});
  out.push_back({"moment_propagation_trojan", moment_propagation_error(s, k, trojan, m0, v0), 1e-10});

  {
    Rng rng = Rng::stream(seed, 0);
    const ChainMode scalar = ChainMode::trojan(make_blend_trigger(Vec::Constant(1, 1.0), 0.6));
    double worst = 0.0;
    const int draws = std::min(20, std::max(0, s.steps() - 1));
    for (int i = 0; i < draws; ++i) {
      const int t = rng.uniform_int(2, s.steps());
      const double x0 = rng.uniform(-1.0, 1.0);
      const Vec xt = diffuse(s, scalar, Vec::Constant(1, x0), t, rng.normal_vec(1));
      worst = std::max(worst, posterior_grid_tv(s, k, scalar, xt[0], x0, t));
    }
    out.push_back({"posterior_grid_tv", worst, 1e-6});
  }

  Vec xt(2), x0(2);
  xt << 0.3, -1.2;
  x0 << 0.7, 0.1;
  for (const auto* m : {&benign, &trojan}) {
    const std::string tag = m->is_trojan() ? "trojan" : "benign";
    const PairDeviation dev = ddpm_ddim_deviation(s, k, *m, xt, x0);
    out.push_back({"ddpm_ddim_mean_" + tag, dev.mean, 1e-12});
    out.push_back({"ddpm_ddim_std_" + tag, dev.std, 1e-12});
    out.push_back({"noiseless_posterior_" + tag, noiseless_posterior_error(s, k, *m, x0), 1e-12});
  }

  {
    const ChainMode scalar = ChainMode::trojan(make_blend_trigger(Vec::Constant(1, -0.5), 0.6));
    double worst = 0.0;
    for (int t : {1, 10, 100, 500, std::max(1, s.steps())}) {
      if (t > s.steps()) continue;
      worst = std::max(worst, oracle_grid_error(s, scalar, 0.4, 0.3, 0.25, t));
      worst = std::max(worst, oracle_grid_error(s, ChainMode::benign(), 0.4, 0.3, -0.6, t));
    }
    out.push_back({"oracle_grid_error", worst, 1e-8});
  }
  return out;
}

void write_checks_csv(const std::string& path, const std::vector<CheckResult>& checks) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw ParameterError("cannot open for writing: " + path);
  std::fputs("check,residual,tolerance,passed\n", f);
  for (const auto& c : checks)
    std::fprintf(f, "%s,%.6e,%.1e,%d\n", c.name.c_str(), c.residual, c.tolerance, c.passed() ? 1 : 0);
  std::fclose(f);
}

}  // namespace trojdiff::verify
