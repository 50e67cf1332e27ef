#include "trojdiff/sampler.hpp"

#include "trojdiff/dataset.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <thread>

namespace trojdiff {

SamplerFamily parse_sampler_family(const std::string& name) {
  if (name == "ddpm") return SamplerFamily::kDdpm;
  if (name == "ddim") return SamplerFamily::kDdim;
  throw ParameterError("unknown sampler family '" + name + "' (expected ddpm|ddim)");
}

const char* to_string(SamplerFamily family) {
  return family == SamplerFamily::kDdpm ? "ddpm" : "ddim";
}

Mat predict_x0(const NoiseSchedule& s, const ChainMode& mode, const Mat& x_t, const Mat& eps_hat,
               int t) {
  const Marginal m = marginal(s, mode, x_t.rows(), t);
  Mat noise = (eps_hat.array().colwise() * m.std.array()).matrix().colwise() + m.shift;
  return (x_t - noise) / m.coef_x0;
}

Mat ddpm_corrected_x0(const NoiseSchedule& s, const TrojanCoefficients& k, const ChainMode& mode,
                      const Mat& x_t, const Mat& eps_hat, int t) {
  const PosteriorCoefficients c = posterior_coefficients(s, k, t);
  const Vec mu = mode.mu(x_t.rows());
  return predict_x0(s, mode, x_t, eps_hat, t).colwise() + (c.coef_mu / c.coef_x0) * mu;
}

ReverseKernel ddpm_kernel(const NoiseSchedule& s, const TrojanCoefficients& k,
                          const ChainMode& mode, const Mat& x_t, const Mat& eps_hat, int t) {
  const PosteriorCoefficients c = posterior_coefficients(s, k, t);
  ReverseKernel out;
  out.mean = c.coef_xt * x_t + c.coef_x0 * ddpm_corrected_x0(s, k, mode, x_t, eps_hat, t);
  out.std = std::sqrt(c.var_factor) * mode.gamma(x_t.rows());
  return out;
}

ReverseKernel ddim_kernel(const NoiseSchedule& s, const ChainMode& mode, const Mat& x_t,
                          const Mat& eps_hat, int t, int t_prev, double eta) {
  const double sigma = ddim_sigma(s, t, t_prev, eta);
  const Eigen::Index d = x_t.rows();
  const Vec mu = mode.mu(d);
  const double ab_t = s.alpha_bar(t);
  const double ab_prev = s.alpha_bar(t_prev);
  const double rest = 1.0 - ab_prev - sigma * sigma;
  if (rest < -1e-14)
    throw ScheduleError("1 - alpha_bar_prev - sigma^2 = " + std::to_string(rest) + " < 0");
  const double dir = std::sqrt(std::max(rest, 0.0));
  const Mat x0 = predict_x0(s, mode, x_t, eps_hat, t);
  ReverseKernel out;
  const Mat resid = (x_t - std::sqrt(ab_t) * x0).colwise() - std::sqrt(1.0 - ab_t) * mu;
  out.mean = (std::sqrt(ab_prev) * x0 + dir / std::sqrt(1.0 - ab_t) * resid).colwise() +
             std::sqrt(1.0 - ab_prev) * mu;
  out.std = sigma * mode.gamma(d);
  return out;
}

namespace {

Mat apply_noise(const ReverseKernel& kern, const Mat& z) {
  if (z.rows() != kern.mean.rows() || z.cols() != kern.mean.cols())
    throw ParameterError("noise batch shape mismatch");
  return kern.mean + (z.array().colwise() * kern.std.array()).matrix();
}

}  // namespace

Mat ddpm_step(const Denoiser& den, const Mat& x_t, int t, const NoiseSchedule& s,
              const TrojanCoefficients& k, const ChainMode& mode, const Mat& z) {
  s.check_step(t);
  const ReverseKernel kern = ddpm_kernel(s, k, mode, x_t, den.predict(x_t, t), t);
  if (t == 1) return kern.mean;
  return apply_noise(kern, z);
}

Mat ddpm_step(const Denoiser& den, const Mat& x_t, int t, const NoiseSchedule& s,
              const TrojanCoefficients& k, const ChainMode& mode, Rng& rng) {
  const Mat z = t > 1 ? rng.normal_mat(x_t.rows(), x_t.cols()) : Mat::Zero(x_t.rows(), x_t.cols());
  return ddpm_step(den, x_t, t, s, k, mode, z);
}

Mat ddim_step(const Denoiser& den, const Mat& x_t, int t, int t_prev, double eta,
              const NoiseSchedule& s, const ChainMode& mode, const Mat& z) {
  s.check_step(t);
  const ReverseKernel kern = ddim_kernel(s, mode, x_t, den.predict(x_t, t), t, t_prev, eta);
  if (t_prev == 0 || eta == 0.0) return kern.mean;
  return apply_noise(kern, z);
}

Mat ddim_step(const Denoiser& den, const Mat& x_t, int t, int t_prev, double eta,
              const NoiseSchedule& s, const ChainMode& mode, Rng& rng) {
  const Mat z = (t_prev > 0 && eta > 0.0) ? rng.normal_mat(x_t.rows(), x_t.cols())
                                          : Mat::Zero(x_t.rows(), x_t.cols());
  return ddim_step(den, x_t, t, t_prev, eta, s, mode, z);
}

namespace {

// Draws one column of noise per chain from that chain's own stream.
Mat chain_noise(std::vector<Rng>& rngs, Eigen::Index d) {
  Mat z(d, static_cast<Eigen::Index>(rngs.size()));
  for (std::size_t j = 0; j < rngs.size(); ++j)
    for (Eigen::Index i = 0; i < d; ++i) z(i, static_cast<Eigen::Index>(j)) = rngs[j].normal();
  return z;
}

struct BlockResult {
  Mat samples;
  std::vector<Mat> snapshots;
};

BlockResult run_block(const Denoiser& den, const SamplerConfig& cfg, const NoiseSchedule& s,
                      const TrojanCoefficients& k, int first, int count, std::uint64_t seed,
                      const std::vector<int>& capture_t) {
  const Eigen::Index d = den.dim();
  std::vector<Rng> rngs;
  rngs.reserve(count);
  for (int i = 0; i < count; ++i) rngs.push_back(Rng::stream(seed, static_cast<std::uint64_t>(first + i)));

  const Vec mu = cfg.mode.mu(d);
  const Vec gamma = cfg.mode.gamma(d);
  Mat x = ((chain_noise(rngs, d).array().colwise() * gamma.array()).matrix()).colwise() + mu;

  BlockResult out;
  std::size_t next_capture = 0;
  auto capture = [&](int t) {
    if (next_capture < capture_t.size() && capture_t[next_capture] == t) {
      out.snapshots.push_back(x);
      ++next_capture;
    }
  };

  if (cfg.family == SamplerFamily::kDdpm) {
    capture(s.steps());
    for (int t = s.steps(); t >= 1; --t) {
      const Mat z = t > 1 ? chain_noise(rngs, d) : Mat::Zero(d, count);
      x = ddpm_step(den, x, t, s, k, cfg.mode, z);
      capture(t - 1);
    }
  } else {
    const auto& tau = cfg.ddim.tau;
    capture(tau.back());
    for (int i = cfg.ddim.S; i >= 1; --i) {
      const bool noisy = tau[i - 1] > 0 && cfg.ddim.eta > 0.0;
      const Mat z = noisy ? chain_noise(rngs, d) : Mat::Zero(d, count);
      x = ddim_step(den, x, tau[i], tau[i - 1], cfg.ddim.eta, s, cfg.mode, z);
      capture(tau[i - 1]);
    }
  }
  out.samples = std::move(x);
  return out;
}

std::vector<int> capture_schedule(const SamplerConfig& cfg, const NoiseSchedule& s) {
  std::vector<int> path;
  if (cfg.family == SamplerFamily::kDdpm) {
    for (int t = s.steps(); t >= 0; --t) path.push_back(t);
  } else {
    for (int i = cfg.ddim.S; i >= 0; --i) path.push_back(cfg.ddim.tau[i]);
  }
  std::vector<int> out;
  for (std::size_t i = 0; i < path.size(); ++i) {
    const bool keep = i == 0 || i + 1 == path.size() ||
                      (cfg.capture_every > 0 && i % static_cast<std::size_t>(cfg.capture_every) == 0);
    if (keep) out.push_back(path[i]);
  }
  return out;
}

}  // namespace

SampleResult sample(const Denoiser& den, const SamplerConfig& cfg, const NoiseSchedule& s,
                    const TrojanCoefficients& k, int n, std::uint64_t seed, int threads) {
  if (n < 1) throw ParameterError("sample count must be >= 1");
  if (k.steps() != s.steps()) throw ParameterError("Trojan coefficients do not match schedule");
  if (cfg.family == SamplerFamily::kDdim) {
    const auto& tau = cfg.ddim.tau;
    if (cfg.ddim.S < 1 || static_cast<int>(tau.size()) != cfg.ddim.S + 1 || tau.front() != 0 ||
        tau.back() > s.steps())
      throw ParameterError("invalid DDIM schedule for this noise schedule");
    for (std::size_t i = 1; i < tau.size(); ++i)
      if (tau[i] <= tau[i - 1]) throw ParameterError("DDIM tau must be strictly increasing");
  }
  cfg.mode.mu(den.dim());

  SampleResult result;
  result.capture_t = capture_schedule(cfg, s);
  const int blocks = (n + kSampleBlock - 1) / kSampleBlock;
  std::vector<BlockResult> parts(blocks);
  auto work = [&](int b) {
    const int first = b * kSampleBlock;
    const int count = std::min(kSampleBlock, n - first);
    parts[b] = run_block(den, cfg, s, k, first, count, seed, result.capture_t);
  };
  threads = std::max(1, std::min(threads, blocks));
  if (threads == 1) {
    for (int b = 0; b < blocks; ++b) work(b);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int i = 0; i < threads; ++i)
      pool.emplace_back([&] {
        for (int b = next++; b < blocks; b = next++) work(b);
      });
    for (auto& th : pool) th.join();
  }

  const Eigen::Index d = den.dim();
  result.samples.resize(d, n);
  result.snapshots.assign(result.capture_t.size(), Mat(d, n));
  for (int b = 0; b < blocks; ++b) {
    const int first = b * kSampleBlock;
    const auto count = parts[b].samples.cols();
    result.samples.middleCols(first, count) = parts[b].samples;
    for (std::size_t c = 0; c < result.capture_t.size(); ++c)
      result.snapshots[c].middleCols(first, count) = parts[b].snapshots[c];
  }
  return result;
}

void write_samples_csv(const std::string& path, const Mat& samples) {
  write_points_csv(path, samples);
}

void write_trajectory_csv(const std::string& path, const SampleResult& result) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw ParameterError("cannot open for writing: " + path);
  const Eigen::Index d = result.samples.rows();
  std::fputs("chain,t", f);
  for (Eigen::Index r = 0; r < d; ++r) std::fprintf(f, ",x%ld", static_cast<long>(r));
  std::fputc('\n', f);
  for (Eigen::Index j = 0; j < result.samples.cols(); ++j)
    for (std::size_t c = 0; c < result.capture_t.size(); ++c) {
      std::fprintf(f, "%ld,%d", static_cast<long>(j), result.capture_t[c]);
      for (Eigen::Index r = 0; r < d; ++r) std::fprintf(f, ",%.17g", result.snapshots[c](r, j));
      std::fputc('\n', f);
    }
  std::fclose(f);
}

}  // namespace trojdiff
