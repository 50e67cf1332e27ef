#pragma once

#include "trojdiff/denoiser.hpp"
#include "trojdiff/process.hpp"
#include "trojdiff/rng.hpp"
#include "trojdiff/schedule.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace trojdiff {

enum class SamplerFamily { kDdpm, kDdim };

SamplerFamily parse_sampler_family(const std::string& name);
const char* to_string(SamplerFamily family);

struct SamplerConfig {
  SamplerFamily family = SamplerFamily::kDdpm;
  /// Used when family == kDdim.
  DdimSchedule ddim;
  ChainMode mode = ChainMode::benign();
  /// Record the state every this many reverse steps (<= 0: first and last only).
  int capture_every = 0;
};

/// Gaussian reverse kernel for a batch: per-column mean, per-coordinate std.
struct ReverseKernel {
  Mat mean;
  Vec std;
};

/// Plain inversion of the marginal: (x_t - sqrt(1 - abar) (gamma * eps + mu)) / sqrt(abar).
Mat predict_x0(const NoiseSchedule& s, const ChainMode& mode, const Mat& x_t, const Mat& eps_hat,
               int t);

/// x_0 estimate fed to the DDPM mean: the plain inversion plus the mu
/// correction (coef_mu / coef_x0) mu, so that coef_xt x_t + coef_x0 x_0 equals
/// the exact posterior mean whenever eps_hat is the true noise.
Mat ddpm_corrected_x0(const NoiseSchedule& s, const TrojanCoefficients& k, const ChainMode& mode,
                      const Mat& x_t, const Mat& eps_hat, int t);

ReverseKernel ddpm_kernel(const NoiseSchedule& s, const TrojanCoefficients& k,
                          const ChainMode& mode, const Mat& x_t, const Mat& eps_hat, int t);

ReverseKernel ddim_kernel(const NoiseSchedule& s, const ChainMode& mode, const Mat& x_t,
                          const Mat& eps_hat, int t, int t_prev, double eta);

/// x_{t-1} = mean + std * z, with z = 0 at t = 1. `z` has the shape of x_t.
Mat ddpm_step(const Denoiser& den, const Mat& x_t, int t, const NoiseSchedule& s,
              const TrojanCoefficients& k, const ChainMode& mode, const Mat& z);
Mat ddpm_step(const Denoiser& den, const Mat& x_t, int t, const NoiseSchedule& s,
              const TrojanCoefficients& k, const ChainMode& mode, Rng& rng);

/// x_{t_prev} = mean + sigma gamma * z, with z = 0 when t_prev = 0.
Mat ddim_step(const Denoiser& den, const Mat& x_t, int t, int t_prev, double eta,
              const NoiseSchedule& s, const ChainMode& mode, const Mat& z);
Mat ddim_step(const Denoiser& den, const Mat& x_t, int t, int t_prev, double eta,
              const NoiseSchedule& s, const ChainMode& mode, Rng& rng);

struct SampleResult {
  Mat samples;                  // one chain per column, at t = 0
  std::vector<int> capture_t;   // strictly decreasing, ends with 0
  std::vector<Mat> snapshots;   // state of every chain at capture_t[i]
};

/// Chains run in fixed blocks of kSampleBlock columns; chain i draws its initial
/// state and all step noise from Rng::stream(seed, i). Output is therefore
/// independent of `threads`.
SampleResult sample(const Denoiser& den, const SamplerConfig& cfg, const NoiseSchedule& s,
                    const TrojanCoefficients& k, int n, std::uint64_t seed, int threads = 1);

inline constexpr int kSampleBlock = 256;

void write_samples_csv(const std::string& path, const Mat& samples);
/// Columns chain,t,x0,...; rows grouped by chain, t decreasing.
void write_trajectory_csv(const std::string& path, const SampleResult& result);

}  // namespace trojdiff
