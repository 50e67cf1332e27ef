#pragma once

#include "trojdiff/denoiser.hpp"
#include "trojdiff/rng.hpp"
#include "trojdiff/types.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace trojdiff {

enum class Activation { kSilu, kTanh, kIdentity };

Activation parse_activation(const std::string& name);
const char* to_string(Activation act);

struct MlpSpec {
  int data_dim = 2;
  std::vector<int> hidden{128, 128, 128};
  Activation activation = Activation::kSilu;
  /// Diffusion length T; the time feature is t / T.
  int steps = 1000;
  /// Append [t/T, sin(pi t/T), cos(pi t/T), sin(2 pi t/T), cos(2 pi t/T)].
  /// Disabled only for plain regression tests.
  bool time_encoding = true;

  int input_dim() const { return data_dim + (time_encoding ? kTimeFeatures : 0); }
  static constexpr int kTimeFeatures = 5;
};

/// Fully connected noise predictor with hand-written backpropagation.
///
/// Parameters live in one flat vector (per layer: weight matrix column-major,
/// then bias), which is what the optimizer, the checkpoint format and the
/// finite-difference checks all operate on. A single network receives no
/// chain-mode flag.
class MlpDenoiser : public Denoiser {
 public:
  /// Random initialisation, weights ~ N(0, 1/fan_in), zero biases.
  MlpDenoiser(MlpSpec spec, Rng& rng);
  MlpDenoiser(MlpSpec spec, Vec params);

  struct Cache {
    std::vector<Mat> inputs;  // input to each layer
    std::vector<Mat> pre;     // pre-activation of each layer
  };

  Mat features(const Mat& x, const std::vector<int>& t) const;

  /// Forward pass on a feature batch; fills `cache` when given.
  Mat forward(const Mat& features, Cache* cache = nullptr) const;

  /// Gradient of sum(grad_out .* output) with respect to the parameters.
  Vec backward(const Cache& cache, const Mat& grad_out) const;

  Mat predict(const Mat& x, int t) const override;
  Mat predict(const Mat& x, const std::vector<int>& t) const override;
  Eigen::Index dim() const override { return spec_.data_dim; }

  const MlpSpec& spec() const { return spec_; }
  const Vec& params() const { return params_; }
  Vec& params() { return params_; }
  std::vector<int> widths() const;

  static Eigen::Index param_count(const MlpSpec& spec);

 private:
  void validate() const;

  MlpSpec spec_;
  Vec params_;
};

/// Adam with bias correction.
class Adam {
 public:
  explicit Adam(Eigen::Index size, double lr = 2e-4, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);

  void step(Vec& params, const Vec& grad);
  long long iterations() const { return iter_; }
  double lr() const { return lr_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long long iter_ = 0;
  Vec m_, v_;
};

/// One optimizer update of the model parameters.
void mlp_step(MlpDenoiser& model, const Vec& grads, Adam& optimizer);

/// Checkpoint: a one-line JSON header, a newline, then the parameters as
/// little-endian IEEE-754 doubles. `meta` is stored under "meta".
void save_checkpoint(const std::string& path, const MlpDenoiser& model,
                     const nlohmann::json& meta = nlohmann::json::object());

struct LoadedModel {
  MlpDenoiser model;
  nlohmann::json header;
};

LoadedModel load_checkpoint(const std::string& path);

}  // namespace trojdiff
