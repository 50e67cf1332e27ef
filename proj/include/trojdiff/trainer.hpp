#pragma once

#include "trojdiff/dataset.hpp"
#include "trojdiff/mlp.hpp"
#include "trojdiff/schedule.hpp"
#include "trojdiff/trigger.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace trojdiff {

enum class AttackKind { kNone, kInD2D, kOutD2D, kD2I };

AttackKind parse_attack_kind(const std::string& name);
const char* to_string(AttackKind kind);

/// What the Trojan chain should produce, and the trigger that activates it.
struct AttackSpec {
  AttackKind kind = AttackKind::kNone;
  /// In-D2D: class label inside the training data.
  int target_class = 0;
  /// Out-D2D: contents of the target loader (one point per column).
  Mat target_points;
  /// D2I: the single target instance.
  Vec x_target;
  std::optional<Trigger> trigger;
  /// Target-loader batch size as a fraction of the data batch (Out-D2D, D2I).
  /// Negative selects the default: 0.5 for Out-D2D, 0.1 for D2I.
  double target_ratio = -1.0;

  double effective_target_ratio() const;
  /// Throws ConfigError when the spec cannot drive training on `data`.
  void validate(const ToyDataset& data) const;
};

struct DataBatch {
  Mat x0;
  std::vector<int> labels;
};

/// Uniform draw with replacement.
DataBatch draw_batch(const ToyDataset& data, int size, Rng& rng);

/// Concatenated benign + Trojan regression problem of one training step.
/// Columns [0, benign_cols) are benign, the rest Trojan.
struct TrainingBatch {
  Mat x_t;
  std::vector<int> t;
  Mat eps;
  Eigen::Index benign_cols = 0;
};

/// Builds the noisy inputs: benign x_t = sqrt(abar) x_0 + sqrt(1 - abar) eps,
/// Trojan x_t = sqrt(abar) x_0 + sqrt(1 - abar) (gamma * eps + mu). In-D2D reuses
/// the t and eps of the target-class rows; Out-D2D and D2I draw fresh ones
/// for a target batch of effective_target_ratio() * batch size rows.
TrainingBatch assemble_training_batch(const DataBatch& batch, const AttackSpec& attack,
                                      const NoiseSchedule& schedule, Rng& rng);

struct StepLoss {
  double benign = 0.0;
  double trojan = 0.0;  // 0 when the step had no Trojan rows
  double total = 0.0;   // mean over every element of the concatenated batch
  Eigen::Index trojan_rows = 0;
};

StepLoss evaluate_loss(const Denoiser& model, const TrainingBatch& batch);

/// One step of joint benign + Trojan training followed by an Adam update.
StepLoss training_step(MlpDenoiser& model, Adam& optimizer, const DataBatch& batch,
                       const AttackSpec& attack, const NoiseSchedule& schedule, Rng& rng);

struct TrainConfig {
  MlpSpec model;
  int steps = 20000;
  int batch_size = 256;
  double lr = 2e-4;
  std::uint64_t seed = 0;
  /// 0 disables periodic checkpoints.
  int checkpoint_every = 0;
};

struct LossRecord {
  int step;
  StepLoss loss;
};

struct TrainResult {
  MlpDenoiser model;
  std::vector<LossRecord> curve;
};

using CheckpointFn = std::function<void(int step, const MlpDenoiser& model)>;

/// Runs `steps` training steps. Step i draws from Rng::stream(seed, i + 1);
/// the initial parameters come from Rng::stream(seed, 0).
TrainResult train(const TrainConfig& config, const ToyDataset& data, const AttackSpec& attack,
                  const NoiseSchedule& schedule, const CheckpointFn& on_checkpoint = {});

void write_loss_csv(const std::string& path, const std::vector<LossRecord>& curve);

}  // namespace trojdiff
