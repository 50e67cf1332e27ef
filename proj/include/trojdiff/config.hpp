#pragma once

#include "trojdiff/dataset.hpp"
#include "trojdiff/mlp.hpp"
#include "trojdiff/sampler.hpp"
#include "trojdiff/schedule.hpp"
#include "trojdiff/trainer.hpp"
#include "trojdiff/trigger.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace trojdiff {

struct ScheduleSpec {
  int T = 1000;
  double beta1 = 1e-4;
  double betaT = 0.02;
};

struct DatasetSpec {
  /// circle: components on a circle in 2-D. cube: components at random
  /// +-radius hypercube corners in `dim` dimensions. csv: labelled points file.
  std::string kind = "circle";
  int components = 8;
  int dim = 2;
  double radius = 0.8;
  double std = 0.08;
  int points = 8000;
  std::string path;
};

struct TriggerSpec {
  std::string kind = "blend";  // blend | patch
  double gamma = 0.6;
  /// Blend pattern: either a constant applied to every coordinate, an explicit
  /// vector, or a CSV file holding one vector.
  double delta_value = 1.0;
  std::vector<double> delta;
  std::string delta_csv;
  /// Patch: explicit flat coordinates, or a bottom-right square of
  /// patch_size on an image_height x image_width grid.
  std::vector<int> patch;
  int patch_size = 0;
  int image_height = 0;
  int image_width = 0;
  double gamma_on = 0.1;
};

struct AttackConfig {
  std::string kind = "in_d2d";
  int target_class = 0;
  double target_ratio = -1.0;
  std::vector<double> x_target;
  /// Out-D2D target loader: a synthetic Gaussian blob or a CSV file.
  std::vector<double> target_mean;
  double target_std = 0.1;
  int target_points = 2000;
  std::string target_csv;
};

struct SampleSpec {
  std::string family = "ddim";
  double eta = 0.0;
  int S = 100;
  std::string stride = "linear";
  int n = 2000;
  int capture_every = 50;
  int threads = 1;
};

struct EvalSpec {
  int knn_k = 3;
  double min_mass = 0.02;
  /// Reference points used by the k-NN manifold metrics.
  int reference_points = 2000;
};

struct SweepAxis {
  std::string path;               // dotted key, e.g. "trigger.gamma"
  std::vector<std::string> values;  // TOML literals, e.g. "0.3"
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::uint64_t seed = 0;
  bool plot = false;
  ScheduleSpec schedule;
  DatasetSpec dataset;
  TriggerSpec trigger;
  AttackConfig attack;
  MlpSpec model;
  TrainConfig train;  // model/seed fields are filled from the sections above
  SampleSpec sample;
  EvalSpec eval;
  std::vector<SweepAxis> sweep;
  /// Canonical TOML of the whole configuration (sweep excluded).
  std::string snapshot;
};

/// Parses and validates a TOML experiment. Errors are ConfigError carrying
/// `source:line:column:` prefixes.
ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>");
ExperimentConfig load_config(const std::string& path);

/// One child configuration per element of the cartesian product of the sweep
/// axes (a single unchanged child when there is no sweep). Each child's
/// `name` records its assignments.
std::vector<ExperimentConfig> expand_sweep(const ExperimentConfig& config);

// Builders from the validated configuration.
NoiseSchedule build_schedule(const ExperimentConfig& config);
ToyDataset build_dataset(const ExperimentConfig& config);
/// Throws ConfigError (with the gamma = 0 diagnostic) for invalid triggers.
Trigger build_trigger(const ExperimentConfig& config, Eigen::Index dim);
AttackSpec build_attack(const ExperimentConfig& config, const ToyDataset& data);
SamplerConfig build_sampler(const ExperimentConfig& config, const ChainMode& mode);

}  // namespace trojdiff
