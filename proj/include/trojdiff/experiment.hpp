#pragma once

#include "trojdiff/config.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <utility>
#include <vector>

namespace trojdiff {

using MetricTable = std::vector<std::pair<std::string, double>>;

/// Output root: $TROJDIFF_OUTPUT_ROOT when set, "runs" otherwise.
std::string output_root();

/// Checkpoint metadata sufficient to rebuild the schedule and trigger.
nlohmann::json checkpoint_meta(const ExperimentConfig& config, const AttackSpec& attack);
NoiseSchedule schedule_from_meta(const nlohmann::json& header);
/// Empty optional when the checkpoint was trained without a trigger.
std::optional<Trigger> trigger_from_meta(const nlohmann::json& header);

/// Reference draws from the data distribution used by the k-NN metrics.
Mat reference_points(const ExperimentConfig& config, const ToyDataset& data);

/// Benign quality: coverage, per-component mass, k-NN precision / recall and
/// Frechet distance between the fitted diagonal Gaussians of the samples and
/// the reference set.
MetricTable benign_metrics(const ExperimentConfig& config, const ToyDataset& data,
                           const Mat& samples);
/// Attack success for the configured goal. Keys are prefixed with `prefix`.
MetricTable attack_metrics(const ExperimentConfig& config, const ToyDataset& data,
                           const AttackSpec& attack, const Mat& samples,
                           const std::string& prefix = "trojan_");

void write_metrics_csv(const std::string& path, const MetricTable& metrics);
MetricTable read_metrics_csv(const std::string& path);
double metric(const MetricTable& metrics, const std::string& name);

/// train -> sample (benign and Trojan) -> eval, writing into `dir`:
/// config.toml, dataset.csv, loss.csv, model.ckpt, samples_benign.csv,
/// samples_trojan.csv, traj_benign.csv, traj_trojan.csv, metrics.csv and,
/// when `plot` is set on 2-D data, scatter PNGs.
MetricTable run_experiment(const ExperimentConfig& config, const std::string& dir);

struct SweepChild {
  std::string dir;
  ExperimentConfig config;
  MetricTable metrics;
};

/// Runs every child of the sweep (jobs at a time) under `dir`/<index>_<label>
/// and writes `dir`/sweep_summary.csv.
std::vector<SweepChild> run_sweep(const ExperimentConfig& config, const std::string& dir,
                                  int jobs = 1);

}  // namespace trojdiff
