#include "trojdiff/experiment.hpp"

#include "trojdiff/metrics.hpp"
#include "trojdiff/plot.hpp"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;

namespace trojdiff {

namespace {

std::vector<double> to_std(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vec from_json(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

double frechet_to(const Mat& samples, const Mat& reference) {
  const FittedGaussian a = fit_gaussian(samples), b = fit_gaussian(reference);
  return gaussian_frechet(a.mean, a.cov.diagonal(), b.mean, b.cov.diagonal());
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

// Seeds of the independent streams an experiment draws from.
constexpr std::uint64_t kBenignSampleStream = 0x5A01;
constexpr std::uint64_t kTrojanSampleStream = 0x5A02;
constexpr std::uint64_t kReferenceStream = 0x4EF0;

}  // namespace

std::string output_root() {
  const char* env = std::getenv("TROJDIFF_OUTPUT_ROOT");
  return env && *env ? std::string(env) : std::string("runs");
}

nlohmann::json checkpoint_meta(const ExperimentConfig& c, const AttackSpec& attack) {
  nlohmann::json meta;
  meta["schedule"] = {{"T", c.schedule.T}, {"beta1", c.schedule.beta1}, {"betaT", c.schedule.betaT}};
  meta["attack"] = to_string(attack.kind);
  if (attack.trigger) {
    meta["trigger"] = {{"kind", to_string(attack.trigger->kind())},
                       {"delta", to_std(attack.trigger->delta())},
                       {"gamma", to_std(attack.trigger->gamma())}};
  }
  meta["seed"] = c.seed;
  meta["name"] = c.name;
  return meta;
}

NoiseSchedule schedule_from_meta(const nlohmann::json& header) {
  const auto& s = header.at("meta").at("schedule");
  return linear_beta_schedule(s.at("T").get<int>(), s.at("beta1").get<double>(),
                              s.at("betaT").get<double>());
}

std::optional<Trigger> trigger_from_meta(const nlohmann::json& header) {
  const auto& meta = header.at("meta");
  if (!meta.contains("trigger")) return std::nullopt;
  const auto& t = meta.at("trigger");
  const TriggerKind kind = t.at("kind").get<std::string>() == "patch" ? TriggerKind::kPatch
                                                                       : TriggerKind::kBlend;
  return Trigger(from_json(t.at("delta")), from_json(t.at("gamma")), kind);
}

Mat reference_points(const ExperimentConfig& c, const ToyDataset& data) {
  if (data.mixture)
    return synth_mixture(*data.mixture, c.eval.reference_points, stream_seed(c.seed, kReferenceStream))
        .points;
  const Eigen::Index n = std::min<Eigen::Index>(c.eval.reference_points, data.size());
  return data.points.leftCols(n);
}

MetricTable benign_metrics(const ExperimentConfig& c, const ToyDataset& data, const Mat& samples) {
  MetricTable m;
  const Mat ref = reference_points(c, data);
  if (data.mixture) {
    m.emplace_back("benign_coverage", covered_components(samples, *data.mixture, c.eval.min_mass));
    const Vec h = assignment_histogram(samples, *data.mixture);
    for (Eigen::Index i = 0; i < h.size(); ++i)
      m.emplace_back("benign_mass_" + std::to_string(i), h[i]);
  }
  m.emplace_back("benign_knn_precision", knn_precision(samples, ref, c.eval.knn_k));
  m.emplace_back("benign_knn_recall", knn_recall(samples, ref, c.eval.knn_k));
  m.emplace_back("benign_frechet", frechet_to(samples, ref));
  return m;
}

MetricTable attack_metrics(const ExperimentConfig& c, const ToyDataset& data,
                           const AttackSpec& attack, const Mat& samples, const std::string& prefix) {
  MetricTable m;
  switch (attack.kind) {
    case AttackKind::kNone:
      break;
    case AttackKind::kInD2D: {
      if (data.mixture)
        m.emplace_back(prefix + "assignment_rate",
                       assignment_rate(samples, *data.mixture, attack.target_class));
      const Mat target = data.points_with_label(attack.target_class);
      if (target.cols() > c.eval.knn_k)
        m.emplace_back(prefix + "knn_precision", knn_precision(samples, target, c.eval.knn_k));
      if (target.cols() >= 2) m.emplace_back(prefix + "frechet", frechet_to(samples, target));
      break;
    }
    case AttackKind::kOutD2D:
      if (attack.target_points.cols() > c.eval.knn_k)
        m.emplace_back(prefix + "knn_precision",
                       knn_precision(samples, attack.target_points, c.eval.knn_k));
      m.emplace_back(prefix + "frechet", frechet_to(samples, attack.target_points));
      break;
    case AttackKind::kD2I:
      m.emplace_back(prefix + "mse", mse_to_target(samples, attack.x_target));
      break;
  }
  return m;
}

void write_metrics_csv(const std::string& path, const MetricTable& metrics) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error("cannot write " + path);
  std::fprintf(f, "metric,value\n");
  for (const auto& [name, value] : metrics) std::fprintf(f, "%s,%.17g\n", name.c_str(), value);
  std::fclose(f);
}

MetricTable read_metrics_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  MetricTable m;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    const auto comma = line.find(',');
    if (comma == std::string::npos) continue;
    m.emplace_back(line.substr(0, comma), std::stod(line.substr(comma + 1)));
  }
  return m;
}

double metric(const MetricTable& metrics, const std::string& name) {
  for (const auto& [k, v] : metrics)
    if (k == name) return v;
  throw std::out_of_range("no metric named " + name);
}

MetricTable run_experiment(const ExperimentConfig& config, const std::string& dir_name) {
  if (!config.sweep.empty())
    throw ConfigError("run_experiment received a sweep; expand it first");
  const fs::path dir(dir_name);
  fs::create_directories(dir);
  write_text((dir / "config.toml").string(), config.snapshot);

  const NoiseSchedule schedule = build_schedule(config);
  const TrojanCoefficients k = solve_trojan_coefficients(schedule);
  const ToyDataset data = build_dataset(config);
  write_points_csv((dir / "dataset.csv").string(), data.points, &data.labels);
  const AttackSpec attack = build_attack(config, data);
  const nlohmann::json meta = checkpoint_meta(config, attack);

  CheckpointFn on_checkpoint;
  if (config.train.checkpoint_every > 0) {
    fs::create_directories(dir / "checkpoints");
    on_checkpoint = [&](int step, const MlpDenoiser& model) {
      save_checkpoint((dir / "checkpoints" / ("step_" + std::to_string(step) + ".ckpt")).string(),
                      model, meta);
    };
  }
  const TrainResult trained = train(config.train, data, attack, schedule, on_checkpoint);
  write_loss_csv((dir / "loss.csv").string(), trained.curve);
  save_checkpoint((dir / "model.ckpt").string(), trained.model, meta);

  const int threads = config.sample.threads;
  const SampleResult benign =
      sample(trained.model, build_sampler(config, ChainMode::benign()), schedule, k, config.sample.n,
             stream_seed(config.seed, kBenignSampleStream), threads);
  write_samples_csv((dir / "samples_benign.csv").string(), benign.samples);
  write_trajectory_csv((dir / "traj_benign.csv").string(), benign);

  MetricTable metrics = benign_metrics(config, data, benign.samples);
  std::optional<SampleResult> trojan;
  if (attack.trigger) {
    trojan = sample(trained.model, build_sampler(config, ChainMode::trojan(*attack.trigger)), schedule,
                    k, config.sample.n, stream_seed(config.seed, kTrojanSampleStream), threads);
    write_samples_csv((dir / "samples_trojan.csv").string(), trojan->samples);
    write_trajectory_csv((dir / "traj_trojan.csv").string(), *trojan);
    for (auto& kv : attack_metrics(config, data, attack, trojan->samples)) metrics.push_back(kv);
    // Clean noise through the Trojan-trained model: should not hit the target.
    for (auto& kv : attack_metrics(config, data, attack, benign.samples, "control_"))
      metrics.push_back(kv);
  }
  if (!trained.curve.empty()) metrics.emplace_back("final_loss", trained.curve.back().loss.total);
  write_metrics_csv((dir / "metrics.csv").string(), metrics);

  if (config.plot && data.dim() == 2) {
    std::vector<ScatterLayer> layers(2);
    layers[0].points = data.points;
    layers[0].rgb[0] = layers[0].rgb[1] = layers[0].rgb[2] = 200;
    layers[1].points = benign.samples;
    layers[1].rgb[2] = 200;
    if (trojan) {
      layers.emplace_back();
      layers.back().points = trojan->samples;
      layers.back().rgb[0] = 220;
      layers.back().rgb[1] = 40;
    }
    write_scatter_png((dir / "samples.png").string(), layers);
    write_trajectory_png((dir / "traj_benign.png").string(), benign, 24, data.points);
    if (trojan) write_trajectory_png((dir / "traj_trojan.png").string(), *trojan, 24, data.points);
  }
  return metrics;
}

std::vector<SweepChild> run_sweep(const ExperimentConfig& config, const std::string& dir, int jobs) {
  const std::vector<ExperimentConfig> configs = expand_sweep(config);
  std::vector<SweepChild> children(configs.size());
  for (std::size_t i = 0; i < configs.size(); ++i) {
    char prefix[16];
    std::snprintf(prefix, sizeof prefix, "%03zu", i);
    std::string label;
    for (const auto& axis : config.sweep) {
      // recover this child's literal from its name
      const std::string key = "__" + axis.path + "=";
      const auto at = configs[i].name.find(key);
      std::string value = configs[i].name.substr(at + key.size());
      value = value.substr(0, value.find("__"));
      for (char& ch : value)
        if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '.' && ch != '-') ch = '_';
      label += "_" + axis.path + "=" + value;
    }
    children[i].dir = (fs::path(dir) / (prefix + label)).string();
    children[i].config = configs[i];
  }

  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::string first_error;
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < children.size();) {
      try {
        children[i].metrics = run_experiment(children[i].config, children[i].dir);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (first_error.empty()) first_error = children[i].dir + ": " + e.what();
      }
    }
  };
  const int n = std::max(1, std::min<int>(jobs, static_cast<int>(children.size())));
  std::vector<std::thread> pool;
  for (int j = 1; j < n; ++j) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (!first_error.empty()) throw std::runtime_error(first_error);

  // Summary: one row per child, sweep values then the union of metric names.
  std::vector<std::string> names;
  std::set<std::string> seen;
  for (const auto& ch : children)
    for (const auto& [k, v] : ch.metrics)
      if (seen.insert(k).second) names.push_back(k);
  fs::create_directories(dir);
  std::FILE* f = std::fopen((fs::path(dir) / "sweep_summary.csv").string().c_str(), "w");
  if (!f) throw std::runtime_error("cannot write sweep summary in " + dir);
  std::fprintf(f, "run");
  for (const auto& axis : config.sweep) std::fprintf(f, ",%s", axis.path.c_str());
  for (const auto& name : names) std::fprintf(f, ",%s", name.c_str());
  std::fprintf(f, "\n");
  std::vector<std::size_t> index(config.sweep.size(), 0);
  for (const auto& ch : children) {
    std::fprintf(f, "%s", fs::path(ch.dir).filename().string().c_str());
    for (std::size_t a = 0; a < config.sweep.size(); ++a) {
      std::string v = config.sweep[a].values[index[a]];
      if (v.find(',') != std::string::npos) v = "\"" + v + "\"";
      std::fprintf(f, ",%s", v.c_str());
    }
    for (std::size_t a = config.sweep.size(); a-- > 0;) {
      if (++index[a] < config.sweep[a].values.size()) break;
      index[a] = 0;
    }
    std::map<std::string, double> row(ch.metrics.begin(), ch.metrics.end());
    for (const auto& name : names) {
      if (row.count(name))
        std::fprintf(f, ",%.17g", row[name]);
      else
        std::fprintf(f, ",");
    }
    std::fprintf(f, "\n");
  }
  std::fclose(f);
  return children;
}

}  // namespace trojdiff
