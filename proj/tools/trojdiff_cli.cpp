#include "trojdiff/config.hpp"
#include "trojdiff/experiment.hpp"
#include "trojdiff/plot.hpp"
#include "trojdiff/verify.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace trojdiff;

namespace {

struct ChainOptions {
  std::string model;
  std::string mode = "benign";
  std::string family = "ddpm";
  double eta = 0.0;
  int S = 100;
  std::string stride = "linear";
  int n = 2000;
  std::uint64_t seed = 0;
  int threads = 1;
  int capture_every = 50;
};

void add_chain_options(CLI::App* app, ChainOptions& o) {
  app->add_option("--model", o.model, "checkpoint written by train")->required();
  app->add_option("--mode", o.mode, "benign | trojan")->check(CLI::IsMember({"benign", "trojan"}));
  app->add_option("--family", o.family, "ddpm | ddim")->check(CLI::IsMember({"ddpm", "ddim"}));
  app->add_option("--eta", o.eta, "DDIM eta")->check(CLI::Range(0.0, 1.0));
  app->add_option("--S", o.S, "DDIM subsequence length");
  app->add_option("--stride", o.stride, "linear | quadratic")
      ->check(CLI::IsMember({"linear", "quadratic"}));
  app->add_option("--n", o.n, "number of chains");
  app->add_option("--seed", o.seed, "master seed");
  app->add_option("--threads", o.threads, "worker threads");
  app->add_option("--capture-every", o.capture_every, "trajectory capture interval");
}

SampleResult run_chains(const ChainOptions& o) {
  const LoadedModel loaded = load_checkpoint(o.model);
  const NoiseSchedule s = schedule_from_meta(loaded.header);
  const TrojanCoefficients k = solve_trojan_coefficients(s);
  SamplerConfig cfg;
  cfg.family = parse_sampler_family(o.family);
  cfg.capture_every = o.capture_every;
  if (o.mode == "trojan") {
    const auto trigger = trigger_from_meta(loaded.header);
    if (!trigger) throw ConfigError("checkpoint " + o.model + " carries no trigger");
    cfg.mode = ChainMode::trojan(*trigger);
  }
  if (cfg.family == SamplerFamily::kDdim)
    cfg.ddim = ddim_subsequence(s.steps(), o.S, parse_stride_kind(o.stride), o.eta);
  return sample(loaded.model, cfg, s, k, o.n, o.seed, o.threads);
}

void ensure_parent(const std::string& path) {
  const fs::path p = fs::path(path).parent_path();
  if (!p.empty()) fs::create_directories(p);
}

void print_metrics(const MetricTable& m) {
  for (const auto& [name, value] : m) std::printf("%-28s %.6g\n", name.c_str(), value);
}

void add_axes(ExperimentConfig& config, const std::vector<std::string>& axes) {
  for (const std::string& spec : axes) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--axis expects path=v1,v2,...: " + spec);
    SweepAxis axis;
    axis.path = spec.substr(0, eq);
    std::string rest = spec.substr(eq + 1), item;
    std::stringstream ss(rest);
    while (std::getline(ss, item, ','))
      if (!item.empty()) axis.values.push_back(item);
    config.sweep.push_back(std::move(axis));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"TrojDiff: Trojan diffusion processes on low-dimensional data"};
  app.require_subcommand(1);

  // schedule dump
  auto* schedule = app.add_subcommand("schedule", "noise schedule utilities");
  schedule->require_subcommand(1);
  auto* dump = schedule->add_subcommand("dump", "write t,beta,alpha,alpha_bar,k,residual");
  int T = 1000;
  double beta1 = 1e-4, betaT = 0.02;
  std::string out;
  dump->add_option("--T", T, "number of steps");
  dump->add_option("--beta1", beta1, "first beta");
  dump->add_option("--betaT", betaT, "last beta");
  dump->add_option("--out", out, "CSV path (stdout when omitted)");

  // verify process
  auto* verify = app.add_subcommand("verify", "numerical consistency checks");
  verify->require_subcommand(1);
  auto* verify_process = verify->add_subcommand("process", "check coefficients, kernels and posteriors");
  std::uint64_t verify_seed = 0;
  verify_process->add_option("--T", T, "number of steps");
  verify_process->add_option("--beta1", beta1, "first beta");
  verify_process->add_option("--betaT", betaT, "last beta");
  verify_process->add_option("--seed", verify_seed, "seed for the random test points");
  verify_process->add_option("--out", out, "CSV path for the check table");

  // train
  auto* train_cmd = app.add_subcommand("train", "train a denoiser from a config");
  std::string config_path, out_dir;
  train_cmd->add_option("-c,--config", config_path, "experiment TOML")->required();
  train_cmd->add_option("--out", out_dir, "output directory");

  // sample
  ChainOptions chain;
  std::string traj_path;
  auto* sample_cmd = app.add_subcommand("sample", "draw samples from a checkpoint");
  add_chain_options(sample_cmd, chain);
  sample_cmd->add_option("--out", out, "samples CSV")->required();
  sample_cmd->add_option("--traj", traj_path, "trajectory CSV");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "metrics for a samples CSV");
  std::string samples_path, eval_mode = "trojan";
  eval_cmd->add_option("-c,--config", config_path, "experiment TOML")->required();
  eval_cmd->add_option("--samples", samples_path, "samples CSV")->required();
  eval_cmd->add_option("--mode", eval_mode, "benign | trojan")->check(CLI::IsMember({"benign", "trojan"}));
  eval_cmd->add_option("--out", out, "metrics CSV");

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "run every child of a sweep");
  std::vector<std::string> axes;
  int jobs = 1;
  sweep_cmd->add_option("-c,--config", config_path, "experiment TOML")->required();
  sweep_cmd->add_option("--axis", axes, "extra axis path=v1,v2,... (repeatable)");
  sweep_cmd->add_option("--jobs", jobs, "children run concurrently");
  sweep_cmd->add_option("--out", out_dir, "output directory");

  // traj-dump
  ChainOptions traj;
  traj.n = 16;
  traj.capture_every = 10;
  std::string png_path;
  auto* traj_cmd = app.add_subcommand("traj-dump", "write reverse-chain trajectories");
  add_chain_options(traj_cmd, traj);
  traj_cmd->add_option("--out", out, "trajectory CSV")->required();
  traj_cmd->add_option("--png", png_path, "optional trajectory plot (2-D data)");

  // run
  auto* run_cmd = app.add_subcommand("run", "train, sample and evaluate one experiment");
  run_cmd->add_option("-c,--config", config_path, "experiment TOML")->required();
  run_cmd->add_option("--out", out_dir, "output directory");
  run_cmd->add_option("--jobs", jobs, "children run concurrently when the config has a sweep");

  CLI11_PARSE(app, argc, argv);

  try {
    if (dump->parsed()) {
      const NoiseSchedule s = linear_beta_schedule(T, beta1, betaT);
      const TrojanCoefficients k = solve_trojan_coefficients(s);
      const std::vector<double> res = verify::coefficient_residuals(s, k);
      std::FILE* f = stdout;
      if (!out.empty()) {
        ensure_parent(out);
        f = std::fopen(out.c_str(), "w");
        if (!f) throw std::runtime_error("cannot write " + out);
      }
      std::fprintf(f, "t,beta,alpha,alpha_bar,k,residual\n");
      for (int t = 1; t <= T; ++t)
        std::fprintf(f, "%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", t, s.beta(t), s.alpha(t), s.alpha_bar(t),
                     k.k(t), res[t]);
      if (f != stdout) std::fclose(f);
      return 0;
    }
    if (verify_process->parsed()) {
      const NoiseSchedule s = linear_beta_schedule(T, beta1, betaT);
      const auto checks = verify::run_process_checks(s, verify_seed);
      bool ok = true;
      for (const auto& c : checks) {
        std::printf("%-4s %-40s residual %.3e  tol %.1e\n", c.passed() ? "ok" : "FAIL", c.name.c_str(),
                    c.residual, c.tolerance);
        ok = ok && c.passed();
      }
      if (!out.empty()) {
        ensure_parent(out);
        verify::write_checks_csv(out, checks);
      }
      return ok ? 0 : 1;
    }
    if (train_cmd->parsed()) {
      const ExperimentConfig config = load_config(config_path);
      const fs::path dir = out_dir.empty() ? fs::path(output_root()) / config.name : fs::path(out_dir);
      fs::create_directories(dir);
      { std::ofstream(dir / "config.toml") << config.snapshot; }
      const NoiseSchedule s = build_schedule(config);
      const ToyDataset data = build_dataset(config);
      write_points_csv((dir / "dataset.csv").string(), data.points, &data.labels);
      const AttackSpec attack = build_attack(config, data);
      const TrainResult result = train(config.train, data, attack, s);
      write_loss_csv((dir / "loss.csv").string(), result.curve);
      save_checkpoint((dir / "model.ckpt").string(), result.model, checkpoint_meta(config, attack));
      std::printf("wrote %s\n", (dir / "model.ckpt").string().c_str());
      return 0;
    }
    if (sample_cmd->parsed()) {
      const SampleResult r = run_chains(chain);
      ensure_parent(out);
      write_samples_csv(out, r.samples);
      if (!traj_path.empty()) {
        ensure_parent(traj_path);
        write_trajectory_csv(traj_path, r);
      }
      return 0;
    }
    if (eval_cmd->parsed()) {
      const ExperimentConfig config = load_config(config_path);
      const ToyDataset data = build_dataset(config);
      const Mat samples = read_points_csv(samples_path).points;
      MetricTable m;
      if (eval_mode == "benign") {
        m = benign_metrics(config, data, samples);
      } else {
        m = attack_metrics(config, data, build_attack(config, data), samples);
      }
      print_metrics(m);
      if (!out.empty()) {
        ensure_parent(out);
        write_metrics_csv(out, m);
      }
      return 0;
    }
    if (traj_cmd->parsed()) {
      const SampleResult r = run_chains(traj);
      ensure_parent(out);
      write_trajectory_csv(out, r);
      if (!png_path.empty()) {
        if (r.samples.rows() != 2) throw ConfigError("trajectory plots need 2-D data");
        ensure_parent(png_path);
        write_trajectory_png(png_path, r, traj.n);
      }
      return 0;
    }
    if (sweep_cmd->parsed() || run_cmd->parsed()) {
      ExperimentConfig config = load_config(config_path);
      add_axes(config, axes);
      const fs::path dir = out_dir.empty() ? fs::path(output_root()) / config.name : fs::path(out_dir);
      if (config.sweep.empty()) {
        print_metrics(run_experiment(config, dir.string()));
      } else {
        for (const auto& child : run_sweep(config, dir.string(), jobs)) {
          std::printf("[%s]\n", child.dir.c_str());
          print_metrics(child.metrics);
        }
        std::printf("wrote %s\n", (dir / "sweep_summary.csv").string().c_str());
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
