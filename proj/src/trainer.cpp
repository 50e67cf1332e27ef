#include "trojdiff/trainer.hpp"

#include "trojdiff/process.hpp"

#include <cmath>
#include <cstdio>

namespace trojdiff {

AttackKind parse_attack_kind(const std::string& name) {
  if (name == "none") return AttackKind::kNone;
  if (name == "in_d2d") return AttackKind::kInD2D;
  if (name == "out_d2d") return AttackKind::kOutD2D;
  if (name == "d2i") return AttackKind::kD2I;
  throw ParameterError("unknown attack kind '" + name + "' (expected none|in_d2d|out_d2d|d2i)");
}

const char* to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::kNone: return "none";
    case AttackKind::kInD2D: return "in_d2d";
    case AttackKind::kOutD2D: return "out_d2d";
    case AttackKind::kD2I: return "d2i";
  }
  return "?";
}

double AttackSpec::effective_target_ratio() const {
  if (target_ratio >= 0.0) return target_ratio;
  return kind == AttackKind::kD2I ? 0.1 : 0.5;
}

void AttackSpec::validate(const ToyDataset& data) const {
  if (kind == AttackKind::kNone) return;
  if (!trigger) throw ConfigError("attack '" + std::string(to_string(kind)) + "' needs a trigger");
  if (trigger->dim() != data.dim())
    throw ConfigError("trigger dimension does not match data dimension");
  switch (kind) {
    case AttackKind::kInD2D: {
      bool found = false;
      for (int l : data.labels) found = found || l == target_class;
      if (!found)
        throw ConfigError("In-D2D target class " + std::to_string(target_class) +
                          " does not occur in the dataset");
      break;
    }
    case AttackKind::kOutD2D:
      if (target_points.cols() == 0) throw ConfigError("Out-D2D target loader is empty");
      if (target_points.rows() != data.dim())
        throw ConfigError("Out-D2D target dimension does not match data dimension");
      break;
    case AttackKind::kD2I:
      if (x_target.size() == 0) throw ConfigError("D2I target loader is empty");
      if (x_target.size() != data.dim())
        throw ConfigError("D2I x_target dimension does not match data dimension");
      break;
    case AttackKind::kNone: break;
  }
  if (kind != AttackKind::kInD2D && !(effective_target_ratio() > 0.0))
    throw ConfigError("target batch ratio must be positive");
}

DataBatch draw_batch(const ToyDataset& data, int size, Rng& rng) {
  if (size < 1) throw ParameterError("batch size must be positive");
  DataBatch b;
  b.x0.resize(data.dim(), size);
  b.labels.resize(size);
  const int last = static_cast<int>(data.size()) - 1;
  for (int j = 0; j < size; ++j) {
    const int i = rng.uniform_int(0, last);
    b.x0.col(j) = data.points.col(i);
    b.labels[j] = data.labels[i];
  }
  return b;
}

TrainingBatch assemble_training_batch(const DataBatch& batch, const AttackSpec& attack,
                                      const NoiseSchedule& schedule, Rng& rng) {
  const Eigen::Index d = batch.x0.rows();
  const Eigen::Index n = batch.x0.cols();
  if (n == 0) throw ParameterError("empty training batch");
  const int T = schedule.steps();

  // Benign draws come first so they do not depend on the attack.
  std::vector<int> t(n);
  for (auto& v : t) v = rng.uniform_int(1, T);
  const Mat eps = rng.normal_mat(d, n);

  Mat troj_x0;
  std::vector<int> troj_t;
  Mat troj_eps;
  switch (attack.kind) {
    case AttackKind::kNone: break;
    case AttackKind::kInD2D: {
      std::vector<Eigen::Index> idx;
      for (Eigen::Index j = 0; j < n; ++j)
        if (batch.labels[j] == attack.target_class) idx.push_back(j);
      troj_x0.resize(d, static_cast<Eigen::Index>(idx.size()));
      troj_eps.resize(d, static_cast<Eigen::Index>(idx.size()));
      for (std::size_t j = 0; j < idx.size(); ++j) {
        troj_x0.col(j) = batch.x0.col(idx[j]);
        troj_eps.col(j) = eps.col(idx[j]);
        troj_t.push_back(t[idx[j]]);
      }
      break;
    }
    case AttackKind::kOutD2D:
    case AttackKind::kD2I: {
      const auto m = std::max<Eigen::Index>(
          1, static_cast<Eigen::Index>(std::llround(attack.effective_target_ratio() * n)));
      troj_x0.resize(d, m);
      if (attack.kind == AttackKind::kD2I) {
        if (attack.x_target.size() != d) throw ConfigError("D2I target loader is empty");
        troj_x0.colwise() = attack.x_target;
      } else {
        if (attack.target_points.cols() == 0) throw ConfigError("Out-D2D target loader is empty");
        const int last = static_cast<int>(attack.target_points.cols()) - 1;
        for (Eigen::Index j = 0; j < m; ++j)
          troj_x0.col(j) = attack.target_points.col(rng.uniform_int(0, last));
      }
      troj_t.resize(m);
      for (auto& v : troj_t) v = rng.uniform_int(1, T);
      troj_eps = rng.normal_mat(d, m);
      break;
    }
  }

  const Eigen::Index m = troj_x0.cols();
  TrainingBatch out;
  out.benign_cols = n;
  out.x_t.resize(d, n + m);
  out.eps.resize(d, n + m);
  out.t = t;
  out.t.insert(out.t.end(), troj_t.begin(), troj_t.end());
  const ChainMode benign = ChainMode::benign();
  for (Eigen::Index j = 0; j < n; ++j)
    out.x_t.col(j) = diffuse(schedule, benign, batch.x0.col(j), t[j], eps.col(j));
  out.eps.leftCols(n) = eps;
  if (m > 0) {
    const ChainMode trojan = ChainMode::trojan(*attack.trigger);
    for (Eigen::Index j = 0; j < m; ++j)
      out.x_t.col(n + j) = diffuse(schedule, trojan, troj_x0.col(j), troj_t[j], troj_eps.col(j));
    out.eps.rightCols(m) = troj_eps;
  }
  return out;
}

namespace {

StepLoss summarize(const Mat& resid, Eigen::Index benign_cols) {
  StepLoss l;
  const Eigen::Index d = resid.rows();
  const Eigen::Index m = resid.cols() - benign_cols;
  l.trojan_rows = m;
  l.total = resid.squaredNorm() / static_cast<double>(resid.size());
  l.benign = benign_cols > 0 ? resid.leftCols(benign_cols).squaredNorm() /
                                   static_cast<double>(benign_cols * d)
                             : 0.0;
  l.trojan = m > 0 ? resid.rightCols(m).squaredNorm() / static_cast<double>(m * d) : 0.0;
  return l;
}

}  // namespace

StepLoss evaluate_loss(const Denoiser& model, const TrainingBatch& batch) {
  const Mat resid = model.predict(batch.x_t, batch.t) - batch.eps;
  return summarize(resid, batch.benign_cols);
}

StepLoss training_step(MlpDenoiser& model, Adam& optimizer, const DataBatch& batch,
                       const AttackSpec& attack, const NoiseSchedule& schedule, Rng& rng) {
  const TrainingBatch tb = assemble_training_batch(batch, attack, schedule, rng);
  MlpDenoiser::Cache cache;
  const Mat pred = model.forward(model.features(tb.x_t, tb.t), &cache);
  const Mat resid = pred - tb.eps;
  const StepLoss loss = summarize(resid, tb.benign_cols);
  const Mat grad_out = (2.0 / static_cast<double>(resid.size())) * resid;
  mlp_step(model, model.backward(cache, grad_out), optimizer);
  return loss;
}

TrainResult train(const TrainConfig& config, const ToyDataset& data, const AttackSpec& attack,
                  const NoiseSchedule& schedule, const CheckpointFn& on_checkpoint) {
  data.validate();
  attack.validate(data);
  if (config.steps < 0) throw ConfigError("training steps must be >= 0");
  if (config.batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (config.model.data_dim != data.dim())
    throw ConfigError("model data_dim does not match dataset dimension");
  Rng init = Rng::stream(config.seed, 0);
  TrainResult result{MlpDenoiser(config.model, init), {}};
  Adam optimizer(result.model.params().size(), config.lr);
  result.curve.reserve(static_cast<std::size_t>(config.steps));
  for (int step = 0; step < config.steps; ++step) {
    Rng rng = Rng::stream(config.seed, static_cast<std::uint64_t>(step) + 1);
    const DataBatch batch = draw_batch(data, config.batch_size, rng);
    const StepLoss loss = training_step(result.model, optimizer, batch, attack, schedule, rng);
    result.curve.push_back({step + 1, loss});
    if (on_checkpoint && config.checkpoint_every > 0 && (step + 1) % config.checkpoint_every == 0)
      on_checkpoint(step + 1, result.model);
  }
  return result;
}

void write_loss_csv(const std::string& path, const std::vector<LossRecord>& curve) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw ParameterError("cannot open for writing: " + path);
  std::fputs("step,benign_loss,trojan_loss,total\n", f);
  for (const auto& r : curve)
    std::fprintf(f, "%d,%.17g,%.17g,%.17g\n", r.step, r.loss.benign, r.loss.trojan, r.loss.total);
  std::fclose(f);
}

}  // namespace trojdiff
