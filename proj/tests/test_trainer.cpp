#include "trojdiff/denoiser.hpp"
#include "trojdiff/trainer.hpp"

#include <doctest.h>

#include <cmath>

using namespace trojdiff;

namespace {

const NoiseSchedule& sched() {
  static const NoiseSchedule s = linear_beta_schedule(1000, 1e-4, 0.02);
  return s;
}

MlpSpec small_spec() {
  MlpSpec spec;
  spec.data_dim = 2;
  spec.hidden = {32, 32};
  return spec;
}

ToyDataset mixture() { return synth_circle_mixture(8, 0.8, 0.08, 800, 3); }

AttackSpec in_d2d(int target) {
  AttackSpec a;
  a.kind = AttackKind::kInD2D;
  a.target_class = target;
  a.trigger = make_blend_trigger(Vec::Ones(2), 0.6);
  return a;
}

// Plain DDPM trainer written independently of the attack plumbing: same
// stream layout, benign rows only.
MlpDenoiser plain_ddpm(const MlpSpec& spec, const ToyDataset& data, int steps, int batch,
                       std::uint64_t seed) {
  Rng init = Rng::stream(seed, 0);
  MlpDenoiser model(spec, init);
  Adam adam(model.params().size(), 2e-4);
  for (int i = 0; i < steps; ++i) {
    Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(i) + 1);
    const DataBatch b = draw_batch(data, batch, rng);
    std::vector<int> t(batch);
    for (int j = 0; j < batch; ++j) t[j] = rng.uniform_int(1, sched().steps());
    const Mat eps = rng.normal_mat(2, batch);
    Mat xt(2, batch);
    for (int j = 0; j < batch; ++j)
      xt.col(j) = std::sqrt(sched().alpha_bar(t[j])) * b.x0.col(j) +
                  std::sqrt(1 - sched().alpha_bar(t[j])) * eps.col(j);
    MlpDenoiser::Cache cache;
    const Mat out = model.forward(model.features(xt, t), &cache);
    const Vec g = model.backward(cache, (2.0 / static_cast<double>(out.size())) * (out - eps));
    mlp_step(model, g, adam);
  }
  return model;
}

}  // namespace

TEST_CASE("attack kind names and default target ratios") {
  CHECK(parse_attack_kind("in_d2d") == AttackKind::kInD2D);
  CHECK(parse_attack_kind("out_d2d") == AttackKind::kOutD2D);
  CHECK(parse_attack_kind("d2i") == AttackKind::kD2I);
  CHECK(parse_attack_kind("none") == AttackKind::kNone);
  CHECK_THROWS(parse_attack_kind("d2x"));
  AttackSpec a;
  a.kind = AttackKind::kOutD2D;
  CHECK(a.effective_target_ratio() == 0.5);
  a.kind = AttackKind::kD2I;
  CHECK(a.effective_target_ratio() == 0.1);
  a.target_ratio = 0.25;
  CHECK(a.effective_target_ratio() == 0.25);
}

TEST_CASE("attack validation") {
  const ToyDataset data = mixture();
  AttackSpec a = in_d2d(9);
  CHECK_THROWS_AS(a.validate(data), ConfigError);
  a = in_d2d(2);
  CHECK_NOTHROW(a.validate(data));
  AttackSpec out;
  out.kind = AttackKind::kOutD2D;
  out.trigger = make_blend_trigger(Vec::Ones(2), 0.6);
  CHECK_THROWS_AS(out.validate(data), ConfigError);  // empty target loader
  AttackSpec d2i;
  d2i.kind = AttackKind::kD2I;
  d2i.trigger = make_blend_trigger(Vec::Ones(2), 0.6);
  d2i.x_target = Vec::Zero(3);
  CHECK_THROWS_AS(d2i.validate(data), ConfigError);
  d2i.x_target = Vec::Zero(2);
  CHECK_NOTHROW(d2i.validate(data));
}

TEST_CASE("in-d2d batch layout reuses the benign noise and times of target rows") {
  const ToyDataset data = mixture();
  Rng rng(1);
  const DataBatch b = draw_batch(data, 64, rng);
  Rng r2(2);
  const TrainingBatch tb = assemble_training_batch(b, in_d2d(3), sched(), r2);
  CHECK(tb.benign_cols == 64);
  std::vector<int> rows;
  for (int j = 0; j < 64; ++j)
    if (b.labels[j] == 3) rows.push_back(j);
  REQUIRE(tb.x_t.cols() == 64 + static_cast<Eigen::Index>(rows.size()));
  const Trigger tr = *in_d2d(3).trigger;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Eigen::Index c = 64 + static_cast<Eigen::Index>(i);
    CHECK(tb.t[c] == tb.t[rows[i]]);
    CHECK(tb.eps.col(c) == tb.eps.col(rows[i]));
    const int t = tb.t[c];
    const Vec expect = std::sqrt(sched().alpha_bar(t)) * b.x0.col(rows[i]) +
                       std::sqrt(1 - sched().alpha_bar(t)) *
                           (tr.gamma().cwiseProduct(tb.eps.col(c)) + tr.mu());
    CHECK((tb.x_t.col(c) - expect).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("in-d2d batch without target rows is a benign batch") {
  const ToyDataset data = mixture();
  Rng rng(4);
  DataBatch b = draw_batch(data, 32, rng);
  for (auto& l : b.labels) l = l == 5 ? 4 : l;  // no label 5 left
  Rng r1(7), r2(7);
  const TrainingBatch with = assemble_training_batch(b, in_d2d(5), sched(), r1);
  AttackSpec none;
  const TrainingBatch without = assemble_training_batch(b, none, sched(), r2);
  CHECK(with.x_t == without.x_t);
  CHECK(with.eps == without.eps);
  Rng init(0);
  const MlpDenoiser m(small_spec(), init);
  const StepLoss l = evaluate_loss(m, with);
  CHECK(l.trojan_rows == 0);
  CHECK(l.trojan == 0.0);
  CHECK(l.total == l.benign);
}

TEST_CASE("d2i trojan loss vanishes for the point-mass oracle") {
  const ToyDataset data = mixture();
  Vec target(2);
  target << 0.1, -0.9;
  AttackSpec a;
  a.kind = AttackKind::kD2I;
  a.trigger = make_blend_trigger(Vec::Ones(2), 0.6);
  a.x_target = target;
  Rng rng(5);
  const DataBatch b = draw_batch(data, 200, rng);
  const TrainingBatch tb = assemble_training_batch(b, a, sched(), rng);
  CHECK(tb.x_t.cols() - tb.benign_cols == 20);
  const PointMassOracle oracle(sched(), ChainMode::trojan(*a.trigger), target);
  // the oracle only knows the Trojan chain, so score the Trojan rows alone
  const Mat pred = oracle.predict(tb.x_t.rightCols(20),
                                  std::vector<int>(tb.t.begin() + tb.benign_cols, tb.t.end()));
  CHECK((pred - tb.eps.rightCols(20)).array().square().mean() < 1e-18);
}

TEST_CASE("zero steps returns the initial model") {
  TrainConfig cfg;
  cfg.model = small_spec();
  cfg.steps = 0;
  cfg.seed = 42;
  const TrainResult r = train(cfg, mixture(), in_d2d(0), sched());
  Rng init = Rng::stream(42, 0);
  const MlpDenoiser fresh(small_spec(), init);
  CHECK(r.model.params() == fresh.params());
  CHECK(r.curve.empty());
}

TEST_CASE("attack-off training equals a plain DDPM trainer bit for bit") {
  TrainConfig cfg;
  cfg.model = small_spec();
  cfg.steps = 40;
  cfg.batch_size = 32;
  cfg.seed = 9;
  const ToyDataset data = mixture();
  const TrainResult r = train(cfg, data, AttackSpec{}, sched());
  const MlpDenoiser ref = plain_ddpm(small_spec(), data, 40, 32, 9);
  CHECK(r.model.params() == ref.params());
}

TEST_CASE("training is deterministic and checkpoints fire") {
  TrainConfig cfg;
  cfg.model = small_spec();
  cfg.steps = 30;
  cfg.batch_size = 16;
  cfg.seed = 3;
  cfg.checkpoint_every = 10;
  std::vector<int> fired;
  const TrainResult a = train(cfg, mixture(), in_d2d(1), sched(),
                              [&](int step, const MlpDenoiser&) { fired.push_back(step); });
  const TrainResult b = train(cfg, mixture(), in_d2d(1), sched());
  CHECK(a.model.params() == b.model.params());
  CHECK(fired == std::vector<int>{10, 20, 30});
  REQUIRE(a.curve.size() == 30);
  for (std::size_t i = 0; i < 30; ++i) CHECK(a.curve[i].loss.total == b.curve[i].loss.total);
}

TEST_CASE("loss falls to below half its initial value over 2k steps") {
  TrainConfig cfg;
  cfg.model = small_spec();
  cfg.steps = 2000;
  cfg.batch_size = 128;
  cfg.lr = 1e-3;
  cfg.seed = 1;
  const TrainResult r = train(cfg, mixture(), in_d2d(0), sched());
  auto window = [&](std::size_t from) {
    double s = 0;
    for (std::size_t i = from; i < from + 100; ++i) s += r.curve[i].loss.total;
    return s / 100;
  };
  CHECK(window(1900) < 0.5 * r.curve.front().loss.total);
}
