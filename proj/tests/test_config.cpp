#include "trojdiff/config.hpp"

#include <doctest.h>

#include <string>

using namespace trojdiff;

namespace {

std::string error_of(const std::string& text) {
  try {
    parse_config(text, "exp.toml");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("empty config gives the defaults") {
  const ExperimentConfig c = parse_config("");
  CHECK(c.schedule.T == 1000);
  CHECK(c.schedule.beta1 == 1e-4);
  CHECK(c.schedule.betaT == 0.02);
  CHECK(c.trigger.gamma == 0.6);
  CHECK(c.sample.family == "ddim");
  CHECK(c.sample.eta == 0.0);
  CHECK(c.sample.S == 100);
  CHECK(c.sweep.empty());
  CHECK(expand_sweep(c).size() == 1);
  CHECK(c.train.lr == 2e-4);
  CHECK(c.model.hidden == std::vector<int>{128, 128, 128});
}

TEST_CASE("values are read and carried into the training config") {
  const ExperimentConfig c = parse_config(R"(
name = "demo"
seed = 17
[schedule]
T = 200
[trigger]
gamma = 0.3
delta = [1.0, -1.0]
[model]
hidden = [16, 16]
activation = "tanh"
[train]
steps = 5
batch_size = 8
)");
  CHECK(c.name == "demo");
  CHECK(c.seed == 17);
  CHECK(c.train.seed == 17);
  CHECK(c.train.model.hidden == std::vector<int>{16, 16});
  CHECK(c.train.model.activation == Activation::kTanh);
  CHECK(c.train.model.steps == 200);
  const Trigger tr = build_trigger(c, 2);
  CHECK(tr.mu()[0] == doctest::Approx(0.7));
  CHECK(tr.mu()[1] == doctest::Approx(-0.7));
}

TEST_CASE("diagnostics point at the offending line") {
  CHECK(error_of("[trigger]\nkind = \"patch\"\npatch = [0]\ngamma_on = 0.0\n").find("exp.toml:4") == 0);
  CHECK(error_of("[trigger]\nkind = \"patch\"\npatch = [0]\ngamma_on = 0.0\n").find("drop") !=
        std::string::npos);
  CHECK(error_of("[trigger]\ngamma = 0.0\n").find("exp.toml:2") == 0);
  CHECK(error_of("seed = 1\n[train]\nstepz = 3\n").find("exp.toml:3") == 0);
  CHECK(error_of("seed = 1\n[train]\nstepz = 3\n").find("unknown key 'stepz'") != std::string::npos);
  CHECK(error_of("[train]\nsteps = \"many\"\n").find("exp.toml:2") == 0);
  CHECK(error_of("[dataset]\nstd = 0.0\n").find("degenerate") != std::string::npos);
  CHECK(error_of("[sample]\nfamily = \"ddim\"\nS = 5000\n").find("exp.toml:3") == 0);
  CHECK(error_of("[schedule\n").find("exp.toml:1") == 0);
  CHECK(error_of("bogus = 1\n").find("unknown key") != std::string::npos);
  CHECK(error_of("[attack]\nkind = \"d2i\"\n").find("x_target") != std::string::npos);
}

TEST_CASE("sweep expansion is a cartesian product") {
  const ExperimentConfig c = parse_config(R"(
name = "abl"
[sweep]
"trigger.gamma" = [0.3, 0.6, 0.9]
"sample.eta" = [0.0, 1.0]
)");
  const auto kids = expand_sweep(c);
  REQUIRE(kids.size() == 6);
  CHECK(kids[0].trigger.gamma == 0.3);
  CHECK(kids[0].sample.eta == 0.0);
  CHECK(kids[1].sample.eta == 1.0);
  CHECK(kids[5].trigger.gamma == 0.9);
  CHECK(kids[5].sample.eta == 1.0);
  for (const auto& k : kids) {
    CHECK(k.sweep.empty());
    CHECK(k.name.find("abl__trigger.gamma=") == 0);
  }
  CHECK(error_of("[sweep]\n\"trigger.gamma\" = 0.3\n").find("must be an array") != std::string::npos);
}

TEST_CASE("sweep children are validated") {
  const ExperimentConfig c = parse_config("[sweep]\n\"trigger.gamma\" = [0.5, 0.0]\n");
  CHECK_THROWS_AS(expand_sweep(c), ConfigError);
}

TEST_CASE("snapshot round trip") {
  const ExperimentConfig c = parse_config(R"(
seed = 3
[dataset]
components = 4
radius = 1.25
[trigger]
gamma = 0.45
[attack]
kind = "out_d2d"
target_mean = [0.1, 0.2]
[sample]
family = "ddpm"
)");
  const ExperimentConfig again = parse_config(c.snapshot, "snapshot");
  CHECK(again.snapshot == c.snapshot);
  CHECK(again.dataset.radius == 1.25);
  CHECK(again.trigger.gamma == 0.45);
  CHECK(again.attack.target_mean == std::vector<double>{0.1, 0.2});
  // doubles survive the text round trip exactly
  const ExperimentConfig third = parse_config("[schedule]\nbeta1 = 0.00012345678901234567\n");
  CHECK(parse_config(third.snapshot).schedule.beta1 == third.schedule.beta1);
}

TEST_CASE("builders") {
  const ExperimentConfig c = parse_config(R"(
seed = 2
[dataset]
points = 400
[attack]
kind = "in_d2d"
target_class = 3
[sample]
family = "ddim"
S = 20
stride = "quadratic"
eta = 0.5
)");
  const ToyDataset d = build_dataset(c);
  CHECK(d.size() == 400);
  CHECK(build_dataset(c).points == d.points);
  const AttackSpec a = build_attack(c, d);
  CHECK(a.kind == AttackKind::kInD2D);
  CHECK(a.target_class == 3);
  CHECK(a.trigger.has_value());
  const SamplerConfig s = build_sampler(c, ChainMode::benign());
  CHECK(s.family == SamplerFamily::kDdim);
  CHECK(s.ddim.S == 20);
  CHECK(s.ddim.eta == 0.5);
  CHECK(s.ddim.stride == StrideKind::kQuadratic);

  const ExperimentConfig patch = parse_config(R"(
[dataset]
kind = "cube"
dim = 16
[trigger]
kind = "patch"
patch_size = 2
image_height = 4
image_width = 4
gamma_on = 0.1
)");
  const Trigger tr = build_trigger(patch, 16);
  CHECK(tr.kind() == TriggerKind::kPatch);
  CHECK(tr.mu()[15] == doctest::Approx(0.9));
  CHECK(tr.mu()[0] == 0.0);
  CHECK_THROWS_AS(build_trigger(patch, 9), ConfigError);
}

TEST_CASE("property: the snapshot is a fixed point of parsing") {
  Rng rng(81);
  for (int trial = 0; trial < 50; ++trial) {
    const std::string text = "seed = " + std::to_string(rng.uniform_int(0, 1 << 20)) +
                             "\n[schedule]\nbetaT = " + std::to_string(rng.uniform(0.01, 0.05)) +
                             "\n[trigger]\ngamma = " + std::to_string(rng.uniform(0.01, 1.0)) +
                             "\n[sample]\neta = " + std::to_string(rng.uniform(0.0, 1.0)) +
                             "\nS = " + std::to_string(rng.uniform_int(1, 1000)) + "\n";
    const ExperimentConfig a = parse_config(text);
    const ExperimentConfig b = parse_config(a.snapshot);
    CHECK(b.snapshot == a.snapshot);
    CHECK(b.trigger.gamma == a.trigger.gamma);
    CHECK(b.sample.eta == a.sample.eta);
    CHECK(b.seed == a.seed);
  }
}
