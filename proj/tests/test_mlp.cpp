#include "trojdiff/mlp.hpp"

#include <doctest.h>

#include <array>
#include <cmath>
#include <filesystem>

using namespace trojdiff;

namespace {

// 0.5 * sum(w .* f(params)) as a scalar objective whose gradient is J^T w.
double objective(const MlpSpec& spec, const Vec& params, const Mat& feats, const Mat& w) {
  const MlpDenoiser m(spec, params);
  return 0.5 * (m.forward(feats).array() * w.array()).sum();
}

}  // namespace

TEST_CASE("parameter layout and count") {
  MlpSpec spec;
  spec.data_dim = 2;
  spec.hidden = {4, 3};
  CHECK(spec.input_dim() == 7);
  CHECK(MlpDenoiser::param_count(spec) == 7 * 4 + 4 + 4 * 3 + 3 + 3 * 2 + 2);
  Rng rng(1);
  const MlpDenoiser m(spec, rng);
  CHECK(m.params().size() == MlpDenoiser::param_count(spec));
  CHECK(m.widths() == std::vector<int>{7, 4, 3, 2});
  CHECK_THROWS(MlpDenoiser(spec, Vec::Zero(5)));
}

TEST_CASE("analytic gradient matches central finite differences") {
  for (Activation act : {Activation::kSilu, Activation::kTanh, Activation::kIdentity}) {
    MlpSpec spec;
    spec.data_dim = 3;
    spec.hidden = {6, 5};
    spec.activation = act;
    Rng rng(17);
    const MlpDenoiser m(spec, rng);
    const Mat x = rng.normal_mat(3, 4);
    const Mat feats = m.features(x, {1, 250, 600, 1000});
    const Mat w = rng.normal_mat(3, 4);
    MlpDenoiser::Cache cache;
    m.forward(feats, &cache);
    const Vec g = m.backward(cache, 0.5 * w);
    const double h = 1e-6;
    double worst = 0;
    for (Eigen::Index i = 0; i < m.params().size(); ++i) {
      Vec p = m.params(), q = m.params();
      p[i] += h;
      q[i] -= h;
      const double fd = (objective(spec, p, feats, w) - objective(spec, q, feats, w)) / (2 * h);
      worst = std::max(worst, std::abs(fd - g[i]) / std::max(1.0, std::abs(fd) + std::abs(g[i])));
    }
    INFO("activation " << to_string(act));
    CHECK(worst <= 1e-5);
  }
}

TEST_CASE("zero-weight network is constant and passes the seed to the last bias") {
  MlpSpec spec;
  spec.data_dim = 2;
  spec.hidden = {8};
  Vec params = Vec::Zero(MlpDenoiser::param_count(spec));
  params.tail(2) << 0.25, -1.5;
  const MlpDenoiser m(spec, params);
  Rng rng(3);
  const Mat x = rng.normal_mat(2, 5);
  const Mat y = m.predict(x, 40);
  for (int j = 0; j < 5; ++j) {
    CHECK(y(0, j) == 0.25);
    CHECK(y(1, j) == -1.5);
  }
  MlpDenoiser::Cache cache;
  const Mat feats = m.features(x.leftCols(1), {40});
  m.forward(feats, &cache);
  Mat seed(2, 1);
  seed << 0.7, -0.2;
  const Vec g = m.backward(cache, seed);
  CHECK(g.tail(2)[0] == doctest::Approx(0.7));
  CHECK(g.tail(2)[1] == doctest::Approx(-0.2));
  CHECK(g.head(g.size() - 2).isZero(0.0));
}

TEST_CASE("single linear layer gradient equals the least-squares gradient") {
  MlpSpec spec;
  spec.data_dim = 2;
  spec.hidden = {};
  spec.activation = Activation::kIdentity;
  spec.time_encoding = false;
  Rng rng(4);
  const MlpDenoiser m(spec, rng);
  const Mat x = rng.normal_mat(2, 10), target = rng.normal_mat(2, 10);
  const Mat W = Eigen::Map<const Mat>(m.params().data(), 2, 2);
  const Vec b = m.params().tail(2);
  const Mat resid = (W * x).colwise() + b - target;
  // d/dW of 0.5 |W x + b - y|^2 is resid x^T, d/db is the summed residual
  const Mat gW = resid * x.transpose();
  const Vec gb = resid.rowwise().sum();
  MlpDenoiser::Cache cache;
  m.forward(x, &cache);
  const Vec g = m.backward(cache, resid);
  CHECK((Eigen::Map<const Mat>(g.data(), 2, 2) - gW).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((g.tail(2) - gb).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("time features") {
  MlpSpec spec;
  spec.data_dim = 1;
  spec.steps = 100;
  Rng rng(0);
  const MlpDenoiser m(spec, rng);
  const Mat f = m.features(Mat::Constant(1, 1, 2.0), {25});
  REQUIRE(f.rows() == 6);
  CHECK(f(0, 0) == 2.0);
  CHECK(f(1, 0) == doctest::Approx(0.25));
  CHECK(f(2, 0) == doctest::Approx(std::sin(M_PI * 0.25)));
  CHECK(f(3, 0) == doctest::Approx(std::cos(M_PI * 0.25)));
  CHECK(f(4, 0) == doctest::Approx(std::sin(2 * M_PI * 0.25)));
  CHECK(f(5, 0) == doctest::Approx(std::cos(2 * M_PI * 0.25)));
}

TEST_CASE("adam step on a known gradient") {
  Vec p = Vec::Constant(3, 1.0);
  Vec g(3);
  g << 0.5, -2.0, 0.0;
  Adam opt(3, 0.1);
  opt.step(p, g);
  // first step of Adam moves every coordinate with nonzero gradient by ~lr
  CHECK(p[0] == doctest::Approx(0.9).epsilon(1e-6));
  CHECK(p[1] == doctest::Approx(1.1).epsilon(1e-6));
  CHECK(p[2] == 1.0);
  opt.step(p, g);
  CHECK(opt.iterations() == 2);
  CHECK(p[0] == doctest::Approx(0.8).epsilon(1e-6));
}

TEST_CASE("init statistics") {
  MlpSpec spec;
  spec.data_dim = 2;
  spec.hidden = {400};
  spec.time_encoding = false;
  Rng rng(9);
  const MlpDenoiser m(spec, rng);
  const Vec w = m.params().head(2 * 400);
  const double var = w.array().square().mean();
  CHECK(var == doctest::Approx(0.5).epsilon(0.1));
  CHECK(m.params().segment(800, 400).isZero(0.0));
}

TEST_CASE("checkpoint round trip") {
  MlpSpec spec;
  spec.data_dim = 3;
  spec.hidden = {5, 4};
  spec.activation = Activation::kTanh;
  Rng rng(12);
  const MlpDenoiser m(spec, rng);
  const auto path = (std::filesystem::temp_directory_path() / "trojdiff_ckpt_test.ckpt").string();
  save_checkpoint(path, m, {{"note", "hello"}});
  const LoadedModel back = load_checkpoint(path);
  CHECK(back.model.params() == m.params());
  CHECK(back.model.spec().hidden == spec.hidden);
  CHECK(back.model.spec().activation == Activation::kTanh);
  CHECK(back.header["meta"]["note"] == "hello");
  CHECK(back.header["format"] == "trojdiff-mlp");
  std::filesystem::remove(path);
  CHECK_THROWS(load_checkpoint(path));
}

TEST_CASE("property: gradient check on random architectures") {
  Rng rng(71);
  for (int trial = 0; trial < 8; ++trial) {
    MlpSpec spec;
    spec.data_dim = rng.uniform_int(1, 4);
    spec.hidden.assign(rng.uniform_int(1, 3), 0);
    for (int& w : spec.hidden) w = rng.uniform_int(2, 7);
    spec.activation = std::array{Activation::kSilu, Activation::kTanh, Activation::kIdentity}[trial % 3];
    const MlpDenoiser m(spec, rng);
    const int batch = rng.uniform_int(1, 5);
    std::vector<int> ts(batch);
    for (int& t : ts) t = rng.uniform_int(1, 1000);
    const Mat feats = m.features(rng.normal_mat(spec.data_dim, batch), ts);
    const Mat w = rng.normal_mat(spec.data_dim, batch);
    MlpDenoiser::Cache cache;
    m.forward(feats, &cache);
    const Vec g = m.backward(cache, 0.5 * w);
    double worst = 0;
    for (Eigen::Index i = 0; i < m.params().size(); ++i) {
      Vec p = m.params(), q = m.params();
      p[i] += 1e-6;
      q[i] -= 1e-6;
      const double fd = (objective(spec, p, feats, w) - objective(spec, q, feats, w)) / 2e-6;
      worst = std::max(worst, std::abs(fd - g[i]) / std::max(1.0, std::abs(fd) + std::abs(g[i])));
    }
    CHECK(worst <= 1e-5);
  }
}
