#include "trojdiff/trigger.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace trojdiff;

TEST_CASE("blend trigger broadcasts gamma") {
  const Trigger tr = make_blend_trigger(Vec::Ones(3), 0.6);
  CHECK(tr.kind() == TriggerKind::kBlend);
  for (int i = 0; i < 3; ++i) {
    CHECK(tr.gamma()[i] == 0.6);
    CHECK(tr.mu()[i] == doctest::Approx(0.4).epsilon(1e-15));
  }
  const Trigger clean = make_blend_trigger(Vec::Zero(4), 1.0);
  CHECK(clean.mu().isZero(0.0));
}

TEST_CASE("blend trigger rejects zero gamma and out-of-range entries") {
  CHECK_THROWS_AS(make_blend_trigger(Vec::Ones(2), 0.0), ParameterError);
  CHECK_THROWS_AS(make_blend_trigger(Vec::Ones(2), 1.1), ParameterError);
  CHECK_THROWS_AS(make_blend_trigger(Vec::Constant(2, 1.5), 0.5), ParameterError);
  CHECK_THROWS_AS(Trigger(Vec::Ones(2), Vec::Ones(3), TriggerKind::kBlend), ParameterError);
  try {
    make_blend_trigger(Vec::Ones(2), 0.0);
  } catch (const ParameterError& e) {
    CHECK(std::string(e.what()).find("randomness") != std::string::npos);
  }
}

TEST_CASE("patch trigger on an 8x8 image") {
  const std::vector<int> coords = bottom_right_patch(8, 8, 2);
  CHECK(coords == std::vector<int>{54, 55, 62, 63});
  const Trigger tr = make_patch_trigger(64, coords, 0.1);
  CHECK(tr.kind() == TriggerKind::kPatch);
  for (int i = 0; i < 64; ++i) {
    const bool on = std::find(coords.begin(), coords.end(), i) != coords.end();
    CHECK(tr.mu()[i] == doctest::Approx(on ? 0.9 : 0.0).epsilon(1e-15));
    CHECK(tr.gamma()[i] == (on ? 0.1 : 1.0));
  }
}

TEST_CASE("patch trigger validation") {
  CHECK_THROWS_AS(make_patch_trigger(4, {0}, 0.0), ParameterError);
  CHECK_THROWS_AS(make_patch_trigger(4, {0}, 1.0), ParameterError);
  CHECK_THROWS_AS(make_patch_trigger(4, {}, 0.5), ParameterError);
  CHECK_THROWS_AS(make_patch_trigger(4, {4}, 0.5), ParameterError);
  try {
    make_patch_trigger(4, {1}, 0.0);
  } catch (const ParameterError& e) {
    CHECK(std::string(e.what()).find("drop") != std::string::npos);
  }
  // whole-image patch with gamma_on close to 1 is nearly clean noise
  const Trigger near = make_patch_trigger(4, {0, 1, 2, 3}, 0.999);
  CHECK(near.mu().cwiseAbs().maxCoeff() < 2e-3);
}

TEST_CASE("trojan noise moments") {
  const int n = 100000;
  Rng rng(3);
  Vec delta(3);
  delta << 1.0, -0.5, 0.25;
  const Trigger tr = make_blend_trigger(delta, 0.6);
  const Mat x = sample_trojan_noise(tr, n, rng);
  REQUIRE(x.cols() == n);
  const Vec mean = x.rowwise().mean();
  const Vec var = (x.colwise() - mean).array().square().rowwise().sum() / (n - 1);
  for (int i = 0; i < 3; ++i) {
    CHECK(std::abs(mean[i] - tr.mu()[i]) < 3 * 0.6 / std::sqrt(n));
    // standard error of a Gaussian sample variance: sigma^2 sqrt(2 / (n - 1))
    CHECK(std::abs(var[i] - 0.36) < 5 * 0.36 * std::sqrt(2.0 / (n - 1)));
  }
}

TEST_CASE("unit gamma gives standard normal draws and off-patch noise is clean") {
  const int n = 100000;
  Rng rng(4);
  const Mat x = sample_trojan_noise(make_blend_trigger(Vec::Constant(2, 0.7), 1.0), n, rng);
  CHECK(std::abs(x.row(0).mean()) < 5 / std::sqrt(n));
  const Trigger patch = make_patch_trigger(16, bottom_right_patch(4, 4, 2), 0.1);
  const Mat y = sample_trojan_noise(patch, n, rng);
  const double off_var = (y.row(0).array() - y.row(0).mean()).square().sum() / (n - 1);
  CHECK(std::abs(off_var - 1.0) < 5 * std::sqrt(2.0 / (n - 1)));
}

TEST_CASE("fixed seed gives identical draws") {
  const Trigger tr = make_blend_trigger(Vec::Ones(2), 0.6);
  Rng a(99), b(99);
  const Mat x = sample_trojan_noise(tr, 50, a), y = sample_trojan_noise(tr, 50, b);
  CHECK(x == y);
}

TEST_CASE("property: mu = (1 - gamma) delta and mu + gamma stays inside the unit box") {
  Rng rng(31);
  for (int trial = 0; trial < 300; ++trial) {
    const int d = rng.uniform_int(1, 12);
    Vec delta(d), gamma(d);
    for (int i = 0; i < d; ++i) {
      delta[i] = rng.uniform(-1.0, 1.0);
      gamma[i] = rng.uniform(1e-3, 1.0);
    }
    const Trigger t(delta, gamma, TriggerKind::kBlend);
    for (int i = 0; i < d; ++i) {
      CHECK(t.mu()[i] == doctest::Approx((1 - gamma[i]) * delta[i]).epsilon(1e-15));
      CHECK(std::abs(t.mu()[i]) + t.gamma()[i] <= 1.0 + 1e-15);
    }
    Vec bad = gamma;
    bad[rng.uniform_int(0, d - 1)] = 0.0;
    CHECK_THROWS_AS(Trigger(delta, bad, TriggerKind::kBlend), ParameterError);
  }
}
