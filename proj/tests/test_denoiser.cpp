#include "trojdiff/denoiser.hpp"
#include "trojdiff/process.hpp"

#include <doctest.h>

#include <cmath>

using namespace trojdiff;

namespace {

const NoiseSchedule& sched() {
  static const NoiseSchedule s = linear_beta_schedule(1000, 1e-4, 0.02);
  return s;
}

// E[eps | x_t] for x_0 ~ N(m, s^2) in one dimension, by direct quadrature
// over x_0 of eps(x_0) q(x_t | x_0) q(x_0).
double grid_expected_eps(const ChainMode& mode, double m, double sd, double x_t, int t) {
  const double a = std::sqrt(sched().alpha_bar(t)), b = std::sqrt(1 - sched().alpha_bar(t));
  const double mu = mode.mu(1)[0], g = mode.gamma(1)[0];
  const int n = 200001;
  const double lo = m - 12 * sd, hi = m + 12 * sd, h = (hi - lo) / (n - 1);
  double num = 0, den = 0;
  for (int i = 0; i < n; ++i) {
    const double x0 = lo + i * h;
    const double eps = (x_t - a * x0 - b * mu) / (b * g);
    const double w = std::exp(-0.5 * eps * eps - 0.5 * std::pow((x0 - m) / sd, 2));
    num += w * eps;
    den += w;
  }
  return num / den;
}

}  // namespace

TEST_CASE("gaussian oracle matches quadrature of E[eps | x_t]") {
  const ChainMode trojan = ChainMode::trojan(make_blend_trigger(Vec::Constant(1, 0.8), 0.6));
  for (const ChainMode& mode : {ChainMode::benign(), trojan}) {
    const GaussianOracle o(sched(), mode, Vec::Constant(1, 0.4), Vec::Constant(1, 0.3));
    for (int t : {1, 5, 100, 700, 1000})
      for (double x : {-1.5, 0.0, 0.7}) {
        const double got = o.predict_one(Vec::Constant(1, x), t)[0];
        CHECK(std::abs(got - grid_expected_eps(mode, 0.4, 0.3, x, t)) <= 1e-8);
      }
  }
}

TEST_CASE("gaussian oracle degenerate and symmetric cases") {
  Vec m(2);
  m << 0.5, -0.5;
  const GaussianOracle benign(sched(), ChainMode::benign(), m, Vec::Constant(2, 0.2));
  for (int t : {3, 300})
    CHECK(benign.predict_one(std::sqrt(sched().alpha_bar(t)) * m, t).cwiseAbs().maxCoeff() < 1e-14);

  // near-point-mass data: the oracle inverts the marginal with x_0 = m
  const ChainMode mode = ChainMode::trojan(make_blend_trigger(Vec::Ones(2), 0.6));
  const GaussianOracle sharp(sched(), mode, m, Vec::Constant(2, 1e-9));
  const Vec eps = Vec::LinSpaced(2, -0.3, 1.2);
  const Vec xt = diffuse(sched(), mode, m, 250, eps);
  CHECK((sharp.predict_one(xt, 250) - eps).cwiseAbs().maxCoeff() < 1e-6);

  CHECK_THROWS(benign.predict_one(m, 0));
  CHECK_THROWS(GaussianOracle(sched(), ChainMode::benign(), m, Vec::Zero(2)));
}

TEST_CASE("property: oracle prediction is affine in x_t") {
  const ChainMode mode = ChainMode::trojan(make_blend_trigger(Vec::Constant(3, -0.5), 0.4));
  const GaussianOracle o(sched(), mode, Vec::Constant(3, 0.1), Vec::Constant(3, 0.7));
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const int t = rng.uniform_int(1, 1000);
    const Vec a = rng.normal_vec(3), b = rng.normal_vec(3);
    const double lambda = rng.uniform(-2, 3);
    const Vec mixed = o.predict_one(lambda * a + (1 - lambda) * b, t);
    const Vec affine = lambda * o.predict_one(a, t) + (1 - lambda) * o.predict_one(b, t);
    CHECK((mixed - affine).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("point-mass oracle inverts the forward process") {
  Vec target(2);
  target << -0.6, 0.35;
  const ChainMode mode = ChainMode::trojan(make_blend_trigger(Vec::Ones(2), 0.6));
  const PointMassOracle o(sched(), mode, target);
  const PointMassOracle plain(sched(), ChainMode::benign(), target);
  Rng rng(1);
  for (int t : {1, 2, 333, 1000}) {
    const Vec eps = rng.normal_vec(2);
    CHECK((o.predict_one(diffuse(sched(), mode, target, t, eps), t) - eps).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((plain.predict_one(diffuse(sched(), ChainMode::benign(), target, t, eps), t) - eps)
              .cwiseAbs()
              .maxCoeff() < 1e-9);
  }
}

TEST_CASE("batched predict with per-column times") {
  const GaussianOracle o(sched(), ChainMode::benign(), Vec::Zero(2), Vec::Ones(2));
  Rng rng(6);
  const Mat x = rng.normal_mat(2, 4);
  const std::vector<int> ts{1, 10, 100, 1000};
  const Mat y = o.predict(x, ts);
  for (int j = 0; j < 4; ++j) CHECK((y.col(j) - o.predict_one(x.col(j), ts[j])).cwiseAbs().maxCoeff() == 0);
}
