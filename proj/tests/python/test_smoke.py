import math

import numpy as np
import pytest

import trojdiff as td


def test_schedule_and_coefficients():
    s = td.linear_beta_schedule()
    k = td.solve_trojan_coefficients(s)
    assert s.steps == 1000
    assert s.alpha_bar(0) == 1.0
    for t in (1, 2, 500, 1000):
        closed = math.sqrt(1 - s.alpha_bar(t)) - math.sqrt(s.alpha(t) * (1 - s.alpha_bar(t - 1)))
        assert k.k(t) == pytest.approx(closed, abs=1e-12)


def test_trigger_mu():
    trig = td.blend_trigger(np.array([1.0, -0.5]), 0.6)
    np.testing.assert_allclose(trig.mu, [0.4, -0.2])
    with pytest.raises(ValueError):
        td.blend_trigger(np.array([1.0, 1.0]), 0.0)


def test_diffuse_matches_marginal():
    s = td.linear_beta_schedule()
    trig = td.blend_trigger(np.array([1.0, 1.0]), 0.5)
    x0 = np.array([0.3, -0.2])
    eps = np.array([0.1, 2.0])
    t = 400
    ab = s.alpha_bar(t)
    want = math.sqrt(ab) * x0 + math.sqrt(1 - ab) * (trig.mu + trig.gamma * eps)
    np.testing.assert_allclose(td.diffuse(s, x0, t, eps, trig), want, atol=1e-14)


def test_ddim_subsequence_is_strict():
    tau = td.ddim_subsequence(1000, 100, "quadratic")
    assert tau[0] == 0 and tau[-1] == 1000
    assert all(b > a for a, b in zip(tau, tau[1:]))
    assert td.ddim_sigma(td.linear_beta_schedule(), 500, 490, 0.0) == 0.0


def test_oracle_sampling_recovers_data_gaussian():
    s = td.linear_beta_schedule()
    mean = np.array([0.5, -1.0])
    std = np.array([0.3, 0.7])
    r = td.sample_gaussian_oracle(s, mean, std, family="ddim", S=50, n=4000, seed=3)
    x = r.samples
    assert x.shape == (4000, 2)
    np.testing.assert_allclose(x.mean(axis=0), mean, atol=0.05)
    np.testing.assert_allclose(x.std(axis=0), std, atol=0.05)
    again = td.sample_gaussian_oracle(s, mean, std, family="ddim", S=50, n=4000, seed=3)
    assert np.array_equal(x, again.samples)


def test_metrics():
    pts = np.zeros((10, 2))
    assert td.mse_to_target(pts, np.array([1.0, 0.0])) == pytest.approx(0.5)
    ref = np.random.default_rng(0).normal(size=(200, 2))
    assert td.knn_precision(ref[:100], ref[100:], 5) > 0.8


def test_config_validation():
    with pytest.raises(ValueError, match="unknown key"):
        td.validate_config("seed = 1\nbogus = 2\n")
