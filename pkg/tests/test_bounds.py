import math

import numpy as np
import pytest

from fairfl.bounds import (BoundParams, estimate_constants, inv_gamma_sq_total, lemma2_bound,
                           lemma2_omega, measure_assumption_constants, step_size_limit,
                           survival_probability, theorem_bound)
from fairfl.channel import port_correlations
from fairfl.config import ExperimentConfig
from fairfl.datasets import DataShard
from fairfl.learner import MLP
from fairfl.numerics import derive_stream
from oracles import j0_series_mp


def params(**kw):
    base = dict(kappa=1.0, sigma2=1.0, delta2=0.0, tau=0.5, power=1.0, noise=1e-5, F=4, N=3,
                M=2, U=10, E=1, lam=0.01, T=100)
    base.update(kw)
    return BoundParams(**base)


def test_omega_limits():
    assert lemma2_omega(0.0, 0.3, 4, 2, 10) == (1.0, 2.0)
    p_hat, omega = lemma2_omega(50.0, 0.3, 4, 2, 10)
    assert p_hat < 1e-300 and omega == pytest.approx(1.0)
    with pytest.raises(ValueError):
        lemma2_omega(1.0, 1.0, 4, 2, 10)


def test_omega_worked_value():
    mu_min = min(j0_series_mp(2 * math.pi * u * 0.5 / 9) for u in range(10))
    assert port_correlations(10, 0.5).mu_min == pytest.approx(mu_min, abs=1e-14)
    p_ref = math.exp(-1.0 / (2 * (1 - mu_min**2)))
    omega_ref = 2 - (1 - p_ref) ** 80
    p_hat, omega = lemma2_omega(1.0, port_correlations(10, 0.5).mu_min, 4, 2, 10)
    assert p_hat == pytest.approx(p_ref, rel=1e-12)
    assert omega == pytest.approx(omega_ref, rel=1e-12)


def test_second_theorem_c1_hand_value():
    # with delta2 = 0, T -> inf and the loss gap 0, the value is c1 * c3
    p = params(lam=0.01, kappa=1.0, M=2, E=1, sigma2=1.0, noise=0.0, mu_min=0.0)
    q = math.exp(-0.5)
    c1 = 1.28
    c3 = 0.01 + 1 / q
    value, _ = theorem_bound(p, "thm2")
    assert value == pytest.approx(c1 * c3, rel=1e-12)


def test_second_theorem_full_hand_value():
    p = params(delta2=0.3, loss_gap=2.0, mu_min=0.2, noise=1e-3)
    q = math.exp(-p.tau)
    omega = 2 - (1 - math.exp(-p.tau**2 / (2 * (1 - 0.04)))) ** (p.F * p.M * p.U)
    c1 = 64 * p.lam * p.kappa * p.M * p.E * p.sigma2
    c2 = 64 * p.lam * p.kappa * p.M**2 * p.E * p.delta2
    c3 = p.lam * p.kappa * p.E + 1 / q + p.noise * p.F**2 * p.N * omega / (q * p.power * p.tau**2)
    want = 16 * p.loss_gap / (p.lam * q * p.E * p.T) + (c1 + c2) * c3
    assert theorem_bound(p, "thm2")[0] == pytest.approx(want, rel=1e-12)


def test_first_theorem_hand_value():
    p = params(delta2=0.3, loss_gap=2.0, inv_gamma_sq_sum=40.0)
    q = math.exp(-p.tau)
    c1 = 32 * p.lam * p.kappa * p.M * p.E * p.sigma2
    c2 = 32 * p.lam * p.kappa * p.M**2 * p.E * p.delta2
    c3 = p.lam * p.kappa * p.E + 1 / q
    want = (8 * p.loss_gap / (p.lam * q * p.E * p.T) + (c1 + c2) * c3
            + 4 * p.kappa * p.noise * p.F / (p.lam * q * p.E * p.T) * 40.0)
    assert theorem_bound(p, "thm1")[0] == pytest.approx(want, rel=1e-12)


def test_large_horizon_reduction():
    p = params(sigma2=0.0, delta2=0.0, loss_gap=3.0, T=10**6, mu_min=0.1)
    q = math.exp(-p.tau)
    assert theorem_bound(p, "thm2")[0] == pytest.approx(16 * 3.0 / (p.lam * q * p.E * p.T),
                                                       rel=1e-12)


@pytest.mark.parametrize("which", ["thm1", "thm2"])
def test_threshold_is_strict(which):
    p = params(mu_min=0.1)
    limit = step_size_limit(p, which)
    assert not theorem_bound(p.replace(lam=limit), which)[1]
    assert theorem_bound(p.replace(lam=limit * (1 - 1e-9)), which)[1]


def test_second_theorem_needs_positive_tau():
    with pytest.raises(ValueError):
        theorem_bound(params(tau=0.0, mu_min=0.1), "thm2")
    with pytest.raises(ValueError):
        theorem_bound(params(), "thm3")


def test_conventions():
    assert survival_probability(0.5) == math.exp(-0.5)
    assert survival_probability(0.5, "exact") == math.exp(-0.25)
    with pytest.raises(ValueError):
        survival_probability(0.5, "other")
    p = params(mu_min=0.1)
    assert theorem_bound(p, "thm2", "exact")[0] < theorem_bound(p, "thm2")[0]


def test_lemma2_hand_value():
    p = params(mu_min=0.3, delta2=0.2)
    omega = lemma2_omega(p.tau, 0.3, p.F, p.M, p.U)[1]
    want = 8 * p.lam**2 * p.M * p.E**2 * p.F * omega / (p.power * p.tau**2) * (1 + 2 * 0.2 + 0.5)
    value, ok = lemma2_bound(p, 0.5)
    assert value == pytest.approx(want, rel=1e-12) and ok
    assert not lemma2_bound(p.replace(lam=1.0), 0.5)[1]


def test_negative_inputs_rejected():
    with pytest.raises(ValueError):
        params(sigma2=-1.0)


def test_inv_gamma_total():
    class R:
        def __init__(self, v, n):
            self.inv_gamma_sq_mean, self.rules = v, "a" * n
    assert inv_gamma_sq_total([R(0.5, 4), R(0.25, 4)]) == 3.0


class LeastSquares:
    """Linear model with loss 0.5 * mean((x . theta - y)^2)."""

    def loss_and_grad(self, theta, X, y):
        r = X @ theta - y
        return 0.5 * float(np.mean(r**2)), X.T @ r / len(y)

    def per_sample_grads(self, theta, X, y):
        return X * (X @ theta - y)[:, None]


def _power_iteration(H, iters=500):
    v = np.ones(H.shape[0])
    for _ in range(iters):
        v = H @ v
        v /= np.linalg.norm(v)
    return float(v @ H @ v)


def test_kappa_matches_hessian_spectrum(rng):
    X = rng.normal(size=(200, 6)) * np.array([3.0, 1, 1, 0.5, 0.5, 0.1])
    y = rng.normal(size=200)
    shard = DataShard(X, y, 0)
    consts = estimate_constants(LeastSquares(), [shard], np.ones(1), [np.zeros(6)],
                                derive_stream(0, ()))
    ref = _power_iteration(X.T @ X / 200)
    assert abs(consts["kappa"] / ref - 1) <= 0.05


def test_sigma2_brute_force(rng):
    model = MLP((3, 4, 2))
    theta = model.init_params(derive_stream(0, ()))
    shards = [DataShard(rng.normal(size=(15, 3)), rng.integers(0, 2, 15), m) for m in range(2)]
    consts = estimate_constants(model, shards, np.array([0.5, 0.5]), [theta], derive_stream(0, ()))
    worst = 0.0
    for s in shards:
        g = model.loss_and_grad(theta, s.X, s.y)[1]
        spread = [np.sum((model.loss_and_grad(theta, s.X[i:i + 1], s.y[i:i + 1])[1] - g) ** 2)
                  for i in range(15)]
        worst = max(worst, float(np.mean(spread)))
    assert consts["sigma2"] == pytest.approx(worst, rel=1e-10)


def test_identical_shards_have_no_heterogeneity(rng):
    model = MLP((3, 2))
    X, y = rng.normal(size=(10, 3)), rng.integers(0, 2, 10)
    shards = [DataShard(X, y, m) for m in range(3)]
    consts = estimate_constants(model, shards, np.full(3, 1 / 3),
                                [np.zeros(model.n_params), rng.normal(size=model.n_params)],
                                derive_stream(0, ()))
    assert consts["delta2"] == pytest.approx(0.0, abs=1e-28)


def test_measure_assumption_constants_shapes():
    cfg = ExperimentConfig(n_devices=3, n_ports=4, n_subcarriers=8, hidden=(), n_train=300,
                           n_test=60, n_features=5, n_classes=3, batch_size=16, rounds=50)
    p = measure_assumption_constants(cfg, 2)
    assert p.kappa > 0 and p.sigma2 > 0 and p.delta2 >= 0
    assert p.N == math.ceil((5 * 3 + 3) / 8) and p.T == 50 and p.M == 3
    assert p.mu_min == port_correlations(4, 0.5).mu_min
    assert p.loss_gap == pytest.approx(math.log(3), rel=0.2)
