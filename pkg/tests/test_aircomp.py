import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from fairfl.aircomp import (LocalModelUpdate, aggregate, assemble_gmu, beta_exchange,
                            build_symbol, recover, slice_lmu, transmit_round)
from fairfl.numerics import derive_stream
from fairfl.selection import ScalingDecision, active_mask, gamma_bar


def test_slice_example():
    out = slice_lmu(np.array([1, 2, 3, 4, 5.0]), 2)
    assert np.array_equal(out, [[1, 2], [3, 4], [5, 0]])
    assert np.array_equal(slice_lmu(np.arange(4.0), 4), [np.arange(4.0)])


@given(st.integers(1, 300), st.integers(1, 64))
def test_slice_round_trip(d, F):
    delta = np.arange(d, dtype=float) - d / 2
    sl = slice_lmu(delta, F)
    assert sl.shape == (math.ceil(d / F), F)
    assert np.array_equal(assemble_gmu(sl, d).delta_hat, delta)


def test_beta_examples(rng):
    assert beta_exchange([np.array([0.1, -0.3]), np.array([0.2, 0.05])]) == 0.3
    assert beta_exchange([np.zeros(3), np.zeros(3)]) == 0.0
    lmus = [LocalModelUpdate(rng.normal(size=7), m) for m in range(4)]
    assert beta_exchange(lmus) == max(abs(v) for u in lmus for v in u.delta)
    with pytest.raises(ValueError):
        beta_exchange([])


def test_lmu_rejects_nan():
    with pytest.raises(ValueError):
        LocalModelUpdate(np.array([1.0, np.nan]))


def test_build_symbol_example():
    x = build_symbol([0.8], [2.0], [True], 1.0, 0.5)
    assert np.allclose(x, [0.2]) and np.allclose(2.0 * x, [0.4])
    assert np.array_equal(build_symbol(np.zeros(3), np.ones(3), [True] * 3, 1.0, 1.0), np.zeros(3))
    with pytest.raises(ValueError):
        build_symbol([1.0], [0.0], [True], 1.0, 1.0)


def test_build_symbol_masked_entries_are_zero():
    x = build_symbol([1.0, 2.0], [1e-30, 1.0], [False, True], 1.0, 1.0)
    assert x[0] == 0 and x[1] == 2.0


def test_noiseless_superposition(rng):
    M, F, gamma = 3, 6, 0.7
    h = rng.normal(size=(M, F)) + 1j * rng.normal(size=(M, F))
    masks = np.abs(h) >= 0.5
    slices, rho = rng.normal(size=(M, F)), np.array([0.2, 0.3, 0.5])
    x = np.stack([build_symbol(slices[m], h[m], masks[m], gamma, rho[m]) for m in range(M)])
    y = transmit_round(x, h, 0.0, derive_stream(0, (0, 0, 0, "noise")))
    assert np.allclose(y, gamma * np.sum(rho[:, None] * slices * masks, axis=0), atol=1e-13)


def test_pure_noise_power():
    y = transmit_round(np.zeros((2, 10**6)), np.ones((2, 10**6)), 1e-3,
                       derive_stream(1, (0, 0, 0, "noise")))
    assert abs(np.mean(np.abs(y) ** 2) / 1e-3 - 1) < 0.02
    assert abs(np.var(y.real) / 5e-4 - 1) < 0.02


def test_recover():
    assert np.array_equal(recover(np.array([1j, -2j]), 3.0), [0.0, 0.0])
    assert np.allclose(recover(np.array([2 + 1j]), 2.0), [1.0])
    with pytest.raises(ValueError):
        recover(np.ones(2), 0.0)


@pytest.mark.parametrize("gamma", [0.5, 2.0])
def test_recovered_noise_variance(gamma):
    N0, F = 1e-2, 10**6
    true = np.linspace(-1, 1, F)
    x = build_symbol(true, np.ones(F), np.ones(F, bool), gamma, 1.0)
    y = transmit_round(x, np.ones(F), N0, derive_stream(4, (0, 0, 0, "noise")))
    resid = recover(y, gamma) - true
    assert abs(np.var(resid) / (N0 / (2 * gamma**2)) - 1) < 0.02


def test_assemble_errors():
    assert np.array_equal(assemble_gmu([[1, 2], [3, 0]], 3).delta_hat, [1, 2, 3])
    with pytest.raises(ValueError):
        assemble_gmu([[1, 2]], 3)


@given(st.integers(1, 4), st.integers(1, 8), st.floats(0.05, 1.0),
       st.floats(1e-3, 10), st.integers(0, 2**31))
def test_power_compliance(M, F, tau, power, seed):
    rng = np.random.default_rng(seed)
    h = (rng.normal(size=(M, F)) + 1j * rng.normal(size=(M, F))) / math.sqrt(2)
    slices = rng.normal(size=(M, F)) * rng.exponential()
    rho = rng.dirichlet(np.ones(M))
    beta = float(np.max(np.abs(slices)))
    g = gamma_bar(h, tau, power, beta)
    if math.isinf(g):
        return
    masks = active_mask(h, tau)
    for m in range(M):
        x = build_symbol(slices[m], h[m], masks[m], g, rho[m])
        assert np.sum(np.abs(x) ** 2) <= power * (1 + 1e-12)


def _all_active_select(h):
    def select(n, beta):
        return h, np.ones(h.shape, bool), ScalingDecision(
            gamma_bar(h, 0.0, 1.0, beta), math.inf, beta, 0.0, "accuracy")
    return select


@given(st.integers(1, 6), st.integers(1, 400), st.integers(1, 16), st.integers(0, 2**31))
def test_noiseless_fedavg_identity(M, d, F, seed):
    rng = np.random.default_rng(seed)
    deltas = rng.normal(size=(M, d))
    rho = rng.dirichlet(np.ones(M))
    h = rng.normal(size=(M, F)) + 1j * rng.normal(size=(M, F))
    gmu = aggregate(deltas, rho, F, _all_active_select(h), 0.0,
                    lambda n: derive_stream(0, (0, n, 0, "noise")))
    assert np.max(np.abs(gmu.delta_hat - rho @ deltas)) <= 1e-12


def test_single_device_round_trip(rng):
    delta = rng.normal(size=37)
    h = rng.normal(size=(1, 8)) + 1j * rng.normal(size=(1, 8))
    gmu = aggregate(delta[None], np.ones(1), 8, _all_active_select(h), 0.0,
                    lambda n: derive_stream(0, (0, n, 0, "noise")))
    assert np.max(np.abs(gmu.delta_hat - delta)) <= 1e-12


def test_zero_update_skips_every_symbol():
    h = np.ones((2, 4), dtype=complex)
    gmu = aggregate(np.zeros((2, 10)), np.array([0.5, 0.5]), 4, _all_active_select(h), 1.0,
                    lambda n: derive_stream(0, (0, n, 0, "noise")))
    assert np.array_equal(gmu.delta_hat, np.zeros(10))
    assert all(r.skipped for r in gmu.symbols) and len(gmu.symbols) == 3


def test_masked_entries_drop_out(rng):
    M, F = 2, 4
    h = np.array([[1.0, 0.1, 1.0, 1.0], [1.0, 1.0, 0.1, 1.0]], dtype=complex)
    deltas = rng.normal(size=(M, F))
    rho = np.array([0.5, 0.5])
    masks = np.abs(h) >= 0.5

    def select(n, beta):
        return h, masks, ScalingDecision(gamma_bar(h, 0.5, 1.0, beta), math.inf, beta, 0.0, "r")

    gmu = aggregate(deltas, rho, F, select, 0.0, lambda n: derive_stream(0, (0, n, 0, "noise")))
    assert np.allclose(gmu.delta_hat, np.sum(rho[:, None] * deltas * masks, axis=0), atol=1e-14)
