"""Convergence-bound evaluators and empirical assumption constants.

The evaluators compute the right-hand sides of the non-convex convergence
bounds for this scheme from a :class:`BoundParams`. The constants
``kappa`` (smoothness), ``sigma2`` (per-sample gradient variance) and
``delta2`` (device heterogeneity) are normally supplied by
:func:`estimate_constants`, whose values are empirical lower bounds on the
true suprema.

``convention`` selects the probability that a subcarrier survives
truncation: ``"analytic"`` uses ``exp(-tau)``, the closed form the bounds
are stated with, and ``"exact"`` the exact Rayleigh value ``exp(-tau**2)``.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from .channel import port_correlations
from .estimator import full_gradient
from .experiment import load_data, make_estimator
from .numerics import dbm_to_linear, derive_stream

__all__ = [
    "BoundParams",
    "lemma2_omega",
    "survival_probability",
    "theorem_bound",
    "step_size_limit",
    "lemma2_bound",
    "estimate_constants",
    "measure_assumption_constants",
    "inv_gamma_sq_total",
]


@dataclass(frozen=True)
class BoundParams:
    """Inputs of the convergence bounds.

    ``loss_gap`` estimates ``L(theta_1) - L(theta_*)``; ``inv_gamma_sq_sum``
    is the measured ``sum_t sum_n E[gamma^-2]`` used by the first theorem.
    Powers are linear (mW).
    """

    kappa: float
    sigma2: float
    delta2: float
    tau: float
    power: float
    noise: float
    F: int
    N: int
    M: int
    U: int
    E: int
    lam: float
    T: int
    loss_gap: float = 0.0
    mu_min: float = 1.0
    inv_gamma_sq_sum: float = 0.0

    def __post_init__(self):
        for name in ("kappa", "sigma2", "delta2", "tau", "power", "noise", "lam",
                     "loss_gap", "inv_gamma_sq_sum"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    def replace(self, **changes):
        return replace(self, **changes)


def lemma2_omega(tau, mu_min, F, M, U):
    """``(p_hat, omega)`` with ``p_hat = exp(-tau^2 / (2 (1 - mu_min^2)))``
    and ``omega = 2 - (1 - p_hat)^(F M U)``."""
    if abs(mu_min) >= 1:
        raise ValueError(f"|mu_min| must be < 1, got {mu_min}")
    p_hat = math.exp(-tau**2 / (2.0 * (1.0 - mu_min**2)))
    return p_hat, 2.0 - (1.0 - p_hat) ** (F * M * U)


def survival_probability(tau, convention="analytic"):
    if convention == "analytic":
        return math.exp(-tau)
    if convention == "exact":
        return math.exp(-tau**2)
    raise ValueError(f"unknown convention {convention!r}")


def _omega(p):
    return lemma2_omega(p.tau, p.mu_min, p.F, p.M, p.U)[1]


def step_size_limit(p, which, convention="analytic"):
    """Strict upper limit on the learning rate for ``which`` theorem."""
    q = survival_probability(p.tau, convention)
    denom = 32.0 * p.kappa * p.M * p.E
    base = q / denom if denom > 0 else math.inf
    if which == "thm1":
        return base
    if which != "thm2":
        raise ValueError(f"unknown bound {which!r}")
    if p.tau <= 0:
        raise ValueError("the second theorem needs tau > 0")
    denom = 64.0 * p.kappa * p.noise * p.M * p.E * p.F**2 * p.N * _omega(p)
    noise_limit = p.power * p.tau**2 * q / denom if denom > 0 else math.inf
    return min(noise_limit, base)


def theorem_bound(p, which, convention="analytic"):
    """Right-hand side of a convergence bound and step-size admissibility.

    Parameters
    ----------
    p : BoundParams
    which : {"thm1", "thm2"}
        ``thm1`` is the bound in terms of the measured ``E[gamma^-2]`` sum;
        ``thm2`` substitutes the closed-form bound on it.
    convention : {"analytic", "exact"}

    Returns
    -------
    value : float
    admissible : bool
        Whether ``p.lam`` is strictly below the theorem's limit.
    """
    q = survival_probability(p.tau, convention)
    lam, kappa, M, E, T = p.lam, p.kappa, p.M, p.E, p.T
    if which == "thm1":
        c1 = 32 * lam * kappa * M * E * p.sigma2
        c2 = 32 * lam * kappa * M**2 * E * p.delta2
        c3 = lam * kappa * E + 1.0 / q
        value = (8 * p.loss_gap / (lam * q * E * T) + (c1 + c2) * c3
                 + 4 * kappa * p.noise * p.F / (lam * q * E * T) * p.inv_gamma_sq_sum)
    elif which == "thm2":
        if p.tau <= 0:
            raise ValueError("the second theorem needs tau > 0")
        c1 = 64 * lam * kappa * M * E * p.sigma2
        c2 = 64 * lam * kappa * M**2 * E * p.delta2
        c3 = (lam * kappa * E + 1.0 / q
              + p.noise * p.F**2 * p.N * _omega(p) / (q * p.power * p.tau**2))
        value = 16 * p.loss_gap / (lam * q * E * T) + (c1 + c2) * c3
    else:
        raise ValueError(f"unknown bound {which!r}")
    return value, bool(lam < step_size_limit(p, which, convention))


def lemma2_bound(p, grad_sq_mean):
    """Bound on ``E[gamma_bar^-2]`` and whether ``lam <= 1/(2 sqrt2 kappa E)``."""
    if p.tau <= 0:
        raise ValueError("the bound needs tau > 0")
    value = (8 * p.lam**2 * p.M * p.E**2 * p.F * _omega(p) / (p.power * p.tau**2)
             * (p.sigma2 + p.M * p.delta2 + grad_sq_mean))
    limit = 1.0 / (2 * math.sqrt(2) * p.kappa * p.E) if p.kappa > 0 else math.inf
    return value, bool(p.lam <= limit)


def _curvature(grad, x, stream, iters, step):
    """Largest observed gradient-difference ratio along a power iteration."""
    v = stream.normal(x.shape)
    v /= np.linalg.norm(v)
    g0 = grad(x)
    best = 0.0
    for _ in range(iters):
        diff = grad(x + step * v) - g0
        norm = np.linalg.norm(diff)
        if norm == 0:
            break
        best = max(best, norm / step)
        v = diff / norm
    return best


def estimate_constants(model, shards, rho, probes, stream, power_iters=30, step=1e-4):
    """Empirical ``kappa``, ``sigma2`` and ``delta2`` over probe parameters.

    ``model`` needs ``loss_and_grad(theta, X, y)`` and
    ``per_sample_grads(theta, X, y)``.

    - ``sigma2``: max over probes and devices of the mean squared deviation
      of per-sample gradients from the device gradient.
    - ``delta2``: max over probes of ``(1/M) sum_m |grad L_m - grad L|^2``.
    - ``kappa``: max over probes and devices of ``|grad(x) - grad(y)| /
      |x - y|`` for pairs found by power iteration on gradient differences.

    Every value is attained by an observed pair or sample set, so each is a
    lower bound on the corresponding assumption constant.
    """
    kappa = sigma2 = delta2 = 0.0
    for theta in probes:
        theta = np.asarray(theta, dtype=float)
        dev_grads = []
        for shard in shards:
            per = model.per_sample_grads(theta, shard.X, shard.y)
            g = per.mean(axis=0)
            dev_grads.append(g)
            sigma2 = max(sigma2, float(np.mean(np.sum((per - g) ** 2, axis=1))))

            def grad_m(x, shard=shard):
                return model.loss_and_grad(x, shard.X, shard.y)[1]

            kappa = max(kappa, _curvature(grad_m, theta, stream, power_iters, step))
        dev_grads = np.array(dev_grads)
        g = np.asarray(rho) @ dev_grads
        delta2 = max(delta2, float(np.mean(np.sum((dev_grads - g) ** 2, axis=1))))
    return {"kappa": kappa, "sigma2": sigma2, "delta2": delta2}


def measure_assumption_constants(cfg, probe_rounds, loss_floor=0.0, stream=None):
    """Estimate bound inputs by probing the first ``probe_rounds`` models.

    Runs the configured experiment for ``probe_rounds`` rounds, probes the
    initial model and every global model it visits, and fills a
    :class:`BoundParams` for the full ``cfg.rounds`` horizon.
    ``loss_floor`` stands in for the optimal loss (0 is always valid for
    cross-entropy).
    """
    est = make_estimator(cfg).set_params(n_rounds=probe_rounds)
    X, y, X_test, y_test = load_data(cfg)
    probes = []
    est.fit(X, y, callback=lambda t, theta: probes.append(theta.copy()))
    probes.insert(0, est.theta_init_)
    stream = stream or derive_stream(cfg.seed, (0, 0, 0, "probe"))
    consts = estimate_constants(est.model_, est.shards_, est.rho_, probes, stream)
    loss1, _ = full_gradient(est.model_, est.theta_init_, est.shards_, est.rho_)
    return BoundParams(
        kappa=consts["kappa"], sigma2=consts["sigma2"], delta2=consts["delta2"],
        tau=cfg.tau, power=dbm_to_linear(cfg.power_dbm),
        noise=0.0 if cfg.noise_dbm is None else dbm_to_linear(cfg.noise_dbm),
        F=cfg.n_subcarriers, N=-(-est.model_.n_params // cfg.n_subcarriers),
        M=cfg.n_devices, U=cfg.n_ports, E=cfg.local_steps, lam=cfg.learning_rate,
        T=cfg.rounds, loss_gap=max(loss1 - loss_floor, 0.0),
        mu_min=port_correlations(cfg.n_ports, cfg.width).mu_min,
    )


def inv_gamma_sq_total(metrics):
    """``sum_t sum_n gamma^-2`` over a run's recorded symbols."""
    return float(sum(r.inv_gamma_sq_mean * len(r.rules) for r in metrics))
