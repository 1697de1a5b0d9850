"""Antenna port selection and power-scaling bounds.

Port indices are 0-based throughout (port 0 is the reference port).
Channel arrays are shaped ``(U, F)`` for one device or ``(M, U, F)`` for
all devices; selected-port channels are ``(M, F)``.

An unbounded scaling factor (every device silent on a symbol, or an
all-zero update) is represented by ``math.inf``.
"""

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ROBUST",
    "ACCURACY",
    "UNIFORM",
    "TruncationSet",
    "PortDecision",
    "ScalingDecision",
    "active_mask",
    "inverse_gain_sum",
    "rule_robust",
    "rule_accuracy",
    "gamma_bar",
    "effective_noise",
    "hybrid_select",
    "select_ports",
]

ROBUST = "robust"
ACCURACY = "accuracy"
UNIFORM = "uniform"


@dataclass(frozen=True)
class TruncationSet:
    """Complex numbers with magnitude at least ``tau``."""

    tau: float

    def __post_init__(self):
        if not self.tau >= 0:
            raise ValueError(f"tau must be >= 0, got {self.tau}")

    def __contains__(self, z):
        return abs(z) >= self.tau

    def mask(self, h):
        return np.abs(h) >= self.tau


def _tau(trunc):
    return trunc.tau if isinstance(trunc, TruncationSet) else float(trunc)


@dataclass(frozen=True)
class PortDecision:
    device: int
    port: int
    mask: np.ndarray
    inverse_gain_sum: float
    rule: str
    all_inactive: bool = False


@dataclass(frozen=True)
class ScalingDecision:
    """Symbol-level scaling outcome.

    ``gamma_bar`` is the bound under the final selections and
    ``gamma_bar_rule2`` the bound under accuracy-rule selections; either
    may be ``math.inf``.
    """

    gamma_bar: float
    gamma_bar_rule2: float
    beta: float
    effective_noise_stat: float
    rule: str


def active_mask(h, trunc):
    """Element-wise membership of ``h`` in the truncation set."""
    return np.abs(h) >= _tau(trunc)


def inverse_gain_sum(h, trunc):
    """Sum of ``|h|^-2`` over active entries along the last axis."""
    mag = np.abs(h)
    mag2 = mag**2
    mask = mag >= _tau(trunc)
    with np.errstate(divide="ignore", over="ignore"):
        inv = np.where(mask, 1.0 / np.where(mask, mag2, 1.0), 0.0)
    return inv.sum(axis=-1)


def _robust_ports(channels, tau):
    sums = inverse_gain_sum(channels, tau)
    counts = active_mask(channels, tau).sum(axis=-1)
    candidate = counts > 0
    masked = np.where(candidate, sums, np.inf)
    ports = np.argmin(masked, axis=-1)
    all_inactive = ~candidate.any(axis=-1)
    return np.where(all_inactive, 0, ports), all_inactive


def _accuracy_ports(channels, tau):
    counts = active_mask(channels, tau).sum(axis=-1)
    return np.argmax(counts, axis=-1)


def rule_robust(port_channels, trunc):
    """Port minimizing the inverse-gain sum over its active subcarriers.

    Ports with no active subcarrier are excluded. Returns
    ``(port, all_inactive)``; when every port is inactive the reference
    port 0 is returned with ``all_inactive=True``.
    """
    port_channels = np.atleast_2d(port_channels)
    port, flag = _robust_ports(port_channels, _tau(trunc))
    return int(port), bool(flag)


def rule_accuracy(port_channels, trunc):
    """Port with the most active subcarriers (lowest index on ties)."""
    port_channels = np.atleast_2d(port_channels)
    return int(_accuracy_ports(port_channels, _tau(trunc)))


def gamma_bar(selected, trunc, power, beta):
    """Largest power-feasible scaling factor for the given selections.

    Parameters
    ----------
    selected : ndarray of shape (M, F)
        Channel of each device's chosen port.
    trunc : TruncationSet or float
    power : float
        Per-symbol power budget, linear units.
    beta : float
        Largest update magnitude across all devices.

    Returns
    -------
    float
        ``sqrt(P)/beta * min_m (sum_f S_mf)^-1/2``; ``math.inf`` when
        ``beta == 0`` or no device has an active subcarrier.
    """
    if beta < 0 or not power > 0:
        raise ValueError("beta must be >= 0 and power > 0")
    sums = inverse_gain_sum(np.atleast_2d(selected), trunc)
    live = sums[sums > 0]
    if beta == 0 or live.size == 0:
        return math.inf
    return math.sqrt(power) / beta / math.sqrt(float(live.max()))


def effective_noise(noise_power, gamma, exponent=1):
    """Server-side noise statistic ``N0 / (2 gamma^e)``; 0 if unbounded."""
    if math.isinf(gamma) or noise_power == 0:
        return 0.0
    if gamma == 0:
        return math.inf
    return noise_power / (2.0 * gamma**exponent)


def _decisions(channels, ports, tau, rule, flags=None):
    out = []
    for m, u in enumerate(ports):
        h = channels[m, u]
        out.append(
            PortDecision(
                device=m,
                port=int(u),
                mask=active_mask(h, tau),
                inverse_gain_sum=float(inverse_gain_sum(h, tau)),
                rule=rule,
                all_inactive=bool(flags[m]) if flags is not None else False,
            )
        )
    return out


def _selected(channels, ports):
    return channels[np.arange(channels.shape[0]), ports]


def hybrid_select(channels, trunc, power, beta, noise_power, psi, exponent=1):
    """Noise-gated switch between the robust and accuracy rules.

    The accuracy rule is evaluated first; if the resulting effective noise
    statistic exceeds ``psi`` every device switches to the robust rule.

    Returns
    -------
    decisions : list of PortDecision
    scaling : ScalingDecision
    """
    if not psi > 0:
        raise ValueError(f"psi must be > 0, got {psi}")
    tau = _tau(trunc)
    channels = np.asarray(channels)
    acc_ports = _accuracy_ports(channels, tau)
    g2 = gamma_bar(_selected(channels, acc_ports), tau, power, beta)
    stat = effective_noise(noise_power, g2, exponent)
    if stat > psi:
        ports, flags = _robust_ports(channels, tau)
        rule = ROBUST
        g = gamma_bar(_selected(channels, ports), tau, power, beta)
    else:
        ports, flags, rule, g = acc_ports, None, ACCURACY, g2
    decisions = _decisions(channels, ports, tau, rule, flags)
    return decisions, ScalingDecision(g, g2, float(beta), stat, rule)


def select_ports(mode, channels, trunc, power, beta, noise_power, psi,
                 exponent=1, stream=None):
    """Dispatch on a selection mode: robust, accuracy, hybrid or uniform.

    ``uniform`` draws each device's port from ``stream`` and needs one.
    """
    tau = _tau(trunc)
    channels = np.asarray(channels)
    if mode == "hybrid":
        return hybrid_select(channels, tau, power, beta, noise_power, psi, exponent)
    acc_ports = _accuracy_ports(channels, tau)
    g2 = gamma_bar(_selected(channels, acc_ports), tau, power, beta)
    stat = effective_noise(noise_power, g2, exponent)
    flags = None
    if mode == ACCURACY:
        ports, rule = acc_ports, ACCURACY
    elif mode == ROBUST:
        (ports, flags), rule = _robust_ports(channels, tau), ROBUST
    elif mode == UNIFORM:
        if stream is None:
            raise ValueError("uniform selection needs a random stream")
        ports = stream.integers(0, channels.shape[1], size=channels.shape[0])
        rule = UNIFORM
    else:
        raise ValueError(f"unknown selection mode {mode!r}")
    g = g2 if mode == ACCURACY else gamma_bar(_selected(channels, ports), tau, power, beta)
    decisions = _decisions(channels, ports, tau, rule, flags)
    return decisions, ScalingDecision(g, g2, float(beta), stat, rule)
