"""Over-the-air aggregation of local model updates over OFDM symbols."""

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "LocalModelUpdate",
    "GlobalModelUpdate",
    "SymbolRecord",
    "slice_lmu",
    "beta_exchange",
    "build_symbol",
    "transmit_round",
    "recover",
    "assemble_gmu",
    "aggregate",
]


@dataclass(frozen=True)
class LocalModelUpdate:
    delta: np.ndarray
    device: int = 0
    t: int = 0

    def __post_init__(self):
        if not np.all(np.isfinite(self.delta)):
            raise ValueError(f"non-finite local update from device {self.device}")

    @property
    def beta(self):
        return float(np.max(np.abs(self.delta))) if self.delta.size else 0.0


@dataclass(frozen=True)
class SymbolRecord:
    """What happened on one OFDM symbol, kept for round metrics."""

    n: int
    gamma: float
    gamma_rule2: float
    effective_noise_stat: float
    rule: str
    active_fraction: float
    skipped: bool


@dataclass(frozen=True)
class GlobalModelUpdate:
    delta_hat: np.ndarray
    t: int = 0
    gammas: tuple = ()
    symbols: list = field(default_factory=list)


def slice_lmu(delta, n_subcarriers):
    """Split an update into ``ceil(d/F)`` rows of length ``F``, zero padded."""
    delta = np.asarray(getattr(delta, "delta", delta), dtype=float)
    d = delta.size
    if d < 1 or n_subcarriers < 1:
        raise ValueError("need d >= 1 and F >= 1")
    n_symbols = -(-d // n_subcarriers)
    out = np.zeros(n_symbols * n_subcarriers)
    out[:d] = delta
    return out.reshape(n_symbols, n_subcarriers)


def beta_exchange(lmus):
    """Largest update magnitude over all devices (noiseless control round)."""
    if len(lmus) == 0:
        raise ValueError("beta exchange needs at least one device")
    return max(float(np.max(np.abs(getattr(u, "delta", u)), initial=0.0)) for u in lmus)


def build_symbol(values, h, mask, gamma, rho):
    """Truncated channel-inversion transmit symbol.

    ``x_f = gamma * rho * values_f / h_f`` on active subcarriers, exactly 0
    elsewhere.
    """
    values = np.asarray(values, dtype=float)
    h = np.asarray(h, dtype=complex)
    mask = np.asarray(mask, dtype=bool)
    if np.any(mask & (h == 0)):
        raise ValueError("active subcarrier with zero channel gain")
    x = np.zeros(h.shape, dtype=complex)
    x[mask] = gamma * rho * values[mask] / h[mask]
    return x


def transmit_round(symbols, h_selected, noise_power, noise_stream):
    """Superpose all devices' symbols through their channels and add noise.

    Noise is circularly-symmetric complex Gaussian with per-entry variance
    ``noise_power``.
    """
    symbols = np.atleast_2d(symbols)
    h_selected = np.atleast_2d(h_selected)
    y = np.sum(h_selected * symbols, axis=0)
    w = noise_stream.complex_normal(y.shape)
    return y + math.sqrt(noise_power) * w


def recover(y, gamma):
    """Descale a received symbol and keep the real part."""
    if not gamma > 0:
        raise ValueError(f"gamma must be > 0, got {gamma}")
    return np.real(np.asarray(y) / gamma)


def assemble_gmu(recovered, d, t=0, gammas=()):
    recovered = np.atleast_2d(np.asarray(recovered, dtype=float))
    if recovered.size < d:
        raise ValueError(f"{recovered.size} recovered values cannot cover d={d}")
    return GlobalModelUpdate(recovered.reshape(-1)[:d].copy(), t, tuple(gammas))


def aggregate(deltas, rho, n_subcarriers, select, noise_power, noise_stream_for, t=0):
    """Run the whole over-the-air pipeline for one global round.

    Parameters
    ----------
    deltas : ndarray of shape (M, d)
    rho : ndarray of shape (M,)
        Aggregation weights.
    n_subcarriers : int
    select : callable
        ``select(n, beta) -> (h_selected, masks, ScalingDecision)`` for
        symbol ``n``; ``h_selected`` and ``masks`` are ``(M, F)``.
    noise_power : float
    noise_stream_for : callable
        ``noise_stream_for(n)`` returns the receiver-noise stream of symbol
        ``n``.

    Returns
    -------
    GlobalModelUpdate
    """
    deltas = np.atleast_2d(np.asarray(deltas, dtype=float))
    n_devices, d = deltas.shape
    beta = beta_exchange(list(deltas))
    slices = np.stack([slice_lmu(dm, n_subcarriers) for dm in deltas], axis=1)
    recovered = np.zeros((slices.shape[0], n_subcarriers))
    records = []
    for n in range(slices.shape[0]):
        h_sel, masks, scaling = select(n, beta)
        gamma = scaling.gamma_bar
        noise_stream = noise_stream_for(n)
        # no usable scaling: every device silent, or a gain so deep that gamma underflowed
        skipped = math.isinf(gamma) or not gamma > 0
        if not skipped:
            x = np.stack([
                build_symbol(slices[n, m], h_sel[m], masks[m], gamma, rho[m])
                for m in range(n_devices)
            ])
            y = transmit_round(x, h_sel, noise_power, noise_stream)
            recovered[n] = recover(y, gamma)
        records.append(SymbolRecord(
            n=n,
            gamma=gamma,
            gamma_rule2=scaling.gamma_bar_rule2,
            effective_noise_stat=scaling.effective_noise_stat,
            rule=scaling.rule,
            active_fraction=float(np.mean(masks)),
            skipped=skipped,
        ))
    gmu = assemble_gmu(recovered, d, t, [r.gamma for r in records])
    return GlobalModelUpdate(gmu.delta_hat, t, gmu.gammas, records)
