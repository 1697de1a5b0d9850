"""Shared numerical primitives: Bessel J0, power units and seeded streams."""

import math
import zlib

import numpy as np

__all__ = [
    "bessel_j0",
    "dbm_to_linear",
    "linear_to_dbm",
    "SeededStream",
    "derive_stream",
]

# Switch point between the power series and the Hankel asymptotic expansion.
_SERIES_LIMIT = 12.0


def _j0_series(x):
    half_sq = (x / 2.0) ** 2
    term = np.ones_like(x)
    total = np.ones_like(x)
    k = 0
    while True:
        k += 1
        term = -term * half_sq / (k * k)
        total = total + term
        if np.all(np.abs(term) <= 1e-17 * np.maximum(np.abs(total), 1.0)):
            return total


def _j0_asymptotic(x):
    # Hankel expansion: J0(x) = sqrt(2/(pi x)) (P cos(x - pi/4) - Q sin(x - pi/4)).
    eight_x = 8.0 * x
    p = np.ones_like(x)
    q = np.zeros_like(x)
    term = np.ones_like(x)
    prev = np.full_like(x, np.inf)
    for k in range(1, 60):
        # a_k(0) = prod_{i=1..k} -(2i-1)^2 / (i * 8x)
        term = term * -((2 * k - 1) ** 2) / (k * eight_x)
        mag = np.abs(term)
        # stop before the asymptotic series starts to diverge
        if np.all((mag < 1e-17) | (mag > prev)):
            break
        keep = mag <= prev
        sign = -1.0 if (k // 2) % 2 else 1.0
        if k % 2:
            q = q + np.where(keep, sign * term, 0.0)
        else:
            p = p + np.where(keep, sign * term, 0.0)
        prev = np.where(keep, mag, prev)
    phase = x - math.pi / 4
    return np.sqrt(2.0 / (math.pi * x)) * (p * np.cos(phase) - q * np.sin(phase))


def bessel_j0(x):
    """Zero-order Bessel function of the first kind.

    Uses the alternating power series for ``|x| <= 12`` and the Hankel
    asymptotic expansion beyond.

    Parameters
    ----------
    x : float or array_like
        Finite real argument(s).

    Returns
    -------
    float or ndarray
        J0(x), same shape as ``x``.
    """
    arr = np.abs(np.asarray(x, dtype=np.float64))
    if not np.all(np.isfinite(arr)):
        raise ValueError("bessel_j0 requires finite arguments")
    flat = arr.reshape(-1)
    out = np.empty_like(flat)
    small = flat <= _SERIES_LIMIT
    if small.any():
        out[small] = _j0_series(flat[small])
    if (~small).any():
        out[~small] = _j0_asymptotic(flat[~small])
    out = out.reshape(arr.shape)
    if out.ndim == 0:
        return float(out)
    return out


def dbm_to_linear(p_dbm):
    """Convert dBm to milliwatts."""
    p = np.asarray(p_dbm, dtype=np.float64)
    if not np.all(np.isfinite(p)):
        raise ValueError("power in dBm must be finite")
    out = 10.0 ** (p / 10.0)
    return float(out) if out.ndim == 0 else out


def linear_to_dbm(p_mw):
    """Convert milliwatts to dBm."""
    p = np.asarray(p_mw, dtype=np.float64)
    if not np.all(np.isfinite(p)) or np.any(p <= 0):
        raise ValueError("linear power must be finite and positive")
    out = 10.0 * np.log10(p)
    return float(out) if out.ndim == 0 else out


def _key_part(part):
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    part = int(part)
    if part < 0:
        raise ValueError("stream indices must be non-negative")
    return part


class SeededStream:
    """Reproducible random stream keyed by ``(master_seed, stream_id)``.

    ``stream_id`` is a tuple of non-negative integers and/or string role
    tags, conventionally ``(t, n, m, role)``. The underlying bit generator
    is Philox (counter based), seeded through ``numpy.random.SeedSequence``
    with the stream id as spawn key, so streams with different ids are
    independent and creation order does not matter.
    """

    def __init__(self, master_seed, stream_id=()):
        self.master_seed = int(master_seed) & 0xFFFFFFFFFFFFFFFF
        self.stream_id = tuple(stream_id)
        seq = np.random.SeedSequence(
            self.master_seed, spawn_key=tuple(_key_part(p) for p in self.stream_id)
        )
        self.rng = np.random.Generator(np.random.Philox(seq))

    def __repr__(self):
        return f"SeededStream(master_seed={self.master_seed}, stream_id={self.stream_id!r})"

    def normal(self, size=None):
        return self.rng.standard_normal(size)

    def complex_normal(self, size=None):
        """Circularly-symmetric complex normal with unit variance."""
        re = self.rng.standard_normal(size)
        im = self.rng.standard_normal(size)
        return (re + 1j * im) / math.sqrt(2.0)

    def permutation(self, n):
        return self.rng.permutation(n)

    def integers(self, low, high=None, size=None):
        return self.rng.integers(low, high, size=size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self.rng.uniform(low, high, size)


def derive_stream(master_seed, stream_id=()):
    return SeededStream(master_seed, stream_id)
