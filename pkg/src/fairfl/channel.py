"""Correlated fluid-antenna channel generation."""

import csv
import math
from dataclasses import dataclass

import numpy as np

from .numerics import bessel_j0, derive_stream

__all__ = [
    "PortCorrelationProfile",
    "ChannelTensor",
    "port_correlations",
    "sample_symbol_channels",
    "symbol_channels",
    "dump_channels_csv",
]


@dataclass(frozen=True)
class PortCorrelationProfile:
    """Per-port correlation with the reference port.

    Attributes
    ----------
    n_ports : int
    width : float
        Normalized aperture width.
    mu : ndarray of shape (n_ports,)
        ``mu[0]`` is exactly 1.
    """

    n_ports: int
    width: float
    mu: np.ndarray

    @property
    def mu_min(self):
        return float(np.min(self.mu))


@dataclass(frozen=True)
class ChannelTensor:
    """Channel coefficients for one OFDM symbol.

    ``h`` has shape ``(M, U, F)``. ``a`` and ``b`` hold the raw standard
    normals the coefficients were built from (same shape).
    """

    h: np.ndarray
    t: int
    n: int
    a: np.ndarray = None
    b: np.ndarray = None

    @property
    def shape(self):
        return self.h.shape


def port_correlations(n_ports, width):
    """Bessel correlation profile ``mu_u = J0(2 pi (u-1) W / (U-1))``."""
    n_ports = int(n_ports)
    if n_ports < 1:
        raise ValueError(f"n_ports must be >= 1, got {n_ports}")
    if not width > 0:
        raise ValueError(f"width must be > 0, got {width}")
    if n_ports == 1:
        mu = np.ones(1)
    else:
        u = np.arange(n_ports)
        mu = np.asarray(bessel_j0(2.0 * math.pi * u * width / (n_ports - 1)), dtype=float)
        mu[0] = 1.0
    mu.setflags(write=False)
    return PortCorrelationProfile(n_ports, float(width), mu)


def _mix(profile, a, b):
    # a, b: (..., U, F); port 0 is the shared reference pair
    mu = profile.mu[:, None]
    scale = np.sqrt(1.0 - mu**2)
    re = scale * a + mu * a[..., :1, :]
    im = scale * b + mu * b[..., :1, :]
    return (re + 1j * im) / math.sqrt(2.0)


def sample_symbol_channels(stream, profile, n_devices, n_subcarriers, t=0, n=0):
    """Draw an ``(M, U, F)`` channel tensor from a single stream."""
    if n_devices < 1 or n_subcarriers < 1:
        raise ValueError("n_devices and n_subcarriers must be >= 1")
    shape = (n_devices, profile.n_ports, n_subcarriers)
    a = stream.normal(shape)
    b = stream.normal(shape)
    return ChannelTensor(_mix(profile, a, b), t, n, a, b)


def symbol_channels(master_seed, profile, n_devices, n_subcarriers, t, n):
    """Channel tensor for symbol ``(t, n)`` with one stream per device.

    Device ``m`` draws from stream ``(t, n, m, "channel")`` so any device's
    channels can be regenerated independently of the others.
    """
    a = np.empty((n_devices, profile.n_ports, n_subcarriers))
    b = np.empty_like(a)
    for m in range(n_devices):
        stream = derive_stream(master_seed, (t, n, m, "channel"))
        a[m] = stream.normal((profile.n_ports, n_subcarriers))
        b[m] = stream.normal((profile.n_ports, n_subcarriers))
    return ChannelTensor(_mix(profile, a, b), t, n, a, b)


def dump_channels_csv(channels, path):
    """Write a channel tensor as ``m,u,f,re,im`` rows (1-based indices)."""
    h = channels.h
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["m", "u", "f", "re", "im"])
        for (m, u, f), z in np.ndenumerate(h):
            writer.writerow([m + 1, u + 1, f + 1, repr(float(z.real)), repr(float(z.imag))])
