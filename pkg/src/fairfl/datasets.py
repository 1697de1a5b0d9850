"""Datasets, device partitioning and the MNIST IDX reader."""

import gzip
import logging
import os
import struct
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

__all__ = [
    "DataShard",
    "make_gaussian_mixture",
    "partition_dataset",
    "read_idx",
    "load_mnist",
]

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801

_MNIST_FILES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}


@dataclass(frozen=True)
class DataShard:
    X: np.ndarray
    y: np.ndarray
    device: int

    @property
    def n_samples(self):
        return len(self.y)


def make_gaussian_mixture(n_samples, n_features, n_classes, class_sep, stream):
    """Balanced K-class Gaussian mixture with unit-covariance components.

    Class means are drawn from N(0, class_sep^2 I).
    """
    means = class_sep * stream.normal((n_classes, n_features))
    y = stream.permutation(np.arange(n_samples) % n_classes)
    X = means[y] + stream.normal((n_samples, n_features))
    return X, y


def partition_dataset(X, y, n_devices, scheme="iid-equal", stream=None):
    """Split a dataset into disjoint equal-size device shards.

    Parameters
    ----------
    X, y : arrays
    n_devices : int
    scheme : {"iid-equal", "label-sorted-shards"}
        ``iid-equal`` shuffles then deals ``n // M`` samples to each device.
        ``label-sorted-shards`` sorts by label, cuts ``2M`` contiguous
        shards and hands two random shards to every device.
    stream : SeededStream, optional
        Source of the shuffles; without one the data order is kept.

    Returns
    -------
    shards : list of DataShard
    rho : ndarray
        Data share of each device.
    """
    n = len(y)
    if n_devices < 1 or n < n_devices:
        raise ValueError(f"cannot split {n} samples over {n_devices} devices")
    if scheme == "iid-equal":
        order = stream.permutation(n) if stream is not None else np.arange(n)
        per = n // n_devices
        groups = [order[m * per:(m + 1) * per] for m in range(n_devices)]
    elif scheme == "label-sorted-shards":
        n_pieces = 2 * n_devices
        per = n // n_pieces
        if per == 0:
            raise ValueError(f"cannot cut {n} samples into {n_pieces} label shards")
        order = np.argsort(y, kind="stable")
        pieces = [order[k * per:(k + 1) * per] for k in range(n_pieces)]
        assign = stream.permutation(n_pieces) if stream is not None else np.arange(n_pieces)
        groups = [np.concatenate([pieces[assign[2 * m]], pieces[assign[2 * m + 1]]])
                  for m in range(n_devices)]
    else:
        raise ValueError(f"unknown partition scheme {scheme!r}")
    shards = [DataShard(X[g], y[g], m) for m, g in enumerate(groups)]
    sizes = np.array([s.n_samples for s in shards], dtype=float)
    return shards, sizes / sizes.sum()


def _open(path):
    return gzip.open(path, "rb") if str(path).endswith(".gz") else open(path, "rb")


def read_idx(path):
    """Read an IDX image (magic 0x803) or label (magic 0x801) file.

    Images come back as float64 ``(n, rows*cols)`` scaled to [0, 1],
    labels as int64 ``(n,)``.
    """
    with _open(path) as fh:
        magic, count = struct.unpack(">II", fh.read(8))
        if magic == IMAGE_MAGIC:
            rows, cols = struct.unpack(">II", fh.read(8))
            buf = fh.read(count * rows * cols)
            if len(buf) != count * rows * cols:
                raise ValueError(f"{path}: truncated image data")
            pixels = np.frombuffer(buf, dtype=np.uint8).reshape(count, rows * cols)
            return pixels.astype(np.float64) / 255.0
        if magic == LABEL_MAGIC:
            buf = fh.read(count)
            if len(buf) != count:
                raise ValueError(f"{path}: truncated label data")
            return np.frombuffer(buf, dtype=np.uint8).astype(np.int64)
    raise ValueError(f"{path}: unknown IDX magic 0x{magic:08x}")


def _find(directory, stem):
    for name in (stem, stem + ".gz"):
        path = os.path.join(directory, name)
        if os.path.exists(path):
            return path
    return None


def load_mnist(directory):
    """Load MNIST from ``directory``; returns None if any file is missing."""
    paths = {k: _find(directory, v) for k, v in _MNIST_FILES.items()} if directory else {}
    if not paths or None in paths.values():
        logger.warning("MNIST files not found in %r; falling back to synthetic data", directory)
        return None
    X_train, y_train = read_idx(paths["train_images"]), read_idx(paths["train_labels"])
    X_test, y_test = read_idx(paths["test_images"]), read_idx(paths["test_labels"])
    if len(X_train) != len(y_train) or len(X_test) != len(y_test):
        raise ValueError("MNIST image and label counts differ")
    return X_train, y_train, X_test, y_test
