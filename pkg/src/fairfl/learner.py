"""From-scratch MLP learner and the device/server update steps.

Parameters live in one flat float64 vector; each layer contributes its
weight matrix (fan_in x fan_out, row-major) followed by its bias.
"""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "MLP",
    "ModelState",
    "TrainingConfig",
    "local_train",
    "compute_lmu",
    "global_update",
    "evaluate",
]


class MLP:
    """Fully connected ReLU network with a softmax cross-entropy head.

    With no hidden layers this is multinomial logistic regression.

    Parameters
    ----------
    sizes : sequence of int
        Layer widths, input first and number of classes last.
    """

    def __init__(self, sizes):
        sizes = tuple(int(s) for s in sizes)
        if len(sizes) < 2 or min(sizes) < 1:
            raise ValueError(f"invalid layer sizes {sizes}")
        self.sizes = sizes
        self._shapes = list(zip(sizes[:-1], sizes[1:]))
        self.n_params = sum(i * o + o for i, o in self._shapes)

    def __repr__(self):
        return f"MLP({'-'.join(map(str, self.sizes))})"

    @property
    def n_classes(self):
        return self.sizes[-1]

    def init_params(self, stream):
        """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases."""
        parts = []
        for fan_in, fan_out in self._shapes:
            bound = 1.0 / np.sqrt(fan_in)
            parts.append(stream.uniform(-bound, bound, fan_in * fan_out + fan_out))
        return np.concatenate(parts)

    def unpack(self, theta):
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters, got shape {theta.shape}")
        layers, k = [], 0
        for fan_in, fan_out in self._shapes:
            w = theta[k:k + fan_in * fan_out].reshape(fan_in, fan_out)
            k += fan_in * fan_out
            layers.append((w, theta[k:k + fan_out]))
            k += fan_out
        return layers

    def _check_batch(self, X, y=None):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.sizes[0] or X.shape[0] == 0:
            raise ValueError(f"expected non-empty (n, {self.sizes[0]}) features, got {X.shape}")
        if y is not None:
            y = np.asarray(y)
            if y.shape != (X.shape[0],):
                raise ValueError("labels must be a vector matching the batch")
        return X, y

    def _forward(self, layers, X):
        acts = [X]
        for i, (w, b) in enumerate(layers):
            z = acts[-1] @ w + b
            acts.append(np.maximum(z, 0.0) if i < len(layers) - 1 else z)
        return acts

    def logits(self, theta, X):
        X, _ = self._check_batch(X)
        return self._forward(self.unpack(theta), X)[-1]

    def predict_proba(self, theta, X):
        z = self.logits(theta, X)
        z = z - z.max(axis=1, keepdims=True)
        p = np.exp(z)
        return p / p.sum(axis=1, keepdims=True)

    def predict(self, theta, X):
        return np.argmax(self.logits(theta, X), axis=1)

    def _losses_and_deltas(self, theta, X, y):
        layers = self.unpack(theta)
        acts = self._forward(layers, X)
        z = acts[-1]
        zmax = z.max(axis=1, keepdims=True)
        logsum = np.log(np.exp(z - zmax).sum(axis=1)) + zmax[:, 0]
        rows = np.arange(X.shape[0])
        losses = logsum - z[rows, y]
        delta = np.exp(z - logsum[:, None])
        delta[rows, y] -= 1.0
        return layers, acts, losses, delta

    def loss_and_grad(self, theta, X, y):
        """Mean cross-entropy over the batch and its gradient."""
        X, y = self._check_batch(X, y)
        layers, acts, losses, delta = self._losses_and_deltas(theta, X, y)
        delta = delta / X.shape[0]
        grads = []
        for i in range(len(layers) - 1, -1, -1):
            grads.append(delta.sum(axis=0))
            grads.append((acts[i].T @ delta).ravel())
            if i:
                delta = (delta @ layers[i][0].T) * (acts[i] > 0)
        return float(losses.mean()), np.concatenate(grads[::-1])

    def loss(self, theta, X, y):
        X, y = self._check_batch(X, y)
        return float(self._losses_and_deltas(theta, X, y)[2].mean())

    def per_sample_grads(self, theta, X, y, chunk=256):
        """Gradient of each sample's loss, shape ``(n, n_params)``."""
        X, y = self._check_batch(X, y)
        out = np.empty((X.shape[0], self.n_params))
        for start in range(0, X.shape[0], chunk):
            sl = slice(start, start + chunk)
            layers, acts, _, delta = self._losses_and_deltas(theta, X[sl], y[sl])
            parts = []
            for i in range(len(layers) - 1, -1, -1):
                parts.append(delta)
                parts.append(np.einsum("ni,no->nio", acts[i], delta).reshape(delta.shape[0], -1))
                if i:
                    delta = (delta @ layers[i][0].T) * (acts[i] > 0)
            out[sl] = np.concatenate(parts[::-1], axis=1)
        return out


@dataclass(frozen=True)
class ModelState:
    theta: np.ndarray
    sizes: tuple

    def __post_init__(self):
        if self.theta.shape != (MLP(self.sizes).n_params,):
            raise ValueError("parameter count does not match the architecture")


@dataclass(frozen=True)
class TrainingConfig:
    local_steps: int = 1
    batch_size: int = 64
    learning_rate: float = 0.1

    def __post_init__(self):
        if self.local_steps < 1 or self.batch_size < 1:
            raise ValueError("local_steps and batch_size must be >= 1")
        if not self.learning_rate >= 0:
            raise ValueError("learning_rate must be non-negative")


def local_train(theta, X, y, cfg, stream, grad_fn):
    """Run ``cfg.local_steps`` mini-batch SGD steps from ``theta``.

    Mini-batches are drawn without replacement from a shuffled pass over
    the shard; a fresh permutation is drawn from ``stream`` whenever fewer
    than ``batch_size`` unseen samples remain.

    ``grad_fn(theta, X_batch, y_batch)`` returns ``(loss, grad)``.
    """
    n = len(X)
    if n < cfg.batch_size:
        raise ValueError(f"shard of {n} samples is smaller than batch size {cfg.batch_size}")
    theta = np.array(theta, dtype=float, copy=True)
    order, pos = stream.permutation(n), 0
    for _ in range(cfg.local_steps):
        if pos + cfg.batch_size > n:
            order, pos = stream.permutation(n), 0
        idx = order[pos:pos + cfg.batch_size]
        pos += cfg.batch_size
        _, g = grad_fn(theta, X[idx], y[idx])
        theta -= cfg.learning_rate * g
    return theta


def compute_lmu(theta_local, theta_global):
    theta_local = np.asarray(theta_local, dtype=float)
    theta_global = np.asarray(theta_global, dtype=float)
    if theta_local.shape != theta_global.shape:
        raise ValueError("parameter vectors differ in length")
    return theta_local - theta_global


def global_update(theta, delta_hat):
    delta_hat = getattr(delta_hat, "delta_hat", delta_hat)
    if np.shape(theta) != np.shape(delta_hat):
        raise ValueError("global update length does not match the model")
    return np.asarray(theta, dtype=float) + delta_hat


def evaluate(model, theta, X, y):
    """Top-1 accuracy and mean cross-entropy on a labelled set."""
    if len(X) == 0:
        raise ValueError("empty evaluation set")
    acc = float(np.mean(model.predict(theta, X) == np.asarray(y)))
    return acc, model.loss(theta, X, y)
