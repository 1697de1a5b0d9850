"""scikit-learn style classifier trained by fluid-antenna over-the-air FL."""

import math
import time

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.multiclass import check_classification_targets
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .aircomp import aggregate
from .channel import port_correlations, symbol_channels
from .datasets import partition_dataset
from .learner import MLP, TrainingConfig, compute_lmu, evaluate, local_train
from .metrics import RoundMetrics
from .numerics import dbm_to_linear, derive_stream
from .selection import ROBUST, TruncationSet, select_ports

__all__ = ["FAirFLClassifier", "NumericalAbort", "SELECTION_MODES", "full_gradient"]

SELECTION_MODES = ("robust", "accuracy", "hybrid", "uniform")


class NumericalAbort(FloatingPointError):
    """The global model stopped being finite."""

    def __init__(self, t, message=None):
        self.t = t
        super().__init__(message or f"non-finite global model after round {t}")


def full_gradient(model, theta, shards, rho):
    """Loss and gradient of the data-weighted global objective."""
    loss, grad = 0.0, np.zeros(model.n_params)
    for shard, weight in zip(shards, rho):
        lm, gm = model.loss_and_grad(theta, shard.X, shard.y)
        loss += weight * lm
        grad += weight * gm
    return loss, grad


class FAirFLClassifier(ClassifierMixin, BaseEstimator):
    """MLP classifier trained with fluid-antenna-aided over-the-air FL.

    The training set is split across ``n_devices`` simulated devices. Each
    global round runs local SGD on every device, then aggregates the model
    updates through a noisy analog multiple-access channel using truncated
    channel inversion, with each device picking one of ``n_ports``
    correlated antenna ports per OFDM symbol.

    Parameters
    ----------
    n_devices : int, default=20
    n_ports : int, default=10
        Fluid-antenna ports per device; 1 is a fixed antenna.
    n_subcarriers : int, default=64
    width : float, default=0.5
        Normalized aperture width of the fluid antenna.
    tau : float, default=0.1
        Channel-magnitude truncation threshold.
    psi : float, default=1e-3
        Effective-noise threshold of the hybrid selection rule.
    power_dbm : float, default=0.0
        Per-symbol transmit power budget.
    noise_dbm : float, default=-50.0
        Receiver noise power; ``None`` means noiseless.
    n_rounds : int, default=100
    local_steps : int, default=1
        Mini-batch SGD steps per device per round.
    batch_size : int, default=64
    learning_rate : float, default=0.1
    hidden_layer_sizes : tuple of int, default=(16,)
        Empty tuple gives multinomial logistic regression.
    selection : {"hybrid", "robust", "accuracy", "uniform"}, default="hybrid"
    noise_exponent : {1, 2}, default=1
        Exponent ``e`` of the switch statistic ``N0 / (2 gamma^e)``.
    partition : {"iid-equal", "label-sorted-shards"}, default="iid-equal"
    random_state : int, default=0
        Master seed; every random draw derives from it.

    Attributes
    ----------
    classes_ : ndarray
    model_ : MLP
    theta_ : ndarray
        Final global parameters.
    history_ : list of RoundMetrics
    shards_ : list of DataShard
    rho_ : ndarray
    """

    def __init__(self, n_devices=20, n_ports=10, n_subcarriers=64, width=0.5,
                 tau=0.1, psi=1e-3, power_dbm=0.0, noise_dbm=-50.0, n_rounds=100,
                 local_steps=1, batch_size=64, learning_rate=0.1,
                 hidden_layer_sizes=(16,), selection="hybrid", noise_exponent=1,
                 partition="iid-equal", random_state=0):
        self.n_devices = n_devices
        self.n_ports = n_ports
        self.n_subcarriers = n_subcarriers
        self.width = width
        self.tau = tau
        self.psi = psi
        self.power_dbm = power_dbm
        self.noise_dbm = noise_dbm
        self.n_rounds = n_rounds
        self.local_steps = local_steps
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.hidden_layer_sizes = hidden_layer_sizes
        self.selection = selection
        self.noise_exponent = noise_exponent
        self.partition = partition
        self.random_state = random_state

    def _check_params(self):
        for name in ("n_devices", "n_ports", "n_subcarriers", "local_steps", "batch_size"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        if int(self.n_rounds) < 0:
            raise ValueError("n_rounds must be >= 0")
        if not self.tau >= 0:
            raise ValueError("tau must be >= 0")
        if not self.psi > 0:
            raise ValueError("psi must be > 0")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.selection not in SELECTION_MODES:
            raise ValueError(f"selection must be one of {SELECTION_MODES}")
        if self.noise_exponent not in (1, 2):
            raise ValueError("noise_exponent must be 1 or 2")

    @property
    def _noise_power(self):
        return 0.0 if self.noise_dbm is None else dbm_to_linear(self.noise_dbm)

    def fit(self, X, y, eval_set=None, callback=None):
        """Train the global model.

        Parameters
        ----------
        X : array-like of shape (n_samples, n_features)
        y : array-like of shape (n_samples,)
        eval_set : (X_test, y_test), optional
            Scored after every round into ``history_``.
        callback : callable, optional
            ``callback(t, theta)`` after round ``t``'s global update.
        """
        self._check_params()
        X, y = check_X_y(X, y, dtype=np.float64)
        check_classification_targets(y)
        self.classes_, y_enc = np.unique(y, return_inverse=True)
        self.n_features_in_ = X.shape[1]
        if eval_set is not None:
            X_test = check_array(eval_set[0], dtype=np.float64)
            y_test = np.searchsorted(self.classes_, np.asarray(eval_set[1]))

        seed = self.random_state
        self.model_ = model = MLP((X.shape[1], *self.hidden_layer_sizes, len(self.classes_)))
        self.shards_, self.rho_ = partition_dataset(
            X, y_enc, self.n_devices, self.partition, derive_stream(seed, (0, 0, 0, "partition")))
        theta = model.init_params(derive_stream(seed, (0, 0, 0, "init")))
        self.theta_init_ = theta.copy()

        cfg = TrainingConfig(self.local_steps, self.batch_size, self.learning_rate)
        profile = port_correlations(self.n_ports, self.width)
        trunc = TruncationSet(self.tau)
        power = dbm_to_linear(self.power_dbm)
        noise = self._noise_power
        M, F = self.n_devices, self.n_subcarriers

        def select(t, n, beta):
            h = symbol_channels(seed, profile, M, F, t, n).h
            decisions, scaling = select_ports(
                self.selection, h, trunc, power, beta, noise, self.psi,
                self.noise_exponent, derive_stream(seed, (t, n, 0, "port")))
            h_sel = np.stack([h[d.device, d.port] for d in decisions])
            masks = np.stack([d.mask for d in decisions])
            return h_sel, masks, scaling

        self.history_ = []
        for t in range(1, int(self.n_rounds) + 1):
            start = time.perf_counter()
            train_loss, grad = full_gradient(model, theta, self.shards_, self.rho_)
            deltas = np.stack([
                compute_lmu(local_train(theta, s.X, s.y, cfg,
                                        derive_stream(seed, (t, 0, s.device, "batch")),
                                        model.loss_and_grad), theta)
                for s in self.shards_
            ])
            bad = ~np.all(np.isfinite(deltas), axis=1)
            if bad.any():
                self.theta_ = theta
                raise NumericalAbort(
                    t, f"non-finite local model on device {int(np.argmax(bad))} in round {t}")
            gmu = aggregate(deltas, self.rho_, F,
                            lambda n, beta, t=t: select(t, n, beta), noise,
                            lambda n, t=t: derive_stream(seed, (t, n, 0, "noise")), t)
            theta = theta + gmu.delta_hat
            if not np.all(np.isfinite(theta)):
                self.theta_ = theta
                raise NumericalAbort(t)
            if eval_set is not None:
                acc, test_loss = evaluate(model, theta, X_test, y_test)
            else:
                acc, test_loss = math.nan, math.nan
            self.history_.append(_round_metrics(
                t, train_loss, float(grad @ grad), acc, test_loss, float(np.max(np.abs(deltas))),
                gmu.symbols, noise, self.psi, time.perf_counter() - start))
            if callback is not None:
                callback(t, theta)
        self.theta_ = theta
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "theta_")
        X = check_array(X, dtype=np.float64)
        return self.model_.predict_proba(self.theta_, X)

    def predict(self, X):
        check_is_fitted(self, "theta_")
        X = check_array(X, dtype=np.float64)
        return self.classes_[self.model_.predict(self.theta_, X)]


def _round_metrics(t, train_loss, grad_sq, acc, test_loss, beta, symbols, noise, psi, wall):
    gammas = np.array([s.gamma for s in symbols])
    skipped = np.array([s.skipped for s in symbols])
    inv_sq = np.zeros(len(symbols))
    inv_sq[~skipped] = 1.0 / gammas[~skipped] ** 2
    stats = np.array([s.effective_noise_stat for s in symbols])
    return RoundMetrics(
        t=t,
        train_loss=float(train_loss),
        grad_sq_norm=grad_sq,
        test_accuracy=float(acc),
        test_loss=float(test_loss),
        beta=beta,
        gamma_min=float(gammas.min()),
        gamma_mean=float(gammas.mean()),
        inv_gamma_sq_mean=float(inv_sq.mean()),
        noise_power_mean=float(noise * inv_sq.mean()),
        effective_noise_stat_mean=float(stats.mean()),
        stat_above_psi_fraction=float(np.mean(stats > psi)),
        active_fraction=float(np.mean([s.active_fraction for s in symbols])),
        robust_fraction=float(np.mean([s.rule == ROBUST for s in symbols])),
        skipped_symbols=int(skipped.sum()),
        rules="".join(s.rule[0] for s in symbols),
        wall_time=wall,
    )
