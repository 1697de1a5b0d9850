"""Run a configured experiment end to end and write its outputs."""

import logging
import os
import subprocess
from importlib import metadata

from .config import dump_config
from .datasets import load_mnist, make_gaussian_mixture
from .estimator import FAirFLClassifier
from .metrics import write_metrics_csv
from .numerics import derive_stream

logger = logging.getLogger(__name__)

__all__ = ["load_data", "make_estimator", "run_experiment", "build_tag", "write_manifest",
           "manifest_path"]


def load_data(cfg):
    """``(X_train, y_train, X_test, y_test)`` for the configured dataset."""
    if cfg.dataset == "mnist":
        data = load_mnist(cfg.mnist_dir)
        if data is not None:
            return data
    X, y = make_gaussian_mixture(cfg.n_train + cfg.n_test, cfg.n_features, cfg.n_classes,
                                 cfg.class_sep, derive_stream(cfg.seed, (0, 0, 0, "data")))
    return X[:cfg.n_train], y[:cfg.n_train], X[cfg.n_train:], y[cfg.n_train:]


def make_estimator(cfg):
    return FAirFLClassifier(
        n_devices=cfg.n_devices,
        n_ports=cfg.n_ports,
        n_subcarriers=cfg.n_subcarriers,
        width=cfg.width,
        tau=cfg.tau,
        psi=cfg.psi,
        power_dbm=cfg.power_dbm,
        noise_dbm=cfg.noise_dbm,
        n_rounds=cfg.rounds,
        local_steps=cfg.local_steps,
        batch_size=cfg.batch_size,
        learning_rate=cfg.learning_rate,
        hidden_layer_sizes=cfg.hidden,
        selection=cfg.mode,
        noise_exponent=cfg.noise_exponent,
        partition=cfg.partition,
        random_state=cfg.seed,
    )


def run_experiment(cfg, callback=None, data=None):
    """Train per ``cfg`` and return the list of per-round metrics."""
    X_train, y_train, X_test, y_test = data if data is not None else load_data(cfg)
    est = make_estimator(cfg)
    est.fit(X_train, y_train, eval_set=(X_test, y_test), callback=callback)
    return est.history_


def build_tag():
    """``git describe`` of the source tree, else the installed version."""
    here = os.path.dirname(os.path.abspath(__file__))
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"], cwd=here,
                             capture_output=True, text=True, timeout=10)
        if out.returncode == 0 and out.stdout.strip():
            return out.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        pass
    try:
        return "v" + metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def manifest_path(out):
    return out + ".manifest"


def write_manifest(cfg, path):
    # comment header keeps the manifest loadable as a config file
    text = f"# fairfl run manifest\n# build: {build_tag()}\n{dump_config(cfg)}"
    try:
        with open(path, "w") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write manifest to {path}: {exc}") from exc


def run_and_write(cfg):
    metrics = run_experiment(cfg)
    write_metrics_csv(metrics, cfg.out)
    write_manifest(cfg, manifest_path(cfg.out))
    return metrics
