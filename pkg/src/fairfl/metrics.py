"""Per-round metrics and their CSV serialization."""

import csv
from dataclasses import dataclass, fields

__all__ = ["RoundMetrics", "CSV_COLUMNS", "write_metrics_csv", "read_metrics_csv"]


@dataclass
class RoundMetrics:
    """One global round.

    ``train_loss`` and ``grad_sq_norm`` are full-batch values at the model
    the round started from; the test columns describe the model after the
    round's update. Symbol statistics are averaged over the round's OFDM
    symbols, with skipped symbols contributing zero noise. ``rules`` holds
    one letter per symbol: ``r`` robust, ``a`` accuracy, ``u`` uniform.
    """

    t: int
    train_loss: float
    grad_sq_norm: float
    test_accuracy: float
    test_loss: float
    beta: float
    gamma_min: float
    gamma_mean: float
    inv_gamma_sq_mean: float
    noise_power_mean: float
    effective_noise_stat_mean: float
    stat_above_psi_fraction: float
    active_fraction: float
    robust_fraction: float
    skipped_symbols: int
    rules: str
    wall_time: float = 0.0


# wall_time stays out of the file so reruns are byte-identical
CSV_COLUMNS = [f.name for f in fields(RoundMetrics) if f.name != "wall_time"]
_TYPES = {f.name: f.type for f in fields(RoundMetrics)}


def _fmt(value):
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def write_metrics_csv(metrics, path):
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            for rec in metrics:
                writer.writerow([_fmt(getattr(rec, c)) for c in CSV_COLUMNS])
    except OSError as exc:
        raise OSError(f"cannot write metrics to {path}: {exc}") from exc


def read_metrics_csv(path):
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            kwargs = {}
            for name, text in row.items():
                kind = _TYPES[name]
                kwargs[name] = int(text) if kind in (int, "int") else (
                    text if kind in (str, "str") else float(text))
            out.append(RoundMetrics(**kwargs))
    return out
