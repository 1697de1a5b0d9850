"""Experiment configuration: ``key = value`` text files with validation."""

import configparser
from dataclasses import dataclass, fields, replace

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "parse_config", "dump_config"]


class ConfigError(ValueError):
    """Invalid configuration; ``key`` names the offending entry."""

    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")


@dataclass(frozen=True)
class ExperimentConfig:
    n_devices: int = 20
    n_ports: int = 10
    n_subcarriers: int = 64
    width: float = 0.5
    tau: float = 0.1
    psi: float = 0.001
    power_dbm: float = 0.0
    # None disables receiver noise
    noise_dbm: float = -50.0
    rounds: int = 100
    local_steps: int = 1
    batch_size: int = 64
    learning_rate: float = 0.1
    hidden: tuple = (16,)
    mode: str = "hybrid"
    noise_exponent: int = 1
    seed: int = 0
    dataset: str = "synthetic"
    mnist_dir: str = ""
    partition: str = "iid-equal"
    n_train: int = 4000
    n_test: int = 1000
    n_features: int = 20
    n_classes: int = 10
    class_sep: float = 1.0
    out: str = "metrics.csv"

    def __post_init__(self):
        validate(self)

    def with_overrides(self, **changes):
        changes = {k: v for k, v in changes.items() if v is not None}
        unknown = set(changes) - _FIELDS.keys()
        if unknown:
            key = sorted(unknown)[0]
            raise ConfigError(key, "unknown key")
        return replace(self, **changes)


_FIELDS = {f.name: f for f in fields(ExperimentConfig)}
_CHOICES = {
    "mode": ("robust", "accuracy", "hybrid", "uniform"),
    "dataset": ("synthetic", "mnist"),
    "partition": ("iid-equal", "label-sorted-shards"),
    "noise_exponent": (1, 2),
}


def validate(cfg):
    for key in ("n_devices", "n_ports", "n_subcarriers", "local_steps", "batch_size",
                "n_train", "n_test", "n_features", "n_classes"):
        if getattr(cfg, key) < 1:
            raise ConfigError(key, "must be >= 1")
    if cfg.rounds < 0:
        raise ConfigError("rounds", "must be >= 0")
    if not cfg.width > 0:
        raise ConfigError("width", "must be > 0")
    if not cfg.tau >= 0:
        raise ConfigError("tau", "must be >= 0")
    if not cfg.psi > 0:
        raise ConfigError("psi", "must be > 0")
    if not cfg.learning_rate > 0:
        raise ConfigError("learning_rate", "must be > 0")
    if not cfg.class_sep >= 0:
        raise ConfigError("class_sep", "must be >= 0")
    if any(h < 1 for h in cfg.hidden):
        raise ConfigError("hidden", "layer widths must be >= 1")
    for key, allowed in _CHOICES.items():
        if getattr(cfg, key) not in allowed:
            raise ConfigError(key, f"must be one of {allowed}")


def _convert(key, text):
    kind = _FIELDS[key].type
    text = text.strip()
    try:
        if key == "hidden":
            return tuple(int(p) for p in text.replace(" ", "").split(",") if p)
        if key == "noise_dbm" and text.lower() in ("none", "off"):
            return None
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
    except ValueError:
        raise ConfigError(key, f"cannot parse {text!r} as {kind.__name__}") from None
    return text.strip("\"'")


def parse_config(text, base=None):
    """Parse ``key = value`` lines (``#`` comments) over ``base`` defaults."""
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string("[experiment]\n" + text)
    except configparser.Error as exc:
        raise ConfigError("<file>", str(exc).splitlines()[0]) from None
    values = {}
    for key, raw in parser["experiment"].items():
        if key not in _FIELDS:
            raise ConfigError(key, "unknown key")
        values[key] = _convert(key, raw)
    base = base or ExperimentConfig()
    return replace(base, **values)


def load_config(path):
    """Read and validate a config file; missing keys take their defaults."""
    with open(path) as fh:
        return parse_config(fh.read())


def _render(value):
    if value is None:
        return "none"
    if isinstance(value, tuple):
        return ",".join(map(str, value))
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dump_config(cfg):
    return "".join(f"{f.name} = {_render(getattr(cfg, f.name))}\n" for f in fields(cfg))
