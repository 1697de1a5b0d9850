"""Command-line entry point: ``fairfl [--config PATH] [overrides...]``.

Exit codes: 0 success, 1 configuration error, 2 numerical abort, 3 I/O error.
"""

import argparse
import logging
import sys

from .config import ConfigError, ExperimentConfig, load_config
from .estimator import NumericalAbort
from .experiment import manifest_path, run_and_write

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3


def build_parser():
    p = argparse.ArgumentParser(
        prog="fairfl",
        description="Simulate fluid-antenna-aided over-the-air federated learning.")
    p.add_argument("--config", metavar="PATH", help="key = value config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--rounds", type=int)
    p.add_argument("--ports", type=int, dest="n_ports")
    p.add_argument("--power-dbm", type=float, dest="power_dbm")
    p.add_argument("--tau", type=float)
    p.add_argument("--mode", choices=["robust", "accuracy", "hybrid", "uniform"])
    p.add_argument("--dataset", choices=["synthetic", "mnist"])
    p.add_argument("--mnist-dir", dest="mnist_dir", metavar="PATH")
    p.add_argument("--out", metavar="PATH", help="metrics CSV (manifest goes next to it)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


_OVERRIDES = ("seed", "rounds", "n_ports", "power_dbm", "tau", "mode", "dataset",
              "mnist_dir", "out")


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config) if args.config else ExperimentConfig()
        cfg = cfg.with_overrides(**{k: getattr(args, k) for k in _OVERRIDES})
    except ConfigError as exc:
        print(f"fairfl: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"fairfl: {exc}", file=sys.stderr)
        return EXIT_IO

    try:
        metrics = run_and_write(cfg)
    except NumericalAbort as exc:
        print(f"fairfl: numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"fairfl: {exc}", file=sys.stderr)
        return EXIT_IO

    if metrics:
        last = metrics[-1]
        print(f"round {last.t}: test accuracy {last.test_accuracy:.4f}, "
              f"train loss {last.train_loss:.4f}")
    print(f"wrote {cfg.out} and {manifest_path(cfg.out)}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
