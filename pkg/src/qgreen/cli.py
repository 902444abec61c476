"""Command-line interface.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
Environment overrides: QGREEN_SEED (seed), QGREEN_OUT (output directory).
"""
from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .config import ConfigError, RunConfig
from .runs import (
    NumericalError,
    run_dsf,
    run_fd,
    run_ground_state,
    run_lcp,
    run_oracle,
    run_scp,
    run_variance_study,
)

_COMMANDS = {
    "ground-state": run_ground_state,
    "lcp": run_lcp,
    "scp": run_scp,
    "fd": run_fd,
    "dsf": run_dsf,
    "variance-study": run_variance_study,
    "oracle": run_oracle,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qgreen",
        description="Retarded Green's functions of lattice models from "
                    "differentiated quantum circuits.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in _COMMANDS.items():
        p = sub.add_parser(name, help=fn.__doc__)
        p.add_argument("--config", required=True, help="YAML run configuration")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--out", default=None, help="override the output directory")
        p.add_argument("--threads", type=int, default=None,
                       help="cap worker threads")
        p.add_argument("--no-plots", action="store_true",
                       help="skip figure rendering")
    return parser


def _apply_thread_cap(threads: int | None) -> None:
    if threads is None:
        return
    if threads < 1:
        raise ConfigError("--threads: must be at least 1")
    try:
        import numba

        numba.set_num_threads(threads)
    except (ImportError, ValueError):
        pass


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = RunConfig.load(args.config)
        seed = args.seed
        if seed is None and "QGREEN_SEED" in os.environ:
            seed = int(os.environ["QGREEN_SEED"])
        if seed is not None:
            raw = config.to_dict()
            raw["seed"] = int(seed)
            config = RunConfig.from_dict(raw)
        out = args.out
        if out is None and "QGREEN_OUT" in os.environ:
            out = os.environ["QGREEN_OUT"]
        _apply_thread_cap(args.threads)
        result = _COMMANDS[args.command](config, out_dir=out,
                                         plots=not args.no_plots)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    print(f"wrote {result}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
