"""Command-line driver: ``plateinv run <config>`` and ``plateinv verify <config>``.

Exit codes: 0 success, 2 invalid configuration, 3 numerical stage failure,
4 oracle-suite failure.
"""

from __future__ import annotations

import argparse
import os
import sys

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_ORACLE = 0, 2, 3, 4

_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="plateinv", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=("run", "verify"))
    p.add_argument("config")
    p.add_argument("--out", help="output directory (overrides the config)")
    p.add_argument("--seed", type=int, default=0,
                   help="seed for randomized checks; deterministic stages ignore it")
    p.add_argument("--threads", type=int, help="BLAS/OpenMP thread count")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.threads is not None:
        if args.threads < 1:
            print("error: --threads must be positive", file=sys.stderr)
            return EXIT_VALIDATION
        # must happen before numpy is imported
        for var in _THREAD_VARS:
            os.environ[var] = str(args.threads)

    from .config import ConfigError, load_config
    from .errors import PlateError

    try:
        run, digest = load_config(args.config)
    except ConfigError as exc:
        for msg in exc.messages:
            print(f"error: {msg}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION

    from . import pipeline

    try:
        prob = pipeline.build_problem(run)
    except (PlateError, ValueError) as exc:
        print(f"error: {args.config}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION

    if args.command == "verify":
        try:
            rows = pipeline.oracle_rows(prob)
        except PlateError as exc:
            print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
            return EXIT_ORACLE
        if rows:
            print(pipeline.format_rows(rows))
        else:
            print("no checks selected by the pipeline")
        return EXIT_OK if all(r.passed for r in rows) else EXIT_ORACLE

    out = args.out if args.out is not None else run.output
    ctx = pipeline.Context(prob, digest, out)
    try:
        pipeline.run_pipeline(ctx)
    except PlateError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
