"""Command-line experiment driver.

Verbs:
    run           execute a config file, write metrics.csv / summary.json / snapshots
    validate      check a config file and list every violated invariant
    bench-fmm     fast-matvec accuracy and timing sweep, CSV on stdout or file
    bench-filters filter timing/storage comparison for a config, CSV output
"""

from __future__ import annotations

import argparse
import sys

from hikf.config import load_config, validate_config
from hikf.experiment import SizeGuardError, bench_fmm, bench_filters, run_experiment


def _csv(rows: list[dict], stream) -> None:
    if not rows:
        return
    keys = list(rows[0])
    stream.write(",".join(keys) + "\n")
    for row in rows:
        stream.write(",".join("" if row[k] is None else str(row[k]) for k in keys) + "\n")


def _cmd_run(args) -> int:
    diags = validate_config(args.config)
    if diags:
        for d in diags:
            print(f"error: {d}", file=sys.stderr)
        return 2
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out_dir is not None:
        cfg.output_dir = args.out_dir
    try:
        summary = run_experiment(cfg, override_size_guard=args.override_size_guard)
    except SizeGuardError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # numerical failure mid-run
        print(f"error: run failed: {exc}", file=sys.stderr)
        return 1
    for label, entry in sorted(summary["filters"].items()):
        print(
            f"{label}: final error vs truth {entry['final_error_vs_truth']:.4e} "
            f"(precompute {entry['precompute_seconds']:.2f}s, online {entry['online_seconds']:.2f}s)"
        )
    print(f"report written to {cfg.output_dir}")
    return 0


def _cmd_validate(args) -> int:
    diags = validate_config(args.config)
    if not diags:
        print("config is valid")
        return 0
    for d in diags:
        print(f"error: {d}")
    return 2


def _cmd_bench_fmm(args) -> int:
    sizes = [int(s) for s in args.sizes.split(",")]
    n_chebs = [int(s) for s in args.n_cheb.split(",")]
    rows = bench_fmm(sizes=sizes, n_chebs=n_chebs, seed=args.seed or 0)
    if args.out:
        with open(args.out, "w") as fh:
            _csv(rows, fh)
        print(f"wrote {args.out}")
    else:
        _csv(rows, sys.stdout)
    return 0


def _cmd_bench_filters(args) -> int:
    diags = validate_config(args.config)
    if diags:
        for d in diags:
            print(f"error: {d}", file=sys.stderr)
        return 2
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    try:
        rows = bench_filters(cfg, override_size_guard=args.override_size_guard)
    except SizeGuardError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.out:
        with open(args.out, "w") as fh:
            _csv(rows, fh)
        print(f"wrote {args.out}")
    else:
        _csv(rows, sys.stdout)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hikf", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment config")
    p.add_argument("config")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out-dir", default=None)
    p.add_argument("--override-size-guard", action="store_true")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("validate", help="validate an experiment config")
    p.add_argument("config")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("bench-fmm", help="fast matvec accuracy/time sweep")
    p.add_argument("--sizes", default="10000,40000")
    p.add_argument("--n-cheb", default="5,6,7")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_bench_fmm)

    p = sub.add_parser("bench-filters", help="filter timing/storage comparison")
    p.add_argument("config")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--override-size-guard", action="store_true")
    p.set_defaults(func=_cmd_bench_filters)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
