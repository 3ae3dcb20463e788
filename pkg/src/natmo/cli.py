"""Command-line entry point.

Subcommands::

    natmo run --config cfg.json --out outdir    execute an experiment matrix
    natmo verify [--csv path]                   run the oracle suite
    natmo summarize --in outdir                 build summary CSVs from traces
    natmo list-methods                          print every optimizer tag
    natmo bench-kernels [--repeat N]            time compiled vs NumPy kernels
"""

from __future__ import annotations

import argparse
import sys

__all__ = ["main"]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="natmo")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute an experiment matrix")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", required=True)

    p_verify = sub.add_parser("verify", help="run the oracle suite")
    p_verify.add_argument("--csv", default=None,
                          help="also write measured values to this CSV")

    p_sum = sub.add_parser("summarize", help="summarize traces in a directory")
    p_sum.add_argument("--in", dest="in_dir", required=True)

    sub.add_parser("list-methods", help="print the optimizer tags")

    p_bench = sub.add_parser("bench-kernels", help="compare kernel backends")
    p_bench.add_argument("--repeat", type=int, default=20)
    return parser


def _cmd_run(args) -> int:
    from . import harness

    try:
        cfg = harness.load_config(args.config)
    except (OSError, ValueError) as exc:
        print(f"natmo run: bad config: {exc}", file=sys.stderr)
        return 2
    try:
        traces = harness.run_matrix(cfg, args.out)
    except OSError as exc:
        print(f"natmo run: cannot write output: {exc}", file=sys.stderr)
        return 2
    for tr in traces:
        print(f"{tr.run_id}: {tr.status} after {tr.final.iter} iters "
              f"(stop_metric={tr.final.stop_metric:.3e})")
    return 0


def _cmd_verify(args) -> int:
    from . import oracles

    reports = oracles.run_all()
    for rep in reports:
        print(rep.line())
    if args.csv:
        oracles.write_csv(reports, args.csv)
        print(f"wrote {args.csv}")
    return 0 if all(r.passed for r in reports) else 1


def _cmd_summarize(args) -> int:
    from . import harness

    try:
        traces = harness.load_traces(args.in_dir)
    except OSError as exc:
        print(f"natmo summarize: {exc}", file=sys.stderr)
        return 2
    if not traces:
        print(f"natmo summarize: no trace files in {args.in_dir}", file=sys.stderr)
        return 2
    paths = harness.write_summary(harness.summarize(traces), args.in_dir)
    for path in paths:
        print(f"wrote {path}")
    return 0


def _cmd_list_methods() -> int:
    from . import optimizers

    for tag in optimizers.all_methods():
        print(tag)
    return 0


def _cmd_bench(args) -> int:
    from .kernels import bench

    bench.run_benchmark(repeat=args.repeat)
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "verify":
        return _cmd_verify(args)
    if args.command == "summarize":
        return _cmd_summarize(args)
    if args.command == "list-methods":
        return _cmd_list_methods()
    if args.command == "bench-kernels":
        return _cmd_bench(args)
    return 2


if __name__ == "__main__":
    sys.exit(main())
