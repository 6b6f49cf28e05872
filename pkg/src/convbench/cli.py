"""Command-line benchmark driver.

    convbench --suite resnet18 --variants indirect,gemm,gemm-only \
              --reps 25 --warmup 3 --scrub off --lambda 4.0 \
              --format csv --out results.csv

Exit codes: 0 success, 1 usage or suite error, 2 correctness-gate failure,
3 output I/O error.
"""

from __future__ import annotations

import argparse
import os
import sys

from .bench import emit_report, run_benchmark
from .errors import CorrectnessGateError, SuiteParseError
from .gemm import TileConfig
from .suites import load_shape_suite

# CLI spelling -> report variant name
VARIANT_FLAGS = {
    "indirect": "indirect",
    "gemm": "gemm_based",
    "gemm-only": "gemm_only",
}

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_GATE = 2
EXIT_IO = 3


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad flags; the harness contract wants 1.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(
        prog="convbench",
        description="Benchmark indirect, GEMM-based, and GEMM-only convolution variants.",
    )
    p.add_argument(
        "--suite", required=True,
        help="builtin suite id (resnet18, squeezenet10) or path to a suite JSON file",
    )
    p.add_argument(
        "--variants", default="indirect,gemm,gemm-only",
        help="comma-separated subset of: indirect, gemm, gemm-only",
    )
    p.add_argument("--reps", type=int, default=25, help="timed repetitions per variant")
    p.add_argument("--warmup", type=int, default=3, help="untimed warmup iterations")
    p.add_argument(
        "--scrub", choices=("off", "approx"), default="off",
        help="cache scrubbing between repetitions",
    )
    p.add_argument(
        "--lambda", dest="lam", type=float, default=0.0,
        help="arithmetic intensity (FLOPs per load) for the predicted-speedup column",
    )
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", default="-", help="output path, or - for stdout")
    p.add_argument("--seed", type=int, default=0, help="test-data seed")
    p.add_argument("--mr", type=int, default=4, help="micro-kernel rows (output pixels)")
    p.add_argument("--nr", type=int, default=8, help="micro-kernel columns (output channels)")
    p.add_argument(
        "--pin", type=int, default=None, metavar="CORE",
        help="pin the process to one core when the platform allows it",
    )
    p.add_argument(
        "--llc-mb", type=int, default=16,
        help="assumed last-level cache size in MiB; the approx scrub buffer is 8x this",
    )
    p.add_argument(
        "--min-sample-ms", type=float, default=1.0,
        help="auto-raise inner iterations until one timed sample is at least this long",
    )
    return p


def _pin_core(core: int) -> None:
    try:
        os.sched_setaffinity(0, {core})
    except (AttributeError, OSError, ValueError) as exc:
        print(f"warning: could not pin to core {core}: {exc}", file=sys.stderr)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    tokens = [t.strip() for t in args.variants.split(",") if t.strip()]
    if not tokens:
        parser.error("--variants must name at least one variant")
    try:
        variants = [VARIANT_FLAGS[t] for t in tokens]
    except KeyError as exc:
        parser.error(f"unknown variant {exc.args[0]!r} (choose from {', '.join(VARIANT_FLAGS)})")
    if args.reps < 1:
        parser.error("--reps must be >= 1")
    if args.warmup < 0:
        parser.error("--warmup must be >= 0")

    try:
        suite = load_shape_suite(args.suite)
    except SuiteParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    if args.pin is not None:
        _pin_core(args.pin)

    try:
        result = run_benchmark(
            suite,
            variants=variants,
            reps=args.reps,
            warmup=args.warmup,
            lam=args.lam,
            seed=args.seed,
            scrub=args.scrub,
            tile=TileConfig(mr=args.mr, nr=args.nr),
            min_sample_s=args.min_sample_ms / 1e3,
            llc_mib=args.llc_mb,
        )
    except CorrectnessGateError as exc:
        print(f"correctness gate failed: {exc}", file=sys.stderr)
        return EXIT_GATE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    for skip in result.skipped:
        print(
            f"note: skipped {skip.variant} for {skip.shape}: {skip.reason}",
            file=sys.stderr,
        )
    try:
        emit_report(result, args.format, args.out)
    except OSError as exc:
        print(f"cannot write report: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def entrypoint() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    raise SystemExit(main())
