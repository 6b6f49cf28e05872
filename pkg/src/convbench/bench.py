"""Micro-benchmark harness for the three convolution variants.

Protocol per (shape, variant): verify the variant's output against the
direct-convolution reference, run warmup iterations, then time `reps`
repetitions and report GFLOPS as the median with 20%/80% quantiles
(nearest rank on the sorted samples: index int(q * n), so 5 and 20 for 25
runs).  The indirection buffer and the patch-matrix allocation are
prepared once outside the timed region; the GEMM-based variant refills the
patch buffer inside it, which is exactly the im2col cost being measured.
Within one shape the repetitions of all variants are interleaved
round-robin, keeping cross-variant comparisons time-local.

Shapes whose single invocation is too fast for the clock are timed in
blocks of `inner_iterations` calls (recorded in the report).  A zero-cost
approximation of inference cache state is available: "approx" scrub mode
streams a buffer several times the last-level cache between repetitions
and then touches the input tensor so it is the thing left in cache.

Timing is wall-clock and single-threaded; GFLOPS uses 2 FLOPs per MAC.
"""

from __future__ import annotations

import json
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from .analysis import CostReport, cost_report
from .errors import CorrectnessGateError
from .gemm import TileConfig, pack_filter
from .im2col import build_patch_matrix, gemm_conv, gemm_only
from .indirect import indirect_conv, init_indirection_buffer, make_zero_row
from .reference import direct_conv
from .suites import ConvShapeSpec
from .tensors import conv_output_shape, filter_fill_random, tensor_fill_random

VARIANTS = ("indirect", "gemm_based", "gemm_only")
SKIP_POINTWISE_GEMM_ONLY = "pointwise-unit-stride convolutions call the GEMM primitive directly; there is no separate im2col to exclude"

REPORT_SCHEMA_VERSION = 1
CSV_HEADER = (
    "shape,variant,median_gflops,q20_gflops,q80_gflops,"
    "macs,flops,predicted_speedup,patch_bytes,indirection_bytes"
)


@dataclass(frozen=True)
class BenchReport:
    """Timing record for one (shape, variant) pair."""

    shape: str
    variant: str
    runs_s: list[float]
    inner_iterations: int
    median_gflops: float
    q20_gflops: float
    q80_gflops: float
    median_time_s: float
    time_cov: float
    scrub_mode: str
    cost: CostReport


@dataclass(frozen=True)
class SkippedVariant:
    shape: str
    variant: str
    reason: str


@dataclass
class BenchResult:
    reports: list[BenchReport]
    skipped: list[SkippedVariant]
    meta: dict = field(default_factory=dict)


def nearest_rank(sorted_values: list[float], q: float) -> float:
    """Quantile by nearest rank: element int(q * n) of the sorted samples."""
    n = len(sorted_values)
    if n == 0:
        raise ValueError("no samples")
    return sorted_values[min(int(q * n), n - 1)]


class CacheScrubber:
    """Approximate the inference cache state between repetitions.

    Approximate mode streams a buffer several times the last-level cache to
    evict everything (weights, bias, outputs, indirection buffer all go
    cold), then re-reads the input tensor and any buffers that persist
    across invocations (the im2col scratch), so those are what remain
    cached.  Off mode does nothing.
    """

    def __init__(self, mode: str = "off", llc_mib: int = 16, factor: int = 8):
        if mode not in ("off", "approx"):
            raise ValueError(f"unknown scrub mode {mode!r}")
        self.mode = mode
        self._buf = None
        if mode == "approx":
            elems = llc_mib * factor * (1 << 20) // 4
            self._buf = np.ones(elems, dtype=np.float32)

    def scrub(self, input_data: np.ndarray, keep: tuple = ()) -> None:
        if self.mode == "off":
            return
        self._buf += 1.0
        float(input_data.sum())
        for arr in keep:
            float(arr.sum())


def scrub_caches(mode: str, llc_mib: int = 16, factor: int = 8) -> CacheScrubber:
    """Factory for the scrubber; mode 'off' is a no-op object."""
    return CacheScrubber(mode, llc_mib, factor)


def _bitwise_equal(a: np.ndarray, b: np.ndarray) -> bool:
    return a.shape == b.shape and a.tobytes() == b.tobytes()


def _gate(shape_name: str, variant: str, got: np.ndarray, want: np.ndarray) -> None:
    if _bitwise_equal(got, want):
        return
    if got.shape != want.shape:
        detail = f"output shape {got.shape} != reference {want.shape}"
    else:
        diff = np.abs(got.astype(np.float64) - want.astype(np.float64))
        detail = (
            f"{int(np.count_nonzero(diff))} of {got.size} elements differ, "
            f"max abs diff {diff.max():.6g}"
        )
    raise CorrectnessGateError(
        f"variant '{variant}' disagrees with direct convolution on shape "
        f"'{shape_name}': {detail}"
    )


def _make_runner(
    variant: str, spec: ConvShapeSpec, inp, pf, tile
) -> tuple[Callable[[], np.ndarray], str | None, tuple]:
    """Build the timed closure and do its one-time setup.

    Returns (runner, reference_kind, warm_buffers): reference_kind
    "matrix" means the runner yields a bare matrix instead of an NHWC
    tensor; warm_buffers are the arrays that persist across invocations
    and stay cached under the scrub protocol.
    """
    params = spec.params
    if variant == "indirect":
        out_shape = conv_output_shape(params, inp.shape)
        zero = make_zero_row(params.in_channels)
        ib = init_indirection_buffer(inp, zero, params, out_shape, tile)
        # the indirection buffer itself goes cold between runs
        return (lambda: indirect_conv(inp, pf, ib, params, tile).data), None, ()
    if variant == "gemm_based":
        patch = None
        warm = ()
        if not params.is_pointwise_unit_stride():
            patch = build_patch_matrix(inp, params)
            warm = (patch.matrix.base,)
        return (
            lambda: gemm_conv(inp, pf, params, tile, patch=patch).data
        ), None, warm
    if variant == "gemm_only":
        prebuilt = build_patch_matrix(inp, params)
        warm = () if prebuilt.is_view else (prebuilt.matrix.base,)
        return (lambda: gemm_only(prebuilt, pf, tile).array), "matrix", warm
    raise ValueError(f"unknown variant {variant!r}")


def run_benchmark(
    suite: Iterable[ConvShapeSpec],
    variants: Iterable[str] = VARIANTS,
    reps: int = 25,
    warmup: int = 3,
    lam: float = 0.0,
    seed: int = 0,
    scrub: str = "off",
    tile: TileConfig = TileConfig(),
    timer: Callable[[], int] | None = None,
    min_sample_s: float = 1e-3,
    llc_mib: int = 16,
    scrub_factor: int = 8,
    ref_size: int = 8,
) -> BenchResult:
    """Benchmark every requested variant of every suite shape.

    Raises CorrectnessGateError before any timing if a variant's output
    does not match direct convolution bit for bit, and re-checks the final
    timed iteration's output afterwards.
    """
    suite = list(suite)
    variants = list(variants)
    unknown = [v for v in variants if v not in VARIANTS]
    if unknown:
        raise ValueError(f"unknown variants: {unknown}")
    if not variants:
        raise ValueError("no variants requested")
    if reps < 1:
        raise ValueError("reps must be >= 1")
    clock = time.perf_counter_ns if timer is None else timer
    scrubber = CacheScrubber(scrub, llc_mib, scrub_factor)

    reports: list[BenchReport] = []
    skipped: list[SkippedVariant] = []
    for idx, spec in enumerate(suite):
        params = spec.params
        shape_seed = seed + 7919 * idx
        inp = tensor_fill_random(spec.input_shape, shape_seed)
        filt = filter_fill_random(params, shape_seed + 1)
        bias_rng = np.random.default_rng(shape_seed + 2)
        bias = bias_rng.uniform(-1.0, 1.0, params.out_channels).astype(np.float32)
        pf = pack_filter(filt, bias, params, tile)
        cost = cost_report(
            params, spec.input_shape, tile, ref_size=ref_size, lam=lam
        )

        reference = direct_conv(inp, filt, bias, params)
        m = reference.shape.n * reference.shape.h * reference.shape.w
        ref_matrix = reference.data.reshape(m, params.out_channels)

        active = []  # (variant, runner, reference output, warm set, inner)
        for variant in variants:
            if variant == "gemm_only" and params.is_pointwise_unit_stride():
                skipped.append(
                    SkippedVariant(spec.name, variant, SKIP_POINTWISE_GEMM_ONLY)
                )
                continue
            runner, ref_kind, warm = _make_runner(variant, spec, inp, pf, tile)
            want = ref_matrix if ref_kind == "matrix" else reference.data
            _gate(spec.name, variant, runner(), want)

            for _ in range(warmup):
                runner()

            t0 = clock()
            runner()
            estimate_ns = max(clock() - t0, 1)
            inner = max(1, -(-int(min_sample_s * 1e9) // estimate_ns))
            active.append((variant, runner, want, warm, inner))

        # Repetitions are interleaved round-robin across the variants of a
        # shape so that slow clock drift (thermal, scheduler) lands on every
        # variant alike and cancels out of cross-variant comparisons.
        samples: dict[str, list[float]] = {v: [] for v, _, _, _, _ in active}
        final_out: dict[str, np.ndarray] = {}
        for _ in range(reps):
            for variant, runner, _, warm, inner in active:
                scrubber.scrub(inp.data, keep=warm)
                t0 = clock()
                for _ in range(inner):
                    out = runner()
                t1 = clock()
                samples[variant].append((t1 - t0) / 1e9 / inner)
                final_out[variant] = out

        for variant, _, want, _, inner in active:
            _gate(spec.name, variant, final_out[variant], want)  # recheck
            runs_s = samples[variant]
            gflops = sorted(cost.flops / t / 1e9 for t in runs_s)
            times = sorted(runs_s)
            mean_t = sum(runs_s) / len(runs_s)
            cov = float(np.std(runs_s) / mean_t) if mean_t > 0 else 0.0
            reports.append(
                BenchReport(
                    shape=spec.name,
                    variant=variant,
                    runs_s=runs_s,
                    inner_iterations=inner,
                    median_gflops=nearest_rank(gflops, 0.5),
                    q20_gflops=nearest_rank(gflops, 0.2),
                    q80_gflops=nearest_rank(gflops, 0.8),
                    median_time_s=nearest_rank(times, 0.5),
                    time_cov=cov,
                    scrub_mode=scrub,
                    cost=cost,
                )
            )

    meta = {
        "reps": reps,
        "warmup": warmup,
        "scrub": scrub,
        "lambda": lam,
        "seed": seed,
        "mr": tile.mr,
        "nr": tile.nr,
        "min_sample_s": min_sample_s,
        "llc_mib": llc_mib,
        "ref_size": ref_size,
        "gflops_convention": "2 FLOPs per MAC; 'macs' is the single-count figure",
    }
    return BenchResult(reports=reports, skipped=skipped, meta=meta)


def _csv_lines(result: BenchResult) -> list[str]:
    lines = [CSV_HEADER]
    for r in result.reports:
        lines.append(
            f"{r.shape},{r.variant},{r.median_gflops!r},{r.q20_gflops!r},"
            f"{r.q80_gflops!r},{r.cost.macs},{r.cost.flops},"
            f"{r.cost.speedup_predicted!r},{r.cost.patch_matrix_bytes},"
            f"{r.cost.indirection_bytes}"
        )
    return lines


def emit_report(result: BenchResult, fmt: str, path: str | Path) -> None:
    """Write the benchmark result as CSV (pinned column order) or JSON.

    JSON carries the full records including per-run times and skip reasons
    and round-trips losslessly through load_report; CSV holds the summary
    row per executed (shape, variant).  Path "-" writes to stdout.
    """
    if not result.reports:
        raise ValueError("no reports to emit")
    if fmt == "csv":
        text = "\n".join(_csv_lines(result)) + "\n"
    elif fmt == "json":
        doc = {
            "version": REPORT_SCHEMA_VERSION,
            "meta": result.meta,
            "reports": [asdict(r) for r in result.reports],
            "skipped": [asdict(s) for s in result.skipped],
        }
        text = json.dumps(doc, indent=2) + "\n"
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    if str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def load_report(path: str | Path) -> BenchResult:
    """Read back a JSON report written by emit_report."""
    doc = json.loads(Path(path).read_text())
    if doc.get("version") != REPORT_SCHEMA_VERSION:
        raise ValueError(f"unsupported report version {doc.get('version')!r}")
    reports = []
    for rec in doc["reports"]:
        cost = CostReport(**rec.pop("cost"))
        reports.append(BenchReport(cost=cost, **rec))
    skipped = [SkippedVariant(**rec) for rec in doc.get("skipped", [])]
    return BenchResult(reports=reports, skipped=skipped, meta=doc.get("meta", {}))
