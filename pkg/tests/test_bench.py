import numpy as np
import pytest

import convbench.bench as bench_mod
from convbench import (
    BenchResult,
    CacheScrubber,
    ConvShapeSpec,
    CorrectnessGateError,
    NhwcTensor,
    Shape4,
    emit_report,
    load_report,
    nearest_rank,
    run_benchmark,
    tensor_fill_random,
)
from convbench.bench import CSV_HEADER
from conftest import make_params


class FakeTimer:
    """Monotonic fake clock advancing a fixed step per call."""

    def __init__(self, step_ns=1_000_000):
        self.step = step_ns
        self.now = 0

    def __call__(self):
        self.now += self.step
        return self.now


def small_suite():
    return [
        ConvShapeSpec(
            name="tiny_3x3",
            input_shape=Shape4(1, 6, 6, 4),
            params=make_params(r=3, s=3, pt=1, pl=1, c=4, k=8),
        ),
        ConvShapeSpec(
            name="tiny_1x1",
            input_shape=Shape4(1, 5, 5, 4),
            params=make_params(c=4, k=8),
        ),
    ]


class TestQuantiles:
    def test_nearest_rank_indices_for_25(self):
        samples = sorted(float(v) for v in range(25))
        assert nearest_rank(samples, 0.2) == 5.0
        assert nearest_rank(samples, 0.5) == 12.0
        assert nearest_rank(samples, 0.8) == 20.0

    def test_ordering_invariant(self):
        rng = np.random.default_rng(3)
        samples = sorted(rng.uniform(0, 1, 11).tolist())
        assert (
            nearest_rank(samples, 0.2)
            <= nearest_rank(samples, 0.5)
            <= nearest_rank(samples, 0.8)
        )


class TestRunBenchmark:
    def test_zero_variance_timer_degenerate_quantiles(self):
        result = run_benchmark(
            small_suite(), reps=25, warmup=0, timer=FakeTimer(), scrub="off"
        )
        assert result.reports
        for r in result.reports:
            assert r.median_gflops == r.q20_gflops == r.q80_gflops

    def test_quantile_ordering_every_row(self):
        result = run_benchmark(small_suite(), reps=7, warmup=0)
        for r in result.reports:
            assert r.q20_gflops <= r.median_gflops <= r.q80_gflops
            assert len(r.runs_s) == 7
            assert r.time_cov >= 0.0

    def test_gemm_only_skipped_for_pointwise(self):
        result = run_benchmark(small_suite(), reps=2, warmup=0, timer=FakeTimer())
        skipped = {(s.shape, s.variant) for s in result.skipped}
        assert ("tiny_1x1", "gemm_only") in skipped
        assert not any(
            r.shape == "tiny_1x1" and r.variant == "gemm_only" for r in result.reports
        )
        reason = next(s.reason for s in result.skipped)
        assert "im2col" in reason

    def test_correctness_gate_trips_on_broken_variant(self, monkeypatch):
        real = bench_mod.gemm_conv

        def broken(inp, pf, params, tile, patch=None):
            out = real(inp, pf, params, tile, patch=patch)
            out.data[0] += 1.0
            return out

        monkeypatch.setattr(bench_mod, "gemm_conv", broken)
        with pytest.raises(CorrectnessGateError, match="gemm_based"):
            run_benchmark(small_suite(), variants=["gemm_based"], reps=2, warmup=0)

    def test_inner_iterations_recorded(self):
        # 0.25 ms fake step with a 1 ms floor: 4 inner iterations
        result = run_benchmark(
            small_suite()[:1], variants=["indirect"], reps=3, warmup=0,
            timer=FakeTimer(step_ns=250_000), min_sample_s=1e-3,
        )
        assert result.reports[0].inner_iterations == 4

    def test_unknown_variant_rejected(self):
        with pytest.raises(ValueError):
            run_benchmark(small_suite(), variants=["winograd"], reps=1)

    def test_no_variants_rejected(self):
        with pytest.raises(ValueError):
            run_benchmark(small_suite(), variants=[], reps=1)

    def test_lambda_reaches_reports(self):
        result = run_benchmark(
            small_suite()[:1], variants=["indirect"], reps=1, warmup=0,
            timer=FakeTimer(), lam=4.0,
        )
        assert result.reports[0].cost.speedup_predicted == 1.0 + 2.0 * 4.0 / 8


class TestScrubber:
    def test_off_is_noop(self):
        data = tensor_fill_random(Shape4(1, 4, 4, 2), 0).data
        before = data.tobytes()
        CacheScrubber("off").scrub(data)
        assert data.tobytes() == before

    def test_approx_does_not_touch_operands(self):
        data = tensor_fill_random(Shape4(1, 4, 4, 2), 0).data
        before = data.tobytes()
        scrubber = CacheScrubber("approx", llc_mib=1, factor=1)
        scrubber.scrub(data)
        assert data.tobytes() == before

    def test_approx_outputs_match_off(self):
        # scrubbing must be invisible in the numbers
        kwargs = dict(reps=3, warmup=0, timer=FakeTimer(), seed=5, llc_mib=1)
        off = run_benchmark(small_suite(), scrub="off", **kwargs)
        approx = run_benchmark(small_suite(), scrub="approx", **kwargs)
        assert [r.scrub_mode for r in approx.reports] == ["approx"] * len(approx.reports)
        # identical fake clock: identical timing rows
        for a, b in zip(off.reports, approx.reports):
            assert a.median_gflops == b.median_gflops

    def test_mode_validated(self):
        with pytest.raises(ValueError):
            CacheScrubber("sometimes")


class TestEmitAndLoad:
    def test_csv_header_pinned(self, tmp_path):
        result = run_benchmark(small_suite(), reps=2, warmup=0, timer=FakeTimer())
        path = tmp_path / "report.csv"
        emit_report(result, "csv", path)
        lines = path.read_text().splitlines()
        assert lines[0] == (
            "shape,variant,median_gflops,q20_gflops,q80_gflops,"
            "macs,flops,predicted_speedup,patch_bytes,indirection_bytes"
        )
        assert CSV_HEADER == lines[0]
        # one row per executed (shape, variant)
        assert len(lines) == 1 + len(result.reports)

    def test_csv_deterministic_for_fixed_timer(self, tmp_path):
        a = run_benchmark(small_suite(), reps=3, warmup=0, timer=FakeTimer(), seed=1)
        b = run_benchmark(small_suite(), reps=3, warmup=0, timer=FakeTimer(), seed=1)
        pa, pb = tmp_path / "a.csv", tmp_path / "b.csv"
        emit_report(a, "csv", pa)
        emit_report(b, "csv", pb)
        assert pa.read_bytes() == pb.read_bytes()

    def test_json_round_trip_lossless(self, tmp_path):
        result = run_benchmark(small_suite(), reps=4, warmup=0, timer=FakeTimer())
        path = tmp_path / "report.json"
        emit_report(result, "json", path)
        loaded = load_report(path)
        assert loaded.reports == result.reports
        assert loaded.skipped == result.skipped
        assert loaded.meta == result.meta

    def test_empty_reports_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            emit_report(BenchResult([], [], {}), "csv", tmp_path / "x.csv")

    def test_unknown_format_rejected(self, tmp_path):
        result = run_benchmark(small_suite()[:1], variants=["indirect"], reps=1,
                               warmup=0, timer=FakeTimer())
        with pytest.raises(ValueError):
            emit_report(result, "xml", tmp_path / "x.xml")
