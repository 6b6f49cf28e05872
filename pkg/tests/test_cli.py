import json
import subprocess
import sys

import pytest

from convbench import load_report
from convbench.bench import CSV_HEADER


def run_cli(*args):
    return subprocess.run(
        [sys.executable, "-m", "convbench.cli", *args],
        capture_output=True, text=True, timeout=300,
    )


@pytest.fixture
def suite_file(tmp_path):
    doc = {
        "version": 1,
        "model": "custom",
        "shapes": [
            {
                "name": "cli_3x3", "input": [1, 6, 6, 4], "kernel": [3, 3],
                "stride": [1, 1], "dilation": [1, 1], "padding": [1, 1, 1, 1],
                "out_channels": 8,
            },
            {
                "name": "cli_1x1", "input": [1, 5, 5, 4], "kernel": [1, 1],
                "stride": [1, 1], "dilation": [1, 1], "padding": [0, 0, 0, 0],
                "out_channels": 8,
            },
        ],
    }
    path = tmp_path / "suite.json"
    path.write_text(json.dumps(doc))
    return path


def test_csv_run(suite_file, tmp_path):
    out = tmp_path / "report.csv"
    proc = run_cli(
        "--suite", str(suite_file), "--reps", "3", "--warmup", "1",
        "--min-sample-ms", "0", "--format", "csv", "--out", str(out),
    )
    assert proc.returncode == 0, proc.stderr
    lines = out.read_text().splitlines()
    assert lines[0] == CSV_HEADER
    # 2 shapes x 3 variants, minus the skipped pointwise gemm-only row
    assert len(lines) == 1 + 5
    assert "skipped gemm_only for cli_1x1" in proc.stderr


def test_stdout_default(suite_file):
    proc = run_cli(
        "--suite", str(suite_file), "--variants", "indirect", "--reps", "2",
        "--warmup", "0", "--min-sample-ms", "0",
    )
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout.splitlines()[0] == CSV_HEADER


def test_json_round_trip(suite_file, tmp_path):
    out = tmp_path / "report.json"
    proc = run_cli(
        "--suite", str(suite_file), "--reps", "2", "--warmup", "0",
        "--min-sample-ms", "0", "--format", "json", "--out", str(out),
        "--lambda", "4.0",
    )
    assert proc.returncode == 0, proc.stderr
    result = load_report(out)
    assert result.meta["lambda"] == 4.0
    assert any(r.cost.speedup_predicted == 2.0 for r in result.reports)  # K=8
    assert [s.variant for s in result.skipped] == ["gemm_only"]


def test_empty_variants_usage_error(suite_file):
    proc = run_cli("--suite", str(suite_file), "--variants", "")
    assert proc.returncode == 1


def test_unknown_variant_usage_error(suite_file):
    proc = run_cli("--suite", str(suite_file), "--variants", "winograd")
    assert proc.returncode == 1
    assert "winograd" in proc.stderr


def test_missing_suite_flag_usage_error():
    proc = run_cli("--reps", "1")
    assert proc.returncode == 1


def test_bad_suite_file_usage_error(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    proc = run_cli("--suite", str(path))
    assert proc.returncode == 1
    assert "error" in proc.stderr.lower()


def test_unwritable_output_io_error(suite_file, tmp_path):
    proc = run_cli(
        "--suite", str(suite_file), "--variants", "indirect", "--reps", "1",
        "--warmup", "0", "--min-sample-ms", "0",
        "--out", str(tmp_path / "missing-dir" / "report.csv"),
    )
    assert proc.returncode == 3
    assert "cannot write" in proc.stderr


def test_custom_tile_flags(suite_file, tmp_path):
    out = tmp_path / "r.csv"
    proc = run_cli(
        "--suite", str(suite_file), "--variants", "indirect,gemm",
        "--reps", "2", "--warmup", "0", "--min-sample-ms", "0",
        "--mr", "3", "--nr", "5", "--out", str(out),
    )
    assert proc.returncode == 0, proc.stderr
    assert len(out.read_text().splitlines()) == 1 + 4
