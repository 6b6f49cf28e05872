"""Benchmark shape suites: builtin model suites and the file loader.

A suite file is JSON: a versioned header plus a list of shape records,
each naming one convolution (input extent, kernel, stride, dilation,
explicit per-side padding, output channels).  The two builtin suites ship
as package data transcribed from the public ResNet-18 and SqueezeNet 1.0
model definitions, with convolutions of identical parameters listed once.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import SuiteParseError
from .tensors import ConvParams, Shape4, conv_output_shape

SUITE_SCHEMA_VERSION = 1
BUILTIN_SUITES = ("resnet18", "squeezenet10")

# Rows of the operator-type census, as (kernel, stride) classes.
CENSUS_ROWS = ("7x7/2", "3x3/2", "3x3/1", "1x1/2", "1x1/1")


@dataclass(frozen=True)
class ConvShapeSpec:
    """One benchmarkable convolution: geometry plus provenance tag."""

    name: str
    input_shape: Shape4
    params: ConvParams
    model: str = "custom"

    def out_shape(self) -> Shape4:
        return conv_output_shape(self.params, self.input_shape)

    def census_row(self) -> str | None:
        p = self.params
        if p.kernel_h != p.kernel_w or p.stride_h != p.stride_w:
            return None
        row = f"{p.kernel_h}x{p.kernel_w}/{p.stride_h}"
        return row if row in CENSUS_ROWS else None


def _parse_shape(record: dict, index: int, origin: str) -> ConvShapeSpec:
    def fail(msg: str):
        raise SuiteParseError(f"{origin}, shape #{index}: {msg}")

    if not isinstance(record, dict):
        fail("record must be an object")
    try:
        name = record["name"]
        n, h, w, c = record["input"]
        kh, kw = record["kernel"]
        sy, sx = record["stride"]
        dy, dx = record.get("dilation", [1, 1])
        pt, pl, pb, pr = record.get("padding", [0, 0, 0, 0])
        k = record["out_channels"]
    except (KeyError, TypeError, ValueError) as exc:
        fail(f"missing or malformed field ({exc})")
    try:
        shape = Shape4(n, h, w, c)
        params = ConvParams(
            kernel_h=kh, kernel_w=kw, stride_h=sy, stride_w=sx,
            dilation_h=dy, dilation_w=dx,
            pad_top=pt, pad_left=pl, pad_bottom=pb, pad_right=pr,
            in_channels=c, out_channels=k,
        )
        conv_output_shape(params, shape)  # validates geometry
    except ValueError as exc:
        fail(str(exc))
    return ConvShapeSpec(
        name=name, input_shape=shape, params=params,
        model=record.get("model", "custom"),
    )


def _parse_suite(doc: dict, origin: str) -> list[ConvShapeSpec]:
    if not isinstance(doc, dict):
        raise SuiteParseError(f"{origin}: top level must be an object")
    version = doc.get("version")
    if version != SUITE_SCHEMA_VERSION:
        raise SuiteParseError(
            f"{origin}: unsupported suite schema version {version!r}"
        )
    shapes = doc.get("shapes")
    if not isinstance(shapes, list) or not shapes:
        raise SuiteParseError(f"{origin}: 'shapes' must be a non-empty list")
    model = doc.get("model", "custom")
    specs = []
    for i, record in enumerate(shapes):
        record = dict(record) if isinstance(record, dict) else record
        if isinstance(record, dict):
            record.setdefault("model", model)
        specs.append(_parse_shape(record, i, origin))
    names = [s.name for s in specs]
    if len(set(names)) != len(names):
        dupes = sorted({n for n in names if names.count(n) > 1})
        raise SuiteParseError(f"{origin}: duplicate shape names {dupes}")
    return specs


def load_shape_suite(source: str | Path) -> list[ConvShapeSpec]:
    """Load a suite by builtin id ('resnet18', 'squeezenet10') or file path."""
    if isinstance(source, str) and source in BUILTIN_SUITES:
        text = (
            resources.files("convbench") / "data" / f"{source}.json"
        ).read_text()
        origin = f"builtin suite '{source}'"
    else:
        path = Path(source)
        try:
            text = path.read_text()
        except OSError as exc:
            raise SuiteParseError(f"cannot read suite file {path}: {exc}") from exc
        origin = str(path)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SuiteParseError(
            f"{origin}: invalid JSON at line {exc.lineno}: {exc.msg}"
        ) from exc
    return _parse_suite(doc, origin)


def census(specs: list[ConvShapeSpec]) -> dict[str, int]:
    """Count suite entries per operator-type row; off-grid shapes land in
    'other'."""
    counts = {row: 0 for row in CENSUS_ROWS}
    counts["other"] = 0
    for spec in specs:
        row = spec.census_row()
        counts[row if row is not None else "other"] += 1
    return counts
