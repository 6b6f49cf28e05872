"""Analytical cost models: FLOPs, im2col overhead, footprints, roofline.

Conventions: a MAC is one multiply-accumulate; reported `flops` counts 2
per MAC (multiply + add).  `macs` itself is the figure the single-count
convention would call FLOPs, so reports carry both numbers.  Formulas
include the batch dimension; with batch 1 they reduce to the per-image
forms.
"""

from __future__ import annotations

from dataclasses import dataclass

from .gemm import TileConfig
from .tensors import ConvParams, Shape4, conv_output_shape


@dataclass(frozen=True)
class CostReport:
    """Per-shape analytical costs attached to every benchmark record."""

    macs: int
    flops: int                      # 2 * macs
    im2col_mem_ops: int             # 0 when the pointwise fast path applies
    im2col_mem_ops_formula: int     # formula value regardless of fast path
    im2col_bytes: int               # mem ops * 4 (f32 traffic)
    im2col_skipped: bool
    patch_matrix_bytes: int         # analytic storage M * R*S*C * 4
    engine_patch_matrix_bytes: int  # what the engine actually allocates
    indirection_entries: int
    indirection_bytes: int
    speedup_predicted: float


@dataclass(frozen=True)
class FootprintReport:
    patch_matrix_bytes: int
    engine_patch_matrix_bytes: int
    indirection_entries: int
    indirection_bytes: int
    ratio: float  # patch bytes per indirection byte


REF_SIZE_DEFAULT = 8  # bytes per row reference (int64 offsets)


def flop_count(params: ConvParams, out_shape: Shape4) -> tuple[int, int]:
    """(macs, flops) for one convolution producing `out_shape`."""
    macs = (
        out_shape.n * params.out_channels * params.in_channels
        * out_shape.h * out_shape.w * params.kernel_elems
    )
    return macs, 2 * macs


def im2col_overhead(params: ConvParams, out_shape: Shape4) -> int:
    """Memory operations the patch-building transform costs: one read and
    one write per patch element, 2 * C * H_out * W_out * R * S per image."""
    return (
        2 * out_shape.n * params.in_channels
        * out_shape.h * out_shape.w * params.kernel_elems
    )


def roofline_speedup(lam: float, k_out: int) -> float:
    """Predicted speedup from dropping the patch transform: 1 + 2*lam/K.

    `lam` is the machine's arithmetic intensity (FLOPs per memory load in
    balanced code).  Decreasing in K; the K=1 value 1 + 2*lam is the upper
    bound.
    """
    if lam < 0:
        raise ValueError("arithmetic intensity must be >= 0")
    if k_out < 1:
        raise ValueError("output channel count must be >= 1")
    return 1.0 + 2.0 * lam / k_out


def footprint_compare(
    params: ConvParams,
    input_shape: Shape4,
    tile: TileConfig = TileConfig(),
    ref_size: int = REF_SIZE_DEFAULT,
) -> FootprintReport:
    """Patch-matrix storage vs indirection-buffer storage for one shape.

    Patch bytes scale with the input channel count; indirection bytes do
    not.  The engine field accounts for the pointwise fast path, where no
    patch matrix is allocated at all.
    """
    out_shape = conv_output_shape(params, input_shape)
    m = out_shape.n * out_shape.h * out_shape.w
    patch_bytes = m * params.reduction_len * 4
    entries = -(-m // tile.mr) * tile.mr * params.kernel_elems
    ind_bytes = entries * ref_size
    engine_bytes = 0 if params.is_pointwise_unit_stride() else patch_bytes
    return FootprintReport(
        patch_matrix_bytes=patch_bytes,
        engine_patch_matrix_bytes=engine_bytes,
        indirection_entries=entries,
        indirection_bytes=ind_bytes,
        ratio=patch_bytes / ind_bytes,
    )


def cost_report(
    params: ConvParams,
    input_shape: Shape4,
    tile: TileConfig = TileConfig(),
    ref_size: int = REF_SIZE_DEFAULT,
    lam: float = 0.0,
) -> CostReport:
    """Assemble the full analytical record for one convolution shape."""
    out_shape = conv_output_shape(params, input_shape)
    macs, flops = flop_count(params, out_shape)
    formula = im2col_overhead(params, out_shape)
    skipped = params.is_pointwise_unit_stride()
    mem_ops = 0 if skipped else formula
    fp = footprint_compare(params, input_shape, tile, ref_size)
    return CostReport(
        macs=macs,
        flops=flops,
        im2col_mem_ops=mem_ops,
        im2col_mem_ops_formula=formula,
        im2col_bytes=mem_ops * 4,
        im2col_skipped=skipped,
        patch_matrix_bytes=fp.patch_matrix_bytes,
        engine_patch_matrix_bytes=fp.engine_patch_matrix_bytes,
        indirection_entries=fp.indirection_entries,
        indirection_bytes=fp.indirection_bytes,
        speedup_predicted=roofline_speedup(lam, params.out_channels),
    )
