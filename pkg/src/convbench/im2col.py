"""GEMM-based convolution: materialize the patch matrix, then multiply.

Each row of the patch matrix is the flattened receptive field of one
output pixel (kernel element major, channel minor), so the convolution
becomes a single matrix product with the packed filter.  For 1x1
unit-stride unpadded convolutions the patch matrix IS the input viewed as
an (N*H*W) x C matrix, so that case is served by a zero-copy view and no
transformation runs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gemm import PackedFilter, RowMajorMatrix, TileConfig, gemm
from .tensors import ConvParams, NhwcTensor, Shape4, conv_output_shape


@dataclass
class PatchMatrix:
    """The materialized im2row buffer plus bookkeeping.

    `allocated_bytes` is what this construction actually allocated for the
    buffer: 0 when `matrix` is a view of the input (pointwise fast path).
    """

    matrix: RowMajorMatrix
    params: ConvParams
    input_shape: Shape4
    out_shape: Shape4
    is_view: bool

    @property
    def rows(self) -> int:
        return self.matrix.rows

    @property
    def cols(self) -> int:
        return self.matrix.cols

    @property
    def allocated_bytes(self) -> int:
        return 0 if self.is_view else self.matrix.base.nbytes


def build_patch_matrix(
    input: NhwcTensor,
    params: ConvParams,
    out: PatchMatrix | None = None,
) -> PatchMatrix:
    """Gather every output pixel's taps into one matrix row.

    Row p (output pixel p in n, oy, ox row-major order) holds, at column
    e*C + ic with e = ky*S + kx, the input value at
    iy = oy*SY + ky*DY - PT, ix = ox*SX + kx*DX - PL, or 0.0 when that tap
    is out of bounds.

    Passing a previously built `out` refills its buffer in place, which is
    how the benchmark reuses one allocation across iterations.
    """
    if input.shape.c != params.in_channels:
        raise ValueError("input channel count does not match params")
    out_shape = conv_output_shape(params, input.shape)
    m = out_shape.n * out_shape.h * out_shape.w
    cols = params.reduction_len

    if params.is_pointwise_unit_stride():
        view = input.data.reshape(m, cols)
        return PatchMatrix(
            RowMajorMatrix(view), params, input.shape, out_shape, is_view=True
        )

    if out is None:
        matrix = RowMajorMatrix.zeros(m, cols)
    else:
        # Geometry must match exactly: the padding zeros written at
        # allocation are only valid for the same out-of-bounds pattern.
        if out.is_view or out.params != params or out.input_shape != input.shape:
            raise ValueError("provided patch matrix was built for other geometry")
        matrix = out.matrix

    # One strided copy per kernel element covers every in-bounds tap; the
    # zero entries for padding taps were set when the buffer was allocated
    # and are never overwritten by input data for the same geometry.
    patch5 = matrix.base.reshape(
        out_shape.n, out_shape.h, out_shape.w, params.kernel_elems,
        params.in_channels,
    )
    in4 = input.view4d()
    sy, sx = params.stride_h, params.stride_w
    for ky in range(params.kernel_h):
        shift_y = ky * params.dilation_h - params.pad_top
        oy_lo = 0 if shift_y >= 0 else (-shift_y + sy - 1) // sy
        oy_hi = min(out_shape.h - 1, (input.shape.h - 1 - shift_y) // sy)
        if oy_lo > oy_hi:
            continue
        iy_lo = oy_lo * sy + shift_y
        for kx in range(params.kernel_w):
            shift_x = kx * params.dilation_w - params.pad_left
            ox_lo = 0 if shift_x >= 0 else (-shift_x + sx - 1) // sx
            ox_hi = min(out_shape.w - 1, (input.shape.w - 1 - shift_x) // sx)
            if ox_lo > ox_hi:
                continue
            ix_lo = ox_lo * sx + shift_x
            e = ky * params.kernel_w + kx
            patch5[:, oy_lo : oy_hi + 1, ox_lo : ox_hi + 1, e, :] = in4[
                :,
                iy_lo : iy_lo + (oy_hi - oy_lo) * sy + 1 : sy,
                ix_lo : ix_lo + (ox_hi - ox_lo) * sx + 1 : sx,
                :,
            ]
    return PatchMatrix(matrix, params, input.shape, out_shape, is_view=False)


def gemm_conv(
    input: NhwcTensor,
    pf: PackedFilter,
    params: ConvParams,
    tile: TileConfig,
    patch: PatchMatrix | None = None,
) -> NhwcTensor:
    """im2row followed by the packed GEMM; output is a fresh NHWC tensor."""
    _check_filter(pf, params)
    pm = build_patch_matrix(input, params, out=patch)
    out_shape = pm.out_shape
    m = out_shape.n * out_shape.h * out_shape.w
    out_mat = RowMajorMatrix.zeros(m, pf.k_out)
    gemm(pm.matrix, pf, out_mat, tile)
    return NhwcTensor(out_shape, out_mat.base.reshape(-1))


def gemm_only(
    prebuilt: PatchMatrix, pf: PackedFilter, tile: TileConfig
) -> RowMajorMatrix:
    """The matrix multiply alone, over an already-built patch matrix.

    Benchmark-only path: with a stale patch matrix it does not compute a
    convolution of anything current, but it isolates the GEMM cost.
    """
    _check_filter(pf, prebuilt.params)
    if prebuilt.cols != pf.reduction_len:
        raise ValueError("patch matrix columns do not match packed filter")
    out_mat = RowMajorMatrix.zeros(prebuilt.rows, pf.k_out)
    gemm(prebuilt.matrix, pf, out_mat, tile)
    return out_mat


def _check_filter(pf: PackedFilter, params: ConvParams) -> None:
    if (
        pf.kernel_elems != params.kernel_elems
        or pf.in_channels != params.in_channels
        or pf.k_out != params.out_channels
    ):
        raise ValueError("packed filter does not match convolution params")
