"""Direct convolution: the correctness oracle for the GEMM-based back-ends.

The accumulation order per output element is fixed to kernel-row, then
kernel-column, then input-channel, with one multiply and one separate add
per tap (no fused multiply-add).  The packed back-ends reduce in exactly
the same order, which is what makes bit-for-bit output comparison possible.
Out-of-bounds (padding) taps are skipped rather than multiplied by zero.

The spatial and output-channel dimensions carry independent accumulators,
so they are evaluated with array operations; that changes nothing about
the per-element operation sequence.
"""

from __future__ import annotations

import numpy as np

from .tensors import ConvParams, FilterTensor, NhwcTensor, conv_output_shape


def _valid_out_range(out_len, in_len, stride, dilation, pad, k):
    """Closed range [lo, hi] of output coords whose tap k lands in bounds."""
    shift = k * dilation - pad
    # need 0 <= o*stride + shift <= in_len - 1
    lo = 0 if shift >= 0 else (-shift + stride - 1) // stride
    hi = min(out_len - 1, (in_len - 1 - shift) // stride)
    return lo, hi


def direct_conv(
    input: NhwcTensor,
    filt: FilterTensor,
    bias: np.ndarray | None,
    params: ConvParams,
) -> NhwcTensor:
    """Convolve `input` with `filt`, bias applied as accumulator init.

    Raises ValueError on channel/filter mismatches and propagates
    InvalidGeometryError for degenerate geometry.
    """
    if input.shape.c != params.in_channels:
        raise ValueError("input channel count does not match params")
    if not filt.matches(params):
        raise ValueError("filter dimensions do not match params")
    if bias is not None:
        bias = np.asarray(bias)
        if bias.dtype != np.float32 or bias.shape != (params.out_channels,):
            raise ValueError("bias must be float32 of length out_channels")

    out_shape = conv_output_shape(params, input.shape)
    out = NhwcTensor.zeros(out_shape)
    out4 = out.view4d()
    if bias is not None:
        out4[...] = bias

    in4 = input.view4d()
    w4 = filt.view4d()  # (k, r, s, c)
    sy, sx = params.stride_h, params.stride_w

    for ky in range(params.kernel_h):
        oy_lo, oy_hi = _valid_out_range(
            out_shape.h, input.shape.h, sy, params.dilation_h, params.pad_top, ky
        )
        if oy_lo > oy_hi:
            continue
        iy_lo = oy_lo * sy + ky * params.dilation_h - params.pad_top
        for kx in range(params.kernel_w):
            ox_lo, ox_hi = _valid_out_range(
                out_shape.w, input.shape.w, sx, params.dilation_w,
                params.pad_left, kx,
            )
            if ox_lo > ox_hi:
                continue
            ix_lo = ox_lo * sx + kx * params.dilation_w - params.pad_left
            taps = in4[
                :,
                iy_lo : iy_lo + (oy_hi - oy_lo) * sy + 1 : sy,
                ix_lo : ix_lo + (ox_hi - ox_lo) * sx + 1 : sx,
                :,
            ]
            dst = out4[:, oy_lo : oy_hi + 1, ox_lo : ox_hi + 1, :]
            for ic in range(params.in_channels):
                dst += taps[:, :, :, ic : ic + 1] * w4[:, ky, kx, ic]
    return out
