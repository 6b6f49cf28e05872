"""Indirect convolution: patch matrix replaced by a buffer of row references.

Instead of copying receptive fields into a patch matrix, the engine builds
an indirection buffer holding one reference per (output pixel, kernel
element) to the C-long input pixel row that tap reads, with padding taps
pointing at a shared explicit zero row.  The GEMM then walks the buffer:
an outer loop over kernel elements loads fresh row references, an inner
loop accumulates C-length dot products into the same accumulators, so the
overall reduction order per output element is identical to the patch-matrix
GEMM and the outputs match bit for bit.

Row references are stored as int64 element offsets of the pixel row's
first channel within the bound input tensor's flat buffer; ZERO_REF marks
the zero row.  The buffer layout is tile-major, then kernel element, then
lane: entry [t, e, m] serves output pixel t*mr + m (clamped to the last
real pixel for trailing lanes) and kernel element e = ky*S + kx.

Lifecycle follows the cost of change: growing the batch reinitializes only
tiles at and past the old full-tile prefix; binding a new input tensor (or
zero row) rebuilds everything; geometry changes require a fresh buffer, and
using a buffer with arguments it was not built for raises StaleBufferError
rather than silently recomputing.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import StaleBufferError
from .gemm import PackedFilter, TileConfig
from .im2col import _check_filter
from .tensors import ConvParams, NhwcTensor, Shape4, conv_output_shape

ZERO_REF = np.int64(-1)


def make_zero_row(channels: int) -> np.ndarray:
    """The explicit zero vector substituted for out-of-bounds taps.

    May be shared between buffers and operators; back-ends only read it.
    """
    if channels < 1:
        raise ValueError("channels must be >= 1")
    return np.zeros(channels, dtype=np.float32)


@dataclass(eq=False)
class IndirectionBuffer:
    """Ordered row references driving the indirect GEMM (see module docs)."""

    mr: int
    batch: int
    out_h: int
    out_w: int
    params: ConvParams
    in_shape: Shape4
    input_data: np.ndarray   # flat buffer of the bound input tensor
    zero_row: np.ndarray
    offsets: np.ndarray      # (tiles, R*S, mr) int64

    @property
    def pixel_count(self) -> int:
        return self.batch * self.out_h * self.out_w

    @property
    def tile_count(self) -> int:
        return self.offsets.shape[0]

    @property
    def entry_count(self) -> int:
        return self.offsets.size

    @property
    def allocated_bytes(self) -> int:
        return self.offsets.nbytes

    def rows_for_tile(self, t: int) -> list[np.ndarray]:
        """Dereference tile t: R*S*mr pixel-row views in kernel-element
        order, mr rows per element.  Padding entries yield the zero row."""
        c = self.params.in_channels
        rows = []
        for e in range(self.params.kernel_elems):
            for m in range(self.mr):
                off = self.offsets[t, e, m]
                if off == ZERO_REF:
                    rows.append(self.zero_row)
                else:
                    rows.append(self.input_data[off : off + c])
        return rows


def _tile_count(pixels: int, mr: int) -> int:
    return -(-pixels // mr)


def _compute_offsets(
    in_shape: Shape4,
    params: ConvParams,
    out_h: int,
    out_w: int,
    batch: int,
    mr: int,
    first_tile: int = 0,
) -> np.ndarray:
    """Offsets for tiles [first_tile, T); vectorized over lanes."""
    pixels = batch * out_h * out_w
    tiles = _tile_count(pixels, mr)
    lane = np.arange(first_tile * mr, tiles * mr, dtype=np.int64)
    p = np.minimum(lane, pixels - 1)  # trailing lanes clamp to the last pixel
    n = p // (out_h * out_w)
    oy = (p // out_w) % out_h
    ox = p % out_w

    rs = params.kernel_elems
    out = np.empty((tiles - first_tile, rs, mr), dtype=np.int64)
    for ky in range(params.kernel_h):
        for kx in range(params.kernel_w):
            iy = oy * params.stride_h + ky * params.dilation_h - params.pad_top
            ix = ox * params.stride_w + kx * params.dilation_w - params.pad_left
            valid = (0 <= iy) & (iy < in_shape.h) & (0 <= ix) & (ix < in_shape.w)
            off = ((n * in_shape.h + iy) * in_shape.w + ix) * in_shape.c
            e = ky * params.kernel_w + kx
            out[:, e, :] = np.where(valid, off, ZERO_REF).reshape(-1, mr)
    return out


def init_indirection_buffer(
    input: NhwcTensor,
    zero_row: np.ndarray,
    params: ConvParams,
    out_shape: Shape4,
    tile: TileConfig,
    batch: int | None = None,
) -> IndirectionBuffer:
    """Build the buffer for `input` under `params`.

    `batch` limits initialization to the first batches of a larger input
    (the rest can be added later with update_for_batch_growth); it defaults
    to the full input batch.
    """
    expected = conv_output_shape(params, input.shape)
    if out_shape != expected:
        raise ValueError(f"out_shape {out_shape} != computed {expected}")
    if zero_row.dtype != np.float32 or zero_row.shape != (params.in_channels,):
        raise ValueError("zero row must be float32 of length in_channels")
    batch = input.shape.n if batch is None else batch
    if not 1 <= batch <= input.shape.n:
        raise ValueError("batch must be within the physical input batch")
    offsets = _compute_offsets(
        input.shape, params, out_shape.h, out_shape.w, batch, tile.mr
    )
    return IndirectionBuffer(
        mr=tile.mr,
        batch=batch,
        out_h=out_shape.h,
        out_w=out_shape.w,
        params=params,
        in_shape=input.shape,
        input_data=input.data,
        zero_row=zero_row,
        offsets=offsets,
    )


def update_for_batch_growth(ib: IndirectionBuffer, new_batch: int) -> IndirectionBuffer:
    """Extend the buffer to cover more batches of the same bound input.

    Entries in the old full-tile prefix are carried over verbatim; only the
    old partial boundary tile (whose trailing lanes were clamped) and the
    new region are initialized.  Shrinking is not done here: pass a smaller
    `batch` to indirect_conv instead, which uses a tile prefix.
    """
    if new_batch < ib.batch:
        raise ValueError(
            "cannot shrink a buffer; call indirect_conv with batch="
            f"{new_batch} for logical truncation"
        )
    if new_batch > ib.in_shape.n:
        raise ValueError("new batch exceeds the bound input tensor's batch")
    if new_batch == ib.batch:
        return ib

    keep = ib.pixel_count // ib.mr  # full tiles; the clamped tail is redone
    tiles = _tile_count(new_batch * ib.out_h * ib.out_w, ib.mr)
    offsets = np.empty((tiles, ib.params.kernel_elems, ib.mr), dtype=np.int64)
    offsets[:keep] = ib.offsets[:keep]
    offsets[keep:] = _compute_offsets(
        ib.in_shape, ib.params, ib.out_h, ib.out_w, new_batch, ib.mr,
        first_tile=keep,
    )
    return replace(ib, batch=new_batch, offsets=offsets)


def rebind_input(
    ib: IndirectionBuffer, new_input: NhwcTensor, new_zero: np.ndarray
) -> IndirectionBuffer:
    """Complete reinitialization against a new input tensor and zero row.

    The new input must have the shape the buffer was built for.
    """
    if new_input.shape != ib.in_shape:
        raise ValueError(
            f"rebind requires identical shape; buffer has {ib.in_shape}, "
            f"new input has {new_input.shape}"
        )
    out_shape = Shape4(new_input.shape.n, ib.out_h, ib.out_w, ib.params.out_channels)
    return init_indirection_buffer(
        new_input, new_zero, ib.params, out_shape,
        TileConfig(mr=ib.mr), batch=ib.batch,
    )


def indirect_gemm_microkernel(
    kernel_elems: int,
    channels: int,
    packed_b_tile: np.ndarray,
    row_refs: list[np.ndarray],
    acc: np.ndarray,
) -> np.ndarray:
    """Single-tile indirect kernel: per kernel element, load mr fresh row
    references and accumulate C-length dot products into `acc`.

    The reduction order per output element (kernel element major, channel
    minor) matches gemm_microkernel over the equivalent patch row.
    """
    mr = acc.shape[0]
    k = 0
    for e in range(kernel_elems):
        rows = row_refs[e * mr : (e + 1) * mr]
        for c in range(channels):
            col = np.array([row[c] for row in rows], dtype=np.float32)
            acc += col[:, None] * packed_b_tile[k]
            k += 1
    return acc


def indirect_conv(
    input: NhwcTensor,
    pf: PackedFilter,
    ib: IndirectionBuffer,
    params: ConvParams,
    tile: TileConfig,
    batch: int | None = None,
) -> NhwcTensor:
    """Convolution through the indirection buffer; no patch matrix exists.

    Result is bit-identical to gemm_conv on the same operands.  `batch`
    may name fewer batches than the buffer covers (logical truncation);
    anything else the buffer was not built for raises StaleBufferError.
    """
    _check_filter(pf, params)
    if ib.input_data is not input.data:
        raise StaleBufferError(
            "buffer is bound to a different input tensor; rebind_input first"
        )
    if ib.params != params:
        raise StaleBufferError("buffer was built for different conv params")
    if ib.in_shape != input.shape:
        raise StaleBufferError("input shape changed; rebuild the buffer")
    if ib.mr != tile.mr or pf.nr != tile.nr:
        raise StaleBufferError("tile configuration differs from buffer/packing")

    batch = ib.batch if batch is None else batch
    if not 1 <= batch <= ib.batch:
        raise ValueError(
            "batch must be <= the initialized buffer batch; use "
            "update_for_batch_growth to extend it"
        )

    mr, nr = tile.mr, tile.nr
    c = params.in_channels
    pixels = batch * ib.out_h * ib.out_w
    tiles = _tile_count(pixels, mr)
    n_jt = pf.n_tiles
    lanes = pf.lane_view()
    ch = np.arange(c, dtype=np.int64)

    acc = np.empty((tiles, mr, n_jt, nr), dtype=np.float32)
    acc[:] = pf.padded_bias()
    tmp = np.empty_like(acc)
    # scratch reused across kernel elements: row-start indices expanded to
    # per-channel element indices, and the dereferenced rows themselves
    idx = np.empty((tiles, mr, c), dtype=np.int64)
    rows = np.empty((tiles, mr, c), dtype=np.float32)
    for e in range(params.kernel_elems):
        off = ib.offsets[:tiles, e, :]
        np.add(np.maximum(off, 0)[:, :, None], ch, out=idx)
        np.take(input.data, idx, out=rows)
        np.copyto(rows, ib.zero_row, where=(off == ZERO_REF)[:, :, None])
        for ic in range(c):
            np.multiply(rows[:, :, ic, None, None], lanes[e * c + ic], out=tmp)
            np.add(acc, tmp, out=acc)

    out_shape = Shape4(batch, ib.out_h, ib.out_w, pf.k_out)
    out = NhwcTensor.zeros(out_shape)
    out2d = out.data.reshape(pixels, pf.k_out)
    out2d[:] = acc.reshape(tiles * mr, n_jt * nr)[:pixels, : pf.k_out]
    return out
