"""Tiled single-precision GEMM built around an MR x NR micro-kernel.

The B operand (filter weights) is repacked once into per-column-tile panels
so the kernel streams weights sequentially; the A operand is never repacked
and is read through views of its original storage.  Accumulation follows a
strict contract shared with every convolution back-end in this package:

  * each output element accumulates its partial products in ascending
    reduction order (k = 0, 1, ..., len-1);
  * every partial product costs one multiply and one separate add, both
    rounded to float32 (no fused multiply-add anywhere).

Under that contract the tiled driver, the single-tile micro-kernel, and a
naive ordered triple loop all produce bit-identical results, which the
tests exploit.

Packed layout, per column tile jt (nr output channels starting at jt*nr):

    for e in 0 .. R*S-1:          # kernel element
      for c in 0 .. C-1:          # input channel
        nr consecutive weights w[jt*nr + 0 .. jt*nr + nr-1][e][c]

Lanes past the last real output channel are zero-filled so edge column
tiles can run the full-width kernel; the driver simply does not copy the
padded columns out.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensors import ConvParams, FilterTensor


@dataclass(frozen=True)
class TileConfig:
    """Micro-kernel tile: mr output pixels by nr output channels."""

    mr: int = 4
    nr: int = 8

    def __post_init__(self):
        if self.mr < 1 or self.nr < 1:
            raise ValueError("tile dimensions must be >= 1")


class RowMajorMatrix:
    """M x L float32 matrix over a row-major buffer with leading dim >= L."""

    __slots__ = ("base", "rows", "cols")

    def __init__(self, base: np.ndarray, cols: int | None = None):
        base = np.asarray(base)
        if base.dtype != np.float32:
            raise TypeError("RowMajorMatrix requires float32 storage")
        if base.ndim != 2 or not base.flags.c_contiguous:
            raise ValueError("base must be a C-contiguous 2-D array")
        cols = base.shape[1] if cols is None else cols
        if not 0 < cols <= base.shape[1]:
            raise ValueError("need 0 < cols <= leading dimension")
        self.base = base
        self.rows = base.shape[0]
        self.cols = cols

    @classmethod
    def zeros(cls, rows: int, cols: int, lda: int | None = None) -> "RowMajorMatrix":
        lda = cols if lda is None else lda
        return cls(np.zeros((rows, lda), dtype=np.float32), cols)

    @classmethod
    def from_array(cls, array: np.ndarray) -> "RowMajorMatrix":
        return cls(np.ascontiguousarray(array, dtype=np.float32))

    @property
    def lda(self) -> int:
        return self.base.shape[1]

    @property
    def array(self) -> np.ndarray:
        """The logical M x L contents as a view (no copy)."""
        return self.base[:, : self.cols]

    def row(self, i: int) -> np.ndarray:
        return self.base[i, : self.cols]

    def full_tile_view(self, mr: int) -> np.ndarray:
        """(M // mr, mr, L) view over the full row tiles; no copy."""
        t = self.rows // mr
        return self.base[: t * mr].reshape(t, mr, self.lda)[:, :, : self.cols]


@dataclass
class PackedFilter:
    """Filter weights re-laid-out for sequential micro-kernel consumption.

    `weights` is the canonical per-column-tile layout described above.
    `lane_weights` duplicates it in reduction-step-major order; both are
    built once at pack time so no call ever re-lays-out weights.
    """

    k_out: int
    kernel_elems: int
    in_channels: int
    nr: int
    weights: np.ndarray       # (n_tiles, kernel_elems * in_channels, nr)
    lane_weights: np.ndarray  # (kernel_elems * in_channels, n_tiles, nr)
    bias: np.ndarray          # (k_out,)

    @property
    def reduction_len(self) -> int:
        return self.kernel_elems * self.in_channels

    @property
    def n_tiles(self) -> int:
        return self.weights.shape[0]

    def tile(self, jt: int) -> np.ndarray:
        """(reduction_len, nr) panel for column tile jt; a view."""
        return self.weights[jt]

    def lane_view(self) -> np.ndarray:
        """(reduction_len, n_tiles, nr): one reduction step across all
        column tiles, contiguous for the batched drivers."""
        return self.lane_weights

    def padded_bias(self) -> np.ndarray:
        """(n_tiles, nr) bias with zero in the padded lanes."""
        pb = np.zeros((self.n_tiles, self.nr), dtype=np.float32)
        pb.reshape(-1)[: self.k_out] = self.bias
        return pb


def pack_filter(
    filt: FilterTensor,
    bias: np.ndarray | None,
    params: ConvParams,
    tile: TileConfig,
) -> PackedFilter:
    """Repack K x R x S x C weights into ceil(K/nr) column-tile panels.

    Done once per model; the packed array is what every GEMM call reads.
    """
    if not filt.matches(params):
        raise ValueError("filter dimensions do not match params")
    k = filt.k_out
    rs = params.kernel_elems
    c = params.in_channels
    nr = tile.nr
    n_tiles = -(-k // nr)

    lanes = np.zeros((n_tiles * nr, rs, c), dtype=np.float32)
    lanes[:k] = filt.view4d().reshape(k, rs, c)
    packed = np.ascontiguousarray(
        lanes.reshape(n_tiles, nr, rs, c).transpose(0, 2, 3, 1)
    ).reshape(n_tiles, rs * c, nr)
    lane_major = np.ascontiguousarray(packed.transpose(1, 0, 2))

    if bias is None:
        bias_arr = np.zeros(k, dtype=np.float32)
    else:
        bias_arr = np.asarray(bias)
        if bias_arr.dtype != np.float32 or bias_arr.shape != (k,):
            raise ValueError("bias must be float32 of length out_channels")
        bias_arr = bias_arr.copy()
    return PackedFilter(k, rs, c, nr, packed, lane_major, bias_arr)


def gemm_microkernel(
    reduction_len: int,
    packed_b_tile: np.ndarray,
    a_row_refs: list[np.ndarray],
    acc: np.ndarray,
) -> np.ndarray:
    """Single-tile kernel: acc[m, j] += sum_k a_m[k] * b[k, j], k ascending.

    `a_row_refs` holds mr row views read in place at per-row cursors; the
    packed tile supplies nr weights per reduction step.  This is the
    reference form of the kernel; the driver below runs the identical
    update vectorized across row tiles.
    """
    for k in range(reduction_len):
        col = np.array([ref[k] for ref in a_row_refs], dtype=np.float32)
        acc += col[:, None] * packed_b_tile[k]
    return acc


def _accumulate(a3: np.ndarray, lanes: np.ndarray, acc: np.ndarray) -> None:
    """acc[t, m, jt, j] += a3[t, m, k] * lanes[k, jt, j] for k ascending.

    The batched twin of gemm_microkernel: same per-element operation
    sequence, all row tiles and column tiles advanced together.
    """
    tmp = np.empty_like(acc)
    for k in range(a3.shape[2]):
        np.multiply(a3[:, :, k, None, None], lanes[k], out=tmp)
        np.add(acc, tmp, out=acc)


def gemm(
    a: RowMajorMatrix,
    pf: PackedFilter,
    out: RowMajorMatrix,
    tile: TileConfig,
) -> RowMajorMatrix:
    """out[p, oc] = bias[oc] + sum_k a[p, k] * packed_weights[k, oc].

    A is consumed through views of its original storage (never repacked);
    the remainder row tile is computed full-width into a scratch tile from
    which only the valid sub-rectangle is copied out.
    """
    mr, nr = tile.mr, tile.nr
    if pf.nr != nr:
        raise ValueError(f"filter packed for nr={pf.nr}, tile wants nr={nr}")
    if a.cols != pf.reduction_len:
        raise ValueError(
            f"A has {a.cols} reduction columns, packed filter expects "
            f"{pf.reduction_len}"
        )
    if out.rows != a.rows or out.cols != pf.k_out:
        raise ValueError("output matrix shape mismatch")

    m = a.rows
    k_out = pf.k_out
    n_tiles = pf.n_tiles
    m_full = m - m % mr
    pb = pf.padded_bias()

    if m_full:
        acc = np.empty((m_full // mr, mr, n_tiles, nr), dtype=np.float32)
        acc[:] = pb
        _accumulate(a.full_tile_view(mr), pf.lane_view(), acc)
        out.array[:m_full] = acc.reshape(m_full, n_tiles * nr)[:, :k_out]

    if m_full < m:
        # Remainder tile: lanes past the last row re-read the final row, the
        # scratch is computed at full mr width, and only real rows are kept.
        idx = np.minimum(np.arange(m_full, m_full + mr), m - 1)
        stage = a.array[idx][None, :, :]
        scratch = np.empty((1, mr, n_tiles, nr), dtype=np.float32)
        scratch[:] = pb
        _accumulate(stage, pf.lane_view(), scratch)
        out.array[m_full:] = scratch.reshape(mr, n_tiles * nr)[: m - m_full, :k_out]
    return out
