"""NHWC tensor storage, convolution geometry records, and shape inference.

Everything downstream (reference loop nest, im2col, indirect GEMM) shares
these types.  Element type is fixed at float32 and the channel dimension is
innermost and dense, so the C values of one pixel always form a contiguous
run of the flat buffer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidGeometryError


@dataclass(frozen=True)
class Shape4:
    """Extent of a dense 4-D tensor in (batch, rows, cols, channels) order."""

    n: int
    h: int
    w: int
    c: int

    def __post_init__(self):
        for name in ("n", "h", "w", "c"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise ValueError(f"Shape4.{name} must be an int >= 1, got {value!r}")

    @property
    def numel(self) -> int:
        return self.n * self.h * self.w * self.c

    def astuple(self) -> tuple[int, int, int, int]:
        return (self.n, self.h, self.w, self.c)


@dataclass(frozen=True)
class ConvParams:
    """Full 2-D convolution geometry.

    Vertical parameters (kernel_h, stride_h, dilation_h, pad_top/bottom)
    apply to the row coordinate, horizontal ones to the column coordinate.
    """

    kernel_h: int
    kernel_w: int
    stride_h: int = 1
    stride_w: int = 1
    dilation_h: int = 1
    dilation_w: int = 1
    pad_top: int = 0
    pad_left: int = 0
    pad_bottom: int = 0
    pad_right: int = 0
    in_channels: int = 1
    out_channels: int = 1

    def __post_init__(self):
        positive = (
            "kernel_h", "kernel_w", "stride_h", "stride_w",
            "dilation_h", "dilation_w", "in_channels", "out_channels",
        )
        for name in positive:
            if getattr(self, name) < 1:
                raise ValueError(f"ConvParams.{name} must be >= 1")
        for name in ("pad_top", "pad_left", "pad_bottom", "pad_right"):
            if getattr(self, name) < 0:
                raise ValueError(f"ConvParams.{name} must be >= 0")

    @property
    def kernel_elems(self) -> int:
        return self.kernel_h * self.kernel_w

    @property
    def reduction_len(self) -> int:
        """Length of the per-output-pixel reduction: kernel taps x channels."""
        return self.kernel_elems * self.in_channels

    def is_pointwise_unit_stride(self) -> bool:
        """True when the patch matrix degenerates to the input itself
        (1x1 kernel, unit stride, no padding), so no transformation is
        needed before the matrix multiply."""
        return (
            self.kernel_h == 1 and self.kernel_w == 1
            and self.stride_h == 1 and self.stride_w == 1
            and self.pad_top == 0 and self.pad_left == 0
            and self.pad_bottom == 0 and self.pad_right == 0
        )


class NhwcTensor:
    """Dense single-precision tensor in NHWC layout.

    `data` is the flat buffer; element (n, y, x, c) lives at flat index
    ((n*h + y)*w + x)*c_stride + c with c_stride == c, i.e. pixel rows are
    contiguous.  Compute back-ends treat constructed tensors as read-only.
    """

    __slots__ = ("shape", "data")

    def __init__(self, shape: Shape4, data: np.ndarray):
        data = np.asarray(data)
        if data.dtype != np.float32:
            raise TypeError(f"NhwcTensor requires float32 data, got {data.dtype}")
        if data.ndim != 1:
            raise ValueError("NhwcTensor data must be a flat 1-D buffer")
        if not data.flags.c_contiguous:
            raise ValueError("NhwcTensor data must be contiguous")
        if data.size != shape.numel:
            raise ValueError(
                f"data length {data.size} != shape volume {shape.numel}"
            )
        self.shape = shape
        self.data = data

    @classmethod
    def from_array(cls, array: np.ndarray) -> "NhwcTensor":
        """Wrap a 4-D (n, h, w, c) array, converting to contiguous float32."""
        array = np.ascontiguousarray(array, dtype=np.float32)
        if array.ndim != 4:
            raise ValueError("expected a 4-D (n, h, w, c) array")
        shape = Shape4(*array.shape)
        return cls(shape, array.reshape(-1))

    @classmethod
    def zeros(cls, shape: Shape4) -> "NhwcTensor":
        return cls(shape, np.zeros(shape.numel, dtype=np.float32))

    def view4d(self) -> np.ndarray:
        """(n, h, w, c) view; no copy."""
        return self.data.reshape(self.shape.astuple())

    def pixel_offset(self, n: int, y: int, x: int) -> int:
        """Flat index of channel 0 of pixel (n, y, x)."""
        s = self.shape
        return ((n * s.h + y) * s.w + x) * s.c


class FilterTensor:
    """Convolution weights laid out K x R x S x C (output channel outermost)."""

    __slots__ = ("k_out", "kernel_h", "kernel_w", "in_channels", "data")

    def __init__(self, k_out: int, kernel_h: int, kernel_w: int,
                 in_channels: int, data: np.ndarray):
        data = np.asarray(data)
        if data.dtype != np.float32:
            raise TypeError(f"FilterTensor requires float32 data, got {data.dtype}")
        expected = k_out * kernel_h * kernel_w * in_channels
        if data.ndim != 1 or data.size != expected:
            raise ValueError(f"filter data must be flat with {expected} elements")
        self.k_out = k_out
        self.kernel_h = kernel_h
        self.kernel_w = kernel_w
        self.in_channels = in_channels
        self.data = data

    @classmethod
    def from_array(cls, array: np.ndarray) -> "FilterTensor":
        array = np.ascontiguousarray(array, dtype=np.float32)
        if array.ndim != 4:
            raise ValueError("expected a 4-D (k, r, s, c) array")
        k, r, s, c = array.shape
        return cls(k, r, s, c, array.reshape(-1))

    def view4d(self) -> np.ndarray:
        return self.data.reshape(
            self.k_out, self.kernel_h, self.kernel_w, self.in_channels
        )

    def matches(self, params: ConvParams) -> bool:
        return (
            self.k_out == params.out_channels
            and self.kernel_h == params.kernel_h
            and self.kernel_w == params.kernel_w
            and self.in_channels == params.in_channels
        )


def conv_output_shape(params: ConvParams, input_shape: Shape4) -> Shape4:
    """Output extent of a convolution over `input_shape`.

    H_out = floor((H_in + PT + PB - DY*(R-1) - 1) / SY) + 1, and likewise
    for the column axis.  Raises InvalidGeometryError when the dilated
    kernel does not fit in the padded input.
    """
    if input_shape.c != params.in_channels:
        raise ValueError(
            f"input has {input_shape.c} channels, params expect {params.in_channels}"
        )
    span_h = (
        input_shape.h + params.pad_top + params.pad_bottom
        - params.dilation_h * (params.kernel_h - 1) - 1
    )
    span_w = (
        input_shape.w + params.pad_left + params.pad_right
        - params.dilation_w * (params.kernel_w - 1) - 1
    )
    if span_h < 0 or span_w < 0:
        raise InvalidGeometryError(
            f"kernel {params.kernel_h}x{params.kernel_w} with dilation "
            f"({params.dilation_h},{params.dilation_w}) does not fit in padded "
            f"input {input_shape.h}x{input_shape.w}"
        )
    out_h = span_h // params.stride_h + 1
    out_w = span_w // params.stride_w + 1
    return Shape4(input_shape.n, out_h, out_w, params.out_channels)


def tensor_fill_sequential(shape: Shape4) -> NhwcTensor:
    """Tensor whose flat element i holds float(i); handy for layout tests."""
    return NhwcTensor(shape, np.arange(shape.numel, dtype=np.float32))


def tensor_fill_random(shape: Shape4, seed: int) -> NhwcTensor:
    """Uniform values in [-1, 1); identical contents for identical seeds."""
    rng = np.random.default_rng(seed)
    data = rng.uniform(-1.0, 1.0, shape.numel).astype(np.float32)
    return NhwcTensor(shape, data)


def filter_fill_random(params: ConvParams, seed: int) -> FilterTensor:
    """Random filter matching `params`, uniform in [-1, 1)."""
    count = params.out_channels * params.kernel_elems * params.in_channels
    rng = np.random.default_rng(seed)
    data = rng.uniform(-1.0, 1.0, count).astype(np.float32)
    return FilterTensor(
        params.out_channels, params.kernel_h, params.kernel_w,
        params.in_channels, data,
    )
