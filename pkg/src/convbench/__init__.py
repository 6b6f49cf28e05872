"""convbench: NHWC f32 convolution via direct, im2col+GEMM, and indirect
GEMM back-ends, cross-validated bit for bit, with a benchmark harness and
analytical cost models."""

from .analysis import (
    CostReport,
    FootprintReport,
    cost_report,
    flop_count,
    footprint_compare,
    im2col_overhead,
    roofline_speedup,
)
from .bench import (
    BenchReport,
    BenchResult,
    CacheScrubber,
    SkippedVariant,
    emit_report,
    load_report,
    nearest_rank,
    run_benchmark,
    scrub_caches,
)
from .errors import (
    CorrectnessGateError,
    InvalidGeometryError,
    StaleBufferError,
    SuiteParseError,
)
from .gemm import (
    PackedFilter,
    RowMajorMatrix,
    TileConfig,
    gemm,
    gemm_microkernel,
    pack_filter,
)
from .im2col import PatchMatrix, build_patch_matrix, gemm_conv, gemm_only
from .indirect import (
    ZERO_REF,
    IndirectionBuffer,
    indirect_conv,
    indirect_gemm_microkernel,
    init_indirection_buffer,
    make_zero_row,
    rebind_input,
    update_for_batch_growth,
)
from .reference import direct_conv
from .suites import ConvShapeSpec, census, load_shape_suite
from .tensors import (
    ConvParams,
    FilterTensor,
    NhwcTensor,
    Shape4,
    conv_output_shape,
    filter_fill_random,
    tensor_fill_random,
    tensor_fill_sequential,
)

__version__ = "0.1.0"
