"""Cycle-level simulator and performance model for temporal-unary-binary (tub) convolution cores."""

from .arith import (
    Precision,
    PulseStream,
    TubMultiplier,
    TubProduct,
    decode,
    encode_2s_unary,
    tub_multiply,
    unary_worst_case_cycles,
    worst_case_cycles,
)
from .dataflow import ConvShape, atomize, convolve, reference_convolution, transpose_feed
from .pe_array import PcuArray, PcuConfig, PcuResult, cell_compute, cmac_compute, pcu_compute, step_trace
from .perf import (
    Calibration,
    DesignPoint,
    energy,
    energy_gap,
    iso_area_throughput,
    load_calibration,
    project_iso_area_throughput,
    workload_report,
)
from .profiler import (
    LatencyProfile,
    TileStats,
    build_profile,
    cross_check_profile_against_sim,
    tile_layers,
    tile_weights,
)
from .tensorio import QuantTensor, load_tensor, save_tensor

__version__ = "0.1.0"
