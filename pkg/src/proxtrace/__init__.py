"""proxtrace: proximity tracing over space-time trajectories.

Encode location points with a distance-preserving projection plus grid
quantization, index them with exact and approximate nearest-neighbour
structures, simulate contact ground truth, and measure recall and latency.
"""

__version__ = "0.1.0"

from . import encoding, geometry, index, pipeline, simulate
from .errors import (
    DegenerateDataError,
    DimensionMismatchError,
    FormatError,
    ProxtraceError,
    SamplingError,
    ValidationError,
)

__all__ = [
    "encoding",
    "geometry",
    "index",
    "pipeline",
    "simulate",
    "ProxtraceError",
    "ValidationError",
    "DimensionMismatchError",
    "DegenerateDataError",
    "FormatError",
    "SamplingError",
]
