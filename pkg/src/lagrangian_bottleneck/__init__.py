"""Video-based bottleneck detection from long-term temporal filtered FTLE fields."""

from .config import PipelineConfig
from .fields import BinaryMask, FlowField, FlowSequence, ScalarField, build_sequences, read_flo, write_flo
from .pipeline import BottleneckDetector

__all__ = [
    "BinaryMask",
    "BottleneckDetector",
    "FlowField",
    "FlowSequence",
    "PipelineConfig",
    "ScalarField",
    "build_sequences",
    "read_flo",
    "write_flo",
]

__version__ = "0.1.0"
