"""Spiking neural network inference runtime, pruning toolkit, and benchmark harness."""

from .bench import BenchReport, bench_inference, compare_reports, estimate_memory
from .engine import (
    Engine,
    InferenceResult,
    LifState,
    conv2d_forward,
    lif_step,
    linear_forward,
    maxpool_forward,
    run_inference,
)
from .errors import (
    EventFormatError,
    ModelFormatError,
    PlanError,
    ShapeError,
    SnnKitError,
    ValidationError,
)
from .events import EventStream, FrameSequence, bin_to_frames, load_events_csv, load_events_nmnist
from .model import (
    Conv2dSpec,
    FlattenSpec,
    LifSpec,
    LinearSpec,
    MaxPool2dSpec,
    Network,
    load_model,
    save_model,
    validate,
)
from .pruning import (
    PrunePlan,
    SpikeProfile,
    mac_count,
    profile_spikes,
    prune_network,
    select_prunable,
)
from .tensor import Shape, Tensor

__version__ = "0.1.0"

__all__ = [
    "BenchReport",
    "Conv2dSpec",
    "Engine",
    "EventFormatError",
    "EventStream",
    "FlattenSpec",
    "FrameSequence",
    "InferenceResult",
    "LifSpec",
    "LifState",
    "LinearSpec",
    "MaxPool2dSpec",
    "ModelFormatError",
    "Network",
    "PlanError",
    "PrunePlan",
    "Shape",
    "ShapeError",
    "SnnKitError",
    "SpikeProfile",
    "Tensor",
    "ValidationError",
    "bench_inference",
    "bin_to_frames",
    "compare_reports",
    "conv2d_forward",
    "estimate_memory",
    "lif_step",
    "linear_forward",
    "load_events_csv",
    "load_events_nmnist",
    "load_model",
    "mac_count",
    "maxpool_forward",
    "profile_spikes",
    "prune_network",
    "run_inference",
    "save_model",
    "select_prunable",
    "validate",
]
