"""Latency and memory benchmarking harness.

Timing uses the monotonic wall clock at nanosecond resolution, with one
discarded warm-up run. Every timed run must produce an identical
InferenceResult; a mismatch means the engine itself is broken. Memory is
estimated analytically from the sizes of the data structures the runtime
allocates (weights, neuron state, frame buffer), not measured from the
allocator.
"""

from __future__ import annotations

import json
import math
import socket
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from .engine import Engine
from .errors import SnnKitError
from .events import FrameSequence
from .model import Conv2dSpec, LifSpec, LinearSpec, Network, validate
from .pruning import mac_count

DEFAULT_RUNS = 500

BYTES_PER_VALUE = 4  # float32 everywhere


@dataclass
class MemoryEstimate:
    weights_bytes: int
    state_bytes: int
    frame_bytes: int

    @property
    def total_bytes(self) -> int:
        return self.weights_bytes + self.state_bytes + self.frame_bytes


def estimate_memory(net: Network) -> MemoryEstimate:
    """Static footprint: weights + lif state (membrane and spikes) + one frame."""
    trace = validate(net)
    weight_elems = 0
    state_elems = 0
    for i, layer in enumerate(net.layers):
        if isinstance(layer, (Conv2dSpec, LinearSpec)):
            weight_elems += layer.weights.shape.numel + layer.bias.shape.numel
        elif isinstance(layer, LifSpec):
            state_elems += 2 * int(np.prod(trace[i][1]))  # membrane + spikes
    frame_elems = net.input_shape.numel
    return MemoryEstimate(
        BYTES_PER_VALUE * weight_elems,
        BYTES_PER_VALUE * state_elems,
        BYTES_PER_VALUE * frame_elems,
    )


@dataclass
class BenchReport:
    label: str
    runs: int
    mean_latency_s: float
    min_latency_s: float
    max_latency_s: float
    stddev_latency_s: float
    mac_total: int
    memory_estimate_bytes: int
    per_layer_time_s: list[float] | None = None
    hostname: str = field(default_factory=socket.gethostname)
    timestamp: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat())
    model_hash: str | None = None

    def to_json(self) -> str:
        return json.dumps(self.__dict__, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "BenchReport":
        return cls(**json.loads(text))

    CSV_HEADER = (
        "label,runs,mean_latency_s,min_latency_s,max_latency_s,stddev_latency_s,"
        "mac_total,memory_estimate_bytes,hostname,timestamp,model_hash"
    )

    def to_csv_row(self) -> str:
        return (
            f"{self.label},{self.runs},{self.mean_latency_s:.9f},{self.min_latency_s:.9f},"
            f"{self.max_latency_s:.9f},{self.stddev_latency_s:.9f},{self.mac_total},"
            f"{self.memory_estimate_bytes},{self.hostname},{self.timestamp},{self.model_hash or ''}"
        )


def bench_inference(
    net: Network,
    sample: FrameSequence,
    runs: int = DEFAULT_RUNS,
    label: str = "",
    per_layer: bool = False,
) -> BenchReport:
    """Time `runs` repeated inferences of one sample (plus a discarded warm-up)."""
    if runs < 1:
        raise ValueError(f"runs must be >= 1, got {runs}")
    engine = Engine(net)
    reference = engine.run(sample)  # warm-up, result kept as determinism reference
    durations = np.empty(runs, dtype=np.float64)
    for i in range(runs):
        t0 = time.perf_counter_ns()
        result = engine.run(sample)
        durations[i] = (time.perf_counter_ns() - t0) * 1e-9
        if (
            result.predicted_class != reference.predicted_class
            or not np.array_equal(result.class_spike_counts, reference.class_spike_counts)
        ):
            raise SnnKitError(
                f"internal error: run {i} produced a different result than the warm-up "
                f"(engine must be deterministic)"
            )
    layer_times = engine.run_timed(sample)[1] if per_layer else None
    return BenchReport(
        label=label,
        runs=runs,
        mean_latency_s=float(durations.mean()),
        min_latency_s=float(durations.min()),
        max_latency_s=float(durations.max()),
        stddev_latency_s=float(durations.std()),
        mac_total=mac_count(net).total_macs,
        memory_estimate_bytes=estimate_memory(net).total_bytes,
        per_layer_time_s=layer_times,
    )


@dataclass
class ReportComparison:
    speedup: float  # a.mean / b.mean: >1 means b is faster
    mac_ratio: float  # a.macs / b.macs
    memory_ratio: float  # a.bytes / b.bytes

    def format_table(self, a_label: str = "a", b_label: str = "b") -> str:
        return (
            f"speedup ({a_label} vs {b_label}): {self.speedup:.2f}x\n"
            f"MAC ratio: {self.mac_ratio:.2f}x\n"
            f"memory ratio: {self.memory_ratio:.2f}x"
        )


def _ratio(a: float, b: float) -> float:
    if b == 0:
        return math.inf if a > 0 else 1.0
    return a / b


def compare_reports(a: BenchReport, b: BenchReport) -> ReportComparison:
    """How much cheaper report b is than report a (same sample, same host)."""
    return ReportComparison(
        speedup=_ratio(a.mean_latency_s, b.mean_latency_s),
        mac_ratio=_ratio(a.mac_total, b.mac_total),
        memory_ratio=_ratio(a.memory_estimate_bytes, b.memory_estimate_bytes),
    )
