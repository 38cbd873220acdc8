"""Execution pipeline: runs a layer stack over discrete time steps.

Leaky integrate-and-fire layers keep persistent membrane state across
steps; classification is the argmax of output-layer spike counts over the
whole window (lowest index wins ties).

Membrane update, in this evaluation order:

    U[t] = beta * U[t-1] + I[t] - reset_term
    reset_term = S[t-1] * threshold          (subtract mode)
    zero mode: membrane cleared where S[t-1] = 1 before the leak
    S[t] = 1 where U[t] > threshold, else 0  (strictly greater)

Convolution and dense accumulation run sequentially over input channels /
features. This is deliberate: adding a term that is exactly 0.0 never
changes a float accumulator, so removing an all-silent channel leaves
every downstream value bit-identical. Vectorized reductions (BLAS, pairwise
sums) would reorder the surviving terms and break that guarantee.

An Engine instance pre-allocates every intermediate and state buffer once;
the step loop performs no allocation.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ShapeError, ValidationError
from .events import FrameSequence
from .model import Conv2dSpec, FlattenSpec, LifSpec, LinearSpec, MaxPool2dSpec, Network, validate
from .tensor import Tensor

SpikeObserver = Callable[[int, int, np.ndarray], None]  # (step, layer_index, spikes)


@dataclass
class LifState:
    membrane: Tensor
    last_spikes: Tensor


@dataclass
class InferenceResult:
    class_spike_counts: np.ndarray  # int64, one per output neuron
    predicted_class: int
    per_layer_spike_totals: dict[int, int] | None = None

    def counts_list(self) -> list[int]:
        return [int(v) for v in self.class_spike_counts]


def argmax_class(counts) -> int:
    """Index of the largest count; the lowest index wins ties."""
    return int(np.argmax(np.asarray(counts)))


# --- ndarray kernels (shared by the free functions and the Engine) --------

def _conv2d_kernel(w, b, x, out, tmp, padded, stride):
    """out <- conv(x); sequential accumulation over (channel, ki, kj)."""
    sh, sw = stride
    kh, kw = w.shape[2], w.shape[3]
    oh, ow = out.shape[1], out.shape[2]
    if padded is not None:
        padded.fill(0.0)
        ph = (padded.shape[1] - x.shape[1]) // 2
        pw = (padded.shape[2] - x.shape[2]) // 2
        padded[:, ph:ph + x.shape[1], pw:pw + x.shape[2]] = x
        src = padded
    else:
        src = x
    out[:] = b[:, None, None]
    for c in range(w.shape[1]):
        plane = src[c]
        for i in range(kh):
            rows = plane[i:i + (oh - 1) * sh + 1:sh]
            for j in range(kw):
                window = rows[:, j:j + (ow - 1) * sw + 1:sw]
                np.multiply(w[:, c, i, j, None, None], window, out=tmp)
                np.add(out, tmp, out=out)
    return out


def _linear_kernel(w, b, x, out, tmp):
    """out <- W @ x + b via sequential per-feature accumulation."""
    out[:] = b
    for i in range(w.shape[1]):
        np.multiply(w[:, i], x[i], out=tmp)
        np.add(out, tmp, out=out)
    return out


def _maxpool_kernel(x, out, kernel, stride):
    kh, kw = kernel
    sh, sw = stride
    oh, ow = out.shape[1], out.shape[2]
    first = True
    for i in range(kh):
        rows = x[:, i:i + (oh - 1) * sh + 1:sh]
        for j in range(kw):
            window = rows[:, :, j:j + (ow - 1) * sw + 1:sw]
            if first:
                out[:] = window
                first = False
            else:
                np.maximum(out, window, out=out)
    return out


def _lif_kernel(beta, threshold, reset_mode, mem, spk, cur, tmp, fired):
    """Update flat membrane/spike state in place; spk becomes S[t] in {0.0, 1.0}."""
    if reset_mode == "zero":
        np.subtract(np.float32(1.0), spk, out=tmp)
        np.multiply(mem, tmp, out=mem)
        np.multiply(mem, beta, out=mem)
        np.add(mem, cur, out=mem)
    else:  # subtract
        np.multiply(mem, beta, out=mem)
        np.add(mem, cur, out=mem)
        np.multiply(spk, threshold, out=tmp)
        np.subtract(mem, tmp, out=mem)
    np.greater(mem, threshold, out=fired)
    np.copyto(spk, fired)
    return spk


# --- spec-level forward operations (allocating convenience API) -----------

def conv2d_forward(spec: Conv2dSpec, input: Tensor) -> Tensor:
    c, h, w_in = _require_rank3(input, "conv2d")
    if c != spec.in_channels:
        raise ShapeError(f"conv2d: input has {c} channels, layer expects {spec.in_channels}")
    kh, kw = spec.kernel
    sh, sw = spec.stride
    ph, pw = spec.padding
    oh = (h + 2 * ph - kh) // sh + 1
    ow = (w_in + 2 * pw - kw) // sw + 1
    if oh < 1 or ow < 1:
        raise ShapeError(f"conv2d: kernel larger than padded input {h}x{w_in}")
    out = np.empty((spec.out_channels, oh, ow), dtype=np.float32)
    tmp = np.empty_like(out)
    padded = (
        np.empty((c, h + 2 * ph, w_in + 2 * pw), dtype=np.float32) if (ph or pw) else None
    )
    _conv2d_kernel(spec.weights.nd, spec.bias.nd, input.nd, out, tmp, padded, spec.stride)
    return Tensor.from_array(out)


def linear_forward(spec: LinearSpec, input: Tensor) -> Tensor:
    if len(input.shape.dims) != 1:
        raise ShapeError(f"linear: needs flat input, got shape {input.shape.dims}")
    if input.shape.dims[0] != spec.in_features:
        raise ShapeError(
            f"linear: input length {input.shape.dims[0]} != in_features {spec.in_features}"
        )
    out = np.empty(spec.out_features, dtype=np.float32)
    tmp = np.empty_like(out)
    _linear_kernel(spec.weights.nd, spec.bias.nd, input.nd, out, tmp)
    return Tensor.from_array(out)


def maxpool_forward(spec: MaxPool2dSpec, input: Tensor) -> Tensor:
    c, h, w = _require_rank3(input, "maxpool2d")
    kh, kw = spec.kernel
    if h < kh or w < kw:
        raise ShapeError(f"maxpool2d: input {h}x{w} smaller than kernel {kh}x{kw}")
    oh = (h - kh) // spec.stride[0] + 1
    ow = (w - kw) // spec.stride[1] + 1
    out = np.empty((c, oh, ow), dtype=np.float32)
    _maxpool_kernel(input.nd, out, spec.kernel, spec.stride)
    return Tensor.from_array(out)


def lif_step(spec: LifSpec, state: LifState | None, input_current: Tensor) -> tuple[Tensor, LifState]:
    """One membrane update; state is lazily zero-initialized on first call."""
    if state is None:
        state = LifState(Tensor.zeros(input_current.shape), Tensor.zeros(input_current.shape))
    if state.membrane.shape.dims != input_current.shape.dims:
        raise ShapeError(
            f"lif: state shape {state.membrane.shape.dims} != input shape {input_current.shape.dims}"
        )
    mem = state.membrane.data.copy()
    spk = state.last_spikes.data.copy()
    tmp = np.empty_like(mem)
    fired = np.empty(mem.shape, dtype=np.bool_)
    _lif_kernel(np.float32(spec.beta), np.float32(spec.threshold), spec.reset_mode, mem, spk, input_current.data, tmp, fired)
    new_state = LifState(Tensor(input_current.shape, mem), Tensor(input_current.shape, spk))
    return Tensor(input_current.shape, spk.copy()), new_state


def _require_rank3(t: Tensor, who: str) -> tuple[int, int, int]:
    if len(t.shape.dims) != 3:
        raise ShapeError(f"{who}: needs [C, H, W] input, got shape {t.shape.dims}")
    return t.shape.dims  # type: ignore[return-value]


# --- persistent engine -----------------------------------------------------

class Engine:
    """One in-flight inference over an immutable Network.

    All buffers (layer outputs, padded inputs, membrane and spike state)
    are allocated at construction; `run` only fills them. Instances are
    independent: concurrent engines over a shared Network do not interact.
    """

    def __init__(self, net: Network):
        if not net.layers:
            raise ValidationError("cannot build an engine for a network with no layers")
        self.net = net
        self.trace = validate(net)
        self._steps: list[Callable[[np.ndarray], np.ndarray]] = []
        self._lif_layers: list[tuple[int, np.ndarray, np.ndarray]] = []  # (index, mem, spk)
        self._out_spikes: np.ndarray | None = None  # bound by the last lif step
        for idx, layer in enumerate(net.layers):
            in_shape, out_shape = self.trace[idx]
            if isinstance(layer, Conv2dSpec):
                self._steps.append(self._make_conv(layer, in_shape, out_shape))
            elif isinstance(layer, LinearSpec):
                self._steps.append(self._make_linear(layer, out_shape))
            elif isinstance(layer, MaxPool2dSpec):
                self._steps.append(self._make_pool(layer, out_shape))
            elif isinstance(layer, FlattenSpec):
                self._steps.append(lambda x: x.reshape(-1))
            elif isinstance(layer, LifSpec):
                self._steps.append(self._make_lif(layer, out_shape, idx))
        # readout neurons = every unit of the final lif layer, flattened
        self.num_classes = int(np.prod(self.trace[-1][1]))
        self._counts = np.zeros(self.num_classes, dtype=np.int64)
        self.reset()

    def _make_conv(self, spec: Conv2dSpec, in_shape, out_shape):
        w, b = spec.weights.nd, spec.bias.nd
        out = np.empty(out_shape, dtype=np.float32)
        tmp = np.empty_like(out)
        ph, pw = spec.padding
        padded = (
            np.empty((in_shape[0], in_shape[1] + 2 * ph, in_shape[2] + 2 * pw), dtype=np.float32)
            if (ph or pw)
            else None
        )
        stride = spec.stride

        def step(x):
            return _conv2d_kernel(w, b, x, out, tmp, padded, stride)

        return step

    def _make_linear(self, spec: LinearSpec, out_shape):
        w, b = spec.weights.nd, spec.bias.nd
        out = np.empty(out_shape, dtype=np.float32)
        tmp = np.empty_like(out)

        def step(x):
            return _linear_kernel(w, b, x, out, tmp)

        return step

    def _make_pool(self, spec: MaxPool2dSpec, out_shape):
        out = np.empty(out_shape, dtype=np.float32)
        kernel, stride = spec.kernel, spec.stride

        def step(x):
            return _maxpool_kernel(x, out, kernel, stride)

        return step

    def _make_lif(self, spec: LifSpec, shape, idx):
        n = int(np.prod(shape))
        mem = np.zeros(n, dtype=np.float32)
        spk = np.zeros(n, dtype=np.float32)
        tmp = np.empty(n, dtype=np.float32)
        fired = np.empty(n, dtype=np.bool_)
        self._lif_layers.append((idx, mem, spk))
        beta = np.float32(spec.beta)
        threshold = np.float32(spec.threshold)
        reset_mode = spec.reset_mode
        spk_shaped = spk.reshape(shape)

        def step(x):
            _lif_kernel(beta, threshold, reset_mode, mem, spk, x.reshape(-1), tmp, fired)
            return spk_shaped

        if idx == len(self.net.layers) - 1:
            self._out_spikes = spk
        return step

    def reset(self):
        """Zero all membrane and spike state (called between samples)."""
        for _, mem, spk in self._lif_layers:
            mem.fill(0.0)
            spk.fill(0.0)

    def run(self, frames: FrameSequence, on_spikes: SpikeObserver | None = None) -> InferenceResult:
        """Feed every frame through the stack and count output spikes."""
        fshape = frames.frames.shape.dims
        if len(fshape) != 4 or fshape[1:] != self.net.input_shape.dims:
            raise ShapeError(
                f"frames shape {fshape} does not match input shape "
                f"[T, {', '.join(str(d) for d in self.net.input_shape.dims)}]"
            )
        self.reset()
        self._counts.fill(0)
        totals = {idx: 0 for idx, _, _ in self._lif_layers}
        data = frames.frames.nd
        lif_set = {idx for idx, _, _ in self._lif_layers}
        for step in range(fshape[0]):
            x = data[step]
            for li, fn in enumerate(self._steps):
                try:
                    x = fn(x)
                except ValueError as e:
                    raise ShapeError(f"layer {li} at step {step}: {e}") from None
                if li in lif_set:
                    totals[li] += int(x.sum())
                    if on_spikes is not None:
                        on_spikes(step, li, x.reshape(-1))
            self._counts += self._out_spikes.astype(np.int64)
        counts = self._counts.copy()
        return InferenceResult(counts, argmax_class(counts), totals)


    def run_timed(self, frames: FrameSequence) -> tuple[InferenceResult, list[float]]:
        """Like run(), also returning cumulative wall time per layer in seconds."""
        fshape = frames.frames.shape.dims
        if len(fshape) != 4 or fshape[1:] != self.net.input_shape.dims:
            raise ShapeError(f"frames shape {fshape} does not match network input")
        self.reset()
        self._counts.fill(0)
        layer_ns = [0] * len(self._steps)
        data = frames.frames.nd
        for step in range(fshape[0]):
            x = data[step]
            for li, fn in enumerate(self._steps):
                t0 = time.perf_counter_ns()
                x = fn(x)
                layer_ns[li] += time.perf_counter_ns() - t0
            self._counts += self._out_spikes.astype(np.int64)
        counts = self._counts.copy()
        return InferenceResult(counts, argmax_class(counts)), [ns * 1e-9 for ns in layer_ns]


def run_inference(net: Network, frames: FrameSequence, on_spikes: SpikeObserver | None = None) -> InferenceResult:
    """One-shot inference: build an engine, run a single sample."""
    return Engine(net).run(frames, on_spikes=on_spikes)
