"""Spike-driven structural pruning.

Workflow: record per-neuron spike counts over a representative dataset
(`profile_spikes`), group spiking neurons by the filter or dense neuron
that feeds them and pick groups at or below an activity threshold
(`select_prunable`), then rewrite the network with the removals propagated
into the next weighted layer (`prune_network`).

With threshold 0 the transform is exact: a removed group emitted zero
spikes on the profiled inputs, so its downstream contribution was exactly
0.0 everywhere, and the engine's sequential accumulation makes dropping
those terms a bit-identical no-op.

Removal propagation across a flatten boundary uses the flatten order
(channel-major, then row, then column): pruning conv channel c removes the
linear columns [c*S, (c+1)*S) where S is the post-pool spatial size at the
flatten point.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .engine import Engine
from .errors import PlanError, ValidationError
from .events import FrameSequence
from .model import (
    Conv2dSpec,
    FlattenSpec,
    LifSpec,
    LinearSpec,
    MaxPool2dSpec,
    Network,
    copy_network,
    validate,
)
from .tensor import Tensor


@dataclass
class SpikeProfile:
    counts: dict[int, np.ndarray]  # lif layer index -> int64 per-neuron counts
    samples_profiled: int

    def to_json(self) -> str:
        return json.dumps(
            {
                "samples_profiled": self.samples_profiled,
                "layers": [
                    {"layer_index": li, "counts": [int(v) for v in self.counts[li]]}
                    for li in sorted(self.counts)
                ],
            },
            separators=(",", ":"),
        )

    @classmethod
    def from_json(cls, text: str) -> "SpikeProfile":
        doc = json.loads(text)
        counts = {
            int(entry["layer_index"]): np.asarray(entry["counts"], dtype=np.int64)
            for entry in doc["layers"]
        }
        return cls(counts, int(doc["samples_profiled"]))


@dataclass
class PlanEntry:
    layer_index: int  # the weighted layer whose outputs are removed
    kind: str  # "conv_channels" | "neurons"
    remove: list[int]


@dataclass
class PrunePlan:
    entries: list[PlanEntry] = field(default_factory=list)
    threshold: float = 0
    samples_profiled: int = 0

    @property
    def empty(self) -> bool:
        return all(not e.remove for e in self.entries)

    def to_json(self) -> str:
        return json.dumps(
            {
                "layers": [
                    {"layer_index": e.layer_index, "kind": e.kind, "remove": list(e.remove)}
                    for e in self.entries
                ],
                "threshold": self.threshold,
                "samples_profiled": self.samples_profiled,
            },
            separators=(",", ":"),
        )

    @classmethod
    def from_json(cls, text: str) -> "PrunePlan":
        doc = json.loads(text)
        entries = [
            PlanEntry(int(e["layer_index"]), str(e["kind"]), [int(i) for i in e["remove"]])
            for e in doc["layers"]
        ]
        return cls(entries, doc.get("threshold", 0), int(doc.get("samples_profiled", 0)))


# --- profiling --------------------------------------------------------------

_worker_engine: Engine | None = None


def _profile_worker_init(net: Network):
    global _worker_engine
    _worker_engine = Engine(net)


def _profile_one(engine: Engine, frames: FrameSequence):
    acc: dict[int, np.ndarray] = {}

    def observe(step, layer_index, spikes):
        if layer_index not in acc:
            acc[layer_index] = np.zeros(spikes.size, dtype=np.int64)
        acc[layer_index] += spikes.astype(np.int64)

    result = engine.run(frames, on_spikes=observe)
    return acc, result.predicted_class


def _profile_worker_run(frames: FrameSequence):
    assert _worker_engine is not None
    return _profile_one(_worker_engine, frames)


def profile_spikes(
    net: Network,
    dataset: list[FrameSequence],
    jobs: int = 1,
    return_predictions: bool = False,
):
    """Accumulate per-neuron spike counts over the dataset.

    Counts are summed over all samples and all time steps. With jobs > 1
    samples fan out across processes; integer summation makes the merged
    result independent of completion order.
    """
    if not dataset:
        raise ValueError("profiling dataset must not be empty")
    totals = {idx: np.zeros(int(np.prod(shape)), dtype=np.int64)
              for idx, shape in _lif_shapes(net).items()}
    predictions: list[int] = []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs, initializer=_profile_worker_init,
                                 initargs=(net,)) as pool:
            results = list(pool.map(_profile_worker_run, dataset))
    else:
        engine = Engine(net)
        results = [_profile_one(engine, frames) for frames in dataset]
    for acc, pred in results:
        for li, counts in acc.items():
            totals[li] += counts
        predictions.append(pred)
    profile = SpikeProfile(totals, len(dataset))
    if return_predictions:
        return profile, predictions
    return profile


def _lif_shapes(net: Network) -> dict[int, tuple[int, ...]]:
    trace = validate(net)
    return {
        i: trace[i][1]
        for i, layer in enumerate(net.layers)
        if isinstance(layer, LifSpec)
    }


# --- structure walking ------------------------------------------------------

def _feeding_weighted(net: Network, lif_index: int) -> tuple[str, int] | None:
    """The conv/linear layer driving this lif, looking back through pooling."""
    i = lif_index - 1
    while i >= 0 and isinstance(net.layers[i], MaxPool2dSpec):
        i -= 1
    if i >= 0 and isinstance(net.layers[i], Conv2dSpec):
        return ("conv", i)
    if i >= 0 and isinstance(net.layers[i], LinearSpec):
        return ("linear", i)
    return None


def _next_weighted(net: Network, index: int) -> int | None:
    """The first conv/linear layer after `index` (skipping lif/pool/flatten)."""
    for j in range(index + 1, len(net.layers)):
        if isinstance(net.layers[j], (Conv2dSpec, LinearSpec)):
            return j
    return None


def _flatten_spatial_between(net: Network, trace, a: int, b: int) -> int | None:
    """Per-channel flat block size at the flatten layer between a and b, if any."""
    for j in range(a + 1, b):
        if isinstance(net.layers[j], FlattenSpec):
            in_shape = trace[j][0]
            return int(np.prod(in_shape[1:]))
    return None


# --- plan selection ---------------------------------------------------------

def select_prunable(
    profile: SpikeProfile,
    net: Network,
    threshold: float = 0,
    aggregate: str = "sum",
) -> PrunePlan:
    """Pick filter groups / dense neurons with activity at or below threshold.

    Conv-fed spiking layers are grouped per source output channel; the
    group statistic is the sum of its neuron counts (or max with
    aggregate="max"). The output (class) layer is never considered. Raises
    PlanError if a selection would empty a layer.
    """
    if aggregate not in ("sum", "max"):
        raise ValueError(f"aggregate must be 'sum' or 'max', got {aggregate!r}")
    trace = validate(net)
    shapes = _lif_shapes(net)
    for li, counts in profile.counts.items():
        if li not in shapes:
            raise PlanError(f"profile references layer {li}, which is not a lif layer")
        want = int(np.prod(shapes[li]))
        if counts.size != want:
            raise PlanError(
                f"profile for layer {li} has {counts.size} neurons, network has {want}"
            )
    entries: list[PlanEntry] = []
    last = len(net.layers) - 1
    for li in sorted(profile.counts):
        if li == last:
            continue  # class readout is never pruned
        fed = _feeding_weighted(net, li)
        if fed is None:
            continue
        kind, widx = fed
        counts = profile.counts[li]
        if kind == "conv":
            channels = trace[li][0][0]
            grouped = counts.reshape(channels, -1)
            activity = grouped.sum(axis=1) if aggregate == "sum" else grouped.max(axis=1)
            remove = [int(c) for c in np.nonzero(activity <= threshold)[0]]
            if len(remove) == channels:
                raise PlanError(
                    f"threshold {threshold} would remove every channel of layer {widx} (conv2d)"
                )
            if remove:
                entries.append(PlanEntry(widx, "conv_channels", remove))
        else:
            remove = [int(i) for i in np.nonzero(counts <= threshold)[0]]
            if len(remove) == counts.size:
                raise PlanError(
                    f"threshold {threshold} would remove every neuron of layer {widx} (linear)"
                )
            if remove:
                entries.append(PlanEntry(widx, "neurons", remove))
    return PrunePlan(entries, threshold, profile.samples_profiled)


# --- network rewriting ------------------------------------------------------

def derive_input_removals(net: Network, plan: PrunePlan) -> dict[int, list[int]]:
    """Map each plan entry to the input-side removals of its downstream layer.

    Returns {layer_index: sorted input rows/channels/columns to delete},
    indices in the unpruned network's numbering.
    """
    trace = validate(net)
    removals: dict[int, list[int]] = {}
    for entry in plan.entries:
        k = entry.layer_index
        if not 0 <= k < len(net.layers):
            raise PlanError(f"plan references layer {k}, network has {len(net.layers)} layers")
        layer = net.layers[k]
        if entry.kind == "conv_channels":
            if not isinstance(layer, Conv2dSpec):
                raise PlanError(f"plan entry for layer {k} expects conv2d, found {layer.kind}")
            out_dim = layer.out_channels
        elif entry.kind == "neurons":
            if not isinstance(layer, LinearSpec):
                raise PlanError(f"plan entry for layer {k} expects linear, found {layer.kind}")
            out_dim = layer.out_features
        else:
            raise PlanError(f"unknown plan entry kind {entry.kind!r}")
        remove = sorted(set(entry.remove))
        if not remove:
            continue
        if remove[0] < 0 or remove[-1] >= out_dim:
            raise PlanError(f"plan for layer {k} removes out-of-range index (dim {out_dim})")
        if len(remove) >= out_dim:
            raise PlanError(f"plan would empty layer {k} ({len(remove)}/{out_dim} removed)")
        nxt = _next_weighted(net, k)
        if nxt is None:
            raise PlanError(
                f"layer {k} feeds the class readout; its outputs cannot be pruned"
            )
        nxt_layer = net.layers[nxt]
        if isinstance(layer, Conv2dSpec) and isinstance(nxt_layer, Conv2dSpec):
            cols = remove
        elif isinstance(layer, Conv2dSpec) and isinstance(nxt_layer, LinearSpec):
            block = _flatten_spatial_between(net, trace, k, nxt)
            if block is None:
                raise PlanError(f"no flatten between conv layer {k} and linear layer {nxt}")
            cols = [c * block + s for c in remove for s in range(block)]
        elif isinstance(layer, LinearSpec) and isinstance(nxt_layer, LinearSpec):
            cols = remove
        else:
            raise PlanError(
                f"cannot propagate removals from layer {k} ({layer.kind}) "
                f"into layer {nxt} ({nxt_layer.kind})"
            )
        removals.setdefault(nxt, [])
        removals[nxt] = sorted(set(removals[nxt]) | set(cols))
    return removals


def prune_network(net: Network, plan: PrunePlan) -> Network:
    """Apply a plan: drop output rows/bias entries and downstream inputs.

    Returns a new validated Network; the input network is untouched.
    """
    input_removals = derive_input_removals(net, plan)
    row_removals: dict[int, list[int]] = {}
    for entry in plan.entries:
        if entry.remove:
            prev = set(row_removals.get(entry.layer_index, []))
            row_removals[entry.layer_index] = sorted(prev | set(entry.remove))
    out = copy_network(net)
    for idx, layer in enumerate(out.layers):
        rows = row_removals.get(idx)
        cols = input_removals.get(idx)
        if not rows and not cols:
            continue
        if isinstance(layer, Conv2dSpec):
            w = layer.weights.nd
            b = layer.bias.nd
            if rows:
                w = np.delete(w, rows, axis=0)
                b = np.delete(b, rows, axis=0)
                layer.out_channels -= len(rows)
            if cols:
                if max(cols) >= layer.in_channels:
                    raise PlanError(f"derived input removal out of range for layer {idx}")
                w = np.delete(w, cols, axis=1)
                layer.in_channels -= len(cols)
            layer.weights = Tensor.from_array(w)
            layer.bias = Tensor.from_array(b)
        elif isinstance(layer, LinearSpec):
            w = layer.weights.nd
            b = layer.bias.nd
            if rows:
                w = np.delete(w, rows, axis=0)
                b = np.delete(b, rows, axis=0)
                layer.out_features -= len(rows)
            if cols:
                if max(cols) >= layer.in_features:
                    raise PlanError(f"derived input removal out of range for layer {idx}")
                w = np.delete(w, cols, axis=1)
                layer.in_features -= len(cols)
            layer.weights = Tensor.from_array(w)
            layer.bias = Tensor.from_array(b)
        else:
            raise PlanError(f"plan touches layer {idx} ({layer.kind}), which has no weights")
    try:
        validate(out)
    except ValidationError as e:
        raise PlanError(f"pruned network fails validation: {e}") from None
    return out


# --- operation accounting ---------------------------------------------------

@dataclass
class MacRow:
    layer_index: int
    kind: str
    macs: int = 0
    comparisons: int = 0
    updates: int = 0


@dataclass
class MacReport:
    rows: list[MacRow]

    @property
    def total_macs(self) -> int:
        return sum(r.macs for r in self.rows)

    @property
    def conv_macs(self) -> int:
        return sum(r.macs for r in self.rows if r.kind == "conv2d")

    @property
    def total_comparisons(self) -> int:
        return sum(r.comparisons for r in self.rows)

    @property
    def total_updates(self) -> int:
        return sum(r.updates for r in self.rows)


def mac_count(net: Network) -> MacReport:
    """Multiply-accumulate counts per simulation step, by layer.

    Pooling contributes comparisons and lif layers contribute state
    updates; both are tallied separately from MACs.
    """
    trace = validate(net)
    rows = []
    for i, layer in enumerate(net.layers):
        in_shape, out_shape = trace[i]
        if isinstance(layer, Conv2dSpec):
            o, oh, ow = out_shape
            macs = o * oh * ow * layer.in_channels * layer.kernel[0] * layer.kernel[1]
            rows.append(MacRow(i, "conv2d", macs=macs))
        elif isinstance(layer, LinearSpec):
            rows.append(MacRow(i, "linear", macs=layer.out_features * layer.in_features))
        elif isinstance(layer, MaxPool2dSpec):
            c, oh, ow = out_shape
            per_window = layer.kernel[0] * layer.kernel[1] - 1
            rows.append(MacRow(i, "maxpool2d", comparisons=c * oh * ow * per_window))
        elif isinstance(layer, LifSpec):
            rows.append(MacRow(i, "lif", updates=int(np.prod(out_shape))))
        else:
            rows.append(MacRow(i, "flatten"))
    return MacReport(rows)
