"""Network domain types and JSON (de)serialization.

The model file is a single UTF-8 JSON document:

    {"format_version": 1,
     "input_shape": [C, H, W],
     "num_steps": T,
     "layers": [
       {"type": "conv2d", "in_channels": I, "out_channels": O,
        "kernel": [KH, KW], "stride": [SH, SW], "padding": [PH, PW],
        "weights": [O*I*KH*KW floats, row-major], "bias": [O floats]},
       {"type": "lif", "beta": B, "threshold": TH, "reset": "subtract"|"zero"},
       {"type": "maxpool2d", "kernel": [KH, KW], "stride": [SH, SW]},
       {"type": "flatten"},
       {"type": "linear", "in_features": I, "out_features": O,
        "weights": [O*I floats], "bias": [O floats]}]}

Unknown keys and unknown format versions are rejected so that exporter
drift surfaces immediately. Weights are 32-bit floats; loading parses the
JSON number and rounds once to float32, which reproduces the original
value exactly from its shortest decimal representation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ModelFormatError, ValidationError
from .tensor import Shape, Tensor

FORMAT_VERSION = 1

DEFAULT_LIF_THRESHOLD = 1.0
DEFAULT_LIF_RESET = "subtract"


@dataclass
class Conv2dSpec:
    in_channels: int
    out_channels: int
    kernel: tuple[int, int]
    stride: tuple[int, int]
    padding: tuple[int, int]
    weights: Tensor  # [out_channels, in_channels, kh, kw]
    bias: Tensor  # [out_channels]

    kind = "conv2d"

    def check(self):
        kh, kw = self.kernel
        if min(self.in_channels, self.out_channels, kh, kw) < 1:
            raise ValidationError("conv2d channel and kernel extents must be >= 1")
        if min(self.stride) < 1:
            raise ValidationError("conv2d stride components must be >= 1")
        if min(self.padding) < 0:
            raise ValidationError("conv2d padding components must be >= 0")
        want = (self.out_channels, self.in_channels, kh, kw)
        if self.weights.shape.dims != want:
            raise ValidationError(f"conv2d weights shape {self.weights.shape.dims} != {want}")
        if self.bias.shape.dims != (self.out_channels,):
            raise ValidationError(f"conv2d bias length != out_channels ({self.out_channels})")


@dataclass
class LinearSpec:
    in_features: int
    out_features: int
    weights: Tensor  # [out_features, in_features]
    bias: Tensor  # [out_features]

    kind = "linear"

    def check(self):
        if min(self.in_features, self.out_features) < 1:
            raise ValidationError("linear feature counts must be >= 1")
        want = (self.out_features, self.in_features)
        if self.weights.shape.dims != want:
            raise ValidationError(f"linear weights shape {self.weights.shape.dims} != {want}")
        if self.bias.shape.dims != (self.out_features,):
            raise ValidationError(f"linear bias length != out_features ({self.out_features})")


@dataclass
class MaxPool2dSpec:
    kernel: tuple[int, int]
    stride: tuple[int, int]

    kind = "maxpool2d"

    def check(self):
        if min(self.kernel) < 1 or min(self.stride) < 1:
            raise ValidationError("maxpool2d kernel and stride components must be >= 1")


@dataclass
class LifSpec:
    beta: float
    threshold: float = DEFAULT_LIF_THRESHOLD
    reset_mode: str = DEFAULT_LIF_RESET

    kind = "lif"

    def check(self):
        if not 0.0 <= self.beta <= 1.0:
            raise ValidationError(f"lif beta must be in [0, 1], got {self.beta}")
        if not self.threshold > 0.0:
            raise ValidationError(f"lif threshold must be > 0, got {self.threshold}")
        if self.reset_mode not in ("subtract", "zero"):
            raise ValidationError(f"lif reset mode must be 'subtract' or 'zero', got {self.reset_mode!r}")


@dataclass
class FlattenSpec:
    kind = "flatten"

    def check(self):
        pass


LayerSpec = Conv2dSpec | LinearSpec | MaxPool2dSpec | LifSpec | FlattenSpec


@dataclass
class Network:
    input_shape: Shape  # [C, H, W]
    num_steps: int
    layers: list[LayerSpec] = field(default_factory=list)
    format_version: int = FORMAT_VERSION


def conv_out_extent(size: int, kernel: int, stride: int, padding: int) -> int:
    return (size + 2 * padding - kernel) // stride + 1


def validate(net: Network) -> list[tuple[tuple[int, ...], tuple[int, ...]]]:
    """Run shape inference over the layer stack.

    Returns the per-layer (input_shape, output_shape) trace. Raises
    ValidationError naming the first offending layer. An empty layer list
    is accepted (serialization tooling); a non-empty network must end in a
    lif layer, which is the spike-count readout.
    """
    trace: list[tuple[tuple[int, ...], tuple[int, ...]]] = []
    shape = net.input_shape.dims
    if len(shape) != 3:
        raise ValidationError(f"input_shape must be [C, H, W], got {list(shape)}")
    for i, layer in enumerate(net.layers):
        try:
            layer.check()
        except ValidationError as e:
            raise ValidationError(f"layer {i} ({layer.kind}): {e}") from None
        if isinstance(layer, Conv2dSpec):
            if len(shape) != 3:
                raise ValidationError(f"layer {i} (conv2d): needs [C, H, W] input, got {list(shape)}")
            c, h, w = shape
            if c != layer.in_channels:
                raise ValidationError(
                    f"layer {i} (conv2d): input has {c} channels, layer expects {layer.in_channels}"
                )
            oh = conv_out_extent(h, layer.kernel[0], layer.stride[0], layer.padding[0])
            ow = conv_out_extent(w, layer.kernel[1], layer.stride[1], layer.padding[1])
            if oh < 1 or ow < 1:
                raise ValidationError(f"layer {i} (conv2d): kernel larger than padded input {h}x{w}")
            out = (layer.out_channels, oh, ow)
        elif isinstance(layer, MaxPool2dSpec):
            if len(shape) != 3:
                raise ValidationError(f"layer {i} (maxpool2d): needs [C, H, W] input, got {list(shape)}")
            c, h, w = shape
            if h < layer.kernel[0] or w < layer.kernel[1]:
                raise ValidationError(f"layer {i} (maxpool2d): input {h}x{w} smaller than kernel")
            oh = (h - layer.kernel[0]) // layer.stride[0] + 1
            ow = (w - layer.kernel[1]) // layer.stride[1] + 1
            out = (c, oh, ow)
        elif isinstance(layer, FlattenSpec):
            n = 1
            for d in shape:
                n *= d
            out = (n,)
        elif isinstance(layer, LinearSpec):
            if len(shape) != 1:
                raise ValidationError(
                    f"layer {i} (linear): needs flat input, got {list(shape)} (missing flatten?)"
                )
            if shape[0] != layer.in_features:
                raise ValidationError(
                    f"layer {i} (linear): input length {shape[0]} != in_features {layer.in_features}"
                )
            out = (layer.out_features,)
        elif isinstance(layer, LifSpec):
            out = shape
        else:
            raise ValidationError(f"layer {i}: unknown layer kind {type(layer).__name__}")
        trace.append((shape, out))
        shape = out
    if net.layers and not isinstance(net.layers[-1], LifSpec):
        raise ValidationError(
            f"final layer must be lif (spike-count readout), got {net.layers[-1].kind}"
        )
    return trace


# --- JSON loading ---------------------------------------------------------

_LAYER_FIELDS = {
    "conv2d": {"type", "in_channels", "out_channels", "kernel", "stride", "padding", "weights", "bias"},
    "lif": {"type", "beta", "threshold", "reset"},
    "maxpool2d": {"type", "kernel", "stride"},
    "flatten": {"type"},
    "linear": {"type", "in_features", "out_features", "weights", "bias"},
}
_LAYER_OPTIONAL = {"lif": {"threshold", "reset"}}
_TOP_FIELDS = {"format_version", "input_shape", "num_steps", "layers"}


def _reject_constant(name):
    raise ModelFormatError(f"non-finite number {name!r} not allowed in model documents")


def _require_int(obj, field_name, where, minimum=None):
    v = obj[field_name]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ModelFormatError(f"{where}: field '{field_name}' must be an integer")
    if minimum is not None and v < minimum:
        raise ModelFormatError(f"{where}: field '{field_name}' must be >= {minimum}, got {v}")
    return v


def _require_number(obj, field_name, where):
    v = obj[field_name]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ModelFormatError(f"{where}: field '{field_name}' must be a number")
    return float(v)


def _require_int_pair(obj, field_name, where, minimum):
    v = obj[field_name]
    if (
        not isinstance(v, list)
        or len(v) != 2
        or any(isinstance(x, bool) or not isinstance(x, int) or x < minimum for x in v)
    ):
        raise ModelFormatError(
            f"{where}: field '{field_name}' must be a pair of integers >= {minimum}"
        )
    return (v[0], v[1])


def _require_floats(obj, field_name, where, count):
    v = obj[field_name]
    if not isinstance(v, list):
        raise ModelFormatError(f"{where}: field '{field_name}' must be an array of numbers")
    if len(v) != count:
        raise ModelFormatError(
            f"{where}: field '{field_name}' has {len(v)} values, expected {count}"
        )
    for x in v:
        if isinstance(x, bool) or not isinstance(x, (int, float)):
            raise ModelFormatError(f"{where}: field '{field_name}' must contain only numbers")
    with np.errstate(over="ignore"):
        arr = np.asarray(v, dtype=np.float32)
    if not np.isfinite(arr).all():
        raise ModelFormatError(f"{where}: field '{field_name}' contains non-finite values")
    return arr


def _check_fields(obj, where, allowed, optional=frozenset()):
    unknown = set(obj) - allowed
    if unknown:
        raise ModelFormatError(f"{where}: unknown field(s) {sorted(unknown)}")
    missing = allowed - set(obj) - optional
    if missing:
        raise ModelFormatError(f"{where}: missing field(s) {sorted(missing)}")


def _load_layer(obj, index: int) -> LayerSpec:
    where = f"layer {index}"
    if not isinstance(obj, dict):
        raise ModelFormatError(f"{where}: must be an object")
    kind = obj.get("type")
    if kind not in _LAYER_FIELDS:
        raise ModelFormatError(f"{where}: unknown layer type {kind!r}")
    _check_fields(obj, f"{where} ({kind})", _LAYER_FIELDS[kind], _LAYER_OPTIONAL.get(kind, frozenset()))
    where = f"{where} ({kind})"
    if kind == "conv2d":
        ic = _require_int(obj, "in_channels", where, 1)
        oc = _require_int(obj, "out_channels", where, 1)
        kernel = _require_int_pair(obj, "kernel", where, 1)
        stride = _require_int_pair(obj, "stride", where, 1)
        padding = _require_int_pair(obj, "padding", where, 0)
        w = _require_floats(obj, "weights", where, oc * ic * kernel[0] * kernel[1])
        b = _require_floats(obj, "bias", where, oc)
        return Conv2dSpec(
            ic, oc, kernel, stride, padding,
            Tensor(Shape((oc, ic, kernel[0], kernel[1])), w),
            Tensor(Shape((oc,)), b),
        )
    if kind == "linear":
        inf = _require_int(obj, "in_features", where, 1)
        outf = _require_int(obj, "out_features", where, 1)
        w = _require_floats(obj, "weights", where, outf * inf)
        b = _require_floats(obj, "bias", where, outf)
        return LinearSpec(inf, outf, Tensor(Shape((outf, inf)), w), Tensor(Shape((outf,)), b))
    if kind == "maxpool2d":
        return MaxPool2dSpec(
            _require_int_pair(obj, "kernel", where, 1),
            _require_int_pair(obj, "stride", where, 1),
        )
    if kind == "flatten":
        return FlattenSpec()
    # lif
    beta = _require_number(obj, "beta", where)
    threshold = _require_number(obj, "threshold", where) if "threshold" in obj else DEFAULT_LIF_THRESHOLD
    reset = obj.get("reset", DEFAULT_LIF_RESET)
    if not isinstance(reset, str):
        raise ModelFormatError(f"{where}: field 'reset' must be a string")
    spec = LifSpec(beta, threshold, reset)
    try:
        spec.check()
    except ValidationError as e:
        raise ModelFormatError(f"{where}: {e}") from None
    return spec


def load_model(text: str) -> Network:
    """Parse a model JSON document into a validated Network."""
    try:
        doc = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as e:
        raise ModelFormatError(f"malformed JSON at line {e.lineno} column {e.colno}: {e.msg}") from None
    if not isinstance(doc, dict):
        raise ModelFormatError("top-level document must be an object")
    _check_fields(doc, "document", _TOP_FIELDS)
    version = _require_int(doc, "format_version", "document")
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported format_version {version} (loader knows {FORMAT_VERSION})")
    ishape = doc["input_shape"]
    if (
        not isinstance(ishape, list)
        or len(ishape) != 3
        or any(isinstance(x, bool) or not isinstance(x, int) or x < 1 for x in ishape)
    ):
        raise ModelFormatError("document: field 'input_shape' must be [C, H, W] positive integers")
    num_steps = _require_int(doc, "num_steps", "document", 1)
    if not isinstance(doc["layers"], list):
        raise ModelFormatError("document: field 'layers' must be an array")
    layers = [_load_layer(obj, i) for i, obj in enumerate(doc["layers"])]
    net = Network(Shape(tuple(ishape)), num_steps, layers, version)
    validate(net)
    return net


# --- JSON saving ----------------------------------------------------------

def _floats(t: Tensor) -> list[float]:
    # float32 -> float64 is exact, and json emits the shortest float64
    # decimal, so load_model reproduces every value bit-for-bit.
    return [float(v) for v in t.data]


def _layer_obj(layer: LayerSpec) -> dict:
    if isinstance(layer, Conv2dSpec):
        return {
            "type": "conv2d",
            "in_channels": layer.in_channels,
            "out_channels": layer.out_channels,
            "kernel": list(layer.kernel),
            "stride": list(layer.stride),
            "padding": list(layer.padding),
            "weights": _floats(layer.weights),
            "bias": _floats(layer.bias),
        }
    if isinstance(layer, LinearSpec):
        return {
            "type": "linear",
            "in_features": layer.in_features,
            "out_features": layer.out_features,
            "weights": _floats(layer.weights),
            "bias": _floats(layer.bias),
        }
    if isinstance(layer, MaxPool2dSpec):
        return {"type": "maxpool2d", "kernel": list(layer.kernel), "stride": list(layer.stride)}
    if isinstance(layer, FlattenSpec):
        return {"type": "flatten"}
    if isinstance(layer, LifSpec):
        # defaults written out explicitly so round-trips are field-identical
        return {
            "type": "lif",
            "beta": float(layer.beta),
            "threshold": float(layer.threshold),
            "reset": layer.reset_mode,
        }
    raise ModelFormatError(f"cannot serialize layer kind {type(layer).__name__}")


def save_model(net: Network) -> str:
    """Serialize a Network to its JSON document (deterministic byte output)."""
    if net.layers:
        validate(net)
    doc = {
        "format_version": net.format_version,
        "input_shape": list(net.input_shape.dims),
        "num_steps": net.num_steps,
        "layers": [_layer_obj(layer) for layer in net.layers],
    }
    return json.dumps(doc, separators=(",", ":"))


def copy_network(net: Network) -> Network:
    """Deep copy; layer tensors are duplicated so mutation cannot leak."""
    layers: list[LayerSpec] = []
    for layer in net.layers:
        if isinstance(layer, (Conv2dSpec, LinearSpec)):
            layers.append(replace(layer, weights=layer.weights.copy(), bias=layer.bias.copy()))
        else:
            layers.append(replace(layer))
    return Network(net.input_shape, net.num_steps, layers, net.format_version)
