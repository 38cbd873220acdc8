"""Convert a torch-trained spiking network into the runtime's model JSON.

Supported stack modules: Conv2d, Linear, MaxPool2d, Flatten, and the
package's Leaky cell. The document layout follows the runtime's published
schema; weights are flattened row-major (torch's native layout) and LIF
beta/threshold/reset are copied from the cell's configuration, written
explicitly so nothing relies on loader defaults.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import torch
from torch import nn

from .lif import Leaky

FORMAT_VERSION = 1


class UnsupportedLayerError(Exception):
    """The model contains a layer kind the schema cannot express."""


def _pair(value) -> list[int]:
    if isinstance(value, int):
        return [value, value]
    return [int(value[0]), int(value[1])]


def _floats(tensor: torch.Tensor) -> list[float]:
    return [float(v) for v in tensor.detach().cpu().flatten().tolist()]


def _conv_obj(index: int, m: nn.Conv2d) -> dict:
    if m.groups != 1:
        raise UnsupportedLayerError(f"layer {index}: grouped convolution is not supported")
    if _pair(m.dilation) != [1, 1]:
        raise UnsupportedLayerError(f"layer {index}: dilated convolution is not supported")
    if not isinstance(m.padding, (int, tuple, list)):
        raise UnsupportedLayerError(f"layer {index}: string padding modes are not supported")
    bias = m.bias if m.bias is not None else torch.zeros(m.out_channels)
    return {
        "type": "conv2d",
        "in_channels": int(m.in_channels),
        "out_channels": int(m.out_channels),
        "kernel": _pair(m.kernel_size),
        "stride": _pair(m.stride),
        "padding": _pair(m.padding),
        "weights": _floats(m.weight),
        "bias": _floats(bias),
    }


def _linear_obj(index: int, m: nn.Linear) -> dict:
    bias = m.bias if m.bias is not None else torch.zeros(m.out_features)
    return {
        "type": "linear",
        "in_features": int(m.in_features),
        "out_features": int(m.out_features),
        "weights": _floats(m.weight),
        "bias": _floats(bias),
    }


def _pool_obj(index: int, m: nn.MaxPool2d) -> dict:
    if _pair(m.padding) != [0, 0]:
        raise UnsupportedLayerError(f"layer {index}: padded max-pooling is not supported")
    if (m.dilation if isinstance(m.dilation, int) else max(m.dilation)) != 1:
        raise UnsupportedLayerError(f"layer {index}: dilated max-pooling is not supported")
    stride = m.stride if m.stride is not None else m.kernel_size
    return {"type": "maxpool2d", "kernel": _pair(m.kernel_size), "stride": _pair(stride)}


def _lif_obj(index: int, m: Leaky) -> dict:
    return {
        "type": "lif",
        "beta": float(m.beta),
        "threshold": float(m.threshold),
        "reset": m.reset,
    }


@dataclass
class ExportManifest:
    model: nn.Module
    entries: list[tuple[int, str, nn.Module]]
    input_shape: tuple[int, int, int]
    num_steps: int


def build_manifest(model: nn.Module, input_shape, num_steps: int) -> ExportManifest:
    """Map each stack layer to a schema layer kind, or abort naming the layer."""
    if isinstance(model, nn.Sequential):
        stack = list(model)
    else:
        raise UnsupportedLayerError(
            f"expected an nn.Sequential stack, got {type(model).__name__}"
        )
    entries = []
    for index, layer in enumerate(stack):
        if isinstance(layer, nn.Conv2d):
            kind = "conv2d"
        elif isinstance(layer, nn.Linear):
            kind = "linear"
        elif isinstance(layer, nn.MaxPool2d):
            kind = "maxpool2d"
        elif isinstance(layer, nn.Flatten):
            kind = "flatten"
        elif isinstance(layer, Leaky):
            kind = "lif"
        else:
            raise UnsupportedLayerError(
                f"layer {index}: {type(layer).__name__} has no schema equivalent"
            )
        entries.append((index, kind, layer))
    if len(input_shape) != 3 or any(int(d) < 1 for d in input_shape):
        raise ValueError(f"input_shape must be [C, H, W], got {list(input_shape)}")
    if num_steps < 1:
        raise ValueError(f"num_steps must be >= 1, got {num_steps}")
    return ExportManifest(model, entries, tuple(int(d) for d in input_shape), num_steps)


_EMITTERS = {
    "conv2d": _conv_obj,
    "linear": _linear_obj,
    "maxpool2d": _pool_obj,
    "lif": _lif_obj,
    "flatten": lambda index, m: {"type": "flatten"},
}


def export_document(manifest: ExportManifest) -> dict:
    """Build the model document; runs the stack once to catch shape errors."""
    dummy = torch.zeros((1, 1) + manifest.input_shape)
    try:
        run_steps(manifest.model, dummy)
    except Exception as e:
        raise UnsupportedLayerError(f"shape inference failed on a dummy input: {e}") from None
    return {
        "format_version": FORMAT_VERSION,
        "input_shape": list(manifest.input_shape),
        "num_steps": manifest.num_steps,
        "layers": [_EMITTERS[kind](index, m) for index, kind, m in manifest.entries],
    }


def export_model(model: nn.Module, input_shape, num_steps: int, out_path: str) -> dict:
    """Export a trained stack to a JSON file loadable by the inference runtime."""
    manifest = build_manifest(model, input_shape, num_steps)
    doc = export_document(manifest)
    with open(out_path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, separators=(",", ":"))
    return doc


def run_steps_train(model: nn.Sequential, frames: torch.Tensor) -> torch.Tensor:
    """Framework-side forward with gradients (BPTT): feed frames
    [T, B, C, H, W], return spike counts [B, classes] over the window."""
    mems: dict[int, torch.Tensor | None] = {
        i: None for i, m in enumerate(model) if isinstance(m, Leaky)
    }
    counts = None
    for t in range(frames.shape[0]):
        x = frames[t]
        for i, layer in enumerate(model):
            if isinstance(layer, Leaky):
                x, mems[i] = layer(x, mems[i])
            else:
                x = layer(x)
        counts = x if counts is None else counts + x
    return counts


@torch.no_grad()
def run_steps(model: nn.Sequential, frames: torch.Tensor) -> torch.Tensor:
    """Framework-side inference (no gradients)."""
    return run_steps_train(model, frames)
