"""Exporter: torch-trained spiking network stacks to the runtime's JSON schema."""

from .export import (
    ExportManifest,
    UnsupportedLayerError,
    build_manifest,
    export_document,
    export_model,
    run_steps,
    run_steps_train,
)
from .lif import Leaky

__all__ = [
    "ExportManifest",
    "Leaky",
    "UnsupportedLayerError",
    "build_manifest",
    "export_document",
    "export_model",
    "run_steps",
    "run_steps_train",
]
