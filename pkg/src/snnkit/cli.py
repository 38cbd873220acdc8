"""Command-line entry point for the full pipeline.

Subcommands: run (single-sample inference), profile (spike counting over a
dataset directory), prune (threshold-based structural pruning), bench
(latency measurement), convert (event file to frame dump), validate
(shape trace). Exit codes: 0 success, 1 runtime/validation failure,
2 usage or file errors. Every failure prints one `error: ...` line to
standard error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import re
import sys
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from . import events as events_mod
from . import model as model_mod
from . import pruning as pruning_mod
from .engine import Engine
from .errors import SnnKitError
from .events import FrameSequence
from .tensor import Tensor

_LABEL_RE = re.compile(r"_(\d)\.(bin|csv)$")


class _FileError(Exception):
    """I/O-level failure: maps to exit code 2."""


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise _FileError(f"cannot read {path}: {e.strerror or e}") from None


def _read_bytes(path: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as e:
        raise _FileError(f"cannot read {path}: {e.strerror or e}") from None


def _write_text(path: str, text: str):
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as e:
        raise _FileError(f"cannot write {path}: {e.strerror or e}") from None


def _load_model(path: str) -> model_mod.Network:
    return model_mod.load_model(_read_text(path))


def _load_stream(path: str, sensor_shape) -> events_mod.EventStream:
    if path.endswith(".csv"):
        if sensor_shape is None:
            raise _FileError(f"{path}: CSV events need a sensor shape (from model or --sensor-shape)")
        return events_mod.load_events_csv(_read_text(path), sensor_shape)
    return events_mod.load_events_nmnist(_read_bytes(path))


def _load_frames(path: str, net: model_mod.Network, args) -> FrameSequence:
    """Events (.bin/.csv) are binned per flags; .json is a pre-binned frame dump."""
    if path.endswith(".json"):
        try:
            tensor = Tensor.from_json_obj(json.loads(_read_text(path)))
        except (KeyError, ValueError, TypeError, json.JSONDecodeError) as e:
            raise SnnKitError(f"{path}: not a valid frame dump: {e}") from None
        return FrameSequence(tensor, 0)
    c, h, w = net.input_shape.dims
    stream = _load_stream(path, (h, w))
    return events_mod.bin_to_frames(
        stream,
        args.frames if args.frames is not None else net.num_steps,
        binarize=args.binarize,
        merge_polarity=(c == 1),
    )


def _print_result(result, fmt: str):
    if fmt == "json":
        print(json.dumps({
            "predicted_class": result.predicted_class,
            "class_spike_counts": result.counts_list(),
            "per_layer_spike_totals": result.per_layer_spike_totals,
        }))
    else:
        print(f"predicted class: {result.predicted_class}")
        print("class spike counts: " + " ".join(str(v) for v in result.counts_list()))


def cmd_run(args) -> int:
    net = _load_model(args.model)
    frames = _load_frames(args.events, net, args)
    engine = Engine(net)
    raster = None
    observer = None
    if args.dump_raster:
        raster = open(args.dump_raster, "w", encoding="utf-8")
        raster.write("step,layer_index,neuron_index\n")

        def observer(step, layer_index, spikes):
            for n in np.nonzero(spikes)[0]:
                raster.write(f"{step},{layer_index},{int(n)}\n")

    try:
        result = engine.run(frames, on_spikes=observer)
    finally:
        if raster:
            raster.close()
    _print_result(result, args.format)
    return 0


def _dataset_files(directory: str) -> list[Path]:
    root = Path(directory)
    if not root.is_dir():
        raise _FileError(f"{directory}: not a directory")
    files = sorted(p for p in root.iterdir() if p.suffix in (".bin", ".csv"))
    if not files:
        raise _FileError(f"{directory}: no .bin or .csv event files found")
    return files


def _label_of(path: Path) -> int | None:
    m = _LABEL_RE.search(path.name)
    return int(m.group(1)) if m else None


def cmd_profile(args) -> int:
    net = _load_model(args.model)
    c, h, w = net.input_shape.dims
    files = _dataset_files(args.data)
    dataset = []
    for p in files:
        stream = _load_stream(str(p), (h, w))
        dataset.append(events_mod.bin_to_frames(
            stream,
            args.frames if args.frames is not None else net.num_steps,
            binarize=args.binarize,
            merge_polarity=(c == 1),
        ))
    profile, predictions = pruning_mod.profile_spikes(
        net, dataset, jobs=args.jobs, return_predictions=True
    )
    _write_text(args.out, profile.to_json())
    print(f"profiled {profile.samples_profiled} samples -> {args.out}")
    for li in sorted(profile.counts):
        counts = profile.counts[li]
        silent = int((counts == 0).sum())
        print(f"layer {li} (lif): {counts.size} neurons, {silent} silent, "
              f"{int(counts.sum())} total spikes")
    labels = [_label_of(p) for p in files]
    if all(lb is not None for lb in labels):
        hits = sum(1 for lb, pred in zip(labels, predictions) if lb == pred)
        print(f"accuracy on profiled set: {hits}/{len(labels)}")
    return 0


def cmd_prune(args) -> int:
    net = _load_model(args.model)
    profile = pruning_mod.SpikeProfile.from_json(_read_text(args.profile))
    if args.threshold > 0:
        print(
            f"warning: threshold {args.threshold} > 0 removes neurons that did spike; "
            f"re-validate accuracy on held-out data",
            file=sys.stderr,
        )
    plan = pruning_mod.select_prunable(profile, net, args.threshold, aggregate=args.aggregate)
    pruned = pruning_mod.prune_network(net, plan)
    _write_text(args.out, model_mod.save_model(pruned))
    if args.plan_out:
        _write_text(args.plan_out, plan.to_json())
    if plan.empty:
        print("nothing to prune (all groups above threshold)")
        return 0
    before, after = pruning_mod.mac_count(net), pruning_mod.mac_count(pruned)
    mem_before = bench_mod.estimate_memory(net).total_bytes
    mem_after = bench_mod.estimate_memory(pruned).total_bytes
    for entry in plan.entries:
        total = (
            net.layers[entry.layer_index].out_channels
            if entry.kind == "conv_channels"
            else net.layers[entry.layer_index].out_features
        )
        unit = "channels" if entry.kind == "conv_channels" else "neurons"
        print(f"layer {entry.layer_index}: removed {len(entry.remove)}/{total} {unit}")
    if before.conv_macs:
        delta = 100.0 * (before.conv_macs - after.conv_macs) / before.conv_macs
        print(f"conv MACs: {before.conv_macs} -> {after.conv_macs} (-{delta:.1f}%)")
    print(f"total MACs: {before.total_macs} -> {after.total_macs}")
    print(f"memory estimate: {mem_before} -> {mem_after} bytes")
    return 0


def cmd_bench(args) -> int:
    net = _load_model(args.model)
    frames = _load_frames(args.events, net, args)
    report = bench_mod.bench_inference(
        net, frames, runs=args.runs, label=args.label, per_layer=args.per_layer
    )
    report.model_hash = hashlib.sha256(_read_bytes(args.model)).hexdigest()
    if args.format == "json":
        out = report.to_json()
    elif args.format == "csv":
        out = report.CSV_HEADER + "\n" + report.to_csv_row()
    else:
        out = (
            f"label: {report.label or args.model}\n"
            f"runs: {report.runs}\n"
            f"mean latency: {report.mean_latency_s * 1e3:.3f} ms\n"
            f"min/max: {report.min_latency_s * 1e3:.3f} / {report.max_latency_s * 1e3:.3f} ms\n"
            f"stddev: {report.stddev_latency_s * 1e3:.3f} ms\n"
            f"MACs per step: {report.mac_total}\n"
            f"memory estimate: {report.memory_estimate_bytes} bytes"
        )
        if report.per_layer_time_s is not None:
            lines = [
                f"  layer {i} ({layer.kind}): {t * 1e3:.3f} ms"
                for i, (layer, t) in enumerate(zip(net.layers, report.per_layer_time_s))
            ]
            out += "\nper-layer time (one inference):\n" + "\n".join(lines)
    if args.out:
        _write_text(args.out, out + "\n")
    else:
        print(out)
    return 0


def cmd_convert(args) -> int:
    sensor = tuple(args.sensor_shape) if args.sensor_shape else None
    stream = _load_stream(args.events, sensor)
    frames = events_mod.bin_to_frames(
        stream, args.frames, binarize=args.binarize, merge_polarity=args.merge_polarity
    )
    _write_text(args.out, json.dumps(frames.frames.to_json_obj(), separators=(",", ":")))
    shape = frames.frames.shape.dims
    print(f"wrote {shape[0]} frames of shape {list(shape[1:])} "
          f"(bin width {frames.bin_width_us} us) -> {args.out}")
    return 0


def cmd_validate(args) -> int:
    net = _load_model(args.model)
    trace = model_mod.validate(net)
    print(f"format_version: {net.format_version}")
    print(f"input shape: {list(net.input_shape.dims)}, num_steps: {net.num_steps}")
    for i, (layer, (ish, osh)) in enumerate(zip(net.layers, trace)):
        print(f"layer {i:2d} {layer.kind:10s} {str(list(ish)):>16s} -> {list(osh)}")
    print("ok")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="snnkit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add_frame_flags(p):
        p.add_argument("--frames", type=int, default=None,
                       help="time steps to bin events into (default: model num_steps)")
        p.add_argument("--binarize", action="store_true",
                       help="clamp frame cells to {0,1} instead of event counts")

    p = sub.add_parser("run", help="run one inference and print the prediction")
    p.add_argument("--model", required=True)
    p.add_argument("--events", required=True,
                   help="event file (.bin/.csv) or pre-binned frame dump (.json)")
    add_frame_flags(p)
    p.add_argument("--dump-raster", metavar="CSV",
                   help="write step,layer_index,neuron_index lines for every spike")
    p.add_argument("--format", choices=("table", "json"), default="table")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("profile", help="record per-neuron spike counts over a dataset directory")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True, help="directory of .bin/.csv event files")
    p.add_argument("--out", required=True, help="spike profile JSON output path")
    add_frame_flags(p)
    p.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("prune", help="remove inactive filter groups and rewrite the model")
    p.add_argument("--model", required=True)
    p.add_argument("--profile", required=True, help="spike profile JSON from `profile`")
    p.add_argument("--threshold", type=float, default=0,
                   help="max spike activity to prune (default 0: only silent groups)")
    p.add_argument("--aggregate", choices=("sum", "max"), default="sum",
                   help="channel group statistic (default sum)")
    p.add_argument("--out", required=True, help="pruned model JSON output path")
    p.add_argument("--plan-out", help="also write the prune plan JSON")
    p.set_defaults(func=cmd_prune)

    p = sub.add_parser("bench", help="time repeated inference of one sample")
    p.add_argument("--model", required=True)
    p.add_argument("--events", required=True)
    add_frame_flags(p)
    p.add_argument("--runs", type=int, default=bench_mod.DEFAULT_RUNS)
    p.add_argument("--label", default="")
    p.add_argument("--per-layer", action="store_true", help="include a per-layer time breakdown")
    p.add_argument("--format", choices=("table", "json", "csv"), default="table")
    p.add_argument("--out", help="write the report to a file instead of stdout")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("convert", help="bin an event file into a frame dump JSON")
    p.add_argument("events", help="event file (.bin or .csv)")
    p.add_argument("--frames", type=int, required=True)
    p.add_argument("--binarize", action="store_true")
    p.add_argument("--merge-polarity", action="store_true",
                   help="single input channel instead of one per polarity")
    p.add_argument("--sensor-shape", type=int, nargs=2, metavar=("H", "W"),
                   help="sensor grid size (required for .csv)")
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("validate", help="print the per-layer shape trace")
    p.add_argument("model")
    p.set_defaults(func=cmd_validate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _FileError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (SnnKitError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
