"""Command-line exporter: torch checkpoint (full pickled module) to model JSON."""

import argparse
import sys

import torch

from .export import UnsupportedLayerError, export_model


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="snn-export",
        description="Export a torch-trained spiking network stack to model JSON.",
    )
    parser.add_argument("--model", required=True,
                        help="checkpoint saved with torch.save(model) (full module)")
    parser.add_argument("--input-shape", type=int, nargs=3, metavar=("C", "H", "W"),
                        required=True)
    parser.add_argument("--steps", type=int, required=True,
                        help="default simulation step count written to the document")
    parser.add_argument("--out", required=True, help="model JSON output path")
    args = parser.parse_args(argv)
    try:
        model = torch.load(args.model, map_location="cpu", weights_only=False)
    except OSError as e:
        print(f"error: cannot read {args.model}: {e.strerror or e}", file=sys.stderr)
        return 2
    try:
        doc = export_model(model, args.input_shape, args.steps, args.out)
    except (UnsupportedLayerError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    print(f"exported {len(doc['layers'])} layers -> {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
