"""Event-stream ingestion and frame binning.

Two input paths: the 5-byte binary record layout used by event-camera
recordings of the 34x34 digit dataset, and a generic `t,x,y,p` CSV for
everything else (e.g. tactile sensor grids). Both decode to a time-sorted
EventStream, which `bin_to_frames` accumulates into a [T, C, H, W] frame
tensor, one frame per simulation step.

Binary record layout (timestamp in microseconds, big-endian bit packing):

    byte 0          x
    byte 1          y
    byte 2, bit 7   polarity
    byte 2, bits 6..0  timestamp bits 22..16
    byte 3          timestamp bits 15..8
    byte 4          timestamp bits 7..0
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np

from .errors import EventFormatError
from .tensor import Tensor

NMNIST_SENSOR_SHAPE = (34, 34)
RECORD_BYTES = 5


class Event(NamedTuple):
    t: int
    x: int
    y: int
    polarity: int


@dataclass
class EventStream:
    t: np.ndarray  # int64 microseconds, non-decreasing
    x: np.ndarray  # int32 column
    y: np.ndarray  # int32 row
    polarity: np.ndarray  # int8 in {0, 1}
    sensor_shape: tuple[int, int]  # (H, W)

    def __len__(self) -> int:
        return int(self.t.size)

    def __iter__(self) -> Iterator[Event]:
        for i in range(len(self)):
            yield Event(int(self.t[i]), int(self.x[i]), int(self.y[i]), int(self.polarity[i]))

    @property
    def duration_us(self) -> int:
        return int(self.t[-1]) if len(self) else 0


@dataclass
class FrameSequence:
    frames: Tensor  # [T, C, H, W]
    bin_width_us: int

    @property
    def num_steps(self) -> int:
        return self.frames.shape.dims[0]


def _make_stream(t, x, y, p, sensor_shape) -> EventStream:
    t = np.asarray(t, dtype=np.int64)
    order = np.argsort(t, kind="stable")
    if len(t) and not np.all(order == np.arange(len(t))):
        t = t[order]
        x = np.asarray(x, dtype=np.int32)[order]
        y = np.asarray(y, dtype=np.int32)[order]
        p = np.asarray(p, dtype=np.int8)[order]
    return EventStream(
        t,
        np.asarray(x, dtype=np.int32),
        np.asarray(y, dtype=np.int32),
        np.asarray(p, dtype=np.int8),
        sensor_shape,
    )


def load_events_nmnist(data: bytes) -> EventStream:
    """Decode 5-byte binary event records; sensor is fixed at 34x34."""
    if len(data) % RECORD_BYTES != 0:
        raise EventFormatError(
            f"event file length {len(data)} is not a multiple of {RECORD_BYTES} "
            f"(trailing partial record)"
        )
    raw = np.frombuffer(data, dtype=np.uint8).reshape(-1, RECORD_BYTES)
    x = raw[:, 0].astype(np.int32)
    y = raw[:, 1].astype(np.int32)
    p = (raw[:, 2] >> 7).astype(np.int8)
    t = (
        ((raw[:, 2].astype(np.int64) & 0x7F) << 16)
        | (raw[:, 3].astype(np.int64) << 8)
        | raw[:, 4].astype(np.int64)
    )
    h, w = NMNIST_SENSOR_SHAPE
    bad = np.nonzero((x >= w) | (y >= h))[0]
    if bad.size:
        i = int(bad[0])
        raise EventFormatError(
            f"record {i}: coordinates ({int(x[i])}, {int(y[i])}) outside {h}x{w} sensor"
        )
    return _make_stream(t, x, y, p, NMNIST_SENSOR_SHAPE)


def load_events_csv(text: str, sensor_shape: tuple[int, int]) -> EventStream:
    """Parse `t,x,y,p` lines (optional header, LF or CRLF) into a sorted stream."""
    h, w = sensor_shape
    ts, xs, ys, ps = [], [], [], []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        if lineno == 1 and [f.strip() for f in line.split(",")] == ["t", "x", "y", "p"]:
            continue
        fields = line.split(",")
        if len(fields) != 4:
            raise EventFormatError(f"line {lineno}: expected 4 fields `t,x,y,p`, got {len(fields)}")
        try:
            t, x, y, p = (int(f.strip()) for f in fields)
        except ValueError:
            raise EventFormatError(f"line {lineno}: non-numeric field in {line!r}") from None
        if t < 0:
            raise EventFormatError(f"line {lineno}: negative timestamp {t}")
        if p not in (0, 1):
            raise EventFormatError(f"line {lineno}: polarity must be 0 or 1, got {p}")
        if not (0 <= x < w and 0 <= y < h):
            raise EventFormatError(f"line {lineno}: coordinates ({x}, {y}) outside {h}x{w} sensor")
        ts.append(t)
        xs.append(x)
        ys.append(y)
        ps.append(p)
    return _make_stream(ts, xs, ys, ps, sensor_shape)


def bin_to_frames(
    stream: EventStream,
    num_frames: int,
    binarize: bool = False,
    merge_polarity: bool = False,
    bin_width_us: int | None = None,
) -> FrameSequence:
    """Accumulate events into `num_frames` fixed-width time bins.

    The default bin width is ceil((duration + 1) / T) so every event lands
    inside a bin; with an explicit `bin_width_us`, events past the last
    bin are clamped into it to keep a fixed frame count. Cell values are
    event counts, or clamped to {0, 1} when `binarize` is set. Polarity
    maps to 2 channels unless `merge_polarity` collapses it to 1.
    """
    if num_frames < 1:
        raise ValueError(f"num_frames must be >= 1, got {num_frames}")
    if bin_width_us is None:
        width = -(-(stream.duration_us + 1) // num_frames)  # ceil division
    else:
        if bin_width_us < 1:
            raise ValueError(f"bin_width_us must be >= 1, got {bin_width_us}")
        width = bin_width_us
    h, w = stream.sensor_shape
    channels = 1 if merge_polarity else 2
    frames = np.zeros((num_frames, channels, h, w), dtype=np.float32)
    if len(stream):
        bins = np.minimum(stream.t // width, num_frames - 1).astype(np.int64)
        chan = np.zeros(len(stream), dtype=np.int64) if merge_polarity else stream.polarity.astype(np.int64)
        np.add.at(frames, (bins, chan, stream.y.astype(np.int64), stream.x.astype(np.int64)), 1.0)
    if binarize:
        np.minimum(frames, 1.0, out=frames)
    return FrameSequence(Tensor.from_array(frames), int(width))
