"""Test-only event helpers: a 5-byte record encoder (the inverse of the
loader) and random stream generation."""

import numpy as np

from snnkit.events import EventStream


def encode_nmnist(stream: EventStream) -> bytes:
    """Inverse of load_events_nmnist; timestamps must fit in 23 bits."""
    out = bytearray()
    for ev in stream:
        if ev.t >= 1 << 23:
            raise ValueError(f"timestamp {ev.t} does not fit in 23 bits")
        out.append(ev.x)
        out.append(ev.y)
        out.append((ev.polarity << 7) | ((ev.t >> 16) & 0x7F))
        out.append((ev.t >> 8) & 0xFF)
        out.append(ev.t & 0xFF)
    return bytes(out)


def random_stream(rng, n, sensor_shape=(34, 34), max_t=100_000) -> EventStream:
    h, w = sensor_shape
    t = np.sort(rng.integers(0, max_t, size=n).astype(np.int64))
    return EventStream(
        t=t,
        x=rng.integers(0, w, size=n).astype(np.int32),
        y=rng.integers(0, h, size=n).astype(np.int32),
        polarity=rng.integers(0, 2, size=n).astype(np.int8),
        sensor_shape=sensor_shape,
    )
