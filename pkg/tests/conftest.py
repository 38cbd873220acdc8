import numpy as np
import pytest

from snnkit.events import FrameSequence
from snnkit.model import (
    Conv2dSpec,
    FlattenSpec,
    LifSpec,
    LinearSpec,
    MaxPool2dSpec,
    Network,
    validate,
)
from snnkit.tensor import Shape, Tensor


def build_toy_filter_net() -> Network:
    """4-filter conv into a 16-neuron spiking layer, 2 filters provably silent.

    Input [1,4,4], conv 3x3 -> [4,2,2]; channels 0 and 2 have non-positive
    weights and negative bias (never spike on non-negative input), channels
    1 and 3 fire on a constant drive. Head: flatten -> linear -> 4-class lif.
    """
    w = np.zeros((4, 1, 3, 3), dtype=np.float32)
    b = np.zeros(4, dtype=np.float32)
    w[0] = -0.5
    b[0] = -1.0
    w[2] = -0.25
    b[2] = -0.5
    w[1] = 0.5
    b[1] = 0.5
    w[3] = 0.25
    b[3] = 0.25
    lw = np.zeros((4, 16), dtype=np.float32)
    # class k listens to one neuron of each active channel group
    lw[:, 4:8] = 0.5
    lw[:, 12:16] = 0.25
    lb = np.zeros(4, dtype=np.float32)
    net = Network(
        Shape((1, 4, 4)),
        num_steps=4,
        layers=[
            Conv2dSpec(1, 4, (3, 3), (1, 1), (0, 0), Tensor.from_array(w), Tensor.from_array(b)),
            LifSpec(beta=0.5, threshold=1.0, reset_mode="subtract"),
            FlattenSpec(),
            LinearSpec(16, 4, Tensor.from_array(lw), Tensor.from_array(lb)),
            LifSpec(beta=0.5, threshold=1.0, reset_mode="subtract"),
        ],
    )
    validate(net)
    return net


def build_toy_drive(num_steps=4) -> FrameSequence:
    frames = np.ones((num_steps, 1, 4, 4), dtype=np.float32)
    return FrameSequence(Tensor.from_array(frames), 1)


def build_conv_arch_net(seed=7) -> Network:
    """Event-camera digit architecture: two 5x5 conv/lif/pool blocks, then
    a dense 10-class readout. Input [2,34,34], ~19k parameters."""
    rng = np.random.default_rng(seed)

    def w(*shape):
        return Tensor.from_array(rng.normal(0, 0.2, size=shape).astype(np.float32))

    net = Network(
        Shape((2, 34, 34)),
        num_steps=10,
        layers=[
            Conv2dSpec(2, 12, (5, 5), (1, 1), (0, 0), w(12, 2, 5, 5), w(12)),
            LifSpec(beta=0.5, threshold=1.0, reset_mode="subtract"),
            MaxPool2dSpec((2, 2), (2, 2)),
            Conv2dSpec(12, 32, (5, 5), (1, 1), (0, 0), w(32, 12, 5, 5), w(32)),
            LifSpec(beta=0.5, threshold=1.0, reset_mode="subtract"),
            MaxPool2dSpec((2, 2), (2, 2)),
            FlattenSpec(),
            LinearSpec(800, 10, w(10, 800), w(10)),
            LifSpec(beta=0.5, threshold=1.0, reset_mode="subtract"),
        ],
    )
    validate(net)
    return net


def build_dense_net(seed=11, in_side=10, hidden=128, classes=10) -> Network:
    """Tactile-grid style dense model: flatten -> 128 lif -> 10-class lif."""
    rng = np.random.default_rng(seed)

    def w(*shape):
        return Tensor.from_array(rng.normal(0, 0.3, size=shape).astype(np.float32))

    flat = in_side * in_side
    net = Network(
        Shape((1, in_side, in_side)),
        num_steps=10,
        layers=[
            FlattenSpec(),
            LinearSpec(flat, hidden, w(hidden, flat), w(hidden)),
            LifSpec(beta=0.5, threshold=1.0, reset_mode="subtract"),
            LinearSpec(hidden, classes, w(classes, hidden), w(classes)),
            LifSpec(beta=0.5, threshold=1.0, reset_mode="subtract"),
        ],
    )
    validate(net)
    return net


def build_bench_net(seed=99) -> Network:
    """Two-block conv net where exactly half the channels of each conv are
    provably silent (non-positive weights, negative bias) and the other
    half provably active (non-negative weights, bias above threshold)."""
    rng = np.random.default_rng(seed)

    def conv_pair(out_ch, in_ch, k):
        w = rng.integers(-4, 5, size=(out_ch, in_ch, k, k)).astype(np.float32) / 4
        b = np.empty(out_ch, dtype=np.float32)
        for o in range(out_ch):
            if o < out_ch // 2:
                w[o] = -np.abs(w[o])
                b[o] = -1.0
            else:
                w[o] = np.abs(w[o])
                b[o] = 4.0
        return Tensor.from_array(w), Tensor.from_array(b)

    w1, b1 = conv_pair(16, 2, 5)
    w2, b2 = conv_pair(16, 16, 5)
    flat = 16 * 4 * 4
    wl = Tensor.from_array(rng.integers(-4, 5, size=(10, flat)).astype(np.float32) / 4)
    bl = Tensor.from_array(rng.integers(-4, 5, size=10).astype(np.float32) / 4)
    net = Network(
        Shape((2, 28, 28)),
        num_steps=10,
        layers=[
            Conv2dSpec(2, 16, (5, 5), (1, 1), (0, 0), w1, b1),
            LifSpec(beta=0.5, threshold=1.0, reset_mode="subtract"),
            MaxPool2dSpec((2, 2), (2, 2)),
            Conv2dSpec(16, 16, (5, 5), (1, 1), (0, 0), w2, b2),
            LifSpec(beta=0.5, threshold=1.0, reset_mode="subtract"),
            MaxPool2dSpec((2, 2), (2, 2)),
            FlattenSpec(),
            LinearSpec(flat, 10, wl, bl),
            LifSpec(beta=0.5, threshold=1.0, reset_mode="subtract"),
        ],
    )
    validate(net)
    return net


def build_bench_frames(seed=100) -> FrameSequence:
    rng = np.random.default_rng(seed)
    frames = (rng.random((10, 2, 28, 28)) < 0.3).astype(np.float32)
    return FrameSequence(Tensor.from_array(frames), 1)


@pytest.fixture
def toy_filter_net():
    return build_toy_filter_net()


@pytest.fixture
def toy_drive():
    return build_toy_drive()


@pytest.fixture
def conv_arch_net():
    return build_conv_arch_net()


@pytest.fixture
def dense_net():
    return build_dense_net()
