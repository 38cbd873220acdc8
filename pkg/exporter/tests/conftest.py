import numpy as np
import pytest
import torch
from torch import nn

from snn_exporter import Leaky, run_steps_train

T, H, W = 10, 10, 10
CLASSES, HIDDEN = 10, 128

_CENTERS = [(1 + (k % 3) * 4, 1 + (k // 3) * 3) for k in range(CLASSES)]


def make_batch(rng, n):
    """Synthetic tactile digits: one Gaussian blob of activity per class."""
    ys = rng.integers(0, CLASSES, size=n)
    yy, xx = np.mgrid[0:H, 0:W]
    frames = np.zeros((T, n, 1, H, W), dtype=np.float32)
    for i, k in enumerate(ys):
        cy, cx = _CENTERS[k]
        intensity = 0.55 * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / 4.0)
        frames[:, i, 0] = (rng.random((T, H, W)) < intensity).astype(np.float32)
    return torch.from_numpy(frames), torch.from_numpy(ys.astype(np.int64))


def build_dense_model():
    return nn.Sequential(
        nn.Flatten(),
        nn.Linear(H * W, HIDDEN),
        Leaky(0.5, 1.0, "subtract"),
        nn.Linear(HIDDEN, CLASSES),
        Leaky(0.5, 1.0, "subtract"),
    )


def train_dense_model(seed=1234, batches=150):
    torch.manual_seed(seed)
    torch.set_num_threads(1)
    model = build_dense_model()
    rng = np.random.default_rng(77)
    opt = torch.optim.Adam(model.parameters(), lr=2e-3)
    lossf = nn.CrossEntropyLoss()
    for _ in range(batches):
        x, y = make_batch(rng, 64)
        loss = lossf(run_steps_train(model, x), y)
        opt.zero_grad()
        loss.backward()
        opt.step()
    return model, rng


@pytest.fixture(scope="session")
def trained_dense_model():
    return train_dense_model()
