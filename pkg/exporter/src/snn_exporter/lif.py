"""Leaky integrate-and-fire cell for training with surrogate gradients.

Forward semantics match the inference runtime exactly: the membrane decays
by beta, integrates the input current, and the reset term comes from the
previous step's spike (recomputed from the incoming membrane); a spike
fires where the new membrane strictly exceeds the threshold. The backward
pass replaces the spike step with a fast-sigmoid surrogate so the cell is
trainable with backpropagation through time.
"""

import torch
from torch import nn


class _FastSigmoidSpike(torch.autograd.Function):
    slope = 25.0

    @staticmethod
    def forward(ctx, mem_shift):
        ctx.save_for_backward(mem_shift)
        return (mem_shift > 0).float()

    @staticmethod
    def backward(ctx, grad_output):
        (mem_shift,) = ctx.saved_tensors
        scale = (_FastSigmoidSpike.slope * mem_shift.abs() + 1.0) ** 2
        return grad_output / scale


def _spike(mem, threshold):
    return _FastSigmoidSpike.apply(mem - threshold)


class Leaky(nn.Module):
    """Stateless-module LIF: call as spk, mem = layer(current, mem)."""

    def __init__(self, beta: float, threshold: float = 1.0, reset: str = "subtract"):
        super().__init__()
        if not 0.0 <= beta <= 1.0:
            raise ValueError(f"beta must be in [0, 1], got {beta}")
        if threshold <= 0.0:
            raise ValueError(f"threshold must be > 0, got {threshold}")
        if reset not in ("subtract", "zero"):
            raise ValueError(f"reset must be 'subtract' or 'zero', got {reset!r}")
        self.beta = beta
        self.threshold = threshold
        self.reset = reset

    def init_state(self, current: torch.Tensor) -> torch.Tensor:
        return torch.zeros_like(current)

    def forward(self, current, mem):
        if mem is None:
            mem = self.init_state(current)
        fired_before = _spike(mem, self.threshold)
        if self.reset == "zero":
            mem = self.beta * mem * (1.0 - fired_before) + current
        else:
            mem = self.beta * mem + current - fired_before * self.threshold
        return _spike(mem, self.threshold), mem

    def extra_repr(self):
        return f"beta={self.beta}, threshold={self.threshold}, reset={self.reset}"
