"""Adam optimizer."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from marcel.autodiff.tensor import Tensor
from marcel.errors import NonFiniteGradient, ShapeMismatch


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)


def adam_step(params: Sequence[Tensor], grads, state: AdamState) -> tuple[Sequence[Tensor], AdamState]:
    """One bias-corrected Adam update, applied to ``params`` in place.

    ``grads`` is either a sequence aligned with ``params`` or a mapping from
    parameter to gradient (as returned by :func:`backward`).
    """
    if isinstance(grads, Mapping):
        grads = [grads.get(p) if grads.get(p) is not None else np.zeros_like(p.data) for p in params]
    if len(grads) != len(params):
        raise ShapeMismatch(f"{len(grads)} gradients for {len(params)} parameters")
    for p, g in zip(params, grads):
        if g.shape != p.shape:
            raise ShapeMismatch(f"gradient shape {g.shape} does not match parameter {p.shape}")
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradient("non-finite gradient encountered")
    if not state.m:
        state.m = [np.zeros_like(p.data) for p in params]
        state.v = [np.zeros_like(p.data) for p in params]
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        update = state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
        p.data = (p.data - update).astype(p.dtype)
    return params, state


class Adam:
    def __init__(self, params: Sequence[Tensor], lr: float = 1e-3, betas=(0.9, 0.999), eps: float = 1e-8):
        self.params = list(params)
        self.state = AdamState(lr=lr, beta1=betas[0], beta2=betas[1], eps=eps)

    def step(self, grads) -> None:
        adam_step(self.params, grads, self.state)
