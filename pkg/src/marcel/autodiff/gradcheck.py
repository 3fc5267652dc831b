"""Central finite differences, used as the reference for :func:`backward`."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from marcel.autodiff.tensor import Tensor, backward


def _scalar(value) -> float:
    if isinstance(value, Tensor):
        return float(value.data.reshape(-1)[0]) if value.size == 1 else float(value.data)
    return float(value)


def finite_difference(f: Callable[[Tensor], object], x: Tensor, eps: float = 1e-6) -> Tensor:
    """Per-element ``(f(x + eps e_i) - f(x - eps e_i)) / (2 eps)``; ``x`` is restored afterwards."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    if not x.data.flags.c_contiguous or not x.data.flags.writeable:
        x.data = np.array(x.data, order="C")
    flat = x.data.reshape(-1)
    out = np.zeros(flat.size, dtype=np.float64)
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + eps
        hi = _scalar(f(x))
        flat[i] = keep - eps
        lo = _scalar(f(x))
        flat[i] = keep
        out[i] = (hi - lo) / (2 * eps)
    return Tensor(out.reshape(x.shape), dtype=np.float64)


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    """max |a - b| scaled by the larger of the two max-abs magnitudes."""
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    scale = np.max([np.abs(a).max(initial=0.0), np.abs(b).max(initial=0.0), 1e-12])
    return float(np.abs(a - b).max(initial=0.0) / scale)


def gradient_errors(loss_fn: Callable[[], Tensor], params: Sequence[Tensor],
                    eps: float = 1e-6) -> list[float]:
    """Relative error between analytic and numeric gradients for each parameter."""
    grads = backward(loss_fn(), params)
    errors = []
    for p in params:
        numeric = finite_difference(lambda _: loss_fn(), p, eps)
        errors.append(relative_error(grads[p], numeric.data))
    return errors
