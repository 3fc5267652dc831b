"""Parameter containers and dense layers."""

from __future__ import annotations

from typing import Callable, Iterator

import numpy as np

from marcel.autodiff import tensor as T
from marcel.autodiff.tensor import Tensor, get_default_dtype

ACTIVATIONS: dict[str, Callable[[Tensor], Tensor]] = {
    "relu": T.relu,
    "tanh": T.tanh,
    "ssp": T.shifted_softplus,
    "identity": lambda x: x,
}


def parameter(data: np.ndarray) -> Tensor:
    return Tensor(np.asarray(data, dtype=get_default_dtype()), requires_grad=True)


class Module:
    """Collects :class:`Tensor` parameters from attributes, recursively."""

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        for name, value in vars(self).items():
            yield from _walk(value, prefix + name)

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        params = dict(self.named_parameters())
        missing = set(params) - set(state)
        if missing:
            raise KeyError(f"state is missing parameters: {sorted(missing)}")
        for name, p in params.items():
            value = np.asarray(state[name])
            if value.shape != p.shape:
                raise ValueError(f"{name}: shape {value.shape} does not match {p.shape}")
            p.data = value.astype(p.dtype, copy=True)

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):
        raise NotImplementedError


def _walk(value, name: str):
    if isinstance(value, Tensor):
        if value.requires_grad:
            yield name, value
    elif isinstance(value, Module):
        yield from value.named_parameters(name + ".")
    elif isinstance(value, (list, tuple)):
        for k, item in enumerate(value):
            yield from _walk(item, f"{name}.{k}")


class Linear(Module):
    """``x @ W + b`` with weights drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in))."""

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator, bias: bool = True):
        bound = 1.0 / np.sqrt(in_dim)
        self.weight = parameter(rng.uniform(-bound, bound, size=(in_dim, out_dim)))
        self.bias = parameter(rng.uniform(-bound, bound, size=(out_dim,))) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        out = T.matmul(x, self.weight)
        return out + self.bias if self.bias is not None else out


class Embedding(Module):
    def __init__(self, num: int, dim: int, rng: np.random.Generator):
        self.table = parameter(rng.normal(0.0, 1.0, size=(num, dim)))

    def forward(self, index) -> Tensor:
        return T.index_select(self.table, index)


class MLP(Module):
    """Dense layers with an activation between (not after) them."""

    def __init__(self, dims: list[int], rng: np.random.Generator, activation: str = "relu"):
        self.layers = [Linear(a, b, rng) for a, b in zip(dims[:-1], dims[1:])]
        self.activation = activation

    def forward(self, x: Tensor) -> Tensor:
        act = ACTIVATIONS[self.activation]
        for k, layer in enumerate(self.layers):
            x = layer(x)
            if k < len(self.layers) - 1:
                x = act(x)
        return x
