"""Permutation-invariant encoders over sets of conformer embeddings.

All encoders work on a flattened batch: ``Z`` stacks the conformer
embeddings of several ensembles and ``owner[k]`` names the ensemble of row
``k``. The single-set functions below are thin wrappers with ``owner = 0``.
"""

from __future__ import annotations

import numpy as np

from marcel.autodiff import tensor as T
from marcel.autodiff.nn import MLP, Module, parameter
from marcel.autodiff.tensor import Tensor, as_tensor
from marcel.errors import EmptyEnsemble, InvalidArgument, ShapeMismatch

VARIANTS = ("mean", "deepsets", "attention")


class SetEncoder(Module):
    """Mean pooling, DeepSets ``g(sum h(z))`` or self-attention over conformers.

    ``h`` and ``g`` are two-layer perceptrons of width ``d``; pass
    ``activation="identity"`` with ``identity_init=True`` to make both the
    identity map (useful for tests).
    """

    def __init__(self, variant: str, d: int, rng: np.random.Generator,
                 activation: str = "ssp", identity_init: bool = False):
        if variant not in VARIANTS:
            raise InvalidArgument(f"unknown set encoder {variant!r}; expected one of {VARIANTS}")
        self.variant = variant
        self.d = d
        self.h = self.g = self.W = None
        if variant != "mean":
            self.h = MLP([d, d, d], rng, activation)
            self.g = MLP([d, d, d], rng, activation)
            if identity_init:
                for mlp in (self.h, self.g):
                    for layer in mlp.layers:
                        layer.weight.data[...] = np.eye(d)
                        layer.bias.data[...] = 0.0
        if variant == "attention":
            self.W = parameter(rng.uniform(-1, 1, size=(d, d)) / np.sqrt(d))

    def _check(self, Z: Tensor, owner: np.ndarray) -> None:
        if Z.ndim != 2 or Z.shape[1] != self.d:
            raise ShapeMismatch(f"expected conformer embeddings of width {self.d}, got {Z.shape}")
        if Z.shape[0] == 0:
            raise EmptyEnsemble("cannot encode an empty conformer set")
        if owner.shape != (Z.shape[0],):
            raise ShapeMismatch(f"{owner.shape[0]} owners for {Z.shape[0]} rows")

    def attention(self, Z: Tensor, owner: np.ndarray) -> tuple[Tensor, Tensor]:
        """Returns ``(alpha, h(Z))``; ``alpha`` is block-diagonal over ensembles."""
        P = self.h(Z)
        Q = T.matmul(P, T.transpose(self.W))
        S = T.matmul(Q, T.transpose(Q))
        alpha = T.softmax(S, axis=-1, mask=owner[:, None] == owner[None, :])
        return alpha, P

    def forward(self, Z, owner=None, n_sets: int | None = None) -> Tensor:
        Z = as_tensor(Z)
        owner = np.zeros(Z.shape[0], dtype=np.int64) if owner is None else np.asarray(owner)
        self._check(Z, owner)
        n_sets = int(owner.max()) + 1 if n_sets is None else n_sets
        if self.variant == "mean":
            counts = np.bincount(owner, minlength=n_sets).astype(Z.dtype)[:, None]
            total = T.scatter_add(Z, owner, n_sets)
            return total / T.broadcast(Tensor(np.maximum(counts, 1), dtype=Z.dtype), total.shape)
        if self.variant == "deepsets":
            return self.g(T.scatter_add(self.h(Z), owner, n_sets))
        alpha, P = self.attention(Z, owner)
        return T.scatter_add(self.g(T.matmul(alpha, P)), owner, n_sets)


def _single(Z, params: SetEncoder, variant: str) -> Tensor:
    if params.variant != variant:
        raise InvalidArgument(f"parameters are for {params.variant!r}, not {variant!r}")
    return T.reshape(params(Z), (params.d,))


def mean_pool(Z):
    """Arithmetic mean of the rows of ``Z``."""
    if isinstance(Z, Tensor):
        if Z.shape[0] == 0:
            raise EmptyEnsemble("cannot pool an empty conformer set")
        return T.mean(Z, axis=0)
    Z = np.asarray(Z, dtype=np.float64)
    if Z.ndim != 2 or Z.shape[0] == 0:
        raise EmptyEnsemble("cannot pool an empty conformer set")
    return Z.mean(axis=0)


def deepsets_encode(Z, params: SetEncoder) -> Tensor:
    return _single(Z, params, "deepsets")


def attention_encode(Z, params: SetEncoder) -> Tensor:
    return _single(Z, params, "attention")


def attention_weights(Z, params: SetEncoder) -> np.ndarray:
    Z = as_tensor(Z)
    owner = np.zeros(Z.shape[0], dtype=np.int64)
    params._check(Z, owner)
    return params.attention(Z, owner)[0].data
