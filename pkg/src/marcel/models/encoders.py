"""2D (GIN) and distance-based 3D (SchNet-style) graph encoders."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from marcel.autodiff import tensor as T
from marcel.autodiff.nn import MLP, Embedding, Linear, Module
from marcel.autodiff.tensor import Tensor, get_default_dtype
from marcel.errors import InvalidArgument, ShapeMismatch
from marcel.io.features import ATOM_CARDINALITIES, BOND_CARDINALITIES, FeatureMatrices
from marcel.models.graphs import (
    GeometryBatch,
    TopologyBatch,
    conformer_graph,
    geometry_batch,
    topology_batch,
)

MAX_ATOMIC_NUMBER = 118


@dataclass
class EncoderConfig:
    hidden_dim: int = 128
    num_layers: int = 3          # GIN message-passing layers
    pooling: str = "sum"         # sum | mean
    num_rbf: int = 50
    cutoff: float = 5.0
    num_interactions: int = 3
    cutoff_fallback: bool = True

    def __post_init__(self):
        if self.hidden_dim < 1:
            raise InvalidArgument("hidden_dim must be >= 1")
        if self.cutoff <= 0:
            raise InvalidArgument("cutoff must be positive")
        if self.pooling not in ("sum", "mean"):
            raise InvalidArgument(f"unknown pooling {self.pooling!r}")


@dataclass(eq=False)
class GraphEmbedding:
    vector: np.ndarray
    provenance: tuple  # (molecule id, conformer index | tuple of indices | "2D")

    def __post_init__(self):
        if not np.all(np.isfinite(self.vector)):
            raise ValueError("embedding has non-finite entries")


def pool(h: Tensor, owner: np.ndarray, n_graphs: int, mode: str) -> Tensor:
    out = T.scatter_add(h, owner, n_graphs)
    if mode == "mean":
        counts = np.bincount(owner, minlength=n_graphs).astype(h.dtype)[:, None]
        out = out / T.broadcast(Tensor(np.maximum(counts, 1), dtype=h.dtype), out.shape)
    return out


class GINEncoder(Module):
    """GIN with summed categorical atom embeddings and per-layer bond embeddings.

    Each layer computes ``MLP((1 + eps) h_v + sum_u (h_u + e_uv))`` with a
    learnable ``eps`` that starts at zero.
    """

    def __init__(self, config: EncoderConfig, rng: np.random.Generator):
        d = config.hidden_dim
        self.config = config
        self.atom_embeddings = [Embedding(n, d, rng) for n in ATOM_CARDINALITIES]
        self.bond_embeddings = [[Embedding(n, d, rng) for n in BOND_CARDINALITIES]
                                for _ in range(config.num_layers)]
        self.eps = [Tensor(np.zeros((), dtype=get_default_dtype()), requires_grad=True)
                    for _ in range(config.num_layers)]
        self.mlps = [MLP([d, d, d], rng, "relu") for _ in range(config.num_layers)]

    def forward(self, batch: TopologyBatch) -> Tensor:
        if batch.node.shape[0] == 0:
            raise InvalidArgument("cannot encode an empty graph")
        h = None
        for col, emb in enumerate(self.atom_embeddings):
            e = emb(batch.node[:, col])
            h = e if h is None else h + e
        src, dst = batch.edge_index
        n = batch.node.shape[0]
        for layer in range(self.config.num_layers):
            x = (1.0 + self.eps[layer]) * h
            if src.size:
                e = None
                for col, emb in enumerate(self.bond_embeddings[layer]):
                    v = emb(batch.edge[:, col])
                    e = v if e is None else e + v
                x = x + T.scatter_add(T.index_select(h, src) + e, dst, n)
            h = self.mlps[layer](x)
            if layer < self.config.num_layers - 1:
                h = T.relu(h)
        return pool(h, batch.node_graph, batch.n_graphs, self.config.pooling)


class Interaction(Module):
    """Continuous-filter convolution block with a residual update."""

    def __init__(self, d: int, num_rbf: int, rng: np.random.Generator):
        self.filter = MLP([num_rbf, d, d], rng, "ssp")
        self.in2f = Linear(d, d, rng, bias=False)
        self.f2out = MLP([d, d, d], rng, "ssp")

    def forward(self, h: Tensor, rbf: Tensor, envelope: Tensor, edges: np.ndarray) -> Tensor:
        x = self.in2f(h)
        if edges.shape[0] == 0:
            agg = x * 0.0
        else:
            W = self.filter(rbf) * envelope
            msg = T.index_select(x, edges[:, 1]) * W
            agg = T.scatter_add(msg, edges[:, 0], h.shape[0])
        return h + self.f2out(agg)


class SchNetEncoder(Module):
    """Embeds atom types, runs interaction blocks over interatomic distances, pools per conformer."""

    def __init__(self, config: EncoderConfig, rng: np.random.Generator):
        d = config.hidden_dim
        self.config = config
        self.embedding = Embedding(MAX_ATOMIC_NUMBER + 1, d, rng)
        self.interactions = [Interaction(d, config.num_rbf, rng) for _ in range(config.num_interactions)]
        self.readout = MLP([d, d, d], rng, "ssp")
        self.centers = np.linspace(0.0, config.cutoff, config.num_rbf)
        spacing = self.centers[1] - self.centers[0] if config.num_rbf > 1 else config.cutoff
        self.gamma = 0.5 / spacing ** 2

    def expand(self, batch: GeometryBatch) -> tuple[Tensor, Tensor]:
        """Gaussian radial basis of each edge length and its cosine cutoff envelope."""
        dtype = get_default_dtype()
        d = batch.distances[:, None]
        rbf = np.exp(-self.gamma * (d - self.centers[None, :]) ** 2)
        env = 0.5 * (np.cos(np.pi * d / batch.edge_cutoffs[:, None]) + 1.0)
        env = np.where(d <= batch.edge_cutoffs[:, None], env, 0.0)
        env = np.broadcast_to(env, (d.shape[0], self.config.hidden_dim))
        return Tensor(rbf, dtype=dtype), Tensor(np.ascontiguousarray(env), dtype=dtype)

    def forward(self, batch: GeometryBatch) -> Tensor:
        if batch.types.size == 0:
            raise InvalidArgument("cannot encode an empty structure")
        h = self.embedding(batch.types)
        rbf, env = self.expand(batch)
        for block in self.interactions:
            h = block(h, rbf, env, batch.edges)
        return pool(self.readout(h), batch.atom_graph, batch.n_graphs, self.config.pooling)


def gin_encode(features: FeatureMatrices, encoder: GINEncoder, edges=None,
               identifier: str = "") -> GraphEmbedding:
    if edges is not None:
        features = FeatureMatrices(features.node, features.edge, np.asarray(edges).reshape(2, -1))
    out = encoder(topology_batch([features]))
    return GraphEmbedding(out.data[0].copy(), (identifier, "2D"))


def schnet_encode(atom_types, coords, encoder: SchNetEncoder, identifier: str = "",
                  conformer_index=None) -> GraphEmbedding:
    coords = np.asarray(coords, dtype=np.float64)
    types = np.asarray(atom_types, dtype=np.int64)
    if types.size < 1 or coords.shape != (types.size, 3):
        raise ShapeMismatch(f"{types.size} atom types vs coordinates of shape {coords.shape}")
    graph = conformer_graph(coords, encoder.config.cutoff, encoder.config.cutoff_fallback)
    out = encoder(geometry_batch([(types, graph)]))
    return GraphEmbedding(out.data[0].copy(), (identifier, conformer_index))


def two_tower_encode(a, b):
    """Concatenate two role embeddings in role order; accepts arrays, Tensors or GraphEmbeddings."""
    a = a.vector if isinstance(a, GraphEmbedding) else a
    b = b.vector if isinstance(b, GraphEmbedding) else b
    if a.shape[-1] != b.shape[-1]:
        raise ShapeMismatch(f"tower widths differ: {a.shape[-1]} vs {b.shape[-1]}")
    if isinstance(a, Tensor) or isinstance(b, Tensor):
        return T.concat([a, b], axis=-1)
    return np.concatenate([np.asarray(a), np.asarray(b)], axis=-1)
