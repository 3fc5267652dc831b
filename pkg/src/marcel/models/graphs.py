"""Graph construction and batching for the encoders."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from marcel.chem import connected_components
from marcel.errors import InvalidArgument
from marcel.io.features import FeatureMatrices


def radius_graph(coords, cutoff: float) -> np.ndarray:
    """Directed edges ``(i, j)``, ``i != j``, with ``|x_i - x_j| <= cutoff``, sorted lexicographically."""
    if cutoff <= 0:
        raise InvalidArgument("cutoff must be positive")
    X = np.asarray(coords, dtype=np.float64)
    diff = X[:, None, :] - X[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=-1))
    mask = dist <= cutoff
    np.fill_diagonal(mask, False)
    i, j = np.nonzero(mask)
    return np.stack([i, j], axis=1).astype(np.int64).reshape(-1, 2)


@dataclass(frozen=True, eq=False)
class ConformerGraph:
    edges: np.ndarray      # E x 2, (receiver, sender)
    distances: np.ndarray  # E
    cutoff: float          # effective cutoff after the disconnection fallback


def conformer_graph(coords, cutoff: float, fallback: bool = True) -> ConformerGraph:
    """Radius graph; if it leaves the structure disconnected the cutoff is doubled once."""
    X = np.asarray(coords, dtype=np.float64)
    if not np.all(np.isfinite(X)):
        raise InvalidArgument("coordinates must be finite")
    edges = radius_graph(X, cutoff)
    if fallback and X.shape[0] > 1 and connected_components(X.shape[0], map(tuple, edges)) > 1:
        cutoff = 2.0 * cutoff
        edges = radius_graph(X, cutoff)
    d = np.linalg.norm(X[edges[:, 0]] - X[edges[:, 1]], axis=1) if len(edges) else np.zeros(0)
    return ConformerGraph(edges, d, cutoff)


@dataclass(eq=False)
class GeometryBatch:
    """Flattened conformers: atoms of conformer ``c`` carry ``atom_graph == c``."""

    types: np.ndarray
    edges: np.ndarray
    distances: np.ndarray
    edge_cutoffs: np.ndarray
    atom_graph: np.ndarray
    n_graphs: int


def geometry_batch(items) -> GeometryBatch:
    """Batch ``(atomic_numbers, ConformerGraph)`` pairs."""
    types, edges, dists, cuts, owner = [], [], [], [], []
    offset = 0
    for g, (z, graph) in enumerate(items):
        z = np.asarray(z, dtype=np.int64)
        types.append(z)
        edges.append(graph.edges + offset)
        dists.append(graph.distances)
        cuts.append(np.full(len(graph.distances), graph.cutoff))
        owner.append(np.full(z.size, g, dtype=np.int64))
        offset += z.size
    return GeometryBatch(
        types=np.concatenate(types),
        edges=np.concatenate(edges).reshape(-1, 2),
        distances=np.concatenate(dists),
        edge_cutoffs=np.concatenate(cuts),
        atom_graph=np.concatenate(owner),
        n_graphs=len(types),
    )


@dataclass(eq=False)
class TopologyBatch:
    node: np.ndarray
    edge: np.ndarray
    edge_index: np.ndarray  # 2 x E (src, dst)
    node_graph: np.ndarray
    n_graphs: int


def topology_batch(features: list[FeatureMatrices]) -> TopologyBatch:
    nodes, edges, index, owner = [], [], [], []
    offset = 0
    for g, f in enumerate(features):
        nodes.append(f.node)
        edges.append(f.edge)
        index.append(f.edge_index + offset)
        owner.append(np.full(f.node.shape[0], g, dtype=np.int64))
        offset += f.node.shape[0]
    return TopologyBatch(
        node=np.concatenate(nodes),
        edge=np.concatenate(edges),
        edge_index=np.concatenate(index, axis=1),
        node_graph=np.concatenate(owner),
        n_graphs=len(features),
    )
