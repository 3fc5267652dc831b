"""Graph encoders: GIN over 2D topology and a SchNet-style distance encoder."""

from marcel.models.encoders import (
    EncoderConfig,
    GINEncoder,
    GraphEmbedding,
    SchNetEncoder,
    gin_encode,
    pool,
    schnet_encode,
    two_tower_encode,
)
from marcel.models.graphs import (
    ConformerGraph,
    GeometryBatch,
    TopologyBatch,
    conformer_graph,
    geometry_batch,
    radius_graph,
    topology_batch,
)

__all__ = [
    "ConformerGraph", "EncoderConfig", "GINEncoder", "GeometryBatch", "GraphEmbedding",
    "SchNetEncoder", "TopologyBatch", "conformer_graph", "geometry_batch", "gin_encode",
    "pool", "radius_graph", "schnet_encode", "topology_batch", "two_tower_encode",
]
