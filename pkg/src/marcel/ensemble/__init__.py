"""Conformer-ensemble learning: sampling strategy and explicit set encoders."""

from marcel.ensemble.model import (
    SCHEMES,
    STRATEGIES,
    BatchBuilder,
    EnsembleModel,
    EnsembleModelConfig,
    draw_rng,
    evaluate_scheme,
    fixed_random_index,
    predict,
    sample_conformer,
    sample_index,
)
from marcel.ensemble.set_encoders import (
    VARIANTS,
    SetEncoder,
    attention_encode,
    attention_weights,
    deepsets_encode,
    mean_pool,
)

__all__ = [
    "SCHEMES", "STRATEGIES", "VARIANTS", "BatchBuilder", "EnsembleModel", "EnsembleModelConfig",
    "SetEncoder", "attention_encode", "attention_weights", "deepsets_encode", "draw_rng",
    "evaluate_scheme", "fixed_random_index", "mean_pool", "predict", "sample_conformer",
    "sample_index",
]
