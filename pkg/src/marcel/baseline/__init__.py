"""Fingerprint + random-forest baseline."""

from marcel.baseline.fingerprints import (
    Fingerprint,
    circular_fingerprint,
    molecule_features,
    path_fingerprint,
    prune_correlated,
)
from marcel.baseline.forest import (
    ForestModel,
    ForestParams,
    fit_forest,
    load_forest,
    predict_forest,
    save_forest,
)

__all__ = [
    "Fingerprint", "ForestModel", "ForestParams", "circular_fingerprint", "fit_forest",
    "load_forest", "molecule_features", "path_fingerprint", "predict_forest", "prune_correlated",
    "save_forest",
]
