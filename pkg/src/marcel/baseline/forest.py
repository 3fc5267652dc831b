"""Bagged regression-tree forest.

Fitting delegates to scikit-learn's CART implementation; the fitted trees are
copied into plain arrays so that prediction and persistence do not depend on
scikit-learn internals.

Binary layout (``numpy.savez`` archive, format version 1):

    format        str   "marcel-forest"
    version       int   1
    n_features    int
    params        str   JSON of ForestParams
    node_counts   int64[n_trees]
    feature       int64[total_nodes]   split column, -1 at leaves
    threshold     float64[total_nodes] go left when x[feature] <= threshold
    left, right   int64[total_nodes]   child ids local to the tree, -1 at leaves
    value         float64[total_nodes] node mean
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np
from sklearn.ensemble import RandomForestRegressor

FORMAT = "marcel-forest"
VERSION = 1


@dataclass
class ForestParams:
    n_trees: int = 500
    max_depth: int | None = None
    min_leaf: int = 1
    feature_fraction: float = 1.0 / 3.0
    bootstrap: bool = True
    seed: int = 0
    n_jobs: int = 1


@dataclass(eq=False)
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def predict(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        while True:
            inner = self.left[node] >= 0
            if not inner.any():
                return self.value[node]
            idx = rows[inner]
            nd = node[inner]
            go_left = X[idx, self.feature[nd]] <= self.threshold[nd]
            node[idx] = np.where(go_left, self.left[nd], self.right[nd])


@dataclass(eq=False)
class ForestModel:
    trees: list[Tree]
    params: ForestParams
    n_features: int


def fit_forest(X, y, params: ForestParams | None = None) -> ForestModel:
    params = params or ForestParams()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.ndim != 2 or X.shape[0] != y.size or y.size < 2:
        raise ValueError(f"need m >= 2 rows with matching targets, got X{X.shape}, y{y.shape}")
    if not np.all(np.isfinite(y)):
        raise ValueError("targets must be finite")
    rf = RandomForestRegressor(
        n_estimators=params.n_trees,
        max_depth=params.max_depth,
        min_samples_leaf=params.min_leaf,
        max_features=params.feature_fraction,
        bootstrap=params.bootstrap,
        random_state=params.seed,
        n_jobs=params.n_jobs,
    )
    rf.fit(X, y)
    trees = []
    for est in rf.estimators_:
        t = est.tree_
        trees.append(Tree(
            feature=np.where(t.children_left >= 0, t.feature, -1).astype(np.int64),
            threshold=t.threshold.astype(np.float64),
            left=t.children_left.astype(np.int64),
            right=t.children_right.astype(np.int64),
            value=t.value[:, 0, 0].astype(np.float64),
        ))
    return ForestModel(trees, params, X.shape[1])


def predict_forest(model: ForestModel, X) -> np.ndarray:
    # thresholds were learned on float32 copies of the features, as in scikit-learn
    X = np.asarray(X, dtype=np.float32).astype(np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ValueError(f"expected {model.n_features} features, got {X.shape}")
    out = np.zeros(X.shape[0])
    for tree in model.trees:
        out += tree.predict(X)
    return out / len(model.trees)


def forest_arrays(model: ForestModel) -> dict[str, np.ndarray]:
    return {
        "format": np.array(FORMAT),
        "version": np.array(VERSION),
        "n_features": np.array(model.n_features),
        "params": np.array(json.dumps(asdict(model.params))),
        "node_counts": np.array([t.value.size for t in model.trees], dtype=np.int64),
        "feature": np.concatenate([t.feature for t in model.trees]),
        "threshold": np.concatenate([t.threshold for t in model.trees]),
        "left": np.concatenate([t.left for t in model.trees]),
        "right": np.concatenate([t.right for t in model.trees]),
        "value": np.concatenate([t.value for t in model.trees]),
    }


def forest_from_arrays(data) -> ForestModel:
    if str(data["format"]) != FORMAT:
        raise ValueError("not a forest archive")
    if int(data["version"]) != VERSION:
        raise ValueError(f"unsupported forest format version {int(data['version'])}")
    trees, start = [], 0
    for count in data["node_counts"]:
        sl = slice(start, start + int(count))
        trees.append(Tree(data["feature"][sl], data["threshold"][sl], data["left"][sl],
                          data["right"][sl], data["value"][sl]))
        start += int(count)
    params = ForestParams(**json.loads(str(data["params"])))
    return ForestModel(trees, params, int(data["n_features"]))


def save_forest(model: ForestModel, path) -> None:
    with open(path, "wb") as fh:
        np.savez(fh, **forest_arrays(model))


def load_forest(path) -> ForestModel:
    with np.load(path, allow_pickle=False) as data:
        return forest_from_arrays(data)
