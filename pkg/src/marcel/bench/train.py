"""Training loop, early stopping and MAE evaluation.

The loss is MSE on standardized targets; evaluation is MAE in target units.
Early stopping watches the *training* loss: a run stops once ``patience``
consecutive epochs fail to strictly lower the best training loss so far.
Independently, the parameters of the epoch with the lowest validation MAE
are kept.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from marcel.autodiff import tensor as T
from marcel.autodiff.nn import Module
from marcel.autodiff.optim import AdamState, adam_step
from marcel.autodiff.tensor import Tensor
from marcel.baseline.fingerprints import molecule_features, prune_correlated
from marcel.baseline.forest import ForestModel, ForestParams, fit_forest, predict_forest
from marcel.bench.config import ExperimentConfig
from marcel.bench.split import SplitSpec
from marcel.chem import Sample
from marcel.ensemble.model import EnsembleModel, draw_rng
from marcel.errors import NonFiniteGradient, ShapeMismatch

log = logging.getLogger(__name__)


def evaluate_mae(preds, targets) -> float:
    p = np.asarray(preds, dtype=np.float64).ravel()
    t = np.asarray(targets, dtype=np.float64).ravel()
    if p.shape != t.shape:
        raise ShapeMismatch(f"{p.size} predictions for {t.size} targets")
    if p.size == 0:
        raise ShapeMismatch("cannot score an empty prediction list")
    return float(np.mean(np.abs(p - t)))


@dataclass
class History:
    train_loss: list[float] = field(default_factory=list)
    val_mae: list[float] = field(default_factory=list)
    best_epoch: int = 0            # 1-based; 0 when no epoch finished
    stopped_early: bool = False
    abort_reason: str | None = None

    @property
    def epochs_run(self) -> int:
        return len(self.train_loss)

    @property
    def best_val_mae(self) -> float:
        return self.val_mae[self.best_epoch - 1] if self.best_epoch else math.nan


def fit(params: Sequence[Tensor], batch_loss: Callable[[np.ndarray, int], Tensor],
        val_mae: Callable[[], float], n_train: int, epochs: int = 2000, patience: int = 200,
        batch_size: int = 64, lr: float = 1e-3, seed: int = 0) -> History:
    """Minibatch Adam over ``n_train`` items.

    ``batch_loss(indices, epoch)`` returns the scalar loss of a minibatch.
    On return ``params`` hold the values from the best-validation epoch.
    """
    params = list(params)
    state = AdamState(lr=lr)
    hist = History()
    best_val, best_state = math.inf, None
    best_train, stale = math.inf, 0
    for epoch in range(1, epochs + 1):
        order = np.random.default_rng((seed, epoch)).permutation(n_train)
        total = 0.0
        try:
            for start in range(0, n_train, batch_size):
                idx = order[start:start + batch_size]
                loss = batch_loss(idx, epoch)
                if not math.isfinite(loss.item()):
                    raise NonFiniteGradient(f"non-finite loss at epoch {epoch}")
                grads = T.backward(loss, params)
                adam_step(params, grads, state)
                total += loss.item() * len(idx)
        except NonFiniteGradient as exc:
            hist.abort_reason = f"epoch {epoch}: {exc}"
            log.warning("aborting: %s", hist.abort_reason)
            break
        train_loss = total / n_train
        mae = val_mae()
        hist.train_loss.append(train_loss)
        hist.val_mae.append(mae)
        if mae < best_val:
            best_val, hist.best_epoch = mae, epoch
            best_state = [p.data.copy() for p in params]
        if train_loss < best_train:
            best_train, stale = train_loss, 0
        else:
            stale += 1
            if stale >= patience:
                hist.stopped_early = True
                break
    if best_state is not None:
        for p, data in zip(params, best_state):
            p.data = data
    return hist


@dataclass(eq=False)
class ForestPredictor:
    """Fingerprint random forest; ``feature_mask`` is the post-pruning column mask."""

    forest: ForestModel
    feature_mask: np.ndarray
    roles: tuple

    def features(self, samples: Sequence[Sample]) -> np.ndarray:
        rows = [np.concatenate([molecule_features(s.ensembles[r].molecule) for r in self.roles])
                for s in samples]
        return np.asarray(rows, dtype=np.float64)[:, self.feature_mask]

    def predict_batch(self, samples: Sequence[Sample]) -> np.ndarray:
        return predict_forest(self.forest, self.features(samples))


def model_predictions(model, samples: Sequence[Sample], scheme: str | None = None,
                      seed: int = 0) -> np.ndarray:
    """Predictions under the model's evaluation convention (scheme for sampling models)."""
    if isinstance(model, ForestPredictor):
        return model.predict_batch(samples)
    if model.config.strategy == "sampling":
        scheme = scheme or model.config.eval_scheme
        return model.scheme_predictions(samples, scheme, np.random.default_rng((seed, 1)))
    return model.predict_batch(samples)


def _targets(samples: Sequence[Sample], task: str) -> np.ndarray:
    return np.array([s.targets[task] for s in samples], dtype=np.float64)


def train(config: ExperimentConfig, samples: Sequence[Sample], split: SplitSpec,
          seed: int | None = None, single_conformer: str = "lowest"):
    """Train one model on ``split.train``; returns ``(model, history)``."""
    seed = config.seed if seed is None else seed
    train_set = [samples[k] for k in split.train]
    val_set = [samples[k] for k in split.val]
    y_train, y_val = _targets(train_set, config.task), _targets(val_set, config.task)
    roles = train_set[0].roles

    if config.model == "rf":
        X = np.asarray([np.concatenate([molecule_features(s.ensembles[r].molecule) for r in roles])
                        for s in train_set], dtype=np.float64)
        mask = prune_correlated(X)
        if not mask.any():
            # no fingerprint bit varies; one constant column yields the mean predictor
            mask[0] = True
        forest = fit_forest(X[:, mask], y_train, ForestParams(n_trees=config.n_trees, seed=seed))
        model = ForestPredictor(forest, mask, roles)
        hist = History(train_loss=[float(np.mean((predict_forest(forest, X[:, mask]) - y_train) ** 2))],
                       val_mae=[evaluate_mae(model.predict_batch(val_set), y_val)], best_epoch=1)
        return model, hist

    model = EnsembleModel(config.model_config(roles, single_conformer, seed), np.random.default_rng(seed))
    model.target_mean = float(y_train.mean())
    std = float(y_train.std())
    # a constant target has zero scale, so predictions collapse onto the training mean
    model.target_std = std
    z_train = (y_train - model.target_mean) / (std if std > 0 else 1.0)
    sampling = config.strategy == "sampling"

    def batch_loss(idx: np.ndarray, epoch: int) -> Tensor:
        batch = [train_set[k] for k in idx]
        if sampling:
            sels = [model.selection(s, draw_rng(seed, epoch, int(k))) for s, k in zip(batch, idx)]
        else:
            sels = [model.selection(s) for s in batch]
        out = model(batch, sels)
        diff = out - Tensor(z_train[idx], dtype=out.dtype)
        return T.mean(diff * diff)

    def val_mae() -> float:
        return evaluate_mae(model_predictions(model, val_set, seed=seed), y_val)

    hist = fit(model.parameters(), batch_loss, val_mae, len(train_set), config.epochs,
               config.patience, config.batch_size, config.lr, seed)
    return model, hist


def count_parameters(model: Module) -> int:
    return int(sum(p.size for p in model.parameters()))
