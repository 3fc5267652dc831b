"""Model bundles: one ``.npz`` holding config, split, parameters and bookkeeping.

Keys::

    format, version          "marcel-bundle", 1
    config                   JSON of the ExperimentConfig
    meta                     JSON: seed, roles, single_conformer, target mean/std,
                             fixed conformer indices, history summary
    split/train|val|test     int64 index arrays (into the loaded, sorted dataset)
    param/<name>             network parameters (neural models)
    forest/<key>, feature_mask   forest arrays (rf)
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from marcel.baseline.forest import forest_arrays, forest_from_arrays
from marcel.bench.config import ExperimentConfig, config_from_dict
from marcel.bench.split import SplitSpec
from marcel.bench.train import ForestPredictor, History
from marcel.ensemble.model import EnsembleModel
from marcel.errors import DataError

FORMAT = "marcel-bundle"
VERSION = 1


def save_bundle(path, model, config: ExperimentConfig, split: SplitSpec, seed: int,
                history: History | None = None) -> None:
    meta = {"seed": seed, "split_seed": split.seed, "n": split.n}
    arrays = {
        "format": np.array(FORMAT),
        "version": np.array(VERSION),
        "config": np.array(json.dumps(config.to_dict(), sort_keys=True)),
        "split/train": split.train, "split/val": split.val, "split/test": split.test,
    }
    if history is not None:
        meta.update(epochs_run=history.epochs_run, best_epoch=history.best_epoch,
                    abort_reason=history.abort_reason)
    if isinstance(model, ForestPredictor):
        meta["roles"] = list(model.roles)
        arrays["feature_mask"] = model.feature_mask
        arrays.update({f"forest/{k}": v for k, v in forest_arrays(model.forest).items()})
    else:
        meta.update(roles=list(model.config.roles), single_conformer=model.config.single_conformer,
                    target_mean=model.target_mean, target_std=model.target_std,
                    fixed_indices=model.fixed_indices)
        arrays.update({f"param/{k}": v for k, v in model.state_dict().items()})
    arrays["meta"] = np.array(json.dumps(meta, sort_keys=True))
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_bundle(path):
    """Returns ``(model, config, split, meta)``."""
    with np.load(path, allow_pickle=False) as data:
        if "format" not in data or str(data["format"]) != FORMAT:
            raise DataError(f"{path} is not a model bundle")
        if int(data["version"]) != VERSION:
            raise DataError(f"{path}: unsupported bundle version {int(data['version'])}")
        config = config_from_dict(json.loads(str(data["config"])))
        meta = json.loads(str(data["meta"]))
        split = SplitSpec(int(meta["n"]), int(meta["split_seed"]), data["split/train"],
                          data["split/val"], data["split/test"])
        if config.model == "rf":
            forest = forest_from_arrays({k[len("forest/"):]: data[k] for k in data.files
                                         if k.startswith("forest/")})
            model = ForestPredictor(forest, data["feature_mask"], tuple(meta["roles"]))
        else:
            mcfg = config.model_config(meta["roles"], meta["single_conformer"], meta["seed"])
            model = EnsembleModel(mcfg, np.random.default_rng(0))
            model.load_state_dict({k[len("param/"):]: data[k] for k in data.files if k.startswith("param/")})
            model.target_mean = float(meta["target_mean"])
            model.target_std = float(meta["target_std"])
            model.fixed_indices = {k: int(v) for k, v in meta["fixed_indices"].items()}
    return model, config, split, meta
