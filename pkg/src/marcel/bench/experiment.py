"""Repeated runs with best-of-R model selection on validation MAE."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from marcel.bench.bundle import save_bundle
from marcel.bench.config import ExperimentConfig
from marcel.bench.data import prepare_dataset
from marcel.bench.split import SplitSpec, split_dataset
from marcel.bench.train import evaluate_mae, model_predictions, train
from marcel.chem import Sample
from marcel.io.results import ExperimentRecord, write_results

log = logging.getLogger(__name__)


def repeat_seeds(seed: int, repeats: int) -> list[int]:
    """Distinct, reproducible per-repeat seeds."""
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(repeats, dtype=np.uint32)]


def select_best(records: Sequence[ExperimentRecord]) -> ExperimentRecord | None:
    """Surviving record with the lowest validation MAE (first on ties); ``None`` if all aborted."""
    alive = [r for r in records if not r.aborted and math.isfinite(r.val_mae)]
    return min(alive, key=lambda r: r.val_mae) if alive else None


@dataclass
class RunOutput:
    record: ExperimentRecord
    model: object
    split: SplitSpec


def run_once(config: ExperimentConfig, samples: Sequence[Sample], split: SplitSpec, seed: int,
             single_conformer: str = "lowest") -> RunOutput:
    start = time.perf_counter()
    model, hist = train(config, samples, split, seed, single_conformer)
    test = [samples[k] for k in split.test]
    if hist.abort_reason is not None and hist.best_epoch == 0:
        test_mae = math.nan
    else:
        test_mae = evaluate_mae(model_predictions(model, test, seed=seed), [s.targets[config.task] for s in test])
    record = ExperimentRecord(
        config_hash=config.config_hash(), dataset=config.dataset, task=config.task,
        model=config.model, strategy=config.strategy, seed=seed, split_seed=split.seed,
        epochs_run=hist.epochs_run, best_epoch=hist.best_epoch,
        val_mae=hist.best_val_mae, test_mae=test_mae,
        wall_seconds=round(time.perf_counter() - start, 3), abort_reason=hist.abort_reason,
    )
    return RunOutput(record, model, split)


def run_experiment(config: ExperimentConfig, samples: Sequence[Sample] | None = None,
                   results_path=None, bundle_dir=None, single_conformer: str | None = None,
                   outputs: list | None = None) -> list[ExperimentRecord]:
    """Train ``config.repeats`` models and persist every record.

    The split is shared by all repeats unless ``config.resplit`` is set.
    Use :func:`select_best` on the returned records for the reported run.
    Pass a list as ``outputs`` to also collect the trained models.
    """
    if samples is None:
        manifest, samples = prepare_dataset(config.dataset)
        single_conformer = single_conformer or manifest.single_conformer
    single_conformer = single_conformer or "lowest"
    records = []
    for seed in repeat_seeds(config.seed, config.repeats):
        split_seed = seed if config.resplit else config.effective_split_seed
        split = split_dataset(len(samples), split_seed)
        out = run_once(config, samples, split, seed, single_conformer)
        log.info("repeat seed=%d val=%.4f test=%.4f", seed, out.record.val_mae, out.record.test_mae)
        if results_path is not None:
            write_results([out.record], results_path)
        if bundle_dir is not None:
            path = Path(bundle_dir) / f"{out.record.config_hash[:12]}-{seed}.npz"
            save_bundle(path, out.model, config, split, seed)
        if outputs is not None:
            outputs.append(out)
        records.append(out.record)
    return records
