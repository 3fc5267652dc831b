"""Experiment records and their JSON-lines persistence.

Each line carries exactly these keys, in this order::

    config_hash, dataset, task, model, strategy, seed, split_seed,
    epochs_run, best_epoch, val_mae, test_mae, wall_seconds

An aborted run writes ``null`` MAEs and one extra trailing key,
``abort_reason``.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from typing import IO, Iterable

from marcel.errors import IoError

RESULT_KEYS = (
    "config_hash", "dataset", "task", "model", "strategy", "seed", "split_seed",
    "epochs_run", "best_epoch", "val_mae", "test_mae", "wall_seconds",
)


@dataclass
class ExperimentRecord:
    config_hash: str
    dataset: str
    task: str
    model: str
    strategy: str
    seed: int
    split_seed: int
    epochs_run: int
    best_epoch: int
    val_mae: float
    test_mae: float
    wall_seconds: float
    abort_reason: str | None = None

    @property
    def aborted(self) -> bool:
        return self.abort_reason is not None

    def to_json(self) -> str:
        out = {}
        for key in RESULT_KEYS:
            value = getattr(self, key)
            if isinstance(value, float) and not math.isfinite(value):
                value = None
            out[key] = value
        if self.abort_reason is not None:
            out["abort_reason"] = self.abort_reason
        return json.dumps(out)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentRecord":
        values = {k: raw[k] for k in RESULT_KEYS}
        for key in ("val_mae", "test_mae"):
            if values[key] is None:
                values[key] = math.nan
        return cls(**values, abort_reason=raw.get("abort_reason"))


def write_results(records: Iterable[ExperimentRecord], sink: str | os.PathLike | IO) -> None:
    """Append one JSON object per record. Paths are opened in append mode."""
    lines = "".join(r.to_json() + "\n" for r in records)
    if isinstance(sink, (str, os.PathLike)):
        try:
            with open(sink, "a") as fh:
                fh.write(lines)
        except OSError as exc:
            raise IoError(f"cannot write results to {sink}: {exc}") from exc
    else:
        try:
            sink.write(lines)
        except (OSError, ValueError) as exc:
            raise IoError(f"cannot write results: {exc}") from exc


def read_results(source: str | os.PathLike | IO) -> list[ExperimentRecord]:
    if isinstance(source, (str, os.PathLike)):
        with open(source) as fh:
            text = fh.read()
    else:
        text = source.read()
    return [ExperimentRecord.from_dict(json.loads(line)) for line in text.splitlines() if line.strip()]
