"""Dataset resolution and preparation (load, label, then deduplicate)."""

from __future__ import annotations

import os
from dataclasses import replace
from pathlib import Path

from marcel.chem import Sample
from marcel.errors import DataError
from marcel.geometry import deduplicate_ensemble
from marcel.io.dataset import load_dataset
from marcel.io.manifest import DATA_DIR_ENV, DatasetManifest, load_manifest


def resolve_manifest(dataset: str) -> Path:
    """``dataset`` is a manifest path or a directory / name under ``$MARCEL_DATA_DIR``."""
    p = Path(dataset)
    candidates = [p, p / "manifest.yaml"]
    root = os.environ.get(DATA_DIR_ENV)
    if root:
        candidates += [Path(root) / dataset, Path(root) / dataset / "manifest.yaml"]
    for c in candidates:
        if c.is_file():
            return c
    raise DataError(f"cannot find a manifest for dataset {dataset!r} (looked in {', '.join(map(str, candidates))})")


def deduplicate_samples(samples: list[Sample], manifest: DatasetManifest, workers: int = 1) -> list[Sample]:
    """Replace each ensemble by its deduplicated subset; targets are left as loaded."""
    out = []
    for s in samples:
        ensembles = {
            role: deduplicate_ensemble(
                ens, manifest.threshold_for(role), automorphism_cap=manifest.automorphism_cap,
                heavy_only=manifest.heavy_only, temperature=manifest.temperature, kB=manifest.kB,
                workers=workers,
            )
            for role, ens in s.ensembles.items()
        }
        out.append(replace(s, ensembles=ensembles))
    return out


def prepare_dataset(manifest: DatasetManifest | str | os.PathLike, deduplicate: bool | None = None,
                    skip_log: list[str] | None = None, workers: int = 1) -> tuple[DatasetManifest, list[Sample]]:
    """Load samples; labels are fixed before any deduplication."""
    if not isinstance(manifest, DatasetManifest):
        manifest = load_manifest(resolve_manifest(str(manifest)))
    samples = load_dataset(manifest, skip_log)
    if manifest.deduplicate if deduplicate is None else deduplicate:
        samples = deduplicate_samples(samples, manifest, workers)
    return manifest, samples


def dataset_statistics(samples: list[Sample]) -> dict:
    conformers = sum(len(e) for s in samples for e in s.ensembles.values())
    return {"molecules": len(samples), "conformers": conformers}
