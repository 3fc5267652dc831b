"""Join structure files and labels into :class:`~marcel.chem.Sample` lists."""

from __future__ import annotations

import csv
import logging
import math
from collections import defaultdict
from pathlib import Path

import numpy as np

from marcel.chem import (
    Conformer,
    ConformerEnsemble,
    Molecule,
    Sample,
    boltzmann_average,
    build_molecule,
    count_rotatable_bonds,
)
from marcel.errors import DataError
from marcel.io.manifest import DatasetManifest
from marcel.io.sdf import parse_sdf
from marcel.io.xyz import energy_from_comment, parse_xyz

log = logging.getLogger(__name__)


def read_labels(path) -> tuple[list[str], dict[str, dict[str, float | None]]]:
    """Read a labels CSV (first column identifier, remaining columns tasks).

    Blank cells become ``None``. A repeated identifier is allowed only when
    its values agree.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"labels file {path} is empty") from None
        tasks = [h.strip() for h in header[1:]]
        labels: dict[str, dict[str, float | None]] = {}
        for lineno, row in enumerate(reader, start=2):
            if not row or not any(c.strip() for c in row):
                continue
            ident = row[0].strip()
            values: dict[str, float | None] = {}
            for task, cell in zip(tasks, row[1:]):
                cell = cell.strip()
                try:
                    values[task] = float(cell) if cell else None
                except ValueError:
                    raise DataError(f"{path}:{lineno}: label {cell!r} is not numeric") from None
            if ident in labels and labels[ident] != values:
                raise DataError(f"{path}:{lineno}: identifier {ident!r} repeated with conflicting labels")
            labels[ident] = values
    return tasks, labels


def _read_structures(files, manifest: DatasetManifest) -> dict[str, list[tuple[Molecule, Conformer]]]:
    groups: dict[str, list[tuple[Molecule, Conformer]]] = defaultdict(list)
    for path in files:
        path = Path(path)
        if path.suffix.lower() == ".xyz":
            for symbols, coords, comment in parse_xyz(path):
                mol = build_molecule(symbols, [], identifier=path.stem)
                energy = energy_from_comment(comment, manifest.xyz_energy_pattern)
                groups[path.stem].append((mol, Conformer(coords, energy, {"comment": comment})))
        else:
            for mol, conf, _ in parse_sdf(path, energy_tag=manifest.energy_tag):
                groups[mol.identifier].append((mol, conf))
    return groups


def _same_topology(a: Molecule, b: Molecule) -> bool:
    return a.symbols == b.symbols and [(x.i, x.j, x.order) for x in a.bonds] == \
        [(x.i, x.j, x.order) for x in b.bonds]


def _has_geometry(conf: Conformer) -> bool:
    return conf.num_atoms == 1 or bool(np.any(conf.coordinates != 0.0))


def load_dataset(manifest: DatasetManifest, skip_log: list[str] | None = None) -> list[Sample]:
    """Load every sample described by ``manifest``, sorted by identifier.

    Boltzmann weights are recomputed from conformer energies. When no labels
    file is given, each task target is the Boltzmann average of the matching
    per-conformer property over all conformers.
    """
    skips = skip_log if skip_log is not None else []

    def skip(msg: str):
        skips.append(msg)
        log.info("skip: %s", msg)

    structures = {role: _read_structures(files, manifest) for role, files in manifest.roles.items()}
    labels = None
    if manifest.labels is not None:
        label_tasks, labels = read_labels(manifest.labels)
        absent = [t for t in manifest.tasks if t not in label_tasks]
        if absent:
            raise DataError(f"labels file lacks task columns {absent}")
    elif manifest.is_reaction:
        raise DataError("reaction datasets require a labels file")

    ids = set().union(*(set(g) for g in structures.values()))
    if labels is not None:
        for ident in sorted(ids - set(labels)):
            skip(f"{ident}: structures without labels")
        ids |= set(labels)

    samples = []
    for ident in sorted(ids):
        if labels is not None and ident not in labels:
            continue  # logged above
        ensembles = {}
        reason = None
        for role, groups in structures.items():
            entries = groups.get(ident)
            if not entries:
                reason = f"no structures for role {role!r}"
                break
            mol = entries[0][0]
            for other, _ in entries[1:]:
                if not _same_topology(mol, other):
                    raise DataError(f"{ident}: conformers of role {role!r} disagree on the molecular graph")
            confs = [c for _, c in entries if _has_geometry(c)]
            if not confs:
                reason = f"missing 3D geometry for role {role!r}"
                break
            ensembles[role] = ConformerEnsemble.weighted(mol, confs, manifest.temperature, manifest.kB)
        if reason is not None:
            skip(f"{ident}: {reason}")
            continue

        targets = {}
        for task in manifest.tasks:
            if labels is not None:
                value = labels[ident].get(task)
            else:
                value = _conformer_average(ensembles[next(iter(ensembles))], task)
            if value is None or not math.isfinite(value):
                reason = f"missing label {task!r}"
                break
            targets[task] = value
        if reason is None and manifest.rotatable_bond_filter is not None:
            counts = [count_rotatable_bonds(e.molecule) for e in ensembles.values()]
            if min(counts) <= manifest.rotatable_bond_filter:
                reason = f"{min(counts)} rotatable bonds (need > {manifest.rotatable_bond_filter})"
        if reason is not None:
            skip(f"{ident}: {reason}")
            continue
        samples.append(Sample(ident, ensembles, targets))
    return samples


def _conformer_average(ensemble: ConformerEnsemble, task: str) -> float | None:
    values = []
    for c in ensemble.conformers:
        raw = c.properties.get(task)
        if raw is None:
            return None
        try:
            values.append(float(raw.split()[0]))
        except (ValueError, IndexError):
            return None
    weights = ensemble.weights or [1.0 / len(values)] * len(values)
    return boltzmann_average(values, weights)


def sample_listing(samples: list[Sample]) -> str:
    """Canonical text listing of samples (ids, roles, energies, weights, targets)."""
    lines = []
    for s in samples:
        parts = [s.identifier]
        for role, ens in s.ensembles.items():
            w = ens.weights or ()
            parts.append(f"{role}:{len(ens)}:" + ",".join(f"{x:.12g}" for x in w))
        parts.append(";".join(f"{t}={v!r}" for t, v in sorted(s.targets.items())))
        lines.append("\t".join(parts))
    return "\n".join(lines) + ("\n" if lines else "")

