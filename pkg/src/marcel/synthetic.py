"""Synthetic conformer-ensemble datasets with a known geometric target.

Molecules are unbranched heavy-atom chains. Each conformer redraws every
torsion from the gauche/trans minima plus noise, so conformers of the same
molecule differ in shape. Energies charge a small penalty per gauche torsion
plus uniform noise, which keeps the ensemble close to degenerate while making
the lowest-energy conformer lean towards extended shapes. The target is the
Boltzmann average of the radius of gyration, which no single conformer
determines.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import yaml

from marcel.chem import (
    DEFAULT_KB,
    DEFAULT_TEMPERATURE,
    Conformer,
    ConformerEnsemble,
    Sample,
    boltzmann_average,
    build_molecule,
)
from marcel.io.manifest import MOLECULE_ROLE
from marcel.io.sdf import write_sdf

TARGET = "rg"
BOND_LENGTH = 1.5
BOND_ANGLE = np.deg2rad(111.0)
TORSION_MINIMA = np.deg2rad([60.0, 180.0, 300.0])


def radius_of_gyration(coords) -> float:
    X = np.asarray(coords, dtype=np.float64)
    return float(np.sqrt(np.mean(np.sum((X - X.mean(axis=0)) ** 2, axis=1))))


def chain_coordinates(torsions, bond_length: float = BOND_LENGTH, angle: float = BOND_ANGLE) -> np.ndarray:
    """Place ``len(torsions) + 3`` atoms from internal coordinates (natural extension reference frame)."""
    n = len(torsions) + 3
    X = np.zeros((n, 3))
    X[1] = [bond_length, 0.0, 0.0]
    X[2] = X[1] + bond_length * np.array([-np.cos(angle), np.sin(angle), 0.0])
    for k, phi in enumerate(torsions, start=3):
        a, b, c = X[k - 3], X[k - 2], X[k - 1]
        bc = (c - b) / np.linalg.norm(c - b)
        nrm = np.cross(b - a, bc)
        nrm /= np.linalg.norm(nrm)
        m = np.stack([bc, np.cross(nrm, bc), nrm], axis=1)
        d = bond_length * np.array([-np.cos(angle), np.sin(angle) * np.cos(phi), np.sin(angle) * np.sin(phi)])
        X[k] = c + m @ d
    return X


def make_samples(n_molecules: int = 500, n_conformers: int = 8, seed: int = 0,
                 min_atoms: int = 8, max_atoms: int = 14, energy_range=(0.0, 0.3),
                 gauche_penalty: float = 0.2, torsion_noise_deg: float = 15.0, temperature: float = DEFAULT_TEMPERATURE,
                 kB: float = DEFAULT_KB) -> list[Sample]:
    """Random chains with ``n_conformers`` each.

    A conformer's energy [kcal/mol] is ``gauche_penalty`` per gauche torsion
    plus a uniform draw from ``energy_range``.
    """
    rng = np.random.default_rng(seed)
    width = len(str(n_molecules - 1))
    samples = []
    for m in range(n_molecules):
        n = int(rng.integers(min_atoms, max_atoms + 1))
        symbols = ["C"] * n
        for k in range(1, n - 1):
            if rng.random() < 0.15:
                symbols[k] = "O" if rng.random() < 0.5 else "N"
        ident = f"syn{m:0{width}d}"
        mol = build_molecule(symbols, [(k, k + 1, "SINGLE") for k in range(n - 1)], identifier=ident)
        confs, rgs = [], []
        for _ in range(n_conformers):
            well = rng.integers(0, len(TORSION_MINIMA), size=n - 3)
            torsions = TORSION_MINIMA[well] + np.deg2rad(torsion_noise_deg) * rng.standard_normal(n - 3)
            X = chain_coordinates(torsions)
            X = X - X.mean(axis=0)
            energy = gauche_penalty * float(np.sum(well != 1)) + float(rng.uniform(*energy_range))
            rg = radius_of_gyration(X)
            rgs.append(rg)
            confs.append(Conformer(X, energy, {TARGET: repr(rg)}))
        ens = ConformerEnsemble.weighted(mol, confs, temperature, kB)
        samples.append(Sample(ident, {MOLECULE_ROLE: ens}, {TARGET: boltzmann_average(rgs, ens.weights)}))
    return samples


def write_dataset(samples: list[Sample], out_dir, name: str = "synthetic") -> Path:
    """Write ``structures.sdf`` and ``manifest.yaml``; returns the manifest path.

    No labels file is written: targets are re-derived on load as the
    Boltzmann average of each conformer's ``rg`` property.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records = []
    for s in samples:
        ens = s.ensembles[MOLECULE_ROLE]
        for c in ens.conformers:
            props = {"energy": repr(c.energy), **c.properties}
            records.append((ens.molecule, c, props))
    write_sdf(records, out / "structures.sdf")
    manifest = {
        "name": name,
        "tasks": [TARGET],
        "structures": ["structures.sdf"],
        "dedup_threshold": 0.5,
        "energy_unit": "kcal/mol",
    }
    path = out / "manifest.yaml"
    path.write_text(yaml.safe_dump(manifest, sort_keys=False))
    return path
