"""Hashed circular (ECFP-style) and linear-path fingerprints.

Identifiers are hashed with 64-bit BLAKE2b over the decimal text of the
integer tuple being hashed (comma-joined, UTF-8), read little-endian. This
is stable across runs, processes and platforms, unlike ``hash()``.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from marcel.chem import Molecule

_BOND_CODES = {"SINGLE": 1, "DOUBLE": 2, "TRIPLE": 3, "AROMATIC": 4}


def hash64(values) -> int:
    text = ",".join(str(int(v)) for v in values).encode()
    return int.from_bytes(hashlib.blake2b(text, digest_size=8).digest(), "little")


@dataclass(frozen=True, eq=False)
class Fingerprint:
    bits: np.ndarray
    scheme: str
    params: dict

    @property
    def nbits(self) -> int:
        return self.bits.size

    def on_bits(self) -> set[int]:
        return set(np.flatnonzero(self.bits).tolist())


def _atoms(molecule: Molecule, heavy_only: bool) -> list[int]:
    if heavy_only:
        heavy = [k for k, a in enumerate(molecule.atoms) if a.is_heavy]
        if heavy:
            return heavy
    return list(range(molecule.num_atoms))


def circular_fingerprint(molecule: Molecule, radius: int = 2, nbits: int = 2048,
                         heavy_only: bool = True) -> Fingerprint:
    """Iterative neighbourhood hashing; every identifier at every radius sets one bit."""
    if radius < 0 or nbits < 8:
        raise ValueError("radius must be >= 0 and nbits >= 8")
    atoms = _atoms(molecule, heavy_only)
    keep = set(atoms)
    ids = {}
    for v in atoms:
        a = molecule.atoms[v]
        ids[v] = hash64((a.atomic_number, a.degree, a.formal_charge + 16, a.num_hs, int(a.is_in_ring)))
    bits = np.zeros(nbits, dtype=np.uint8)
    for v in atoms:
        bits[ids[v] % nbits] = 1
    for r in range(1, radius + 1):
        new = {}
        for v in atoms:
            env = sorted(
                (_BOND_CODES[molecule.bond_lookup[(v, u)].order], ids[u])
                for u in molecule.neighbors[v] if u in keep
            )
            new[v] = hash64((r, ids[v]) + tuple(x for pair in env for x in pair))
        ids = new
        for v in atoms:
            bits[ids[v] % nbits] = 1
    return Fingerprint(bits, "circular", {"radius": radius, "nbits": nbits})


def path_fingerprint(molecule: Molecule, max_len: int = 7, nbits: int = 2048,
                     heavy_only: bool = True) -> Fingerprint:
    """Hash every simple bond path of 1..max_len bonds in a canonical direction."""
    if max_len < 1 or nbits < 8:
        raise ValueError("max_len must be >= 1 and nbits >= 8")
    atoms = _atoms(molecule, heavy_only)
    keep = set(atoms)
    z = {v: molecule.atoms[v].atomic_number for v in atoms}
    bits = np.zeros(nbits, dtype=np.uint8)

    def emit(path: list[int]):
        seq = [z[path[0]]]
        for a, b in zip(path, path[1:]):
            seq += [_BOND_CODES[molecule.bond_lookup[(a, b)].order], z[b]]
        seq = min(tuple(seq), tuple(reversed(seq)))
        bits[hash64((len(path) - 1,) + seq) % nbits] = 1

    def walk(path: list[int], on_path: set[int]):
        for u in molecule.neighbors[path[-1]]:
            if u in keep and u not in on_path:
                path.append(u)
                on_path.add(u)
                emit(path)
                if len(path) - 1 < max_len:
                    walk(path, on_path)
                path.pop()
                on_path.discard(u)

    for v in atoms:
        walk([v], {v})
    return Fingerprint(bits, "path", {"max_len": max_len, "nbits": nbits})


def molecule_features(molecule: Molecule, radius: int = 2, circular_bits: int = 2048,
                      max_len: int = 7, path_bits: int = 2048) -> np.ndarray:
    """Concatenated circular + path bit vector."""
    return np.concatenate([
        circular_fingerprint(molecule, radius, circular_bits).bits,
        path_fingerprint(molecule, max_len, path_bits).bits,
    ])


def prune_correlated(features, threshold: float = 0.9) -> np.ndarray:
    """Boolean keep-mask over columns.

    Constant columns are dropped; the remaining columns are scanned in order
    and a column is dropped if its absolute Pearson correlation with any
    earlier kept column exceeds ``threshold``.
    """
    X = np.asarray(features, dtype=np.float64)
    m, k = X.shape
    if m < 2:
        raise ValueError("need at least two rows to estimate correlations")
    if not 0 < threshold <= 1:
        raise ValueError("threshold must lie in (0, 1]")
    std = X.std(axis=0)
    live = np.flatnonzero(std > 0)
    keep = np.zeros(k, dtype=bool)
    if live.size == 0:
        return keep
    Z = (X[:, live] - X[:, live].mean(axis=0)) / std[live]
    C = np.abs(Z.T @ Z) / m
    kept: list[int] = []
    for pos in range(live.size):
        if not kept or C[pos, kept].max() <= threshold:
            kept.append(pos)
    keep[live[kept]] = True
    return keep
