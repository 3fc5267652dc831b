"""Categorical atom/bond featurization for the 2D encoder.

Vocabularies mirror the OGB convention: each column is an index into a fixed
list that ends in a ``"misc"`` bucket. Out-of-vocabulary values are clamped
into that bucket with a warning.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from marcel.chem import Molecule

ATOM_VOCAB: dict[str, list] = {
    "AtomicNum": list(range(1, 119)) + ["misc"],
    "ChiralTag": ["CHI_UNSPECIFIED", "CHI_TETRAHEDRAL_CW", "CHI_TETRAHEDRAL_CCW", "CHI_OTHER", "misc"],
    "TotalDegree": list(range(0, 11)) + ["misc"],
    "FormalCharge": list(range(-5, 6)) + ["misc"],
    "TotalNumHs": list(range(0, 9)) + ["misc"],
    "NumRadicalElectrons": list(range(0, 5)) + ["misc"],
    "Hybridization": ["SP", "SP2", "SP3", "SP3D", "SP3D2", "misc"],
    "IsAromatic": [False, True],
    "IsInRing": [False, True],
}
BOND_VOCAB: dict[str, list] = {
    "BondType": ["SINGLE", "DOUBLE", "TRIPLE", "AROMATIC", "misc"],
    "Stereo": ["STEREONONE", "STEREOZ", "STEREOE", "STEREOCIS", "STEREOTRANS", "STEREOANY"],
    "IsConjugated": [False, True],
}
ATOM_COLUMNS = tuple(ATOM_VOCAB)
BOND_COLUMNS = tuple(BOND_VOCAB)
ATOM_CARDINALITIES = tuple(len(v) for v in ATOM_VOCAB.values())
BOND_CARDINALITIES = tuple(len(v) for v in BOND_VOCAB.values())


@dataclass(frozen=True, eq=False)
class FeatureMatrices:
    """``node``: |V| x 9, ``edge``: |E'| x 3 category indices; ``edge_index``: 2 x |E'| (src, dst)."""

    node: np.ndarray
    edge: np.ndarray
    edge_index: np.ndarray


def _index(vocab: list, value, column: str) -> int:
    try:
        return vocab.index(value)
    except ValueError:
        if "misc" in vocab:
            warnings.warn(f"{column} value {value!r} outside vocabulary; using misc bucket", stacklevel=3)
            return len(vocab) - 1
        raise


def atom_features(molecule: Molecule) -> np.ndarray:
    rows = []
    for a in molecule.atoms:
        values = (a.atomic_number, a.chiral_tag, a.degree, a.formal_charge, a.num_hs,
                  a.num_radical_electrons, a.hybridization, a.is_aromatic, a.is_in_ring)
        rows.append([_index(ATOM_VOCAB[c], v, c) for c, v in zip(ATOM_COLUMNS, values)])
    return np.array(rows, dtype=np.int64).reshape(-1, len(ATOM_COLUMNS))


def featurize(molecule: Molecule) -> FeatureMatrices:
    node = atom_features(molecule)
    edge_rows, src, dst = [], [], []
    for b in molecule.bonds:
        row = [_index(BOND_VOCAB[c], v, c)
               for c, v in zip(BOND_COLUMNS, (b.order, b.stereo, b.is_conjugated))]
        edge_rows += [row, row]
        src += [b.i, b.j]
        dst += [b.j, b.i]
    edge = np.array(edge_rows, dtype=np.int64).reshape(-1, len(BOND_COLUMNS))
    edge_index = np.array([src, dst], dtype=np.int64).reshape(2, -1)
    return FeatureMatrices(node, edge, edge_index)
