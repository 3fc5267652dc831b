"""Chemical domain model and closed-form ensemble arithmetic.

Energies default to kcal/mol with the matching Boltzmann constant; other
units are selected by tag (see ``BOLTZMANN_CONSTANTS``).
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from marcel import elements
from marcel.errors import EmptyEnsemble, InvalidEnergy, ShapeMismatch, DataError

BOLTZMANN_CONSTANTS = {
    "kcal/mol": 0.0019872041,
    "kj/mol": 0.0083144626,
    "ev": 8.617333262e-5,
    "hartree": 3.166811563e-6,
}
DEFAULT_TEMPERATURE = 298.15
DEFAULT_KB = BOLTZMANN_CONSTANTS["kcal/mol"]

BOND_ORDERS = ("SINGLE", "DOUBLE", "TRIPLE", "AROMATIC")


def boltzmann_constant(unit: str) -> float:
    try:
        return BOLTZMANN_CONSTANTS[unit.lower()]
    except KeyError:
        raise ValueError(f"unknown energy unit {unit!r}; expected one of {sorted(BOLTZMANN_CONSTANTS)}") from None


@dataclass(frozen=True)
class AtomRecord:
    element: str
    formal_charge: int = 0
    chiral_tag: str = "CHI_UNSPECIFIED"
    hybridization: str = "UNSPECIFIED"
    is_aromatic: bool = False
    is_in_ring: bool = False
    degree: int = 0
    num_hs: int = 0
    num_radical_electrons: int = 0

    @property
    def atomic_number(self) -> int:
        return elements.atomic_number(self.element)

    @property
    def is_heavy(self) -> bool:
        return self.element != "H"


@dataclass(frozen=True)
class Bond:
    i: int
    j: int
    order: str = "SINGLE"
    stereo: str = "STEREONONE"
    is_conjugated: bool = False
    is_in_ring: bool = False


@dataclass(frozen=True)
class Molecule:
    """A 2D chemical graph. Build with :func:`build_molecule` to get derived atom flags."""

    atoms: tuple[AtomRecord, ...]
    bonds: tuple[Bond, ...] = ()
    identifier: str = ""

    def __post_init__(self):
        object.__setattr__(self, "atoms", tuple(self.atoms))
        object.__setattr__(self, "bonds", tuple(self.bonds))
        n = len(self.atoms)
        if n < 1:
            raise DataError("molecule must contain at least one atom")
        seen = set()
        for b in self.bonds:
            if not (0 <= b.i < n and 0 <= b.j < n):
                raise DataError(f"bond ({b.i}, {b.j}) references a missing atom (n={n})")
            if b.i == b.j:
                raise DataError(f"self-bond on atom {b.i}")
            key = (min(b.i, b.j), max(b.i, b.j))
            if key in seen:
                raise DataError(f"duplicate bond {key}")
            seen.add(key)

    @property
    def num_atoms(self) -> int:
        return len(self.atoms)

    @cached_property
    def neighbors(self) -> tuple[tuple[int, ...], ...]:
        adj: list[list[int]] = [[] for _ in self.atoms]
        for b in self.bonds:
            adj[b.i].append(b.j)
            adj[b.j].append(b.i)
        return tuple(tuple(sorted(a)) for a in adj)

    @cached_property
    def bond_lookup(self) -> dict[tuple[int, int], Bond]:
        out = {}
        for b in self.bonds:
            out[(b.i, b.j)] = b
            out[(b.j, b.i)] = b
        return out

    @cached_property
    def atomic_numbers(self) -> np.ndarray:
        return np.array([a.atomic_number for a in self.atoms], dtype=np.int64)

    @property
    def symbols(self) -> list[str]:
        return [a.element for a in self.atoms]


@dataclass(frozen=True, eq=False)
class Conformer:
    coordinates: np.ndarray
    energy: float | None = None
    properties: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        coords = np.array(self.coordinates, dtype=np.float64)
        if coords.ndim != 2 or coords.shape[1] != 3:
            raise ShapeMismatch(f"coordinates must be n x 3, got {coords.shape}")
        if not np.all(np.isfinite(coords)):
            raise DataError("conformer coordinates must be finite")
        coords.setflags(write=False)
        object.__setattr__(self, "coordinates", coords)
        if self.energy is not None:
            e = float(self.energy)
            if not math.isfinite(e):
                raise InvalidEnergy(f"non-finite conformer energy {self.energy!r}")
            object.__setattr__(self, "energy", e)

    @property
    def num_atoms(self) -> int:
        return self.coordinates.shape[0]


@dataclass(frozen=True, eq=False)
class ConformerEnsemble:
    molecule: Molecule
    conformers: tuple[Conformer, ...]
    weights: tuple[float, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "conformers", tuple(self.conformers))
        if not self.conformers:
            raise EmptyEnsemble("ensemble must hold at least one conformer")
        for c in self.conformers:
            if c.num_atoms != self.molecule.num_atoms:
                raise ShapeMismatch(
                    f"conformer has {c.num_atoms} atoms, molecule has {self.molecule.num_atoms}"
                )
        if self.weights is not None:
            w = tuple(float(x) for x in self.weights)
            if len(w) != len(self.conformers):
                raise ShapeMismatch(f"{len(w)} weights for {len(self.conformers)} conformers")
            if any(x < 0 or x > 1 for x in w) or abs(math.fsum(w) - 1.0) > 1e-9:
                raise DataError("ensemble weights must lie in [0, 1] and sum to 1")
            object.__setattr__(self, "weights", w)

    @classmethod
    def weighted(
        cls,
        molecule: Molecule,
        conformers: Sequence[Conformer],
        temperature: float = DEFAULT_TEMPERATURE,
        kB: float = DEFAULT_KB,
    ) -> "ConformerEnsemble":
        """Build an ensemble with weights recomputed from the conformer energies."""
        conformers = tuple(conformers)
        if not conformers:
            raise EmptyEnsemble("ensemble must hold at least one conformer")
        energies = [c.energy for c in conformers]
        if all(e is None for e in energies):
            weights = None
        elif any(e is None for e in energies):
            raise InvalidEnergy("either all or none of the conformers must carry an energy")
        else:
            weights = tuple(boltzmann_weights(energies, temperature, kB))
        return cls(molecule, conformers, weights)

    def __len__(self) -> int:
        return len(self.conformers)

    @property
    def energies(self) -> list[float | None]:
        return [c.energy for c in self.conformers]

    def lowest_energy_index(self) -> int:
        """Index of the minimum-energy conformer (ties and missing energies resolve to the lowest index)."""
        best, best_e = 0, None
        for k, c in enumerate(self.conformers):
            if c.energy is None:
                continue
            if best_e is None or c.energy < best_e:
                best, best_e = k, c.energy
        return best

    def lowest_energy_indices(self, cap: int) -> list[int]:
        """The ``cap`` lowest-energy conformer indices, returned in original order."""
        keyed = sorted(
            range(len(self.conformers)),
            key=lambda k: (math.inf if self.conformers[k].energy is None else self.conformers[k].energy, k),
        )
        return sorted(keyed[:cap])

    def subset(self, indices: Iterable[int], temperature: float = DEFAULT_TEMPERATURE,
               kB: float = DEFAULT_KB) -> "ConformerEnsemble":
        return ConformerEnsemble.weighted(
            self.molecule, [self.conformers[k] for k in indices], temperature, kB
        )


@dataclass(frozen=True, eq=False)
class Sample:
    identifier: str
    ensembles: Mapping[str, ConformerEnsemble]
    targets: Mapping[str, float]

    def __post_init__(self):
        if len(self.ensembles) not in (1, 2):
            raise DataError(f"sample {self.identifier!r} must carry one or two ensembles")
        for task, value in self.targets.items():
            if not math.isfinite(value):
                raise DataError(f"sample {self.identifier!r}: target {task!r} is not finite")

    @property
    def roles(self) -> tuple[str, ...]:
        return tuple(self.ensembles)

    @property
    def is_reaction(self) -> bool:
        return len(self.ensembles) == 2


def boltzmann_weights(energies, temperature: float = DEFAULT_TEMPERATURE,
                      kB: float = DEFAULT_KB) -> np.ndarray:
    """Normalized Boltzmann weights ``exp(-e/kT) / sum exp(-e/kT)``.

    The minimum energy is subtracted before exponentiation so that large
    absolute energies (e.g. Hartree totals) cannot overflow.
    """
    e = np.asarray(energies, dtype=np.float64).ravel()
    if e.size == 0:
        raise EmptyEnsemble("no energies given")
    if not np.all(np.isfinite(e)):
        raise InvalidEnergy("energies must be finite")
    if not temperature > 0 or not kB > 0:
        raise ValueError("temperature and kB must be positive")
    x = np.exp(-(e - e.min()) / (kB * temperature))
    return x / x.sum()


def boltzmann_average(values, weights) -> float:
    v = np.asarray(values, dtype=np.float64).ravel()
    w = np.asarray(weights, dtype=np.float64).ravel()
    if v.shape != w.shape:
        raise ShapeMismatch(f"{v.size} values vs {w.size} weights")
    return float(np.dot(w, v))


def compute_redox_descriptors(e_cation: float, e_neutral: float, e_anion: float) -> tuple[float, float]:
    """Ionization potential and electron affinity from charged-state energies."""
    for e in (e_cation, e_neutral, e_anion):
        if not math.isfinite(e):
            raise InvalidEnergy(f"non-finite energy {e!r}")
    return e_cation - e_neutral, e_neutral - e_anion


def count_rotatable_bonds(molecule: Molecule) -> int:
    """Single, acyclic bonds joining two non-terminal heavy atoms.

    Unlike RDKit's strict pattern, amide C-N bonds are counted.
    """
    atoms, nbrs = molecule.atoms, molecule.neighbors
    count = 0
    for b in molecule.bonds:
        if b.order != "SINGLE" or b.is_in_ring:
            continue
        if not (atoms[b.i].is_heavy and atoms[b.j].is_heavy):
            continue
        if any(atoms[k].is_heavy for k in nbrs[b.i] if k != b.j) and \
                any(atoms[k].is_heavy for k in nbrs[b.j] if k != b.i):
            count += 1
    return count


# --- graph perception from declared bonds -----------------------------------

def _ring_bonds(n: int, edges: Sequence[tuple[int, int]]) -> set[tuple[int, int]]:
    """Bonds that lie on a cycle, i.e. every non-bridge edge (iterative Tarjan)."""
    adj: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for k, (i, j) in enumerate(edges):
        adj[i].append((j, k))
        adj[j].append((i, k))
    disc = [-1] * n
    low = [0] * n
    bridges: set[int] = set()
    timer = 0
    for root in range(n):
        if disc[root] != -1:
            continue
        disc[root] = low[root] = timer
        timer += 1
        stack = [(root, -1, iter(adj[root]))]
        while stack:
            v, parent_edge, it = stack[-1]
            advanced = False
            for w, k in it:
                if k == parent_edge:
                    continue
                if disc[w] == -1:
                    disc[w] = low[w] = timer
                    timer += 1
                    stack.append((w, k, iter(adj[w])))
                    advanced = True
                    break
                low[v] = min(low[v], disc[w])
            if not advanced:
                stack.pop()
                if stack:
                    u = stack[-1][0]
                    low[u] = min(low[u], low[v])
                    if low[v] > disc[u]:
                        bridges.add(parent_edge)
    return {tuple(sorted(edges[k])) for k in range(len(edges)) if k not in bridges}


def _hybridization(element: str, orders: list[str], total_degree: int) -> str:
    if element == "H":
        return "S"
    n_double = orders.count("DOUBLE")
    if "TRIPLE" in orders or n_double >= 2:
        return "SP"
    if n_double or "AROMATIC" in orders:
        return "SP2"
    if total_degree == 5:
        return "SP3D"
    if total_degree >= 6:
        return "SP3D2"
    return "SP3"


def build_molecule(
    symbols: Sequence[str],
    bonds: Sequence[tuple],
    *,
    charges: Sequence[int] | None = None,
    chiral_tags: Sequence[str] | None = None,
    radicals: Sequence[int] | None = None,
    implicit_hs: Sequence[int] | None = None,
    identifier: str = "",
) -> Molecule:
    """Assemble a :class:`Molecule`, deriving degree, H count, ring, aromatic,
    hybridization and conjugation flags from the declared bonds.

    ``bonds`` holds ``(i, j, order)`` or ``(i, j, order, stereo)`` tuples.
    Nothing beyond the declared bond orders is perceived.
    """
    n = len(symbols)
    for s in symbols:
        if not elements.is_element(s):
            raise DataError(f"unknown element symbol {s!r}")
    raw = []
    for b in bonds:
        i, j, order = int(b[0]), int(b[1]), b[2] if len(b) > 2 else "SINGLE"
        stereo = b[3] if len(b) > 3 else "STEREONONE"
        if order not in BOND_ORDERS:
            raise DataError(f"unknown bond order {order!r}")
        raw.append((i, j, order, stereo))
    # validates indices/duplicates before perception touches them
    Molecule(tuple(AtomRecord(s) for s in symbols), tuple(Bond(i, j) for i, j, _, _ in raw))

    ring = _ring_bonds(n, [(i, j) for i, j, _, _ in raw])
    orders_at: list[list[str]] = [[] for _ in range(n)]
    nbrs: list[list[int]] = [[] for _ in range(n)]
    for i, j, order, _ in raw:
        orders_at[i].append(order)
        orders_at[j].append(order)
        nbrs[i].append(j)
        nbrs[j].append(i)
    unsaturated = [any(o != "SINGLE" for o in orders_at[k]) for k in range(n)]

    bond_objs = []
    for i, j, order, stereo in raw:
        if order == "AROMATIC":
            conj = True
        elif order == "SINGLE":
            conj = unsaturated[i] and unsaturated[j]
        else:
            # multiple bond flanked by another unsaturated centre
            conj = any(unsaturated[k] for k in nbrs[i] if k != j) or \
                any(unsaturated[k] for k in nbrs[j] if k != i)
        key = (min(i, j), max(i, j))
        bond_objs.append(Bond(i, j, order, stereo, conj, key in ring))

    atoms = []
    for k, s in enumerate(symbols):
        n_h = sum(1 for m in nbrs[k] if symbols[m] == "H") + (implicit_hs[k] if implicit_hs else 0)
        degree = len(nbrs[k]) + (implicit_hs[k] if implicit_hs else 0)
        atoms.append(AtomRecord(
            element=s,
            formal_charge=int(charges[k]) if charges is not None else 0,
            chiral_tag=chiral_tags[k] if chiral_tags is not None else "CHI_UNSPECIFIED",
            hybridization=_hybridization(s, orders_at[k], degree),
            is_aromatic="AROMATIC" in orders_at[k],
            is_in_ring=any((min(k, m), max(k, m)) in ring for m in nbrs[k]),
            degree=degree,
            num_hs=n_h,
            num_radical_electrons=int(radicals[k]) if radicals is not None else 0,
        ))
    return Molecule(tuple(atoms), tuple(bond_objs), identifier)


def permute_molecule(molecule: Molecule, order: Sequence[int]) -> Molecule:
    """Relabel atoms so that new atom ``k`` is old atom ``order[k]``."""
    order = list(order)
    inverse = {old: new for new, old in enumerate(order)}
    atoms = tuple(molecule.atoms[old] for old in order)
    bonds = tuple(
        Bond(inverse[b.i], inverse[b.j], b.order, b.stereo, b.is_conjugated, b.is_in_ring)
        for b in molecule.bonds
    )
    return Molecule(atoms, bonds, molecule.identifier)


def connected_components(n: int, edges: Iterable[tuple[int, int]]) -> int:
    adj: list[list[int]] = [[] for _ in range(n)]
    for i, j in edges:
        adj[i].append(j)
        adj[j].append(i)
    seen = [False] * n
    count = 0
    for s in range(n):
        if seen[s]:
            continue
        count += 1
        seen[s] = True
        queue = deque([s])
        while queue:
            v = queue.popleft()
            for w in adj[v]:
                if not seen[w]:
                    seen[w] = True
                    queue.append(w)
    return count
