"""Rigid alignment, symmetry-aware RMSD and Butina deduplication of conformers."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from marcel.chem import (
    DEFAULT_KB,
    DEFAULT_TEMPERATURE,
    Conformer,
    ConformerEnsemble,
    Molecule,
)
from marcel.errors import InvalidArgument, ShapeMismatch

DEFAULT_AUTOMORPHISM_CAP = 10_000


@dataclass(frozen=True, eq=False)
class AlignmentResult:
    rotation: np.ndarray
    translation: np.ndarray
    rmsd: float

    def apply(self, coords: np.ndarray) -> np.ndarray:
        return np.asarray(coords) @ self.rotation.T + self.translation


@dataclass(frozen=True)
class ClusterAssignment:
    clusters: tuple[tuple[int, tuple[int, ...]], ...]
    threshold: float

    @property
    def centroids(self) -> list[int]:
        return [c for c, _ in self.clusters]

    def labels(self, n: int) -> np.ndarray:
        out = np.full(n, -1, dtype=np.int64)
        for k, (_, members) in enumerate(self.clusters):
            out[list(members)] = k
        return out


def _check_pair(P, Q):
    P = np.asarray(P, dtype=np.float64)
    Q = np.asarray(Q, dtype=np.float64)
    if P.ndim != 2 or P.shape[1] != 3 or P.shape != Q.shape or P.shape[0] < 1:
        raise ShapeMismatch(f"cannot align point sets of shapes {P.shape} and {Q.shape}")
    return P, Q


def kabsch_align(P, Q) -> AlignmentResult:
    """Proper rotation ``R`` and translation ``t`` minimizing RMSD(P @ R.T + t, Q)."""
    P, Q = _check_pair(P, Q)
    p0, q0 = P.mean(axis=0), Q.mean(axis=0)
    Pc, Qc = P - p0, Q - q0
    H = Pc.T @ Qc
    if not np.any(np.abs(H) > 1e-300):
        R = np.eye(3)
    else:
        U, _, Vt = np.linalg.svd(H)
        d = np.sign(np.linalg.det(Vt.T @ U.T)) or 1.0
        R = Vt.T @ np.diag([1.0, 1.0, d]) @ U.T
    resid = Pc @ R.T - Qc
    rmsd = float(np.sqrt(np.mean(np.sum(resid * resid, axis=1))))
    return AlignmentResult(R, q0 - R @ p0, rmsd)


def _batched_kabsch_rmsd(P: np.ndarray, Qs: np.ndarray) -> np.ndarray:
    """RMSD of aligning ``P`` (n x 3) onto each of ``Qs`` (m x n x 3)."""
    Pc = P - P.mean(axis=0)
    Qc = Qs - Qs.mean(axis=1, keepdims=True)
    H = np.einsum("ni,mnj->mij", Pc, Qc)
    U, _, Vt = np.linalg.svd(H)
    V = np.swapaxes(Vt, 1, 2)
    d = np.sign(np.linalg.det(V @ np.swapaxes(U, 1, 2)))
    d[d == 0] = 1.0
    D = np.zeros_like(H)
    D[:, 0, 0] = 1.0
    D[:, 1, 1] = 1.0
    D[:, 2, 2] = d
    R = V @ D @ np.swapaxes(U, 1, 2)
    degenerate = ~np.any(np.abs(H) > 1e-300, axis=(1, 2))
    R[degenerate] = np.eye(3)
    resid = np.einsum("ni,mji->mnj", Pc, R) - Qc
    return np.sqrt(np.mean(np.sum(resid * resid, axis=2), axis=1))


def _color_refinement(molecule: Molecule, atoms: list[int]) -> dict[int, int]:
    """Weisfeiler-Lehman colours of the induced subgraph on ``atoms``."""
    keep = set(atoms)
    nbrs = {v: [u for u in molecule.neighbors[v] if u in keep] for v in atoms}
    colors = {v: hash((molecule.atoms[v].element, len(nbrs[v]))) for v in atoms}
    n_classes = len(set(colors.values()))
    while True:
        new = {}
        for v in atoms:
            sig = sorted((molecule.bond_lookup[(v, u)].order, colors[u]) for u in nbrs[v])
            new[v] = hash((colors[v], tuple(sig)))
        count = len(set(new.values()))
        colors = new
        if count == n_classes:
            return colors
        n_classes = count


def graph_automorphisms(molecule: Molecule, cap: int = DEFAULT_AUTOMORPHISM_CAP,
                        atoms: list[int] | None = None) -> list[tuple[int, ...]]:
    """Element- and bond-order-preserving automorphisms, identity first.

    Returns at most ``cap`` mappings as tuples over ``atoms`` (default: all
    atoms) where entry ``k`` gives the image position of ``atoms[k]``.
    """
    if cap <= 0:
        raise InvalidArgument("automorphism cap must be positive")
    atoms = list(range(molecule.num_atoms)) if atoms is None else list(atoms)
    pos = {v: k for k, v in enumerate(atoms)}
    keep = set(atoms)
    colors = _color_refinement(molecule, atoms)
    by_color: dict[int, list[int]] = {}
    for v in atoms:
        by_color.setdefault(colors[v], []).append(v)
    adj = {v: {u: molecule.bond_lookup[(v, u)].order for u in molecule.neighbors[v] if u in keep}
           for v in atoms}

    # visit atoms breadth-first so each new atom is constrained by mapped neighbours
    visit: list[int] = []
    seen: set[int] = set()
    for root in sorted(atoms, key=lambda v: (len(by_color[colors[v]]), v)):
        if root in seen:
            continue
        seen.add(root)
        queue = [root]
        while queue:
            v = queue.pop(0)
            visit.append(v)
            for u in sorted(adj[v]):
                if u not in seen:
                    seen.add(u)
                    queue.append(u)

    results: list[tuple[int, ...]] = []
    mapping: dict[int, int] = {}
    used: set[int] = set()

    def extend(depth: int) -> bool:
        if depth == len(visit):
            results.append(tuple(pos[mapping[v]] for v in atoms))
            return len(results) >= cap
        v = visit[depth]
        candidates = by_color[colors[v]]
        # trying v -> v first makes the identity the first mapping found
        for c in [v] + [c for c in candidates if c != v]:
            if c in used:
                continue
            ok = True
            for u, order in adj[v].items():
                if u in mapping and adj[c].get(mapping[u]) != order:
                    ok = False
                    break
            if ok:
                # mapped non-neighbours must stay non-neighbours
                mapped_nbrs = sum(1 for u in adj[v] if u in mapping)
                if mapped_nbrs != sum(1 for w in adj[c] if w in used):
                    ok = False
            if not ok:
                continue
            mapping[v] = c
            used.add(c)
            if extend(depth + 1):
                return True
            del mapping[v]
            used.discard(c)
        return False

    extend(0)
    return results


def _atom_subset(molecule: Molecule, heavy_only: bool) -> list[int]:
    if not heavy_only:
        return list(range(molecule.num_atoms))
    heavy = [k for k, a in enumerate(molecule.atoms) if a.is_heavy]
    return heavy or list(range(molecule.num_atoms))


def symmetry_aware_rmsd(molecule: Molecule, A: Conformer, B: Conformer,
                        automorphism_cap: int = DEFAULT_AUTOMORPHISM_CAP,
                        heavy_only: bool = False, automorphisms=None) -> float:
    """Minimum Kabsch RMSD between ``A`` and ``B`` over graph automorphisms of ``molecule``."""
    if automorphism_cap <= 0:
        raise InvalidArgument("automorphism cap must be positive")
    atoms = _atom_subset(molecule, heavy_only)
    if automorphisms is None:
        automorphisms = graph_automorphisms(molecule, automorphism_cap, atoms)
    a = np.asarray(A.coordinates if isinstance(A, Conformer) else A)[atoms]
    b = np.asarray(B.coordinates if isinstance(B, Conformer) else B)[atoms]
    if a.shape != b.shape:
        raise ShapeMismatch(f"conformer shapes differ: {a.shape} vs {b.shape}")
    # identity (always first) goes through the reference path so trivial groups match it exactly
    best = kabsch_align(a, b).rmsd
    perms = np.asarray(automorphisms[1:], dtype=np.int64).reshape(-1, len(atoms))
    for start in range(0, len(perms), 2048):
        chunk = perms[start:start + 2048]
        best = min(best, float(_batched_kabsch_rmsd(a, b[chunk]).min()))
    return best


def rmsd_matrix(molecule: Molecule, conformers, automorphism_cap: int = DEFAULT_AUTOMORPHISM_CAP,
                heavy_only: bool = False, workers: int | None = None) -> np.ndarray:
    """Symmetric matrix of pairwise symmetry-aware RMSDs (zero diagonal)."""
    conformers = list(conformers)
    n = len(conformers)
    atoms = _atom_subset(molecule, heavy_only)
    autos = graph_automorphisms(molecule, automorphism_cap, atoms)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]

    def one(pair):
        i, j = pair
        return symmetry_aware_rmsd(molecule, conformers[i], conformers[j], automorphism_cap,
                                   heavy_only, autos)

    if workers and workers > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(workers) as pool:
            values = list(pool.map(one, pairs))
    else:
        values = [one(p) for p in pairs]
    D = np.zeros((n, n))
    for (i, j), v in zip(pairs, values):
        D[i, j] = D[j, i] = v
    return D


def butina_cluster(distances, threshold: float) -> ClusterAssignment:
    """Sphere-exclusion clustering.

    Repeatedly takes the unassigned point with the most unassigned neighbours
    within ``threshold`` (ties: lowest index) as a centroid and assigns it
    together with those neighbours.
    """
    D = np.asarray(distances, dtype=np.float64)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise InvalidArgument(f"distance matrix must be square, got {D.shape}")
    if threshold <= 0:
        raise InvalidArgument("threshold must be positive")
    if np.any(np.abs(D - D.T) > 1e-9):
        raise InvalidArgument("distance matrix is not symmetric")
    n = D.shape[0]
    nbr = D <= threshold
    np.fill_diagonal(nbr, True)
    free = np.ones(n, dtype=bool)
    clusters = []
    while free.any():
        counts = np.where(free, (nbr & free).sum(axis=1), -1)
        c = int(np.argmax(counts))
        members = np.flatnonzero(nbr[c] & free)
        free[members] = False
        clusters.append((c, tuple(int(m) for m in members)))
    return ClusterAssignment(tuple(clusters), float(threshold))


def select_survivors(distances, energies, threshold: float, until_stable: bool = True) -> list[int]:
    """Indices kept after clustering: one minimum-energy member per cluster.

    With ``until_stable`` the clustering is repeated on the survivors until
    no two survivors share a cluster, which makes deduplication idempotent.
    """
    D = np.asarray(distances, dtype=np.float64)
    e = np.array([np.inf if x is None else x for x in energies], dtype=np.float64)
    alive = list(range(D.shape[0]))
    while True:
        sub = D[np.ix_(alive, alive)]
        assignment = butina_cluster(sub, threshold)
        keep = []
        for _, members in assignment.clusters:
            idx = [alive[m] for m in members]
            keep.append(min(idx, key=lambda k: (e[k], k)))
        keep.sort()
        if len(keep) == len(alive) or not until_stable:
            return keep
        alive = keep


def deduplicate_ensemble(ensemble: ConformerEnsemble, threshold: float,
                         automorphism_cap: int = DEFAULT_AUTOMORPHISM_CAP,
                         heavy_only: bool = False, until_stable: bool = True,
                         temperature: float = DEFAULT_TEMPERATURE, kB: float = DEFAULT_KB,
                         workers: int | None = None) -> ConformerEnsemble:
    """Keep the lowest-energy conformer of each RMSD cluster; weights are recomputed."""
    if threshold <= 0:
        raise InvalidArgument("threshold must be positive")
    if len(ensemble) == 1:
        return ensemble
    D = rmsd_matrix(ensemble.molecule, ensemble.conformers, automorphism_cap, heavy_only, workers)
    keep = select_survivors(D, ensemble.energies, threshold, until_stable)
    if len(keep) == len(ensemble):
        return ensemble
    return ensemble.subset(keep, temperature, kB)
