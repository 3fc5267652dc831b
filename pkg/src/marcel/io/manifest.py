"""Dataset manifests.

A manifest is a YAML (or JSON) mapping::

    name: kraken
    tasks: [B5, L, burB5, burL]
    structures: [kraken.sdf]          # molecular datasets
    roles:                            # reaction datasets instead of `structures`
      pro_R: [ee_R.sdf]
      pro_S: [ee_S.sdf]
    labels: labels.csv                # optional for molecular datasets
    dedup_threshold: 1.0              # or {unbound: 0.5, bound: 1.0}
    deduplicate: false
    energy_unit: kcal/mol
    energy_tag: energy
    temperature: 298.15
    rotatable_bond_filter: 5          # keep molecules with MORE than this many
    single_conformer: lowest          # or "random" (fixed, seeded)

Relative paths resolve against ``$MARCEL_DATA_DIR`` when it is set and the
file exists there, otherwise against the manifest's directory.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

from marcel.chem import DEFAULT_TEMPERATURE, boltzmann_constant
from marcel.errors import DataError
from marcel.io.xyz import DEFAULT_ENERGY_PATTERN

MOLECULE_ROLE = "molecule"
DATA_DIR_ENV = "MARCEL_DATA_DIR"


@dataclass
class DatasetManifest:
    name: str
    tasks: list[str]
    roles: dict[str, list[Path]]
    labels: Path | None = None
    dedup_threshold: float | dict[str, float] = 1.0
    deduplicate: bool = False
    automorphism_cap: int = 10_000
    heavy_only: bool = False
    energy_unit: str = "kcal/mol"
    energy_tag: str = "energy"
    temperature: float = DEFAULT_TEMPERATURE
    rotatable_bond_filter: int | None = None
    xyz_energy_pattern: str = DEFAULT_ENERGY_PATTERN
    single_conformer: str = "lowest"
    base_dir: Path = field(default_factory=Path.cwd)

    def __post_init__(self):
        if not self.tasks:
            raise DataError("manifest must declare at least one task")
        if not self.roles or not all(self.roles.values()):
            raise DataError("manifest must reference at least one structure file per role")
        if len(self.roles) > 2:
            raise DataError("at most two roles (reaction datasets) are supported")
        for role in self.roles:
            if self.threshold_for(role) <= 0:
                raise DataError(f"dedup threshold for {role!r} must be positive")
        if self.single_conformer not in ("lowest", "random"):
            raise DataError("single_conformer must be 'lowest' or 'random'")
        boltzmann_constant(self.energy_unit)
        missing = [p for files in self.roles.values() for p in files if not Path(p).exists()]
        if self.labels is not None and not Path(self.labels).exists():
            missing.append(self.labels)
        if missing:
            raise DataError("manifest references missing files: " + ", ".join(map(str, missing)))

    @property
    def kB(self) -> float:
        return boltzmann_constant(self.energy_unit)

    @property
    def is_reaction(self) -> bool:
        return len(self.roles) == 2

    def threshold_for(self, role: str) -> float:
        if isinstance(self.dedup_threshold, Mapping):
            return float(self.dedup_threshold[role])
        return float(self.dedup_threshold)

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "tasks": list(self.tasks),
            "roles": {r: [str(p) for p in files] for r, files in self.roles.items()},
            "labels": str(self.labels) if self.labels else None,
            "dedup_threshold": self.dedup_threshold,
            "deduplicate": self.deduplicate,
            "automorphism_cap": self.automorphism_cap,
            "heavy_only": self.heavy_only,
            "energy_unit": self.energy_unit,
            "energy_tag": self.energy_tag,
            "temperature": self.temperature,
            "rotatable_bond_filter": self.rotatable_bond_filter,
            "xyz_energy_pattern": self.xyz_energy_pattern,
            "single_conformer": self.single_conformer,
        }


def resolve_path(value: str | os.PathLike, base_dir: Path) -> Path:
    p = Path(value).expanduser()
    if p.is_absolute():
        return p
    data_dir = os.environ.get(DATA_DIR_ENV)
    if data_dir and (Path(data_dir) / p).exists():
        return Path(data_dir) / p
    return base_dir / p


def manifest_from_dict(raw: Mapping[str, Any], base_dir: Path) -> DatasetManifest:
    raw = dict(raw)
    unknown = set(raw) - {f for f in DatasetManifest.__dataclass_fields__} - {"structures"}
    if unknown:
        raise DataError(f"unknown manifest keys: {sorted(unknown)}")
    if "structures" in raw and "roles" in raw:
        raise DataError("use either 'structures' or 'roles', not both")
    if "structures" in raw:
        files = raw.pop("structures")
        roles = {MOLECULE_ROLE: [files] if isinstance(files, str) else list(files)}
    else:
        roles = {r: [f] if isinstance(f, str) else list(f) for r, f in (raw.pop("roles", None) or {}).items()}
    raw["roles"] = {r: [resolve_path(f, base_dir) for f in files] for r, files in roles.items()}
    if raw.get("labels"):
        raw["labels"] = resolve_path(raw["labels"], base_dir)
    if isinstance(raw.get("tasks"), str):
        raw["tasks"] = [raw["tasks"]]
    raw.setdefault("name", base_dir.name)
    raw["base_dir"] = base_dir
    return DatasetManifest(**raw)


def load_manifest(path: str | os.PathLike) -> DatasetManifest:
    path = resolve_path(path, Path.cwd())
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise DataError(f"cannot read manifest {path}: {exc}") from None
    if not isinstance(raw, Mapping):
        raise DataError(f"manifest {path} is not a mapping")
    return manifest_from_dict(raw, path.parent.resolve())


def save_manifest(manifest: DatasetManifest, path: str | os.PathLike) -> None:
    data = manifest.to_dict()
    if len(manifest.roles) == 1 and MOLECULE_ROLE in manifest.roles:
        data["structures"] = data.pop("roles")[MOLECULE_ROLE]
    with open(path, "w") as fh:
        yaml.safe_dump(data, fh, sort_keys=False)
