"""Experiment configuration files (YAML or JSON)."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import yaml

from marcel.ensemble.model import SCHEMES, STRATEGIES, EnsembleModelConfig
from marcel.ensemble.set_encoders import VARIANTS
from marcel.errors import InvalidArgument
from marcel.models.encoders import EncoderConfig

MODELS = ("schnet", "gin", "rf")


@dataclass
class ExperimentConfig:
    dataset: str
    task: str
    model: str = "schnet"
    strategy: str = "single"
    set_encoder: str = "deepsets"
    conformer_cap: int = 20
    eval_scheme: str = "fixed"
    hidden_dim: int = 128
    epochs: int = 2000
    patience: int = 200
    repeats: int = 3
    lr: float = 1e-3
    batch_size: int = 64
    seed: int = 0
    split_seed: int | None = None   # defaults to seed
    resplit: bool = False           # draw a fresh split per repeat
    num_layers: int = 3
    num_interactions: int = 3
    num_rbf: int = 50
    cutoff: float = 5.0
    cutoff_fallback: bool = True
    pooling: str = "sum"
    single_conformer: str | None = None  # None: take the manifest's choice
    n_trees: int = 500

    def __post_init__(self):
        if self.model not in MODELS:
            raise InvalidArgument(f"unknown model {self.model!r}; expected one of {MODELS}")
        if self.strategy not in STRATEGIES:
            raise InvalidArgument(f"unknown strategy {self.strategy!r}; expected one of {STRATEGIES}")
        if self.set_encoder not in VARIANTS:
            raise InvalidArgument(f"unknown set encoder {self.set_encoder!r}")
        if self.eval_scheme not in SCHEMES:
            raise InvalidArgument(f"unknown evaluation scheme {self.eval_scheme!r}")
        for name in ("epochs", "repeats", "batch_size", "conformer_cap", "hidden_dim", "n_trees"):
            if getattr(self, name) < 1:
                raise InvalidArgument(f"{name} must be >= 1")
        if self.patience < 1 or not self.lr > 0:
            raise InvalidArgument("patience must be >= 1 and lr > 0")

    @property
    def effective_split_seed(self) -> int:
        return self.seed if self.split_seed is None else self.split_seed

    def to_dict(self) -> dict:
        return asdict(self)

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON form (sorted keys, no whitespace)."""
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()

    def model_config(self, roles, single_conformer: str = "lowest", seed: int | None = None) -> EnsembleModelConfig:
        enc = EncoderConfig(
            hidden_dim=self.hidden_dim, num_layers=self.num_layers, pooling=self.pooling,
            num_rbf=self.num_rbf, cutoff=self.cutoff, num_interactions=self.num_interactions,
            cutoff_fallback=self.cutoff_fallback,
        )
        return EnsembleModelConfig(
            encoder=enc, model=self.model, strategy=self.strategy, set_encoder=self.set_encoder,
            conformer_cap=self.conformer_cap, eval_scheme=self.eval_scheme, roles=tuple(roles),
            single_conformer=self.single_conformer or single_conformer,
            seed=self.seed if seed is None else seed,
        )


def config_from_dict(raw: dict) -> ExperimentConfig:
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise InvalidArgument(f"unknown config keys: {unknown}")
    return ExperimentConfig(**raw)


def load_config(path) -> ExperimentConfig:
    text = Path(path).read_text()
    raw = json.loads(text) if str(path).endswith(".json") else yaml.safe_load(text)
    if not isinstance(raw, dict):
        raise InvalidArgument(f"{path}: config must be a mapping")
    return config_from_dict(raw)
