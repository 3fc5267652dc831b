"""Conformer-ensemble models: single-conformer, sampling and set-encoder strategies."""

from __future__ import annotations

import hashlib
import itertools
from dataclasses import asdict, dataclass, field

import numpy as np

from marcel.autodiff import tensor as T
from marcel.autodiff.nn import Linear, Module
from marcel.autodiff.tensor import Tensor
from marcel.chem import Conformer, ConformerEnsemble, Sample
from marcel.ensemble.set_encoders import VARIANTS, SetEncoder
from marcel.errors import DataError, EmptyEnsemble, InvalidArgument
from marcel.io.features import featurize
from marcel.io.manifest import MOLECULE_ROLE
from marcel.models.encoders import EncoderConfig, GINEncoder, GraphEmbedding, SchNetEncoder
from marcel.models.graphs import conformer_graph, geometry_batch, topology_batch

STRATEGIES = ("single", "sampling", "set-encoder")
SCHEMES = ("fixed", "random", "all")
ENCODERS = ("schnet", "gin")


@dataclass
class EnsembleModelConfig:
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    model: str = "schnet"
    strategy: str = "single"
    set_encoder: str = "deepsets"
    conformer_cap: int = 20
    eval_scheme: str = "fixed"
    roles: tuple = (MOLECULE_ROLE,)
    single_conformer: str = "lowest"  # lowest | random (fixed per molecule)
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.encoder, dict):
            self.encoder = EncoderConfig(**self.encoder)
        self.roles = tuple(self.roles)
        if self.model not in ENCODERS:
            raise InvalidArgument(f"unknown encoder {self.model!r}; expected one of {ENCODERS}")
        if self.strategy not in STRATEGIES:
            raise InvalidArgument(f"unknown strategy {self.strategy!r}; expected one of {STRATEGIES}")
        if self.set_encoder not in VARIANTS:
            raise InvalidArgument(f"unknown set encoder {self.set_encoder!r}")
        if self.eval_scheme not in SCHEMES:
            raise InvalidArgument(f"unknown evaluation scheme {self.eval_scheme!r}")
        if self.conformer_cap < 1:
            raise InvalidArgument("conformer_cap must be >= 1")
        if self.single_conformer not in ("lowest", "random"):
            raise InvalidArgument("single_conformer must be 'lowest' or 'random'")
        if len(self.roles) not in (1, 2):
            raise InvalidArgument("a model has one or two roles")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["roles"] = list(self.roles)
        return d


def sample_index(ensemble: ConformerEnsemble, rng: np.random.Generator) -> int:
    n = len(ensemble.conformers) if ensemble is not None else 0
    if n == 0:
        raise EmptyEnsemble("cannot sample from an empty ensemble")
    return int(rng.integers(n))


def sample_conformer(ensemble: ConformerEnsemble, rng: np.random.Generator) -> Conformer:
    """Uniform draw; the training label stays that of the whole ensemble."""
    k = sample_index(ensemble, rng)
    return ensemble.conformers[k]


def draw_rng(seed: int, epoch: int, sample_idx: int) -> np.random.Generator:
    """Generator for one sample's draw in one epoch."""
    return np.random.default_rng((seed, epoch, sample_idx))


def fixed_random_index(identifier: str, role: str, n: int, seed: int) -> int:
    """A per-molecule conformer index that depends only on (seed, identifier, role)."""
    key = int.from_bytes(hashlib.blake2b(f"{role}/{identifier}".encode(), digest_size=8).digest(), "little")
    return int(np.random.default_rng((seed, key)).integers(n))


class BatchBuilder:
    """Caches radius graphs and 2D features, keyed by (identifier, role[, conformer])."""

    def __init__(self, cutoff: float, fallback: bool = True):
        self.cutoff = cutoff
        self.fallback = fallback
        self._graphs: dict = {}
        self._features: dict = {}

    def graph(self, sample: Sample, role: str, k: int):
        key = (sample.identifier, role, k)
        if key not in self._graphs:
            ens = sample.ensembles[role]
            coords = ens.conformers[k].coordinates
            self._graphs[key] = (ens.molecule.atomic_numbers,
                                 conformer_graph(coords, self.cutoff, self.fallback))
        return self._graphs[key]

    def features(self, sample: Sample, role: str):
        key = (sample.identifier, role)
        if key not in self._features:
            self._features[key] = featurize(sample.ensembles[role].molecule)
        return self._features[key]


class EnsembleModel(Module):
    """One encoder tower per role, an optional set encoder per role, and a linear head.

    ``forward`` returns standardized predictions; :meth:`predict_batch`
    maps them back with the stored target mean and standard deviation.
    """

    def __init__(self, config: EnsembleModelConfig, rng: np.random.Generator | None = None):
        rng = np.random.default_rng(config.seed) if rng is None else rng
        self.config = config
        d = config.encoder.hidden_dim
        tower = SchNetEncoder if config.model == "schnet" else GINEncoder
        self.towers = [tower(config.encoder, rng) for _ in config.roles]
        self.set_encoders = ([SetEncoder(config.set_encoder, d, rng) for _ in config.roles]
                             if self.uses_sets else [])
        self.head = Linear(len(config.roles) * d, 1, rng)
        self.target_mean = 0.0
        self.target_std = 1.0
        self.fixed_indices: dict[str, int] = {}
        self.builder = BatchBuilder(config.encoder.cutoff, config.encoder.cutoff_fallback)

    @property
    def uses_sets(self) -> bool:
        return self.config.strategy == "set-encoder" and self.config.model != "gin"

    # -- conformer selection -------------------------------------------------
    def check_roles(self, sample: Sample) -> None:
        if set(sample.roles) != set(self.config.roles):
            raise DataError(
                f"sample {sample.identifier!r} has roles {sample.roles}, model expects {self.config.roles}"
            )

    def designated_index(self, sample: Sample, role: str) -> int:
        ens = sample.ensembles[role]
        if self.config.single_conformer == "lowest":
            return ens.lowest_energy_index()
        key = f"{role}/{sample.identifier}"
        if key not in self.fixed_indices:
            self.fixed_indices[key] = fixed_random_index(sample.identifier, role, len(ens), self.config.seed)
        return self.fixed_indices[key]

    def selection(self, sample: Sample, rng: np.random.Generator | None = None) -> dict:
        """Conformers to encode per role: capped set, a sampled one, or the designated one."""
        self.check_roles(sample)
        out = {}
        for role in self.config.roles:
            ens = sample.ensembles[role]
            if self.uses_sets:
                out[role] = tuple(ens.lowest_energy_indices(self.config.conformer_cap))
            elif rng is not None:
                out[role] = (sample_index(ens, rng),)
            else:
                out[role] = (self.designated_index(sample, role),)
        return out

    # -- forward ---------------------------------------------------------------
    def _role_embeddings(self, r: int, role: str, samples, selections) -> Tensor:
        if self.config.model == "gin":
            return self.towers[r](topology_batch([self.builder.features(s, role) for s in samples]))
        items, owner = [], []
        for b, (s, sel) in enumerate(zip(samples, selections)):
            for k in sel[role]:
                items.append(self.builder.graph(s, role, k))
                owner.append(b)
        Z = self.towers[r](geometry_batch(items))
        if self.uses_sets:
            return self.set_encoders[r](Z, np.asarray(owner, dtype=np.int64), len(samples))
        if len(owner) != len(samples):
            raise InvalidArgument("without a set encoder each sample encodes exactly one conformer per role")
        return Z

    def embed(self, samples, selections) -> Tensor:
        parts = [self._role_embeddings(r, role, samples, selections)
                 for r, role in enumerate(self.config.roles)]
        return parts[0] if len(parts) == 1 else T.concat(parts, axis=1)

    def forward(self, samples, selections) -> Tensor:
        for s in samples:
            self.check_roles(s)
        out = self.head(self.embed(samples, selections))
        return T.reshape(out, (len(samples),))

    def embeddings(self, sample: Sample, selection: dict | None = None) -> list[GraphEmbedding]:
        """Per-role embeddings (after set aggregation) with provenance."""
        selection = self.selection(sample) if selection is None else selection
        out = []
        for r, role in enumerate(self.config.roles):
            vec = self._role_embeddings(r, role, [sample], [selection]).data[0].astype(np.float64)
            where = "2D" if self.config.model == "gin" else (
                selection[role][0] if len(selection[role]) == 1 else tuple(selection[role]))
            out.append(GraphEmbedding(vec, (sample.identifier, where)))
        return out

    # -- prediction --------------------------------------------------------------
    def destandardize(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values, dtype=np.float64) * self.target_std + self.target_mean

    def predict_selections(self, samples, selections, batch_size: int = 256) -> np.ndarray:
        out = []
        for start in range(0, len(samples), batch_size):
            stop = start + batch_size
            out.append(self.forward(samples[start:stop], selections[start:stop]).data)
        return self.destandardize(np.concatenate(out)) if out else np.zeros(0)

    def predict_batch(self, samples, batch_size: int = 256) -> np.ndarray:
        return self.predict_selections(samples, [self.selection(s) for s in samples], batch_size)

    def scheme_predictions(self, samples, scheme: str, rng: np.random.Generator | None = None,
                           batch_size: int = 256) -> np.ndarray:
        """Batched :func:`evaluate_scheme` over several samples."""
        if scheme not in SCHEMES:
            raise InvalidArgument(f"unknown evaluation scheme {scheme!r}; expected one of {SCHEMES}")
        if scheme == "random" and rng is None:
            rng = np.random.default_rng(self.config.seed)
        if self.uses_sets or self.config.model == "gin":
            # the scheme only concerns models that see one conformer at a time
            return self.predict_batch(samples, batch_size)
        virtual, selections, owner = [], [], []
        for b, s in enumerate(samples):
            self.check_roles(s)
            roles = self.config.roles
            if scheme == "fixed":
                combos = [tuple(s.ensembles[r].lowest_energy_index() for r in roles)]
            elif scheme == "random":
                combos = [tuple(sample_index(s.ensembles[r], rng) for r in roles)]
            else:
                combos = list(itertools.product(*(range(len(s.ensembles[r])) for r in roles)))
            for combo in combos:
                virtual.append(s)
                selections.append({r: (k,) for r, k in zip(roles, combo)})
                owner.append(b)
        preds = self.predict_selections(virtual, selections, batch_size)
        owner = np.asarray(owner)
        return np.bincount(owner, weights=preds, minlength=len(samples)) / np.bincount(owner, minlength=len(samples))


def predict(sample: Sample, model: EnsembleModel) -> float:
    """Prediction under the model's own strategy (designated conformer or capped set)."""
    model.check_roles(sample)
    return float(model.predict_batch([sample])[0])


def evaluate_scheme(sample: Sample, model: EnsembleModel, scheme: str,
                    rng: np.random.Generator | None = None) -> float:
    """``fixed``: lowest-energy conformer; ``random``: one uniform draw; ``all``: mean over every conformer.

    For two-role samples ``all`` averages over every pair of conformers.
    """
    return float(model.scheme_predictions([sample], scheme, rng)[0])
