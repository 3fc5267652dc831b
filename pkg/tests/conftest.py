import numpy as np
import pytest

from marcel.chem import Conformer, ConformerEnsemble, Sample, build_molecule
from marcel.io.manifest import MOLECULE_ROLE


def chain(symbols, identifier=""):
    return build_molecule(symbols, [(k, k + 1, "SINGLE") for k in range(len(symbols) - 1)],
                          identifier=identifier)


def benzene():
    bonds = [(k, (k + 1) % 6, "AROMATIC") for k in range(6)]
    return build_molecule(["C"] * 6, bonds, implicit_hs=[1] * 6, identifier="benzene")


def random_ensemble(mol, n_conf, rng, spread=1.0):
    base = rng.normal(scale=1.5, size=(mol.num_atoms, 3))
    confs = [Conformer(base + spread * rng.normal(size=base.shape), float(rng.uniform(0, 3)))
             for _ in range(n_conf)]
    return ConformerEnsemble.weighted(mol, confs)


def toy_sample(identifier, n_conf, rng, n_atoms=4, roles=(MOLECULE_ROLE,), target=1.0):
    ensembles = {}
    for role in roles:
        mol = chain(["C", "N", "C", "O", "C", "C"][:n_atoms], identifier)
        ensembles[role] = random_ensemble(mol, n_conf, rng)
    return Sample(identifier, ensembles, {"y": target})


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance outcomes, filled by test_acceptance and echoed at the end of the run
ACCEPTANCE: dict[tuple, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
