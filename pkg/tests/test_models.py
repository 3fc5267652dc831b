import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from marcel.autodiff import Tensor, precision
from marcel.autodiff import tensor as T
from marcel.autodiff.gradcheck import gradient_errors
from marcel.chem import build_molecule, permute_molecule
from marcel.errors import InvalidArgument, ShapeMismatch
from marcel.io.features import FeatureMatrices, featurize
from marcel.models import (
    EncoderConfig,
    GINEncoder,
    GraphEmbedding,
    SchNetEncoder,
    conformer_graph,
    geometry_batch,
    gin_encode,
    radius_graph,
    schnet_encode,
    topology_batch,
    two_tower_encode,
)

from conftest import chain

# recorded from the first verified build: seed 7, d=4, chain C-C-O, float32
GOLDEN_GIN = [-4.825164794921875, -5.930884838104248, 4.710214138031006, 0.4768528640270233]


def small_config(**kw):
    base = dict(hidden_dim=8, num_layers=2, num_rbf=6, cutoff=5.0, num_interactions=2)
    base.update(kw)
    return EncoderConfig(**base)


def toy_molecule():
    return build_molecule(["C", "C", "O", "N", "C"],
                          [(0, 1, "SINGLE"), (1, 2, "SINGLE"), (1, 3, "SINGLE"), (3, 4, "DOUBLE")],
                          identifier="toy")


# radius graph

def test_radius_graph_examples():
    pair = np.array([[0.0, 0, 0], [1.0, 0, 0]])
    assert radius_graph(pair, 5.0).tolist() == [[0, 1], [1, 0]]
    assert radius_graph(pair, 0.5).shape == (0, 2)
    line = np.array([[0.0, 0, 0], [3.0, 0, 0], [6.0, 0, 0]])
    assert radius_graph(line, 4.0).tolist() == [[0, 1], [1, 0], [1, 2], [2, 1]]
    with pytest.raises(InvalidArgument):
        radius_graph(pair, 0.0)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 12), st.floats(0.5, 4.0))
def test_radius_graph_matches_pair_enumeration(seed, n, cutoff):
    X = np.random.default_rng(seed).uniform(0, 5, size=(n, 3))
    ref = [[i, j] for i in range(n) for j in range(n)
           if i != j and np.linalg.norm(X[i] - X[j]) <= cutoff]
    assert radius_graph(X, cutoff).tolist() == ref


def test_cutoff_fallback_doubles_once():
    X = np.array([[0.0, 0, 0], [7.0, 0, 0]])
    g = conformer_graph(X, 5.0)
    assert g.cutoff == 10.0 and len(g.edges) == 2
    far = np.array([[0.0, 0, 0], [11.0, 0, 0]])
    assert len(conformer_graph(far, 5.0).edges) == 0
    assert conformer_graph(X, 5.0, fallback=False).cutoff == 5.0


def test_conformer_graph_rejects_nan():
    with pytest.raises(InvalidArgument):
        conformer_graph(np.array([[0.0, 0, np.nan]]), 5.0)


# config and containers

def test_encoder_config_validation():
    with pytest.raises(InvalidArgument):
        EncoderConfig(hidden_dim=0)
    with pytest.raises(InvalidArgument):
        EncoderConfig(cutoff=-1)
    with pytest.raises(InvalidArgument):
        EncoderConfig(pooling="max")


def test_graph_embedding_must_be_finite():
    with pytest.raises(ValueError):
        GraphEmbedding(np.array([1.0, np.inf]), ("m", 0))


# GIN

def test_gin_permutation_invariance(rng):
    # 64-bit: float32 sums of magnitude ~10 already differ by one ulp (~1e-6)
    with precision(np.float64):
        enc = GINEncoder(small_config(), rng)
        mol = toy_molecule()
        base = gin_encode(featurize(mol), enc).vector
        for _ in range(10):
            order = rng.permutation(mol.num_atoms)
            other = gin_encode(featurize(permute_molecule(mol, order)), enc).vector
            np.testing.assert_allclose(other, base, atol=1e-6, rtol=0)


def test_gin_single_node(rng):
    enc = GINEncoder(small_config(), rng)
    f = featurize(build_molecule(["O"], []))
    h = sum(emb.table.numpy()[f.node[0, c]] for c, emb in enumerate(enc.atom_embeddings))
    x = Tensor(h[None, :])
    for layer in range(2):
        x = enc.mlps[layer](x)
        if layer == 0:
            x = T.relu(x)
    np.testing.assert_allclose(gin_encode(f, enc).vector, x.numpy()[0], atol=1e-6)


def test_gin_golden_vector():
    enc = GINEncoder(small_config(hidden_dim=4), np.random.default_rng(7))
    got = gin_encode(featurize(chain(["C", "C", "O"])), enc).vector
    np.testing.assert_allclose(got, GOLDEN_GIN, rtol=1e-5, atol=1e-6)


def test_gin_empty_graph(rng):
    enc = GINEncoder(small_config(), rng)
    empty = FeatureMatrices(np.zeros((0, 9), np.int64), np.zeros((0, 3), np.int64), np.zeros((2, 0), np.int64))
    with pytest.raises(InvalidArgument):
        gin_encode(empty, enc)


def test_gin_eps_starts_at_zero(rng):
    enc = GINEncoder(small_config(), rng)
    assert all(float(e.numpy()) == 0.0 for e in enc.eps)


def test_gin_batch_matches_single(rng):
    enc = GINEncoder(small_config(pooling="mean"), rng)
    feats = [featurize(toy_molecule()), featurize(chain(["C", "N"]))]
    batch = enc(topology_batch(feats)).numpy()
    for k, f in enumerate(feats):
        np.testing.assert_allclose(batch[k], gin_encode(f, enc).vector, atol=1e-6)


def test_gin_gradients(rng):
    with precision(np.float64):
        enc = GINEncoder(small_config(hidden_dim=4), rng)
        batch = topology_batch([featurize(toy_molecule())])
        w = Tensor(rng.normal(size=(1, 4)))
        errs = gradient_errors(lambda: T.sum(enc(batch) * w), enc.parameters())
    assert max(errs) < 1e-4


# SchNet

def types_and_coords(rng, n=5):
    return rng.choice([1, 6, 7, 8], size=n), rng.normal(scale=1.2, size=(n, 3))


def test_schnet_e3_invariance(rng):
    enc = SchNetEncoder(small_config(hidden_dim=16), rng)
    z, X = types_and_coords(rng, 7)
    base = schnet_encode(z, X, enc).vector
    drift = 0.0
    for _ in range(100):
        R = Rotation.random(random_state=rng.integers(2**31)).as_matrix()
        Y = X @ R.T + rng.normal(scale=3.0, size=3)
        drift = max(drift, np.abs(schnet_encode(z, Y, enc).vector - base).max())
    assert drift < 1e-5


def test_schnet_e3_invariance_64bit(rng):
    with precision(np.float64):
        enc = SchNetEncoder(small_config(hidden_dim=16), rng)
        z, X = types_and_coords(rng, 6)
        base = schnet_encode(z, X, enc).vector
        R = Rotation.random(random_state=5).as_matrix()
        assert np.abs(schnet_encode(z, X @ R.T + 2.0, enc).vector - base).max() < 1e-10


def test_schnet_permutation_invariance(rng):
    enc = SchNetEncoder(small_config(), rng)
    z, X = types_and_coords(rng, 6)
    base = schnet_encode(z, X, enc).vector
    for _ in range(10):
        p = rng.permutation(6)
        np.testing.assert_allclose(schnet_encode(z[p], X[p], enc).vector, base, atol=1e-5, rtol=0)


def test_schnet_single_atom_ignores_position(rng):
    enc = SchNetEncoder(small_config(), rng)
    a = schnet_encode([6], [[0.0, 0.0, 0.0]], enc).vector
    b = schnet_encode([6], [[3.0, -2.0, 9.0]], enc).vector
    np.testing.assert_array_equal(a, b)


def test_schnet_locality(rng):
    enc = SchNetEncoder(small_config(cutoff=3.0, cutoff_fallback=False), rng)
    X = np.array([[0.0, 0, 0], [1.2, 0, 0], [2.0, 1.0, 0], [20.0, 0, 0]])
    z = [6, 6, 8, 7]
    a = schnet_encode(z, X, enc).vector
    X2 = X.copy()
    X2[3] = [0.0, 15.0, -4.0]
    np.testing.assert_array_equal(schnet_encode(z, X2, enc).vector, a)


def test_schnet_errors(rng):
    enc = SchNetEncoder(small_config(), rng)
    with pytest.raises(ShapeMismatch):
        schnet_encode([6, 6], np.zeros((3, 3)), enc)
    with pytest.raises(InvalidArgument):
        schnet_encode([6, 6], np.array([[0.0, 0, 0], [np.nan, 0, 0]]), enc)


def test_schnet_rbf_layout(rng):
    enc = SchNetEncoder(EncoderConfig(hidden_dim=4), rng)
    assert enc.centers[0] == 0.0 and enc.centers[-1] == 5.0 and len(enc.centers) == 50
    X = np.array([[0.0, 0, 0], [5.0, 0, 0]])
    _, env = enc.expand(geometry_batch([([6, 6], conformer_graph(X, 5.0))]))
    assert np.allclose(env.numpy(), 0.0, atol=1e-7)


def test_schnet_gradients(rng):
    with precision(np.float64):
        enc = SchNetEncoder(small_config(hidden_dim=4), rng)
        z, X = types_and_coords(rng, 5)
        batch = geometry_batch([(z, conformer_graph(X, 5.0))])
        w = Tensor(rng.normal(size=(1, 4)))
        errs = gradient_errors(lambda: T.sum(enc(batch) * w), enc.parameters())
    assert max(errs) < 1e-4


# two towers

def test_two_tower():
    z = np.zeros(3)
    np.testing.assert_array_equal(two_tower_encode(z, z), np.zeros(6))
    a, b = np.array([1.0, 2.0]), np.array([3.0, 4.0])
    np.testing.assert_array_equal(two_tower_encode(a, b), [1, 2, 3, 4])
    np.testing.assert_array_equal(two_tower_encode(b, a), [3, 4, 1, 2])
    ga = GraphEmbedding(a, ("x", 0))
    np.testing.assert_array_equal(two_tower_encode(ga, b), [1, 2, 3, 4])
    out = two_tower_encode(Tensor(a), Tensor(b))
    assert isinstance(out, Tensor) and out.shape == (4,)
    with pytest.raises(ShapeMismatch):
        two_tower_encode(a, np.zeros(3))
