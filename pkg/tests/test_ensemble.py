import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from marcel.autodiff import Tensor, backward, precision
from marcel.autodiff import tensor as T
from marcel.autodiff.gradcheck import gradient_errors
from marcel.chem import Conformer, ConformerEnsemble, Sample
from marcel.ensemble import (
    EnsembleModel,
    EnsembleModelConfig,
    SetEncoder,
    attention_encode,
    attention_weights,
    deepsets_encode,
    draw_rng,
    evaluate_scheme,
    fixed_random_index,
    mean_pool,
    predict,
    sample_conformer,
)
from marcel.errors import DataError, EmptyEnsemble, InvalidArgument, ShapeMismatch
from marcel.models import EncoderConfig

from conftest import chain, random_ensemble, toy_sample


def small_model(strategy="single", variant="deepsets", roles=("molecule",), cap=20, seed=0, model="schnet"):
    enc = EncoderConfig(hidden_dim=6, num_layers=2, num_rbf=5, cutoff=5.0, num_interactions=1)
    cfg = EnsembleModelConfig(encoder=enc, model=model, strategy=strategy, set_encoder=variant,
                              conformer_cap=cap, roles=roles, seed=seed)
    return EnsembleModel(cfg)


# sampling

def test_sample_single_conformer(rng):
    ens = random_ensemble(chain(["C", "O"]), 1, rng)
    assert all(sample_conformer(ens, rng) is ens.conformers[0] for _ in range(20))


def test_sample_frequencies(rng):
    ens = random_ensemble(chain(["C", "O"]), 4, rng)
    index = {id(c): k for k, c in enumerate(ens.conformers)}
    draws = np.array([index[id(sample_conformer(ens, rng))] for _ in range(40_000)])
    freq = np.bincount(draws, minlength=4) / draws.size
    assert np.all((freq >= 0.23) & (freq <= 0.27)), freq


def test_sample_determinism(rng):
    ens = random_ensemble(chain(["C", "O"]), 5, rng)
    a = [id(sample_conformer(ens, draw_rng(3, e, 7))) for e in range(30)]
    b = [id(sample_conformer(ens, draw_rng(3, e, 7))) for e in range(30)]
    assert a == b and len(set(a)) > 1


def test_sample_empty():
    with pytest.raises(EmptyEnsemble):
        sample_conformer(None, np.random.default_rng(0))


def test_fixed_random_index_is_stable():
    a = fixed_random_index("mol1", "molecule", 10, seed=4)
    assert a == fixed_random_index("mol1", "molecule", 10, seed=4)
    assert 0 <= a < 10
    picks = {fixed_random_index(f"m{k}", "molecule", 10, seed=4) for k in range(50)}
    assert len(picks) > 3


# set encoders

def test_mean_pool_examples():
    v = np.array([1.0, -2.0, 3.0])
    np.testing.assert_array_equal(mean_pool(v[None]), v)
    np.testing.assert_array_equal(mean_pool(np.stack([v, -v])), np.zeros(3))
    Z = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 9.0]])
    np.testing.assert_allclose(mean_pool(Z), [3.0, 5.0])
    with pytest.raises(EmptyEnsemble):
        mean_pool(np.zeros((0, 3)))


def test_mean_variant_matches_mean_pool(rng):
    enc = SetEncoder("mean", 4, rng)
    Z = rng.normal(size=(5, 4))
    np.testing.assert_allclose(enc(Tensor(Z)).numpy()[0], Z.mean(axis=0), atol=1e-6)


def test_deepsets_identity_is_column_sum(rng):
    enc = SetEncoder("deepsets", 3, rng, activation="identity", identity_init=True)
    Z = rng.normal(size=(4, 3))
    np.testing.assert_allclose(deepsets_encode(Tensor(Z), enc).numpy(), Z.sum(axis=0), atol=1e-6)


def test_deepsets_duplicate_rows_differ(rng):
    enc = SetEncoder("deepsets", 4, rng)
    z = rng.normal(size=(1, 4))
    one = deepsets_encode(Tensor(z), enc).numpy()
    two = deepsets_encode(Tensor(np.repeat(z, 2, axis=0)), enc).numpy()
    assert np.abs(one - two).max() > 1e-3


def test_attention_singleton(rng):
    enc = SetEncoder("attention", 4, rng)
    z = Tensor(rng.normal(size=(1, 4)))
    np.testing.assert_array_equal(attention_weights(z, enc), [[1.0]])
    np.testing.assert_allclose(attention_encode(z, enc).numpy(), enc.g(enc.h(z)).numpy()[0], atol=1e-6)


def test_attention_identical_rows(rng):
    enc = SetEncoder("attention", 4, rng)
    Z = np.repeat(rng.normal(size=(1, 4)), 5, axis=0)
    np.testing.assert_allclose(attention_weights(Tensor(Z), enc), 0.2, atol=1e-6)


@pytest.mark.parametrize("variant", ["mean", "deepsets", "attention"])
def test_set_encoder_permutation_invariance(variant, rng):
    enc = SetEncoder(variant, 8, rng)
    for _ in range(20):
        Z = rng.normal(size=(int(rng.integers(1, 9)), 8)).astype(np.float32)
        base = enc(Tensor(Z)).numpy()
        shuffled = enc(Tensor(Z[rng.permutation(len(Z))])).numpy()
        assert np.abs(base - shuffled).max() < 1e-6 * max(1.0, np.abs(base).max())


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 10))
def test_attention_rows_sum_to_one(seed, n):
    rng = np.random.default_rng(seed)
    enc = SetEncoder("attention", 5, rng)
    alpha = attention_weights(Tensor(rng.normal(scale=3, size=(n, 5))), enc)
    np.testing.assert_allclose(alpha.sum(axis=1), 1.0, atol=1e-6)


@pytest.mark.parametrize("variant", ["mean", "deepsets", "attention"])
def test_batched_sets_match_single(variant, rng):
    enc = SetEncoder(variant, 4, rng)
    sets = [rng.normal(size=(k, 4)) for k in (3, 1, 5)]
    owner = np.concatenate([np.full(len(z), i) for i, z in enumerate(sets)])
    batched = enc(Tensor(np.concatenate(sets)), owner, 3).numpy()
    for i, z in enumerate(sets):
        np.testing.assert_allclose(batched[i], enc(Tensor(z)).numpy()[0], atol=1e-5)


def test_set_encoder_errors(rng):
    with pytest.raises(InvalidArgument):
        SetEncoder("max", 4, rng)
    enc = SetEncoder("deepsets", 4, rng)
    with pytest.raises(ShapeMismatch):
        deepsets_encode(Tensor(np.zeros((2, 3))), enc)
    with pytest.raises(EmptyEnsemble):
        deepsets_encode(Tensor(np.zeros((0, 4))), enc)
    with pytest.raises(InvalidArgument):
        attention_encode(Tensor(np.zeros((2, 4))), enc)


# predict routes

def test_cap_encodes_lowest_energies(rng):
    model = small_model("set-encoder", cap=20)
    s = toy_sample("m", 30, rng)
    sel = model.selection(s)["molecule"]
    energies = np.array(s.ensembles["molecule"].energies)
    assert len(sel) == 20
    assert set(sel) == set(np.argsort(energies, kind="stable")[:20].tolist())
    emb = model.embeddings(s)[0]
    assert emb.provenance == ("m", tuple(sel))


def test_cap_no_op_when_large(rng):
    s = toy_sample("m", 6, rng)
    a = small_model("set-encoder", cap=6, seed=3)
    b = small_model("set-encoder", cap=50, seed=3)
    assert predict(s, a) == predict(s, b)


def test_single_provenance_is_lowest(rng):
    model = small_model("single")
    s = toy_sample("k", 7, rng)
    emb = model.embeddings(s)[0]
    assert emb.provenance == ("k", s.ensembles["molecule"].lowest_energy_index())


def test_gin_provenance(rng):
    model = small_model("single", model="gin")
    assert model.embeddings(toy_sample("g", 3, rng))[0].provenance == ("g", "2D")


def test_reaction_head_width(rng):
    model = small_model("set-encoder", roles=("unbound", "bound"))
    assert model.head.weight.shape == (12, 1)
    s = toy_sample("r", 3, rng, roles=("unbound", "bound"))
    assert np.isfinite(predict(s, model))


def test_role_mismatch(rng):
    model = small_model("single")
    s = toy_sample("r", 3, rng, roles=("unbound", "bound"))
    with pytest.raises(DataError):
        predict(s, model)


def test_batched_prediction_matches_single(rng):
    for strategy in ("single", "set-encoder"):
        model = small_model(strategy)
        samples = [toy_sample(f"s{k}", int(rng.integers(1, 6)), rng) for k in range(5)]
        batch = model.predict_batch(samples)
        for s, p in zip(samples, batch):
            assert abs(predict(s, model) - p) < 1e-5


# evaluation schemes

def test_schemes_agree_on_single_conformer(rng):
    model = small_model("sampling")
    s = toy_sample("one", 1, rng)
    values = [evaluate_scheme(s, model, sc, np.random.default_rng(0)) for sc in ("fixed", "random", "all")]
    assert max(values) - min(values) < 1e-6


def test_all_scheme_is_mean_of_per_conformer_predictions(rng):
    model = small_model("sampling")
    s = toy_sample("m", 7, rng)
    per = [model.predict_selections([s], [{"molecule": (k,)}])[0] for k in range(7)]
    assert abs(evaluate_scheme(s, model, "all") - np.mean(per)) < 1e-6


def test_all_scheme_constant_model(rng):
    model = small_model("sampling")
    model.head.weight.data[...] = 0.0
    model.head.bias.data[...] = 0.0
    model.target_mean, model.target_std = 2.5, 1.0
    assert evaluate_scheme(toy_sample("c", 5, rng), model, "all") == pytest.approx(2.5)


def test_all_scheme_reaction_cartesian(rng):
    model = small_model("sampling", roles=("unbound", "bound"))
    s = toy_sample("r", 3, rng, roles=("unbound", "bound"))
    per = [model.predict_selections([s], [{"unbound": (i,), "bound": (j,)}])[0]
           for i in range(3) for j in range(3)]
    assert abs(evaluate_scheme(s, model, "all") - np.mean(per)) < 1e-6


def test_fixed_scheme_uses_lowest(rng):
    model = small_model("sampling")
    s = toy_sample("m", 5, rng)
    k = s.ensembles["molecule"].lowest_energy_index()
    expected = model.predict_selections([s], [{"molecule": (k,)}])[0]
    assert evaluate_scheme(s, model, "fixed") == pytest.approx(expected)


def test_unknown_scheme(rng):
    with pytest.raises(InvalidArgument):
        evaluate_scheme(toy_sample("m", 2, rng), small_model("sampling"), "median")


def test_sampling_reduces_to_single(rng):
    samples = [toy_sample(f"s{k}", 1, rng, target=float(k)) for k in range(3)]
    with precision(np.float64):
        a, b = small_model("single", seed=5), small_model("sampling", seed=5)
        sel_a = [a.selection(s) for s in samples]
        sel_b = [b.selection(s, np.random.default_rng(k)) for k, s in enumerate(samples)]
        assert sel_a == sel_b
        ya, yb = a(samples, sel_a), b(samples, sel_b)
        np.testing.assert_array_equal(ya.numpy(), yb.numpy())
        ga = backward(T.sum(ya * ya), a.parameters())
        gb = backward(T.sum(yb * yb), b.parameters())
    for pa, pb in zip(a.parameters(), b.parameters()):
        np.testing.assert_array_equal(ga[pa], gb[pb])


# end-to-end gradients

@pytest.mark.parametrize("variant", ["mean", "deepsets", "attention"])
def test_set_encoder_head_gradients(variant):
    rng = np.random.default_rng(11)
    with precision(np.float64):
        model = small_model("set-encoder", variant=variant, seed=2)
        # at initialisation the conformer embeddings are nearly identical, which leaves the
        # attention matrix W with ~1e-8 gradients that differences cannot resolve
        for p in model.parameters():
            p.data = rng.normal(scale=0.5, size=p.shape)
        s = toy_sample("t", 3, rng, n_atoms=4)
        sel = [model.selection(s)]
        errs = gradient_errors(lambda: T.sum(model([s], sel) * 1.7), model.parameters())
    assert max(errs) < 1e-4


def test_config_validation():
    with pytest.raises(InvalidArgument):
        EnsembleModelConfig(strategy="boosting")
    with pytest.raises(InvalidArgument):
        EnsembleModelConfig(conformer_cap=0)
    with pytest.raises(InvalidArgument):
        EnsembleModelConfig(eval_scheme="best")
