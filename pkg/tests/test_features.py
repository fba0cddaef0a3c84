"""Dual-feature extractor: movement embeddings, phase competition, encoder."""

import numpy as np
import pytest
from conftest import gradcheck, randomize_store

from coslab.config import NetworkConfig
from coslab.features import (
    COMPETITION_MASK,
    PAIR_FIRST,
    PAIR_SECOND,
    DualFeatureExtractor,
    default_feature_scale,
)
from coslab.net import standard_phase_table
from coslab.nn import ParamStore, Tensor

CFG = NetworkConfig(n_max=16)


def _extractor(seed=0):
    store = ParamStore()
    rng = np.random.default_rng(seed)
    return DualFeatureExtractor(store, CFG, rng), store, rng


def test_competition_mask_shape_and_symmetry():
    assert COMPETITION_MASK.shape == (56, 1)
    table = standard_phase_table()
    m = {(i, j): COMPETITION_MASK[t, 0]
         for t, (i, j) in enumerate(zip(PAIR_FIRST, PAIR_SECOND))}
    for (i, j), v in m.items():
        assert v == m[(j, i)]
        share = bool(set(table[i].movements) & set(table[j].movements))
        assert v == (0.0 if share else 1.0)
    # Each phase overlaps exactly two others, so 8*5 pairs stay unmasked.
    assert COMPETITION_MASK.sum() == 40


def test_movement_embed_zero_weights_give_half():
    fx, store, _ = _extractor()
    for k in range(7):
        fx.feature_mlps[k].w.data[...] = 0.0
        fx.feature_mlps[k].b.data[...] = 0.0
    out = fx.movement_embed(Tensor(np.random.default_rng(0).random((1, 2, 8, 7))))
    assert np.allclose(out.numpy(), 0.5)
    assert out.shape == (1, 2, 8, 28)


def test_identical_movements_identical_embeddings():
    fx, _, rng = _extractor(1)
    obs = np.zeros((1, 1, 8, 7))
    obs[0, 0, :, :] = rng.random(7)  # same features for every movement
    e_m = fx.movement_embed(Tensor(obs)).numpy()
    assert np.allclose(e_m[0, 0], e_m[0, 0, 0])


def test_phase_embedding_swap_invariance():
    # e_p = e_m1 + e_m2 commutes: swapping the two movements inside a phase
    # leaves the phase embedding unchanged.
    fx, _, rng = _extractor(2)
    obs = rng.random((1, 1, 8, 7))
    table = standard_phase_table()
    m1, m2 = table[0].movements  # movements 1 and 5
    swapped = obs.copy()
    swapped[0, 0, [m1 - 1, m2 - 1]] = swapped[0, 0, [m2 - 1, m1 - 1]]
    e1 = fx.phase_embeddings(fx.movement_embed(Tensor(obs))).numpy()
    e2 = fx.phase_embeddings(fx.movement_embed(Tensor(swapped))).numpy()
    assert np.allclose(e1[0, 0, 0], e2[0, 0, 0], atol=1e-12)


@pytest.mark.parametrize("seed", range(20))
def test_all_equal_movements_equal_phase_embeddings(seed):
    fx, _, _ = _extractor(seed)
    rng = np.random.default_rng(100 + seed)
    obs = np.tile(rng.random((1, 1, 1, 7)), (1, 1, 8, 1))
    e_p = fx.phase_embeddings(fx.movement_embed(Tensor(obs))).numpy()[0, 0]
    assert np.max(np.abs(e_p - e_p[0])) < 1e-12


def test_phase_relabel_permutation_oracle():
    # Relabeling the movements so phases A and B trade places permutes the
    # phase embeddings accordingly.
    fx, _, rng = _extractor(3)
    obs = rng.random((1, 1, 8, 7))
    # A = {1, 5}, B = {2, 6}: swap movements 1<->2 and 5<->6 (0-based rows).
    perm = np.array([1, 0, 2, 3, 5, 4, 6, 7])
    obs_perm = obs[:, :, perm, :]
    e = fx.phase_embeddings(fx.movement_embed(Tensor(obs))).numpy()[0, 0]
    e2 = fx.phase_embeddings(fx.movement_embed(Tensor(obs_perm))).numpy()[0, 0]
    assert np.allclose(e2[0], e[1], atol=1e-12)  # phase A now holds B's value
    assert np.allclose(e2[1], e[0], atol=1e-12)
    assert np.allclose(e2[2:4], e[2:4], atol=1e-12)  # C and D untouched


def test_frap_output_shape_and_finite():
    fx, _, rng = _extractor(4)
    obs = rng.random((2, 3, 8, 7)) * np.array([1, 40, 40, 1, 8, 40, 40])
    e_pr = fx.frap_forward(fx.movement_embed(Tensor(obs)))
    assert e_pr.shape == (2, 3, 32)
    assert np.all(np.isfinite(e_pr.numpy()))


def test_encoder_config_dims():
    assert CFG.heads == 8
    assert CFG.encoder_layers == 2
    fx, _, rng = _extractor(5)
    assert len(fx.encoder) == 2


def test_single_intersection_encoding_finite():
    fx, _, rng = _extractor(6)
    obs = rng.random((1, 1, 8, 7))
    e_ir = fx(Tensor(obs))
    assert e_ir.shape == (1, 1, 32)
    assert np.all(np.isfinite(e_ir.numpy()))


@pytest.mark.parametrize("n", [1, 3, 8, 16])
def test_shape_contract_over_n(n):
    fx, _, rng = _extractor(7)
    obs = rng.random((1, n, 8, 7))
    assert fx(Tensor(obs)).shape == (1, n, 32)


def test_permutation_equivariance_with_tied_positions():
    fx, _, rng = _extractor(8)
    n = 5
    obs = rng.random((1, n, 8, 7))
    perm = rng.permutation(n)
    base = fx(Tensor(obs), positions=np.arange(n)).numpy()[0]
    permuted = fx(Tensor(obs[:, perm]), positions=perm).numpy()[0]
    assert np.allclose(permuted, base[perm], atol=1e-10)


def test_equal_observations_equal_rows():
    # With tied inputs and untrained weights, rows can differ only through the
    # positional embedding; zeroing it makes all rows equal.
    fx, store, rng = _extractor(9)
    fx.pos.table.data[...] = 0.0
    obs = np.tile(rng.random((1, 1, 8, 7)), (1, 6, 1, 1))
    e_ir = fx(Tensor(obs)).numpy()[0]
    assert np.max(np.abs(e_ir - e_ir[0])) < 1e-10


def test_extractor_gradients_match_finite_differences():
    rng = np.random.default_rng(10)
    for _ in range(5):
        store = ParamStore()
        fx = DualFeatureExtractor(store, NetworkConfig(n_max=8), rng)
        randomize_store(store, rng)
        obs = rng.random((2, 3, 8, 7))
        target = rng.standard_normal((2, 3, 32))

        def loss_fn():
            d = fx(Tensor(obs)) - Tensor(target)
            return (d * d).sum()

        gradcheck(loss_fn, store, rng, n_coords=6)


def test_default_feature_scale():
    s = default_feature_scale(40, 0.5, 15)
    assert s.shape == (7,)
    assert s[0] == 1.0 and s[3] == 1.0
    assert s[1] == pytest.approx(1 / 40)
    assert s[4] == pytest.approx(1 / 7.5)
