import json

import numpy as np
import pytest

from blockchaos.errors import ConfigError, DimensionError
from blockchaos.model import (BlockHermitianMatrix, Ensemble, InteractionSpec, MatrixLabel, ModelConfig, OUMode,
                              assemble_h_lambda, block_diagonal, block_projector, build_interaction,
                              dump_interaction_file, evolve_ou, load_interaction_file, sample_blocks,
                              sample_gaussian_divisible, sample_h_lambda, sample_wigner_block)
from blockchaos.rng import StreamFactory, stream
from oracles import dense_ring


def test_gue_1x1_is_real():
    h = sample_wigner_block(1, "gue", stream(1))
    assert h.shape == (1, 1)
    assert h[0, 0].imag == 0.0


@pytest.mark.parametrize("ens", ["gue", "goe"])
def test_sample_exactly_hermitian(ens):
    for n in (1, 2, 7):
        h = sample_wigner_block(n, ens, stream(3, n))
        assert np.array_equal(h, h.conj().T)


def test_zero_size_block_rejected():
    with pytest.raises(DimensionError):
        sample_wigner_block(0, "gue", stream(0))


def test_gue_entry_moments():
    # 10^4 samples of the entry H_12: twenty n=500 draws, each contributing 500 disjoint entries
    n = 500
    vals = []
    for r in range(20):
        h = sample_wigner_block(n, "gue", stream(11, "moments", r))
        vals.append(h[np.arange(0, n, 2), np.arange(1, n, 2)])
        vals.append(h[np.arange(1, n - 1, 2), np.arange(2, n, 2)])
    vals = np.concatenate(vals)[:10_000]
    sq = np.abs(vals) ** 2
    se = sq.std() / np.sqrt(vals.size)
    assert abs(sq.mean() - 1 / n) < 5 * se
    assert abs(vals.mean()) < 5 * np.sqrt(1 / n / vals.size)
    assert abs(np.mean(vals ** 2)) < 5 * np.sqrt(2) * se


def test_block_moments_from_sampler():
    n = 40
    blocks = [sample_wigner_block(n, "gue", stream(5, r)) for r in range(300)]
    off = np.array([b[np.triu_indices(n, 1)] for b in blocks]).ravel()
    diag = np.array([np.diag(b) for b in blocks]).ravel()
    assert np.mean(np.abs(off) ** 2) == pytest.approx(1 / n, rel=0.02)
    assert np.mean(diag.real ** 2) == pytest.approx(1 / n, rel=0.05)
    assert abs(np.mean(off ** 2)) < 0.02 / n

    goe = [sample_wigner_block(n, "goe", stream(6, r)) for r in range(300)]
    off = np.array([b[np.triu_indices(n, 1)] for b in goe]).ravel()
    diag = np.array([np.diag(b) for b in goe]).ravel()
    assert np.isrealobj(goe[0])
    assert np.mean(off ** 2) == pytest.approx(1 / n, rel=0.02)
    assert np.mean(diag ** 2) == pytest.approx(2 / n, rel=0.05)


def test_zero_interaction():
    lam = build_interaction(InteractionSpec.zero(), 3, 4)
    assert not np.any(lam.entries)
    assert lam.metadata["A_hs_norm"] == 0.0
    assert lam.label is MatrixLabel.LAMBDA


def test_three_ring_scalar_eigenvalues():
    lam = build_interaction(InteractionSpec.scalar(0.1), 3, 1)
    expected = np.array([[0, 0.1, 0.1], [0.1, 0, 0.1], [0.1, 0.1, 0]])
    np.testing.assert_allclose(lam.entries, expected)
    eig = np.sort(np.linalg.eigvalsh(lam.entries))
    np.testing.assert_allclose(eig, np.sort(0.2 * np.cos(2 * np.pi * np.arange(3) / 3)), atol=1e-15)


def test_hs_norm_recorded():
    n = 200
    lam = n ** -0.4
    mat = build_interaction(InteractionSpec.scalar(lam), 10, n)
    assert mat.metadata["A_hs_norm"] == pytest.approx(lam * np.sqrt(n))
    # lambda sqrt(N) = 200^0.1
    assert mat.metadata["A_hs_norm"] == pytest.approx(1.69865, abs=5e-5)
    assert mat.metadata["A_op_norm"] == pytest.approx(lam)


@pytest.mark.parametrize("d", [1, 2, 3, 5])
def test_ring_matches_entrywise_rule(rng, d):
    n = 3
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    lam = build_interaction(InteractionSpec.dense(a), d, n)
    np.testing.assert_allclose(lam.entries, dense_ring(a, d), atol=0)
    assert lam.hermitian_deviation() == 0.0


def test_two_block_convention():
    a = np.array([[1.0, 2.0], [3.0, 4.0]])
    lam = build_interaction(InteractionSpec.dense(a), 2, 2)
    np.testing.assert_array_equal(lam.block(0, 1), a)
    np.testing.assert_array_equal(lam.block(1, 0), a.T)
    np.testing.assert_array_equal(lam.block(0, 0), 0)


def test_dimension_mismatch():
    with pytest.raises(DimensionError):
        build_interaction(InteractionSpec.dense(np.eye(3)), 2, 4)
    with pytest.raises(DimensionError):
        ModelConfig(2, 4, "gue", InteractionSpec.dense(np.eye(3)))


def test_assemble_pauli_x():
    lam = build_interaction(InteractionSpec.dense([[1.0]]), 2, 1)
    h = assemble_h_lambda([np.zeros((1, 1)), np.zeros((1, 1))], lam)
    np.testing.assert_array_equal(h.entries, [[0, 1], [1, 0]])
    np.testing.assert_allclose(np.linalg.eigvalsh(h.entries), [-1, 1])
    assert h.label is MatrixLabel.H_LAMBDA


def test_assemble_zero_lambda_is_union_of_spectra(rng):
    blocks = [sample_wigner_block(5, "gue", stream(2, a)) for a in range(3)]
    h = assemble_h_lambda(blocks, build_interaction(InteractionSpec.zero(), 3, 5))
    union = np.sort(np.concatenate([np.linalg.eigvalsh(b) for b in blocks]))
    np.testing.assert_allclose(np.linalg.eigvalsh(h.entries), union, atol=1e-12)


def test_assemble_dense_blocks(rng):
    a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    blocks = [sample_wigner_block(2, "gue", stream(4, k)) for k in range(2)]
    h = assemble_h_lambda(blocks, build_interaction(InteractionSpec.dense(a), 2, 2))
    assert h.hermitian_deviation() == 0.0
    np.testing.assert_array_equal(h.block(0, 1), a)
    np.testing.assert_array_equal(h.block(1, 0), a.conj().T)


def test_assemble_mismatch():
    with pytest.raises(DimensionError):
        assemble_h_lambda([np.zeros((2, 2))] * 3, build_interaction(InteractionSpec.zero(), 2, 2))


def test_reproducible_realizations():
    cfg = ModelConfig(3, 6, "gue", InteractionSpec.scalar(0.2), seed=99)
    _, h1 = sample_h_lambda(cfg, cfg.streams("x").child(4))
    _, h2 = sample_h_lambda(cfg, cfg.streams("x").child(4))
    _, h3 = sample_h_lambda(cfg, cfg.streams("x").child(5))
    assert np.array_equal(h1.entries, h2.entries)
    assert not np.array_equal(h1.entries, h3.entries)


def test_stream_keys_are_order_independent():
    first = [stream(7, "a", r).standard_normal() for r in range(5)]
    second = [stream(7, "a", r).standard_normal() for r in reversed(range(5))][::-1]
    assert first == second
    assert StreamFactory(7, "a").child(3).generator().standard_normal() == first[3]


def test_gaussian_divisible_limits():
    base = [sample_wigner_block(4, "gue", stream(1, a)) for a in range(2)]
    same = sample_gaussian_divisible(base, 0.0, stream(2))
    for b, s in zip(base, same):
        np.testing.assert_array_equal(b, s)
    fresh = sample_gaussian_divisible(base, 1.0, stream(2))
    np.testing.assert_allclose(fresh[0], sample_wigner_block(4, "gue", stream(2)))
    with pytest.raises(ConfigError):
        sample_gaussian_divisible(base, 1.5, stream(2))


def test_gaussian_divisible_variance():
    n, reps = 200, 400
    vals = []
    for r in range(reps):
        base = [sample_wigner_block(n, "gue", stream(8, r))]
        mixed = sample_gaussian_divisible(base, 0.5, stream(9, r))[0]
        vals.append(mixed[np.triu_indices(n, 1)])
    vals = np.concatenate(vals)
    assert np.mean(np.abs(vals) ** 2) == pytest.approx(1 / n, rel=0.01)


def _h(d, n, seed, label=MatrixLabel.H):
    blocks = [sample_wigner_block(n, "gue", stream(seed, a)) for a in range(d)]
    h = block_diagonal(blocks)
    return BlockHermitianMatrix(h.entries, d, label)


def test_ou_identity_and_decay():
    h = _h(2, 5, 3)
    out = evolve_ou(h, 0.0, "per_block", stream(4))
    np.testing.assert_array_equal(out.entries, h.entries)
    far = evolve_ou(h, 60.0, OUMode.PER_BLOCK, stream(4))
    fresh = _fresh_blocks(2, 5, 4)
    # the memory of h0 is e^{-30}, far below rounding of the fresh part
    np.testing.assert_allclose(far.entries, fresh, atol=1e-12)
    assert np.max(np.abs(far.entries - fresh)) <= np.exp(-25) * np.max(np.abs(h.entries))
    with pytest.raises(ConfigError):
        evolve_ou(h, -1.0, "per_block", stream(4))


def _fresh_blocks(d, n, seed):
    g = stream(seed)
    return block_diagonal([sample_wigner_block(n, "gue", g) for _ in range(d)]).entries


def test_ou_stationary_variance():
    n, reps, t = 30, 400, 0.7
    vals = []
    for r in range(reps):
        h = _h(2, n, 100 + r)
        vals.append(evolve_ou(h, t, "per_block", stream(200, r)).block(1, 1)[np.triu_indices(n, 1)])
    vals = np.concatenate(vals)
    assert np.mean(np.abs(vals) ** 2) == pytest.approx(1 / n, rel=0.03)


def test_ou_semigroup_in_law():
    n, reps = 20, 400
    two, one = [], []
    for r in range(reps):
        h = _h(1, n, 300 + r)
        a = evolve_ou(evolve_ou(h, 0.3, "per_block", stream(1, r)), 0.5, "per_block", stream(2, r))
        b = evolve_ou(h, 0.8, "per_block", stream(3, r))
        two.append(a.entries[0, 1])
        one.append(b.entries[0, 1])
    assert np.mean(np.abs(two) ** 2) == pytest.approx(np.mean(np.abs(one) ** 2), rel=0.15)


def test_ou_full_matrix_mode():
    d, n = 2, 10
    h = _h(d, n, 5)
    lam = build_interaction(InteractionSpec.scalar(0.3), d, n)
    out = evolve_ou(h, 1.0, "full_matrix", stream(6), lambda_matrix=lam)
    w = sample_wigner_block(d * n, "gue", stream(6))
    np.testing.assert_allclose(out.entries, np.exp(-0.5) * h.entries + np.sqrt(1 - np.exp(-1.0)) * w + lam.entries)
    assert out.label is MatrixLabel.H_LAMBDA
    with pytest.raises(ConfigError):
        evolve_ou(BlockHermitianMatrix(h.entries, d, MatrixLabel.H_LAMBDA), 1.0, "full_matrix", stream(6))


def test_block_projector():
    np.testing.assert_array_equal(block_projector(0, 2, 1), np.diag([1.0, 0.0]))
    total = sum(block_projector(a, 10, 20) for a in range(10))
    np.testing.assert_array_equal(total, np.eye(200))
    e0, e1 = block_projector(0, 3, 2), block_projector(1, 3, 2)
    assert not np.any(e0 @ e1)
    with pytest.raises(ConfigError):
        block_projector(3, 3, 2)


def test_interaction_file_roundtrip(tmp_path):
    a = np.array([[1 + 2j, 0.5], [0, -1j]])
    path = tmp_path / "a.json"
    dump_interaction_file(a, path)
    spec = load_interaction_file(path, 2)
    np.testing.assert_array_equal(spec.matrix, a)
    path.write_text(json.dumps({"n": 2, "entries": [[1, 2], [3, 4]]}))
    assert np.isrealobj(load_interaction_file(path).matrix)
    with pytest.raises(DimensionError, match="block_size"):
        load_interaction_file(path, 3)


def test_interaction_spec_dict_roundtrip():
    for spec in (InteractionSpec.zero(), InteractionSpec.scalar(0.25), InteractionSpec.dense(np.eye(2) * 1j)):
        back = InteractionSpec.from_dict(json.loads(json.dumps(spec.to_dict())))
        np.testing.assert_array_equal(back.a_matrix(2), spec.a_matrix(2))


def test_config_validation():
    with pytest.raises(DimensionError):
        ModelConfig(0, 3)
    with pytest.raises(ConfigError):
        ModelConfig(2, 3, seed=-1)
    with pytest.raises(ConfigError):
        ModelConfig(2, 3, ensemble="cue")
    cfg = ModelConfig(2, 3, "GOE")
    assert cfg.ensemble is Ensemble.GOE
    with pytest.raises(ConfigError):
        ModelConfig(100, 100).check_budget()


def test_sample_blocks_use_block_streams():
    cfg = ModelConfig(3, 4, "goe", seed=5)
    blocks = sample_blocks(cfg, cfg.streams("s"))
    again = sample_wigner_block(4, "goe", stream(5, "s", 2))
    np.testing.assert_array_equal(blocks[2], again)
