import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.optimize import minimize_scalar

from blockchaos.dyson import quantiles, rho_semicircle
from blockchaos.errors import ConfigError, ContractError
from blockchaos.model import InteractionSpec, ModelConfig, sample_h_lambda, sample_wigner_block
from blockchaos.spectral import (ReferenceKind, bulk_indices, eig_hermitian, gap_histogram, ks_distance,
                                 normalized_gaps, reference_cdf, reference_density, rigidity_report, surmise_for)
from oracles import goe_surmise, gue_surmise, ks_statistic


def test_eig_small_examples():
    np.testing.assert_allclose(eig_hermitian(np.diag([1.0, 2.0])).eigenvalues, [1, 2])
    dec = eig_hermitian(np.array([[0.0, 1.0], [1.0, 0.0]]))
    np.testing.assert_allclose(dec.eigenvalues, [-1, 1], atol=1e-15)
    dec.check(np.array([[0.0, 1.0], [1.0, 0.0]]))


def test_eig_trace_and_frobenius(rng):
    h = sample_wigner_block(50, "gue", rng)
    dec = eig_hermitian(h)
    assert dec.eigenvalues.sum() == pytest.approx(np.trace(h).real, rel=1e-8, abs=1e-10)
    assert np.sum(dec.eigenvalues ** 2) == pytest.approx(np.linalg.norm(h) ** 2, rel=1e-8)
    assert dec.check(h) < 1e-10
    again = eig_hermitian(h)
    assert np.array_equal(again.eigenvalues, dec.eigenvalues)


def test_eig_rejects_non_hermitian():
    with pytest.raises(ContractError):
        eig_hermitian(np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(ContractError):
        eig_hermitian(np.ones((2, 3)))


def test_eig_values_only_matches(rng):
    h = sample_wigner_block(30, "goe", rng)
    a = eig_hermitian(h, vectors=False)
    assert a.eigenvectors is None
    np.testing.assert_allclose(a.eigenvalues, eig_hermitian(h).eigenvalues, atol=1e-12)


def test_bulk_window():
    idx = bulk_indices(2000, 0.05)
    assert idx[0] + 1 == 100 and idx[-1] + 1 == 1900
    assert bulk_indices(3, 0.0).tolist() == [0, 1, 2]
    with pytest.raises(ConfigError):
        bulk_indices(10, 0.5)


def test_normalized_gap_three_points():
    sample = normalized_gaps(np.array([-1.0, 0.0, 1.0]), kappa=0.0)
    assert sample.k_indices.tolist() == [0, 1]
    assert sample.normalized_gaps[0] == pytest.approx(3 * math.sqrt(3) / (2 * math.pi), abs=1e-12)
    assert sample.normalized_gaps[0] == pytest.approx(0.8270, abs=1e-4)
    assert sample.normalized_gaps[1] == pytest.approx(3 / math.pi, abs=1e-12)
    assert sample.rows()[0] == (0, -1.0, 1.0, sample.normalized_gaps[0])


def test_normalized_gaps_equally_spaced():
    eigs = np.linspace(-2, 2, 401)
    sample = normalized_gaps(eigs, kappa=0.0)
    assert np.all(sample.normalized_gaps >= 0)
    # sum of DN rho gap approximates DN times the integral of rho
    assert sample.normalized_gaps.sum() / eigs.size == pytest.approx(1.0, abs=0.01)


def test_normalized_gaps_custom_density():
    sample = normalized_gaps(np.array([0.0, 0.5, 2.0]), kappa=0.0, density=lambda x: np.ones_like(x))
    np.testing.assert_allclose(sample.normalized_gaps, [1.5, 4.5])


def test_normalized_gaps_empty_window():
    with pytest.raises(ContractError):
        normalized_gaps(np.array([0.0]), kappa=0.0)


def test_gap_mean_near_one_for_goe():
    cfg = ModelConfig(10, 200, "goe", InteractionSpec.scalar(200 ** -0.3), seed=11)
    means = []
    for r in range(3):
        _, h = sample_h_lambda(cfg, cfg.streams("gapmean").child(r))
        means.append(normalized_gaps(eig_hermitian(h, vectors=False), 0.05).normalized_gaps.mean())
    assert 0.9 <= np.mean(means) <= 1.1


def test_reference_density_values():
    assert reference_density("Exponential", 0.0) == pytest.approx(1.0)
    assert reference_density("WignerSurmiseGOE", 0.0) == 0.0
    assert reference_density("WignerSurmiseGUE", 0.0) == 0.0
    peak = minimize_scalar(lambda x: -reference_density("WignerSurmiseGOE", x), bounds=(0.1, 2), method="bounded")
    assert peak.x == pytest.approx(math.sqrt(2 / math.pi), abs=1e-5)
    assert math.sqrt(2 / math.pi) == pytest.approx(0.7979, abs=1e-4)


@pytest.mark.parametrize("kind", list(ReferenceKind))
def test_reference_normalization_and_mean(kind):
    mass, _ = quad(lambda x: reference_density(kind, x), 0, np.inf)
    mean, _ = quad(lambda x: x * reference_density(kind, x), 0, np.inf)
    assert mass == pytest.approx(1.0, abs=1e-10)
    assert mean == pytest.approx(1.0, abs=1e-10)
    for x in (0.3, 1.1, 2.7):
        assert reference_cdf(kind, x) == pytest.approx(quad(lambda u: reference_density(kind, u), 0, x)[0],
                                                       abs=1e-10)


def test_reference_matches_closed_forms():
    x = np.linspace(0, 4, 81)
    np.testing.assert_allclose(reference_density("goe", x), goe_surmise(x), atol=1e-14)
    np.testing.assert_allclose(reference_density("gue", x), gue_surmise(x), atol=1e-14)
    np.testing.assert_allclose(reference_density("exp", x), np.exp(-x), atol=1e-14)


def test_reference_rejects_negative():
    with pytest.raises(ContractError):
        reference_density("Exponential", -0.1)
    with pytest.raises(ConfigError):
        ReferenceKind.parse("cauchy")


def test_surmise_for():
    assert surmise_for("goe") is ReferenceKind.GOE
    assert surmise_for("GUE") is ReferenceKind.GUE


def test_ks_single_zero():
    assert ks_distance([0.0], "Exponential") == pytest.approx(1.0)


def test_ks_quantile_grid_shrinks():
    def grid(n):
        u = (np.arange(n) + 0.5) / n
        return -np.log1p(-u)
    d1, d2 = ks_distance(grid(100), "Exponential"), ks_distance(grid(10000), "Exponential")
    assert d2 < d1 and d2 <= 1e-4


def test_ks_iid_exponential(rng):
    assert ks_distance(rng.exponential(size=10000), "Exponential") <= 1.63 / 100


@pytest.mark.parametrize("kind", list(ReferenceKind))
def test_ks_matches_textbook(rng, kind):
    sample = rng.rayleigh(size=300)
    assert ks_distance(sample, kind) == pytest.approx(ks_statistic(sample, lambda x: reference_cdf(kind, x)),
                                                      abs=1e-14)


def test_ks_empty():
    with pytest.raises(ContractError):
        ks_distance([], "Exponential")


def test_histogram_schema_and_mass(rng):
    hist = gap_histogram(rng.rayleigh(scale=math.sqrt(2 / math.pi), size=4000))
    assert set(hist) == {"bin_left", "bin_right", "density", "ref_exponential", "ref_goe", "ref_gue"}
    assert all(len(v) == 50 for v in hist.values())
    width = hist["bin_right"] - hist["bin_left"]
    assert np.sum(hist["density"] * width) == pytest.approx(1.0, abs=1e-3)
    for col in ("ref_exponential", "ref_goe", "ref_gue"):
        assert np.sum(hist[col] * width) > 0.98
    assert np.max(np.abs(hist["density"] - hist["ref_goe"])) < 0.15


def test_rigidity_gue():
    n = 500
    gam = quantiles(range(1, n + 1), InteractionSpec.zero(), 1, n)
    cfg = ModelConfig(1, n, "gue", InteractionSpec.zero(), seed=5)
    worst = 0.0
    for r in range(5):
        _, h = sample_h_lambda(cfg, cfg.streams("rig").child(r))
        worst = max(worst, rigidity_report(eig_hermitian(h, vectors=False), gam, n).bulk_max)
    assert worst <= 10


def test_rigidity_length_mismatch():
    with pytest.raises(ContractError):
        rigidity_report(np.arange(4.0), np.arange(3.0), 2)


def test_rigidity_sorting_invariance():
    eigs = np.array([0.3, -0.5, 1.0, -1.2])
    gam = np.array([-1.0, -0.4, 0.4, 1.1])
    a = rigidity_report(eigs, gam, 4, kappa=0.0)
    b = rigidity_report(eigs[::-1], gam, 4, kappa=0.0)
    np.testing.assert_array_equal(a.deviations, b.deviations)
