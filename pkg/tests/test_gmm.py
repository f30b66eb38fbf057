from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from predeval.core import PredictionSet
from predeval.gmm import (
    COV_FLOOR, Cov2, EmConfig, Gmm2D, GmmConstruction, collapse, diversity_area, eigen2,
    endpoint_mixture, fit_em, floor_covariance, modes_as_gmm,
)


def psd_matrix(seed_or_rng, scale=5.0):
    rng = np.random.default_rng(seed_or_rng) if not isinstance(seed_or_rng, np.random.Generator) else seed_or_rng
    b = rng.normal(scale=scale, size=(2, 2))
    return b @ b.T


def random_mixture(rng, k):
    w = rng.dirichlet(np.ones(k))
    means = rng.normal(scale=3.0, size=(k, 2))
    covs = np.stack([psd_matrix(rng, 1.0) + 0.05 * np.eye(2) for _ in range(k)])
    return Gmm2D(w, means, covs)


# eigen2 ----------------------------------------------------------------------

def reconstruct(l1, l2, q):
    return q @ np.diag([l1, l2]) @ q.T


def test_eigen2_diagonal():
    l1, l2, q = eigen2(np.diag([4.0, 1.0]))
    assert (l1, l2) == (4.0, 1.0)
    np.testing.assert_allclose(np.abs(q), np.eye(2), atol=1e-12)


def test_eigen2_hand_example():
    l1, l2, q = eigen2(np.array([[2.0, 1.0], [1.0, 2.0]]))
    assert l1 == pytest.approx(3.0, abs=1e-12)
    assert l2 == pytest.approx(1.0, abs=1e-12)
    s = 1 / np.sqrt(2)
    assert abs(q[:, 0] @ np.array([s, s])) == pytest.approx(1.0, abs=1e-12)
    assert abs(q[:, 1] @ np.array([s, -s])) == pytest.approx(1.0, abs=1e-12)


def test_eigen2_identity():
    l1, l2, q = eigen2(np.eye(2))
    assert (l1, l2) == (1.0, 1.0)
    np.testing.assert_allclose(reconstruct(l1, l2, q), np.eye(2), atol=1e-12)


def test_eigen2_rejects_asymmetric():
    with pytest.raises(ValueError, match="not symmetric"):
        eigen2(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_eigen2_agrees_with_lapack():
    rng = np.random.default_rng(3)
    for _ in range(200):
        m = psd_matrix(rng)
        l1, l2, _ = eigen2(m)
        ref = np.linalg.eigvalsh(m)
        np.testing.assert_allclose([l2, l1], ref, rtol=1e-10, atol=1e-10)


@settings(max_examples=200, deadline=None)
@given(st.floats(-50, 50), st.floats(-50, 50), st.floats(-50, 50), st.floats(-50, 50))
def test_cov2_invariants(a, b, c, d):
    m = np.array([[a, b], [c, d]])
    m = m @ m.T
    cov = Cov2.from_matrix(m)
    l1, l2 = cov.eigenvalues
    assert l1 >= l2 >= 0
    scale = max(1.0, np.abs(m).max())
    np.testing.assert_allclose(reconstruct(l1, l2, cov.eigenvectors), m, atol=1e-10 * scale)
    assert abs(abs(np.linalg.det(cov.eigenvectors)) - 1) < 1e-10


# collapse / area -------------------------------------------------------------

def test_collapse_single_component_returns_its_covariance():
    c = np.array([[2.0, 0.3], [0.3, 1.0]])
    out = collapse(Gmm2D(np.array([1.0]), np.array([[5.0, -1.0]]), c[None]))
    np.testing.assert_allclose(out.matrix, c, atol=1e-15)


def test_collapse_two_point_masses():
    g = Gmm2D(np.array([0.5, 0.5]), np.array([[-1.0, 0.0], [1.0, 0.0]]), np.zeros((2, 2, 2)))
    np.testing.assert_allclose(collapse(g).matrix, [[1.0, 0.0], [0.0, 0.0]], atol=1e-15)


def test_collapse_matches_monte_carlo_three_components():
    rng = np.random.default_rng(11)
    g = random_mixture(rng, 3)
    draws = g.sample(1_000_000, rng)
    np.testing.assert_allclose(np.cov(draws.T), collapse(g).matrix, rtol=0.02, atol=0.02 * np.abs(collapse(g).matrix).max())


def test_diversity_area_examples():
    assert diversity_area(Cov2.from_matrix(np.diag([4.0, 1.0]))) == pytest.approx(2.0, abs=1e-12)
    assert diversity_area(Cov2.from_matrix(np.zeros((2, 2)))) == 0.0
    floored = floor_covariance(np.array([[1.0, 0.0], [0.0, 0.0]]))
    assert diversity_area(Cov2.from_matrix(floored)) == pytest.approx(np.sqrt(COV_FLOOR), rel=1e-9)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**6), st.floats(0.01, 100), st.floats(0, 2 * np.pi))
def test_area_scaling_and_rotation(seed, s, theta):
    m = psd_matrix(seed)
    base = diversity_area(Cov2.from_matrix(m))
    scaled = diversity_area(Cov2.from_matrix(s**2 * m))
    assert scaled == pytest.approx(s**2 * base, rel=1e-9, abs=1e-12)
    r = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    rot = r @ m @ r.T
    rot = 0.5 * (rot + rot.T)
    assert diversity_area(Cov2.from_matrix(rot)) == pytest.approx(base, rel=1e-8, abs=1e-10)


def test_floor_lifts_small_eigenvalues_only():
    m = np.diag([3.0, 0.0])
    f = floor_covariance(m)
    np.testing.assert_allclose(np.linalg.eigvalsh(f), [COV_FLOOR, 3.0])
    np.testing.assert_allclose(floor_covariance(np.diag([3.0, 2.0])), np.diag([3.0, 2.0]))


# EM --------------------------------------------------------------------------

def test_em_degenerate_cloud_hits_floor():
    g = fit_em(np.zeros((10, 2)), 1)
    np.testing.assert_allclose(g.weights, [1.0])
    np.testing.assert_allclose(g.means, [[0.0, 0.0]], atol=1e-15)
    np.testing.assert_allclose(g.covariances[0], COV_FLOOR * np.eye(2), rtol=1e-9)


def test_em_two_clusters():
    rng = np.random.default_rng(5)
    pts = np.vstack([rng.normal([-10, 0], 0.5, (100, 2)), rng.normal([10, 0], 0.5, (100, 2))])
    g = fit_em(pts, 2, EmConfig(seed=1))
    order = np.argsort(g.means[:, 0])
    # oracle: the two-cluster k-means solution is the per-cluster mean
    np.testing.assert_allclose(g.means[order], [pts[:100].mean(0), pts[100:].mean(0)], atol=0.1)
    np.testing.assert_allclose(g.weights, 0.5, atol=0.05)


def test_em_single_component_is_sample_moments():
    rng = np.random.default_rng(8)
    pts = rng.normal(size=(50, 2)) @ np.array([[2.0, 0.5], [0.0, 1.0]])
    g = fit_em(pts, 1)
    np.testing.assert_allclose(g.means[0], pts.mean(0), atol=1e-12)
    np.testing.assert_allclose(g.covariances[0], np.cov(pts.T, bias=True), atol=1e-12)


def test_em_errors():
    with pytest.raises(ValueError, match="more components than points"):
        fit_em(np.zeros((2, 2)), 3)
    with pytest.raises(ValueError):
        fit_em(np.zeros((0, 2)), 1)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 4))
def test_em_likelihood_monotone_and_deterministic(seed, k):
    rng = np.random.default_rng(seed)
    pts = rng.normal(scale=3.0, size=(40, 2)) + rng.integers(-1, 2, size=(40, 1)) * 8.0
    g = fit_em(pts, k, EmConfig(seed=seed))
    ll = np.array(g.log_likelihood)
    assert np.all(np.diff(ll) >= -1e-8 * np.abs(ll[1:]).clip(1))
    assert abs(g.weights.sum() - 1) < 1e-9
    for c in g.covariances:
        assert np.linalg.eigvalsh(c).min() >= COV_FLOOR * (1 - 1e-9)
    again = fit_em(pts, k, EmConfig(seed=seed))
    np.testing.assert_array_equal(g.means, again.means)


# constructions ---------------------------------------------------------------

def test_modes_as_gmm_weights():
    p6 = PredictionSet("a", np.random.default_rng(0).normal(size=(6, 4, 2)))
    g = modes_as_gmm(p6, 2)
    np.testing.assert_allclose(g.weights, np.full(6, 1 / 6))
    p2 = PredictionSet("a", np.zeros((2, 4, 2)), np.array([0.7, 0.3]))
    np.testing.assert_allclose(modes_as_gmm(p2, 0).weights, [0.7, 0.3])


def test_single_mode_collapses_to_sigma0_sq():
    p = PredictionSet("a", np.ones((1, 3, 2)))
    np.testing.assert_allclose(collapse(modes_as_gmm(p, 1, sigma0=0.5)).matrix, 0.25 * np.eye(2), atol=1e-15)


def test_construction_auto_switches_to_em():
    c = GmmConstruction()
    assert c.resolve(6) == "modes"
    assert c.resolve(9) == "em"
    p = PredictionSet("a", np.random.default_rng(1).normal(size=(12, 3, 2)))
    assert endpoint_mixture(p, 0).n_components == 3
    with pytest.raises(ValueError):
        GmmConstruction(method="kde")


def test_eigen2_isotropic_keeps_order():
    # found by hypothesis: det / l1 rounded one ulp above l1
    b = 40.156911844583476
    l1, l2, _ = eigen2(np.array([[b * b, 0.0], [0.0, b * b]]))
    assert l1 >= l2
    assert l1 == pytest.approx(b * b, rel=1e-15) and l2 == pytest.approx(b * b, rel=1e-15)
