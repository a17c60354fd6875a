import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lvlearn.errors import DegenerateColumn, DegenerateRow, NotStochastic
from lvlearn.model import (DagMatrix, HierarchicalModel, LatentLinearModel, NoiseSpec, canonicalize,
                           hidden_covariance)
from lvlearn.synth import (coverage_holds, dirichlet_prior, enforce_row_gap,
                           ensure_column_row_max_coverage, gen_bernoulli_gaussian, gen_bn_model,
                           gen_hierarchical_model, row_gap_holds, sample_documents,
                           sample_hierarchical, sample_multi_view, sample_single_view)


def test_canonicalize_examples():
    np.testing.assert_allclose(canonicalize([[2, 0], [0, 3]]), np.eye(2))
    np.testing.assert_allclose(canonicalize([[-1, 0], [0, 1]]), np.eye(2))
    A = np.array([[1, 1], [1, 0], [0, 1]], float)
    np.testing.assert_allclose(canonicalize(A), A / np.sqrt(2))
    with pytest.raises(DegenerateColumn):
        canonicalize([[1, 0], [1, 0]])


@given(st.integers(0, 10_000))
@settings(max_examples=30, deadline=None)
def test_canonicalize_idempotent_unit_columns(seed):
    A = np.random.default_rng(seed).standard_normal((6, 3))
    C = canonicalize(A)
    np.testing.assert_allclose(np.linalg.norm(C, axis=0), 1.0)
    np.testing.assert_allclose(canonicalize(C), C)


def test_hidden_covariance_examples():
    m = LatentLinearModel(np.eye(2))
    np.testing.assert_allclose(hidden_covariance(m), np.eye(2))
    m = LatentLinearModel(np.eye(2), lam=[[0, 0], [0.5, 0]])
    np.testing.assert_allclose(hidden_covariance(m), [[1, 0.5], [0.5, 1.25]])


def test_hidden_covariance_matches_monte_carlo():
    m = gen_bn_model(6, 3, 0.5, 0.5, rng_seed=3, single_view=False)
    X = sample_single_view(LatentLinearModel(np.eye(3), m.lam, m.eta_noise,
                                             tuple(NoiseSpec("gaussian", 1e-12) for _ in range(3))),
                           200_000, 5)
    np.testing.assert_allclose(np.cov(X.T), hidden_covariance(m), atol=0.03)


@pytest.mark.parametrize("family", ["exponential", "poisson", "chi-squared", "gaussian"])
def test_noise_moments_monte_carlo(family):
    spec = NoiseSpec(family, 0.7)
    x = spec.sample(np.random.default_rng(0), 2_000_000)
    assert abs(x.mean()) < 5 * spec.std / np.sqrt(x.size)
    assert x.var() == pytest.approx(0.7, rel=0.01)
    assert (x ** 3).mean() == pytest.approx(spec.third_moment, abs=0.03 + 0.03 * abs(spec.third_moment))


def test_dag_matrix_validation():
    with pytest.raises(ValueError):
        DagMatrix([[0, 1], [1, 0]])
    d = DagMatrix([[0, 0.3], [0, 0]])
    assert d.ordering == (1, 0)


def test_model_json_round_trip():
    m = gen_bn_model(8, 3, rng_seed=1)
    m2 = LatentLinearModel.from_json(m.to_json())
    np.testing.assert_array_equal(m.A, m2.A)
    np.testing.assert_array_equal(m.lam, m2.lam)
    assert m.eta_noise == m2.eta_noise and m.eps_noise == m2.eps_noise
    h = gen_hierarchical_model((2, 6, 18), rng_seed=0)
    h2 = HierarchicalModel.from_dict(h.to_dict())
    for a, b in zip(h.matrices, h2.matrices):
        np.testing.assert_array_equal(a, b)


def test_bernoulli_gaussian_determinism_and_density():
    np.testing.assert_array_equal(gen_bernoulli_gaussian(20, 4, 0.3, 7),
                                  gen_bernoulli_gaussian(20, 4, 0.3, 7))
    dens = np.mean([(gen_bernoulli_gaussian(40, 5, 0.99, s) != 0).mean() for s in range(5)])
    assert dens > 0.97
    A = gen_bernoulli_gaussian(30, 5, 0.1, 2)
    assert (A != 0).any(axis=0).all() and (A != 0).any(axis=1).all()


def test_enforce_row_gap_examples():
    np.testing.assert_allclose(enforce_row_gap([[2, 1]], 0.5), [[2, 1]])
    np.testing.assert_allclose(enforce_row_gap([[1.2, 1]], 0.5), [[2, 1]])
    np.testing.assert_allclose(enforce_row_gap([[0, 3, 0]], 0.5), [[0, 3, 0]])
    with pytest.raises(DegenerateRow):
        enforce_row_gap([[0, 0]], 0.5)


@given(st.integers(0, 10_000), st.floats(0.05, 0.95))
@settings(max_examples=40, deadline=None)
def test_enforce_row_gap_property(seed, gamma):
    A = np.random.default_rng(seed).standard_normal((5, 4))
    assert row_gap_holds(enforce_row_gap(A, gamma), gamma)


def test_coverage_examples():
    np.testing.assert_array_equal(ensure_column_row_max_coverage(np.eye(3), 0), np.eye(3))
    A = ensure_column_row_max_coverage(np.array([[1, 0.5], [1, 0.5]]), 0)
    assert coverage_holds(A)
    with pytest.raises(DegenerateColumn):
        ensure_column_row_max_coverage(np.array([[1.0, 0], [1, 0]]), 0)


def test_sample_single_view_identity_model():
    m = LatentLinearModel(np.eye(3), eta_noise=tuple(NoiseSpec("exponential", v) for v in (1, 2, 3)),
                          eps_noise=tuple(NoiseSpec("gaussian", 1e-12) for _ in range(3)))
    X = sample_single_view(m, 200_000, 0)
    np.testing.assert_allclose(np.cov(X.T), np.diag([1, 2, 3]), atol=0.05)
    assert np.all(np.abs(X.mean(axis=0)) <= 5 * np.sqrt([1, 2, 3]) / np.sqrt(X.shape[0]))


def test_sampling_is_chunk_independent():
    m = gen_bn_model(6, 2, rng_seed=0)
    np.testing.assert_array_equal(sample_single_view(m, 1000, 4), sample_single_view(m, 1000, 4))
    Xm = sample_multi_view(gen_bn_model(6, 2, rng_seed=0, single_view=False), 100, 1)
    assert Xm.shape == (100, 3, 6)


def test_sample_hierarchical_covariance():
    h = gen_hierarchical_model((2, 6), rng_seed=1)
    X = sample_hierarchical(h, 200_000, 3)
    C = h.level_covariances()[-1]
    assert np.linalg.norm(np.cov(X.T) - C) / np.linalg.norm(C) < 0.05


def test_sample_documents_pairs():
    rng = np.random.default_rng(0)
    A = rng.random((6, 2))
    A /= A.sum(axis=0)
    docs = sample_documents(A, dirichlet_prior([1.0, 1.0]), 100_000, 3, 1)
    X1 = np.eye(6)[docs[:, 0]]
    X2 = np.eye(6)[docs[:, 1]]
    emp = X1.T @ X2 / docs.shape[0]
    # E[h h^T] for Dirichlet(1,1): diag 1/3, off-diagonal 1/6
    Ehh = np.array([[1 / 3, 1 / 6], [1 / 6, 1 / 3]])
    np.testing.assert_allclose(emp, A @ Ehh @ A.T, atol=0.01)
    with pytest.raises(NotStochastic):
        sample_documents(A * 2, dirichlet_prior([1.0, 1.0]), 10, 3, 1)
