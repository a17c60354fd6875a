import numpy as np
import pytest

from lvlearn.bayesnet import (extract_lambda, fully_observed_bn, hidden_moment_from_pairs,
                              latent_third_moment, learn_bn_pipeline, learn_dag_second_order,
                              triangularize)
from lvlearn.decomp import (Partition3, diag_lowrank_decompose, find_partition, incoherence_number,
                            off_diagonal_ratio, partition_success_bound)
from lvlearn.eca import eca_extract_power, eca_extract_svd, whiten
from lvlearn.errors import (IllConditionedPartition, NotConverged, NotPD, NotTriangulable,
                            RankConditionUnmet, RankDeficient, StageError)
from lvlearn.hier import equivalent_top_moment, equivalent_truth, learn_hierarchy, top_level_moment
from lvlearn.metrics import dist, equivalent_dag
from lvlearn.model import HierarchicalModel, LatentLinearModel, NoiseSpec, hidden_covariance
from lvlearn.moments import MomentSet, population_pairs, population_triples
from lvlearn.synth import gen_bn_model


# decomposition

def test_decompose_scalar_pivot_example():
    C = np.ones((3, 3)) + np.diag([2.0, 3, 4])
    L, d = diag_lowrank_decompose(C, Partition3([0], [1], [2]), 1)
    np.testing.assert_allclose(L, np.ones((3, 3)), atol=1e-12)
    np.testing.assert_allclose(d, [2, 3, 4], atol=1e-12)


def test_decompose_rank_deficient_block():
    A = np.zeros((6, 2))
    A[:, 0] = 1.0
    A[0, 1] = A[3, 1] = 1.0
    C = A @ A.T + np.eye(6)
    with pytest.raises(IllConditionedPartition):
        diag_lowrank_decompose(C, Partition3([0, 1], [2, 3], [4, 5]), 2)


def test_partition_validation_and_round_trip():
    with pytest.raises(ValueError):
        Partition3([0, 1], [1], [2])
    p = Partition3([0, 3], [1, 4], [2, 5])
    assert Partition3.from_dict(p.to_dict()) == p
    assert Partition3.from_labels(p.labels()) == p


def test_off_diagonal_ratio_examples():
    assert off_diagonal_ratio(np.diag([1.0, 2])) == 0
    assert off_diagonal_ratio(np.array([[0, 1.0], [1, 0]])) == 1
    assert off_diagonal_ratio(np.ones((2, 2))) == 0.5
    assert off_diagonal_ratio(np.zeros((2, 2))) == 0


def test_incoherence_examples():
    A = np.eye(4)[:, :2]
    assert incoherence_number(A) == pytest.approx(2.0)
    H = np.array([[1, 1], [1, -1], [1, 1], [1, -1]]) / 2.0
    assert incoherence_number(H) == pytest.approx(1.0)
    with pytest.raises(RankDeficient):
        incoherence_number(np.ones((4, 2)))
    assert partition_success_bound(300, 3, 3, 0.1) == pytest.approx(9 / 32 * 300 / (9 * np.log(90)))


def test_find_partition_planted():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((30, 5))
    D = rng.uniform(0.5, 1.0, 30)
    part, score = find_partition(A @ A.T + np.diag(D), 5, trials=20, rng_seed=1)
    assert score <= 1e-8
    _, d = diag_lowrank_decompose(A @ A.T + np.diag(D), part, 5)
    np.testing.assert_allclose(d, D, atol=1e-8)


# ECA

def test_whiten_examples():
    W = whiten(np.eye(3), 3)
    np.testing.assert_allclose(W.T @ W, np.eye(3), atol=1e-12)
    P = np.diag([4.0, 1.0])
    W = whiten(P, 2)
    np.testing.assert_allclose(W.T @ P @ W, np.eye(2), atol=1e-12)
    np.testing.assert_allclose(np.sort(np.linalg.norm(W, axis=1)), [0.5, 1.0], atol=1e-12)
    with pytest.raises(RankDeficient):
        whiten(np.diag([1.0, 0.0]), 2)


def planted_eca(seed=4):
    m = gen_bn_model(12, 3, 0.5, 0.5, rng_seed=seed, single_view=False)
    P = population_pairs(m, "multi")
    return m, whiten(P, 3), lambda z: population_triples(m, z, "multi")


def columns_match(S, M):
    return dist(M, S) <= 1e-10


def test_eca_variants_recover_mixing_columns():
    m, W, fn = planted_eca()
    M = m.mixing
    for seed in range(20):
        assert columns_match(eca_extract_svd(W, fn, seed), M)
    assert columns_match(eca_extract_power(W, fn, 0), M)


def test_eca_power_not_converged_carries_best():
    _, W, fn = planted_eca()
    with pytest.raises(NotConverged) as info:
        eca_extract_power(W, fn, 0, max_sweeps=1)
    assert info.value.best.shape == W.shape


# Bayesian network

def test_triangularize_examples():
    rng = np.random.default_rng(0)
    T = np.tril(rng.uniform(0.5, 1.5, (5, 5)))
    pr, pc = rng.permutation(5), rng.permutation(5)
    Ct, _, _ = triangularize(T[np.ix_(pr, pc)])
    assert np.abs(np.triu(Ct, 1)).max() <= 1e-5 * np.abs(T).max()
    D = np.diag([1.0, 2, 3])
    Ct, rp, cp = triangularize(D)
    np.testing.assert_array_equal(rp, cp)
    with pytest.raises(NotTriangulable):
        triangularize(np.ones((2, 2)))


def test_extract_lambda_diagonal_gives_empty_dag():
    dag = extract_lambda(np.diag([2.0, 3.0]), np.eye(2))
    np.testing.assert_allclose(dag.entries, 0)


def test_second_order_dag():
    lam = np.array([[0, 0, 0], [0.7, 0, 0], [0.2, -0.5, 0]])
    m = LatentLinearModel(np.eye(3), lam, tuple(NoiseSpec("gaussian", v) for v in (1.0, 0.5, 2.0)))
    dag = learn_dag_second_order(hidden_covariance(m), [0, 1, 2])
    np.testing.assert_allclose(dag.entries, lam, atol=1e-12)
    np.testing.assert_allclose(learn_dag_second_order(np.diag([1.0, 2, 3]), [2, 0, 1]).entries, 0)
    with pytest.raises(NotPD):
        learn_dag_second_order(np.zeros((2, 2)), [0, 1])


def test_hidden_moment_from_pairs_round_trip():
    m = gen_bn_model(12, 3, 0.5, rng_seed=1, single_view=False)
    H = hidden_moment_from_pairs(population_pairs(m, "multi"), m.A)
    np.testing.assert_allclose(H, hidden_covariance(m), atol=1e-10)


def chain_model(family):
    lam = np.diag([0.8, -0.6, 0.9, 0.5], -1)
    return LatentLinearModel(np.eye(5), lam, tuple(NoiseSpec(family, 1.0) for _ in range(5)))


def test_fully_observed_chain():
    m = chain_model("exponential")
    dag = fully_observed_bn(population_pairs(m, "multi"), lambda z: population_triples(m, z, "multi"))
    np.testing.assert_allclose(dag.entries, m.lam, atol=1e-6)
    m0 = LatentLinearModel(np.eye(4), None, tuple(NoiseSpec("poisson", 1.0) for _ in range(4)))
    dag0 = fully_observed_bn(population_pairs(m0, "multi"), lambda z: population_triples(m0, z, "multi"))
    np.testing.assert_allclose(dag0.entries, 0, atol=1e-8)


def test_fully_observed_gaussian_is_degenerate():
    m = chain_model("gaussian")
    with pytest.raises(StageError) as info:
        fully_observed_bn(population_pairs(m, "multi"), lambda z: population_triples(m, z, "multi"))
    assert info.value.stage == "eca"


def test_latent_third_moment_identity():
    m = chain_model("chi-squared")
    fn = lambda z: population_triples(m, z, "multi")
    T = latent_third_moment(fn, np.eye(5))
    for c in range(5):
        np.testing.assert_allclose(T[:, :, c], fn(np.eye(5)[c]), atol=1e-12)
    with pytest.raises(RankDeficient):
        latent_third_moment(fn, np.ones((5, 2)))


@pytest.mark.parametrize("view", ["single", "multi"])
def test_bn_pipeline_exact_moments(view):
    m = gen_bn_model(30, 5, rng_seed=9, single_view=view == "single")
    res = learn_bn_pipeline(MomentSet.from_model(m), 5, rng_seed=0)
    assert dist(m.A, res.A_hat) <= 1e-8
    np.testing.assert_allclose(res.lam_hat, equivalent_dag(m.lam, m.A, res.A_hat), atol=1e-6)
    assert not res.approximate_ordering


def test_bn_pipeline_empty_dag():
    m = gen_bn_model(30, 5, rng_seed=9, dag_p=0.0)
    res = learn_bn_pipeline(MomentSet.from_model(m), 5, eca="power")
    assert np.abs(res.lam_hat).max() <= 1e-6


def test_bn_pipeline_missing_third_moments():
    m = gen_bn_model(30, 5, rng_seed=9)
    with pytest.raises(StageError) as info:
        learn_bn_pipeline(MomentSet(population_pairs(m)), 5)
    assert info.value.stage == "eca"


# hierarchy

def planted_hierarchy():
    # block-sparse levels with a few shared entries; each column owns several rows
    rng = np.random.default_rng(0)
    A1 = np.kron(np.eye(2), np.ones((3, 1))) * rng.uniform(0.5, 1.5, (6, 2))
    A1[0, 1] = 0.3
    A2 = np.kron(np.eye(6), np.ones((6, 1))) * rng.uniform(0.5, 1.5, (36, 6))
    A2[0, 1] = 0.2
    A2[13, 3] = -0.25
    return HierarchicalModel((A1, A2))


def test_hierarchy_exact_and_top_moment():
    m = planted_hierarchy()
    covs = m.level_covariances()
    res = learn_hierarchy(covs[-1], (2, 6, 36), return_result=True)
    truth = equivalent_truth(m.matrices, res.matrices)
    for A, Ah in zip(truth, res.matrices):
        assert dist(A, Ah) <= 1e-8
    top = equivalent_top_moment(covs[0], truth[0], res.matrices[0])
    np.testing.assert_allclose(top_level_moment(res), top, rtol=1e-8, atol=1e-8 * np.abs(top).max())
    # independent top level: diagonal up to permutation
    assert off_diagonal_ratio(top_level_moment(res)) <= 1e-8


def test_hierarchy_correlated_top_level():
    base = planted_hierarchy()
    cov = np.array([[1.0, 0.4], [0.4, 2.0]])
    m = HierarchicalModel(base.matrices, top_covariance=cov)
    res = learn_hierarchy(m.level_covariances()[-1], (2, 6, 36), return_result=True)
    truth = equivalent_truth(m.matrices, res.matrices)
    top = equivalent_top_moment(cov, truth[0], res.matrices[0])
    np.testing.assert_allclose(res.top_moment, top, rtol=1e-8, atol=1e-8 * np.abs(top).max())
    np.testing.assert_allclose(np.linalg.eigvalsh(res.top_moment), np.linalg.eigvalsh(top), rtol=1e-8)


def test_hierarchy_rank_condition():
    with pytest.raises(RankConditionUnmet):
        learn_hierarchy(np.eye(10), (4, 10))
