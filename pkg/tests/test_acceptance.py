"""Acceptance criteria, one test per criterion.

Each test records a ``PASS``/``FAIL`` line (collected by ``conftest.py`` into the
terminal summary) before asserting. Run directly with
``python tests/test_acceptance.py`` to get only the summary lines.
"""
import itertools
import time

import numpy as np
import pytest

from lvlearn.bayesnet import learn_bn_pipeline
from lvlearn.decomp import (diag_lowrank_decompose, find_partition, incoherence_number,
                            partition_success_bound, random_partition)
from lvlearn.experiments import run_example2
from lvlearn.hier import equivalent_top_moment, equivalent_truth, learn_hierarchy
from lvlearn.l1solver import oracle_l1_vertex, solve_l1
from lvlearn.metrics import dist, equivalent_dag, max_abs_error
from lvlearn.moments import MomentSet, population_pairs, population_triples
from lvlearn.recovery import alg1
from lvlearn.synth import (gen_bernoulli_gaussian, gen_bn_model, gen_hierarchical_model,
                           prepare_coefficients, sample_single_view)
from lvlearn.verify import (check_expansion, check_genericity, expansion_theta_range,
                            falsify_thm2_conditions, random_bipartite_expansion_rate, row_gaps,
                            sparsest_in_span_oracle)

RESULTS = []


def report(num, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {num}: {detail}"
    RESULTS.append(line)
    print(line)
    return ok


def screened_bn_model(single_view, max_seed=50):
    """First protocol seed whose support is an expander and whose entries are generic."""
    for s in range(max_seed):
        m = gen_bn_model(30, 5, 0.3, 0.5, rng_seed=s, single_view=single_view)
        if check_expansion(m.A.T != 0)["holds"] and check_genericity(m.A)["holds"]:
            return s, m
    raise RuntimeError("no screened model")


def test_criterion_01_exact_moment_recovery():
    seed, m = screened_bn_model(single_view=False)
    P = population_pairs(m, "multi")
    t = time.perf_counter()
    A_hat = alg1(P, 5).A_hat
    elapsed = time.perf_counter() - t
    d = dist(m.A, A_hat)
    ok = d <= 1e-10 and elapsed <= 60
    report(1, ok, f"seed={seed} dist={d:.2e} (<=1e-10) time={elapsed:.1f}s (<=60s)")
    assert ok


def test_criterion_02_diagonal_decomposition():
    n, k = 30, 5
    rng = np.random.default_rng(2)
    worst = 0.0
    t = time.perf_counter()
    for _ in range(100):
        A = rng.standard_normal((n, k))
        B = rng.standard_normal((n, k))
        D = rng.uniform(0.5, 2.0, n)
        C = A @ B.T + np.diag(D)
        _, d = diag_lowrank_decompose(C, random_partition(n, k, rng), k)
        worst = max(worst, np.abs(d - D).max())
    elapsed = time.perf_counter() - t
    ok = worst <= 1e-8 and elapsed <= 10
    report(2, ok, f"max|D-D_hat|={worst:.2e} (<=1e-8) time={elapsed:.2f}s (<=10s)")
    assert ok


def test_criterion_03_partition_search():
    n, k = 300, 3
    bound = partition_success_bound(n, k, 3, 0.1)
    eligible = succeeded = 0
    for s in range(100):
        rng = np.random.default_rng(s)
        # row-normalized dense A keeps leverage nearly uniform
        A = rng.standard_normal((n, k))
        A /= np.linalg.norm(A, axis=1, keepdims=True)
        if incoherence_number(A) >= bound:
            continue
        eligible += 1
        C = A @ A.T + np.diag(rng.uniform(0.5, 1.0, n))
        _, score = find_partition(C, k, trials=100, rng_seed=s)
        succeeded += score <= 1e-8
    ok = succeeded >= 95 and eligible == 100
    report(3, ok, f"success {succeeded}/{eligible} seeds with c_A < {bound:.3f} (>=95/100)")
    assert ok


def test_criterion_04_end_to_end_bn():
    seed, m = screened_bn_model(single_view=True)
    ms = MomentSet.from_model(m)
    res = {e: learn_bn_pipeline(ms, 5, rng_seed=seed, eca=e) for e in ("svd", "power")}
    r = res["svd"]
    d = dist(m.A, r.A_hat)
    lam_err = max_abs_error(equivalent_dag(m.lam, m.A, r.A_hat), r.lam_hat)
    agree = max(max_abs_error(res["svd"].A_hat, res["power"].A_hat),
                max_abs_error(res["svd"].lam_hat, res["power"].lam_hat))
    ok = lam_err <= 1e-6 and d <= 1e-8 and agree <= 1e-6
    report(4, ok, f"seed={seed} lambda err={lam_err:.2e} (<=1e-6) dist={d:.2e} (<=1e-8) "
                  f"svd/power gap={agree:.2e} (<=1e-6)")
    assert ok


@pytest.mark.slow
def test_criterion_05_finite_sample_trend():
    Ns = [25_000, 100_000, 400_000]
    t = time.perf_counter()
    rep = run_example2({"N": Ns, "seeds": 5}, keep_scatter=False)
    elapsed = time.perf_counter() - t
    med = {(r["metric"], r["N"]): r["median"] for r in rep["table"]}
    dists = [med[("dist(A)", N)] for N in Ns]
    recall = med[("recall(A)", 400_000)]
    decreasing = all(a > b for a, b in zip(dists, dists[1:]))
    ok = decreasing and recall >= 0.9 and elapsed <= 1800
    report(5, ok, "median dist(A) " + " > ".join(f"{x:.2e}" for x in dists)
           + f" recall@400k={recall:.3f} (>=0.9) time={elapsed:.0f}s (<=1800s)")
    assert ok


def test_criterion_06_hierarchical_peeling():
    levels = (3, 12, 40)
    m = gen_hierarchical_model(levels, 0.3, 0.5, rng_seed=0)
    covs = m.level_covariances()
    detail, ok = "", False
    try:
        res = learn_hierarchy(covs[-1], levels, rng_seed=0, variant="alg1", return_result=True)
        truth = equivalent_truth(m.matrices, res.matrices)
        dists = [dist(A, Ah) for A, Ah in zip(truth, res.matrices)]
        top = equivalent_top_moment(covs[0], truth[0], res.matrices[0])
        eig_gap = np.abs(np.linalg.eigvalsh(top) - np.linalg.eigvalsh(res.top_moment)).max()
        ok = max(dists) <= 1e-8 and eig_gap <= 1e-8
        detail = (f"dist(A1)={dists[0]:.2e} dist(A2)={dists[1]:.2e} (<=1e-8) "
                  f"top eigen gap={eig_gap:.2e} (<=1e-8)")
    except Exception as exc:  # a stage failure is a criterion failure, reported as such
        detail = f"{type(exc).__name__}: {exc}"
    report(6, ok, detail)
    assert ok


def naive_expansion(adj):
    k = adj.shape[0]
    d_max = adj.sum(axis=1).max()
    for size in range(2, k + 1):
        for S in itertools.combinations(range(k), size):
            if adj[list(S)].any(axis=0).sum() < size + d_max:
                return False
    return True


def test_criterion_07_verifier_soundness():
    # expansion is invariant to relabeling observed nodes, so each graph is a
    # multiset of observed-node neighbourhoods; this covers every graph up to that relabeling
    mismatches = graphs = 0
    for k in range(1, 5):
        hoods = [np.array([(c >> j) & 1 for j in range(k)], dtype=bool) for c in range(1 << k)]
        for n in range(1, 7):
            for combo in itertools.combinations_with_replacement(range(1 << k), n):
                adj = np.column_stack([hoods[c] for c in combo])
                graphs += 1
                got = check_expansion(adj)
                if got["holds"] != naive_expansion(adj):
                    mismatches += 1
                elif not got["holds"]:
                    W = got["witness"]
                    if adj[W].any(axis=0).sum() >= len(W) + adj.sum(axis=1).max():
                        mismatches += 1
    A_dup = np.random.default_rng(7).standard_normal((10, 3))
    A_dup[:, 1] = A_dup[:, 0]
    dup_flagged = not check_genericity(A_dup)["holds"]
    passed = tried = 0
    s = 0
    while tried < 50:
        rng = np.random.default_rng(1000 + s)
        s += 1
        supp = rng.random((12, 4)) < 0.5
        if not check_expansion(supp.T)["holds"]:
            continue
        tried += 1
        A = np.where(supp, rng.standard_normal((12, 4)), 0.0)
        passed += check_genericity(A)["holds"]
    ok = mismatches == 0 and dup_flagged and passed == 50
    report(7, ok, f"expansion mismatches {mismatches}/{graphs} graphs; duplicate column "
                  f"flagged={dup_flagged}; generic expanders {passed}/50")
    assert ok


def test_criterion_08_oracle_equivalence():
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(100):
        k = int(rng.integers(2, 5))
        n = int(rng.integers(k, 7))
        L = rng.standard_normal((n, k))
        c = rng.standard_normal(k)
        obj = np.abs(L @ solve_l1(L, c)).sum()
        ref = np.abs(L @ oracle_l1_vertex(L, c)).sum()
        worst = max(worst, abs(obj - ref))
    # on instances where the l1 sufficient conditions are not falsified, alg1 must
    # reach the sparsest basis the brute-force oracle finds
    clean = matched = 0
    for s in range(200):
        A = prepare_coefficients(gen_bernoulli_gaussian(10, 3, 0.3, s), 0.5, s)
        rows = falsify_thm2_conditions(A, row_gaps(A), trials=200, rng_seed=s)
        if any(r["status"] == "VIOLATED" for r in rows):
            continue
        clean += 1
        O = sparsest_in_span_oracle(A)
        A_hat = alg1(A @ A.T, 3).A_hat
        counts = lambda M: sorted(np.count_nonzero(np.abs(M) > 1e-9, axis=0))
        matched += counts(O) == counts(A_hat) and (dist(O, A_hat) <= 1e-8 or dist(A, A_hat) <= 1e-8)
    ok = worst <= 1e-8 and clean > 0 and matched == clean
    report(8, ok, f"max objective gap={worst:.2e} (<=1e-8); alg1 vs oracle {matched}/{clean} "
                  f"condition-clean instances")
    assert ok


def test_criterion_09_moment_consistency():
    m = gen_bn_model(9, 3, 0.5, 0.5, rng_seed=9)
    P = population_pairs(m)
    rel_pairs = np.linalg.norm(
        MomentSet.from_samples(sample_single_view(m, 100_000, 1)).pairs - P) / np.linalg.norm(P)
    ms = MomentSet.from_samples(sample_single_view(m, 1_000_000, 2))
    rng = np.random.default_rng(9)
    rel_trip = 0.0
    for _ in range(3):
        z = rng.standard_normal(9)
        T = population_triples(m, z)
        rel_trip = max(rel_trip, np.linalg.norm(ms.triples(z) - T) / np.linalg.norm(T))
    ok = rel_pairs <= 0.05 and rel_trip <= 0.05
    report(9, ok, f"pairs rel err={rel_pairs:.3f} @1e5, triples rel err={rel_trip:.3f} @1e6 (<=0.05)")
    assert ok


def test_criterion_10_random_bipartite_expansion():
    n, k = 60, 6
    lo, hi = expansion_theta_range(n, k)
    theta = (lo + hi) / 2
    freq = random_bipartite_expansion_rate(n, k, theta, range(100))
    ok = freq >= 0.9
    report(10, ok, f"theta={theta:.4f} expansion frequency={freq:.2f} (>=0.9)")
    assert ok


if __name__ == "__main__":
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                fn()
            except AssertionError:
                pass
    print("\n".join(RESULTS))
