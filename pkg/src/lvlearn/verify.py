"""Checkers for expansion, parameter genericity and the l1 recovery conditions."""
from __future__ import annotations

from itertools import combinations

import numpy as np

from .errors import TooLarge

EXPANSION_MAX_K = 24


def _support(A, tol=0.0):
    A = np.asarray(A, dtype=float)
    return np.abs(A) > tol


def _bipartite(support) -> np.ndarray:
    """Boolean ``k × n`` adjacency from a ``k × n`` hidden-by-observed support."""
    return np.asarray(support, dtype=bool)


def _neighbour_masks(adj):
    # observed neighbourhoods as python ints so unions are single ORs
    return [int(sum(1 << int(i) for i in np.flatnonzero(row))) for row in adj]


def check_expansion(support) -> dict:
    """Exact test of ``|N(S)| >= |S| + d_max`` for every hidden subset with ``|S| >= 2``.

    Parameters
    ----------
    support : array_like, shape (k, n)
        Boolean adjacency, hidden nodes by observed nodes.

    Returns
    -------
    dict
        ``holds`` and ``witness`` (a violating subset of minimum size, or None).
    """
    adj = _bipartite(support)
    k = adj.shape[0]
    if k > EXPANSION_MAX_K:
        raise TooLarge(f"k={k} exceeds {EXPANSION_MAX_K}; use check_expansion_sampled")
    d_max = int(adj.sum(axis=1).max()) if k else 0
    if k < 2:
        return {"holds": True, "witness": None, "d_max": d_max}
    masks = _neighbour_masks(adj)
    # union over every subset by doubling, one bitmask per subset index
    union = [0] * (1 << k)
    for j in range(k):
        step = 1 << j
        union[step:2 * step] = [u | masks[j] for u in union[:step]]
    best = None
    for s in range(1, 1 << k):
        size = s.bit_count() if hasattr(s, "bit_count") else bin(s).count("1")
        if size < 2 or (best is not None and size >= best[0]):
            continue
        if bin(union[s]).count("1") < size + d_max:
            best = (size, s)
            if size == 2:
                break
    if best is None:
        return {"holds": True, "witness": None, "d_max": d_max}
    witness = [j for j in range(k) if best[1] >> j & 1]
    return {"holds": False, "witness": witness, "d_max": d_max}


def check_expansion_sampled(support, trials: int, rng_seed: int) -> dict:
    """Randomized falsifier for the expansion property; never certifies."""
    adj = _bipartite(support)
    k = adj.shape[0]
    d_max = int(adj.sum(axis=1).max()) if k else 0
    rng = np.random.default_rng(rng_seed)
    if k < 2:
        return {"falsified": False, "witness": None}
    for _ in range(trials):
        size = int(rng.integers(2, k + 1))
        S = np.sort(rng.choice(k, size, replace=False))
        if int(adj[S].any(axis=0).sum()) < size + d_max:
            return {"falsified": True, "witness": [int(j) for j in S]}
    return {"falsified": False, "witness": None}


def _dense(v, tol=1e-9):
    v = np.abs(v)
    return bool(v.size) and bool(np.all(v > tol * v.max()))


def check_genericity(A, max_k: int = 6, max_n: int = 30, draws: int = 100,
                     rng_seed: int = 0) -> dict:
    """Search for ``(S, R)`` with singular ``A[R, S]`` whose null space holds a dense vector.

    ``S`` ranges over column sets with ``|S| >= 2`` and ``R`` over ``|S|``-subsets of the
    row neighbourhood ``N(S)``. A null space holds a dense vector exactly when no
    coordinate vanishes on all of it; the witness is a random combination of its basis.
    """
    A = np.asarray(A, dtype=float)
    n, k = A.shape
    if k > max_k or n > max_n:
        raise TooLarge(f"check_genericity is limited to k<={max_k}, n<={max_n}")
    supp = A != 0
    rng = np.random.default_rng(rng_seed)
    for size in range(2, k + 1):
        for S in combinations(range(k), size):
            S = list(S)
            nbrs = np.flatnonzero(supp[:, S].any(axis=1))
            if nbrs.size < size:
                # fewer rows than columns: A[N(S), S] itself has a null space
                rows_sets = [tuple(nbrs)]
            else:
                rows_sets = list(combinations(nbrs, size))
            if not rows_sets:
                continue
            blocks = np.stack([_pad(A[np.ix_(list(R), S)], size) for R in rows_sets])
            _, sv, Vt = np.linalg.svd(blocks)
            nullity = np.sum(sv <= 1e-10 * np.maximum(sv[:, :1], 1e-300), axis=1)
            for d in np.unique(nullity[nullity > 0]):
                idx = np.flatnonzero(nullity == d)
                basis = Vt[idx, size - d:, :]
                # a dense member exists iff no coordinate vanishes on the whole null space
                reach = np.linalg.norm(basis, axis=1)
                ok = np.flatnonzero(np.all(reach > 1e-9, axis=1))
                if ok.size:
                    b = idx[ok[0]]
                    for v in rng.standard_normal((draws, d)) @ Vt[b, size - d:, :]:
                        if _dense(v):
                            return {"holds": False,
                                    "witness": {"S": S, "R": [int(r) for r in rows_sets[b]],
                                                "v": (v / np.abs(v).max()).tolist()}}
    return {"holds": True, "witness": None}


def _pad(B, size):
    # rows short of |S| are zero-padded so the block stays square
    if B.shape[0] < size:
        B = np.vstack([B, np.zeros((size - B.shape[0], B.shape[1]))])
    return B


def _thm2_sets(supp, i):
    N_i = np.flatnonzero(supp[i])
    N2_i = np.flatnonzero(supp[:, N_i].any(axis=1))
    return N_i, N2_i


def _l1(M, v):
    return float(np.abs(M @ v).sum()) if M.size else 0.0


def _directions(m, trials, rng):
    V = rng.standard_normal((trials, m))
    V /= np.abs(V).sum(axis=1, keepdims=True)
    eye = np.eye(m)
    return np.vstack([V, eye, -eye])


def falsify_thm2_conditions(A, gamma, trials: int = 200, rng_seed: int = 0) -> list:
    """Probe the two per-row l1 recovery conditions with sampled directions.

    Directions are drawn on the unit l1 sphere and supplemented by every signed
    coordinate vertex. Norms over empty index sets are 0 and a condition whose
    direction space is empty holds vacuously.

    Parameters
    ----------
    A : array_like, shape (n, k)
    gamma : float or array_like of length n
        Row-specific gaps ``gamma_i``.

    Returns
    -------
    list of dict
        One report per row with ``status`` in {"VIOLATED", "NO-VIOLATION-FOUND"}.
    """
    A = np.asarray(A, dtype=float)
    n, k = A.shape
    gam = np.broadcast_to(np.asarray(gamma, dtype=float), (n,))
    supp = A != 0
    rng = np.random.default_rng(rng_seed)
    out = []
    for i in range(n):
        N_i, N2_i = _thm2_sets(supp, i)
        Nc = np.setdiff1d(np.arange(k), N_i)
        N2c = np.setdiff1d(np.arange(n), N2_i)
        report = {"row": i, "status": "NO-VIOLATION-FOUND", "witness": None}
        if Nc.size:
            lhs_M, rhs_M = A[np.ix_(N2c, Nc)], A[np.ix_(N2_i, Nc)]
            for v in _directions(Nc.size, trials, rng):
                lhs, rhs = _l1(lhs_M, v), _l1(rhs_M, v)
                if not lhs > rhs:
                    report.update(status="VIOLATED", witness={
                        "condition": "i", "v": v.tolist(), "columns": Nc.tolist(),
                        "lhs": lhs, "rhs": rhs})
                    break
        if report["witness"] is None:
            for j in N_i:
                rest = N_i[N_i != j]
                if not rest.size:
                    continue
                N_j = np.flatnonzero(supp[:, j])
                N_jc = np.setdiff1d(np.arange(n), N_j)
                lhs_M, rhs_M = A[np.ix_(N_jc, rest)], A[np.ix_(N_j, rest)]
                offset = (1 - gam[i]) * np.abs(A[N_j, j]).sum()
                for v in _directions(rest.size, trials, rng):
                    lhs = _l1(lhs_M, v)
                    rhs = _l1(rhs_M, v) + offset * np.abs(v).sum()
                    if not lhs > rhs:
                        report.update(status="VIOLATED", witness={
                            "condition": "ii", "j": int(j), "v": v.tolist(),
                            "columns": rest.tolist(), "lhs": lhs, "rhs": float(rhs)})
                        break
                if report["witness"] is not None:
                    break
        out.append(report)
    return out


def row_gaps(A) -> np.ndarray:
    """Per-row ``gamma_i = 1 - |second max| / |max|`` (1 for single-entry rows)."""
    M = np.sort(np.abs(np.asarray(A, dtype=float)), axis=1)[:, ::-1]
    if M.shape[1] < 2:
        return np.ones(M.shape[0])
    with np.errstate(divide="ignore", invalid="ignore"):
        g = 1 - M[:, 1] / M[:, 0]
    return np.where(M[:, 0] > 0, g, 0.0)


def sparsest_in_span_oracle(A, max_k: int = 4, max_n: int = 10, tol: float = 1e-10) -> np.ndarray:
    """Brute-force ``k`` independent sparsest vectors of ``Col(A)``.

    A vector of ``Col(A)`` vanishing off a support ``T`` exists exactly when the rows
    outside ``T`` have rank below ``k``. Supports are scanned by increasing size and
    the null directions found there are kept while they add rank.
    """
    A = np.asarray(A, dtype=float)
    n, k = A.shape
    if k > max_k or n > max_n:
        raise TooLarge(f"sparsest_in_span_oracle is limited to k<={max_k}, n<={max_n}")
    U, sv, _ = np.linalg.svd(A, full_matrices=False)
    B = U[:, sv > tol * sv[0]]
    r = B.shape[1]
    found = []
    for size in range(1, n + 1):
        for T in combinations(range(n), size):
            off = np.setdiff1d(np.arange(n), T)
            Bo = B[off]
            if off.size:
                _, s2, Vt = np.linalg.svd(Bo)
                s2 = np.concatenate([s2, np.zeros(r - s2.size)])
                null = Vt[s2 <= tol * max(sv[0], 1.0)] if s2.size == r else Vt[s2.size:]
            else:
                null = np.eye(r)
            for z in null:
                v = B @ z
                v[off] = 0.0
                if np.count_nonzero(np.abs(v) > tol * np.abs(v).max()) != size:
                    continue
                M = np.column_stack(found + [v])
                if np.linalg.matrix_rank(M, tol=1e-8) == M.shape[1]:
                    found.append(v / np.linalg.norm(v))
                    if len(found) == r:
                        return np.column_stack(found)
    return np.column_stack(found)


def random_bipartite_expansion_rate(n: int, k: int, theta: float, seeds) -> float:
    """Fraction of seeds whose Bernoulli(theta) bipartite graph is an expander."""
    seeds = list(range(seeds)) if isinstance(seeds, (int, np.integer)) else list(seeds)
    hits = 0
    for s in seeds:
        adj = np.random.default_rng(s).random((k, n)) < theta
        if adj.any() and check_expansion(adj)["holds"]:
            hits += 1
    return hits / len(seeds)


def expansion_theta_range(n: int, k: int) -> tuple:
    """Interval ``(1 - sqrt(1 - 2k/n), 1/2)`` of edge probabilities."""
    return 1 - np.sqrt(1 - 2 * k / n), 0.5
