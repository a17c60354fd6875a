"""Recovery of coefficient-matrix columns from a second moment by l1 minimization."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import RecoveryFailed
from .l1solver import DEFAULT_MAX_ITER, DEFAULT_TOL, solve_l1_batch
from .model import canonicalize
from .moments import matrix_sqrt_factor

ROW_TOL = 1e-10
EPS_ZERO = 1e-6
RANK_TOL = 1e-6


@dataclass
class RecoveryResult:
    """Estimated canonical coefficient matrix plus the candidates behind it.

    ``candidates`` holds one column ``s_i`` per entry of ``candidate_rows``;
    ``selection`` indexes into those columns in the order they were kept.
    """

    A_hat: np.ndarray
    candidates: np.ndarray
    candidate_rows: np.ndarray
    selection: list
    diagnostics: dict = field(default_factory=dict)


def sparsity_count(v, eps_zero: float = EPS_ZERO) -> int:
    """Entries with ``|v_i| > eps_zero * ||v||_inf``."""
    v = np.asarray(v, dtype=float)
    top = np.abs(v).max() if v.size else 0.0
    if top == 0:
        return 0
    return int(np.sum(np.abs(v) > eps_zero * top))


def _factor(pairs, k):
    L = matrix_sqrt_factor(pairs, k)
    col = np.linalg.norm(L, axis=0)
    if col.size < k or col.min() <= 0:
        rank = int(np.sum(col > 0))
        raise RecoveryFailed(f"pairs has numerical rank {rank} < k={k}", achieved_rank=rank)
    return L


def _greedy_independent(vectors, order, k, tol=RANK_TOL):
    """Walk ``order`` and keep vectors that raise the rank, until ``k`` are kept."""
    basis, kept = [], []
    for j in order:
        v = vectors[:, j] / np.linalg.norm(vectors[:, j])
        r = v.copy()
        for _ in range(2):
            for e in basis:
                r -= (e @ r) * e
        nr = np.linalg.norm(r)
        if nr > tol:
            basis.append(r / nr)
            kept.append(j)
            if len(kept) == k:
                break
    return kept


def alg1(pairs, k: int, eps_zero: float = EPS_ZERO, tol: float = DEFAULT_TOL,
         max_iter: int = DEFAULT_MAX_ITER) -> RecoveryResult:
    """One l1 problem per observed row, then a sparsest-first greedy rank selection."""
    L = _factor(pairs, k)
    row_norms = np.linalg.norm(L, axis=1)
    rows = np.flatnonzero(row_norms > ROW_TOL * np.linalg.norm(L))
    sols = solve_l1_batch(L, L[rows].T, tol=tol, max_iter=max_iter)
    W = np.column_stack([s.w for s in sols])
    S = L @ W
    counts = [sparsity_count(S[:, j], eps_zero) for j in range(S.shape[1])]
    order = sorted(range(S.shape[1]), key=lambda j: (counts[j], rows[j]))
    kept = _greedy_independent(S, order, k)
    if len(kept) < k:
        raise RecoveryFailed(f"only {len(kept)} independent candidates, need {k}",
                             achieved_rank=len(kept))
    V = S[:, kept]
    A_hat = canonicalize(V / np.linalg.norm(V, axis=0))
    diag = {
        "objectives": [s.objective for s in sols],
        "iterations": [s.iterations for s in sols],
        "certified": [s.certified for s in sols],
        "sparsity": counts,
    }
    return RecoveryResult(A_hat, S, rows, kept, diag)


def alg1_proj(pairs_lowrank, k: int, eps_zero: float = EPS_ZERO, tol: float = DEFAULT_TOL,
              max_iter: int = DEFAULT_MAX_ITER) -> RecoveryResult:
    """Iterative-projection variant: round ``i`` constrains ``w`` off the span of earlier picks."""
    L = _factor(pairs_lowrank, k)
    n = L.shape[0]
    basis = np.zeros((k, 0))
    picked_w, picked_rows, all_s, all_rows = [], [], [], []
    objectives = []
    for _ in range(k):
        P = np.eye(k) - basis @ basis.T
        C = P @ L.T  # column j is P L^T e_j
        cn = np.linalg.norm(C, axis=0)
        rows = np.flatnonzero(cn > ROW_TOL * max(cn.max(), 1e-300) * np.sqrt(n))
        if rows.size == 0:
            raise RecoveryFailed("every projected constraint row vanished",
                                 achieved_rank=len(picked_w))
        sols = solve_l1_batch(L, C[:, rows], tol=tol, max_iter=max_iter)
        S = L @ np.column_stack([s.w for s in sols])
        counts = [sparsity_count(S[:, j], eps_zero) for j in range(S.shape[1])]
        best = min(range(len(rows)), key=lambda j: (counts[j], rows[j]))
        w = sols[best].w
        picked_w.append(w)
        picked_rows.append(int(rows[best]))
        all_s.append(S[:, best])
        objectives.append(sols[best].objective)
        r = P @ w
        nr = np.linalg.norm(r)
        if nr <= RANK_TOL * np.linalg.norm(w):
            raise RecoveryFailed("selected direction lies in the span of earlier picks",
                                 achieved_rank=len(picked_w) - 1)
        basis = np.column_stack([basis, r / nr])
    V = np.column_stack(all_s)
    A_hat = canonicalize(V / np.linalg.norm(V, axis=0))
    diag = {"objectives": objectives, "rows": picked_rows, "w": np.column_stack(picked_w)}
    return RecoveryResult(A_hat, V, np.array(picked_rows), list(range(k)), diag)
