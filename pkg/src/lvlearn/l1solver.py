"""Solver for ``min ||L w||_1  s.t.  c^T w = 1`` and an exact enumeration oracle.

The solver works in an orthonormal basis ``L = Q R`` so that every problem
becomes ``min ||Q v||_1  s.t.  b^T v = 1`` with ``b = R^{-T} c``.  It runs
over-relaxed ADMM on the split ``z = Q v`` for a batch of constraint vectors
at once.  Periodically each iterate is rounded to the nearby LP vertex (k-1
vanishing rows) and accepted when a dual certificate proves it optimal;
otherwise iterations continue until the duality gap falls below ``tol``.
Problems still open when the iteration budget runs out are handed to an exact
LP solve (HiGHS) before giving up.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .errors import Infeasible, NotConverged, RankDeficient, TooLarge

DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 50_000
_RHO = 2.0
_RELAX = 1.6
_CHECK_EVERY = 25


@dataclass
class L1Solution:
    w: np.ndarray
    objective: float
    iterations: int
    certified: bool
    gap: float
    method: str = "admm"


def _orthonormal(L):
    L = np.asarray(L, dtype=float)
    Q, R = np.linalg.qr(L)
    d = np.abs(np.diag(R))
    if d.size == 0 or d.min() <= 1e-12 * d.max():
        raise RankDeficient("L must have full column rank")
    return Q, R


def _vertex(Q, b, r, zero_tol=1e-12):
    """Round to an LP vertex: k-1 of the smallest rows of ``Q v`` set to zero."""
    n, k = Q.shape
    basis = [b / np.linalg.norm(b)]
    chosen = []
    for i in np.argsort(np.abs(r), kind="stable"):
        if len(chosen) == k - 1:
            break
        q = Q[i].copy()
        for e in basis:
            q -= (e @ q) * e
        nq = np.linalg.norm(q)
        if nq > 1e-9 * np.linalg.norm(Q[i]):
            basis.append(q / nq)
            chosen.append(i)
    if len(chosen) < k - 1:
        return None
    system = np.vstack([Q[chosen], b[None, :]]) if chosen else b[None, :]
    rhs = np.zeros(len(chosen) + 1)
    rhs[-1] = 1.0
    v, *_ = np.linalg.lstsq(system, rhs, rcond=None)
    return v


def _certify(Q, b, v, slack=1e-9):
    """True when a dual vector with ``|y| <= 1`` and ``Q^T y = t b`` exists."""
    r = Q @ v
    t = np.abs(r).sum()
    scale = np.abs(r).max()
    free = np.abs(r) <= 1e-10 * max(scale, 1e-300)
    s = np.sign(r) * ~free
    target = t * b - Q[~free].T @ s[~free]
    if not free.any():
        return np.linalg.norm(target) <= 1e-9 * max(t * np.linalg.norm(b), 1.0)
    yf, *_ = np.linalg.lstsq(Q[free].T, target, rcond=None)
    resid = np.linalg.norm(Q[free].T @ yf - target)
    return resid <= 1e-8 * max(t * np.linalg.norm(b), 1.0) and np.abs(yf).max() <= 1 + slack


def _dual_bound(Q, b, y):
    """Lower bound on the optimum from an arbitrary dual estimate ``y``."""
    bb = b @ b
    t = (b @ (Q.T @ y)) / bb
    y2 = y - Q @ (Q.T @ y - t * b)
    m = max(1.0, np.abs(y2).max())
    return t / m


def _lp_solve(Q, b):
    """``min ||Q v||_1  s.t.  b^T v = 1`` as an LP in ``(v, t)``; None on failure."""
    n, k = Q.shape
    cost = np.r_[np.zeros(k), np.ones(n)]
    I = np.eye(n)
    A_ub = np.block([[Q, -I], [-Q, -I]])
    A_eq = np.r_[b, np.zeros(n)][None, :]
    bounds = [(None, None)] * k + [(0, None)] * n
    res = linprog(cost, A_ub=A_ub, b_ub=np.zeros(2 * n), A_eq=A_eq, b_eq=[1.0],
                  bounds=bounds, method="highs")
    if res.status != 0:
        return None
    return res.x[:k]


def solve_l1_batch(L, C, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                   raise_on_failure: bool = True, fallback: bool = True) -> list[L1Solution]:
    """Solve one problem per column of ``C`` (shape ``k x m``), sharing ``L``.

    With ``fallback`` the problems ADMM leaves open after ``max_iter`` iterations
    are solved as an exact LP; NotConverged is raised only if that fails too.
    """
    Q, R = _orthonormal(L)
    n, k = Q.shape
    C = np.asarray(C, dtype=float).reshape(k, -1)
    if np.any(np.linalg.norm(C, axis=0) == 0):
        raise Infeasible("constraint vector c must be nonzero")
    B = np.linalg.solve(R.T, C)  # k x m
    m = B.shape[1]
    bn2 = (B * B).sum(axis=0)
    rho = _RHO * np.sqrt(bn2) * np.sqrt(n) / np.sqrt(k)

    def project(Y, idx):
        Bi = B[:, idx]
        return Y + Bi * ((1.0 - (Bi * Y).sum(axis=0)) / bn2[idx])

    idx = np.arange(m)
    V = project(np.zeros((k, m)), idx)
    Z = Q @ V
    U = np.zeros((n, m))
    out: list[L1Solution | None] = [None] * m
    best_v = V.copy()
    best_obj = np.abs(Z).sum(axis=0)
    it = 0
    active = np.arange(m)
    while active.size and it < max_iter:
        r_ = rho[active]
        for _ in range(_CHECK_EVERY):
            Va = project(Q.T @ (Z - U), active)
            QV = Q @ Va
            QVr = _RELAX * QV + (1 - _RELAX) * Z
            Zn = QVr + U
            Zold = Z
            Z = np.sign(Zn) * np.maximum(np.abs(Zn) - 1.0 / r_, 0.0)
            U = U + QVr - Z
            it += 1
        # residual balancing: keep primal and dual residuals within a factor 10
        prim = np.linalg.norm(QV - Z, axis=0)
        dual = r_ * np.linalg.norm(Q.T @ (Z - Zold), axis=0)
        up, down = prim > 10 * dual, dual > 10 * prim
        scale = np.where(up, 2.0, np.where(down, 0.5, 1.0))
        rho[active] = r_ * scale
        U = U / scale
        still = []
        for pos, j in enumerate(active):
            v = Va[:, pos]
            obj = np.abs(Q @ v).sum()
            if obj < best_obj[j]:
                best_obj[j], best_v[:, j] = obj, v
            b = B[:, j]
            vv = _vertex(Q, b, Q @ v)
            if vv is not None and np.abs(Q @ vv).sum() <= best_obj[j] * (1 + 1e-6) and _certify(Q, b, vv):
                out[j] = L1Solution(vv, float(np.abs(Q @ vv).sum()), it, True, 0.0)
                continue
            lb = _dual_bound(Q, b, rho[j] * U[:, pos])
            gap = best_obj[j] - lb
            if gap <= tol * max(1.0, best_obj[j]):
                out[j] = L1Solution(best_v[:, j].copy(), float(best_obj[j]), it, False, float(gap))
                continue
            still.append(pos)
        still = np.array(still, dtype=int)
        active = active[still]
        Z, U = Z[:, still], U[:, still]
    failed = []
    for j in active:
        b = B[:, j]
        v = _lp_solve(Q, b) if fallback else None
        if v is not None:
            vv = _vertex(Q, b, Q @ v)
            if vv is not None and np.abs(Q @ vv).sum() <= np.abs(Q @ v).sum() * (1 + 1e-12):
                v = vv
            out[j] = L1Solution(v, float(np.abs(Q @ v).sum()), it, _certify(Q, b, v), 0.0, "lp")
            continue
        failed.append(j)
        out[j] = L1Solution(best_v[:, j].copy(), float(best_obj[j]), it, False, float("nan"))
    # map back to the original coordinates, restoring c^T w = 1 exactly
    for j, sol in enumerate(out):
        w = np.linalg.solve(R, sol.w)
        w = w / (C[:, j] @ w)
        sol.w = w
        sol.objective = float(np.abs(np.asarray(L, dtype=float) @ w).sum())
    if failed and raise_on_failure:
        raise NotConverged(f"{len(failed)} l1 problems did not converge in {max_iter} iterations",
                           best=[out[j].w for j in failed], info={"indices": failed})
    return out


def solve_l1(L, c, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> np.ndarray:
    """Minimizer ``w`` of ``||L w||_1`` subject to ``c^T w = 1``."""
    c = np.asarray(c, dtype=float)
    if not np.any(c):
        raise Infeasible("constraint vector c must be nonzero")
    return solve_l1_batch(L, c[:, None], tol=tol, max_iter=max_iter)[0].w


def oracle_l1_vertex(L, c) -> np.ndarray:
    """Exact minimizer by enumerating every LP vertex (k-1 vanishing rows of ``L w``).

    Ties in the objective go to the vertex whose ``L w`` support is
    lexicographically smallest, then to the lexicographically smallest ``w``.
    """
    L = np.asarray(L, dtype=float)
    c = np.asarray(c, dtype=float)
    n, k = L.shape
    if k > 8 or n > 12:
        raise TooLarge("oracle limited to k <= 8, n <= 12")
    if not np.any(c):
        raise Infeasible("constraint vector c must be nonzero")
    scale = np.abs(L).max()
    best = None
    for rows in itertools.combinations(range(n), k - 1):
        system = np.vstack([L[list(rows)], c[None, :]])
        if np.linalg.matrix_rank(system, tol=1e-10 * max(scale, np.abs(c).max())) < k:
            continue
        rhs = np.zeros(k)
        rhs[-1] = 1.0
        w = np.linalg.solve(system, rhs)
        r = L @ w
        obj = np.abs(r).sum()
        support = tuple(np.flatnonzero(np.abs(r) > 1e-9 * max(np.abs(r).max(), 1e-300)))
        key = (obj, support, tuple(w))
        if best is None or _better(key, best[0]):
            best = (key, w)
    if best is None:
        raise RankDeficient("no vertex: L lacks full column rank")
    return best[1]


def _better(key, ref, rel=1e-10):
    obj, sup, w = key
    robj, rsup, rw = ref
    if obj < robj - rel * max(1.0, robj):
        return True
    if obj > robj + rel * max(1.0, robj):
        return False
    if sup != rsup:
        return sup < rsup
    return w < rw
