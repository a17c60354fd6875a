"""Recovery of the hidden DAG coefficients from estimated mixing columns."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .decomp import find_partition, diag_lowrank_decompose
from .eca import denoised_triples_fn, eca_extract_power, eca_extract_svd, whiten
from .errors import (LVLearnError, NotAvailable, NotPD, NotTriangulable, RankDeficient,
                     StageError)
from .model import DagMatrix
from .moments import MomentSet
from .recovery import EPS_ZERO, RecoveryResult, alg1, alg1_proj

EPS_TRIANGULAR = 1e-5


@dataclass
class BNResult:
    """Estimated mixing matrix, DAG and per-stage diagnostics."""

    recovery: RecoveryResult
    dag: DagMatrix
    S: np.ndarray
    approximate_ordering: bool = False
    diagnostics: dict = field(default_factory=dict)

    @property
    def A_hat(self):
        return self.recovery.A_hat

    @property
    def lam_hat(self):
        return self.dag.entries


def triangularize(C, eps_zero: float = EPS_TRIANGULAR):
    """Permute rows and columns of ``C`` into lower-triangular form.

    Rows with a single entry above ``eps_zero * ||C||_inf`` among the remaining
    columns are peeled off one at a time, smallest original index first.

    Returns
    -------
    C_tilde : ndarray
    row_perm, col_perm : ndarray
        ``C_tilde = C[row_perm][:, col_perm]``.
    """
    C = np.asarray(C, dtype=float)
    k = C.shape[0]
    big = np.abs(C) > eps_zero * np.abs(C).max() if C.size else np.zeros_like(C, bool)
    rows_left, cols_left = list(range(k)), list(range(k))
    row_perm, col_perm = [], []
    while rows_left:
        sub = big[np.ix_(rows_left, cols_left)]
        single = np.flatnonzero(sub.sum(axis=1) == 1)
        if single.size == 0:
            raise NotTriangulable(f"no row with a single entry after {len(row_perm)} peels")
        r = rows_left[single[0]]
        c = cols_left[int(np.flatnonzero(sub[single[0]])[0])]
        row_perm.append(r)
        col_perm.append(c)
        rows_left.remove(r)
        cols_left.remove(c)
    row_perm, col_perm = np.array(row_perm), np.array(col_perm)
    return C[np.ix_(row_perm, col_perm)], row_perm, col_perm


def _greedy_triangularize(C):
    """Order minimizing upper-triangular mass step by step; used when peeling fails."""
    C = np.abs(np.asarray(C, dtype=float))
    k = C.shape[0]
    rows_left, cols_left = list(range(k)), list(range(k))
    row_perm, col_perm = [], []
    while rows_left:
        sub = C[np.ix_(rows_left, cols_left)]
        piv = np.argmax(sub, axis=1)
        # mass left above the diagonal if this row is placed next
        upper = sub.sum(axis=1) - sub[np.arange(len(rows_left)), piv]
        i = int(np.argmin(upper))
        row_perm.append(rows_left.pop(i))
        col_perm.append(cols_left.pop(int(piv[i])))
    return np.array(row_perm), np.array(col_perm)


def _lambda_from_triangular(Ct):
    d = np.diag(Ct)
    lam = np.eye(len(d)) - d[:, None] * np.linalg.inv(Ct)
    lam = np.tril(lam, -1)
    return lam


def extract_lambda(S, A_hat, eps_zero: float = EPS_TRIANGULAR, return_info: bool = False):
    """``Lambda = I - diag(C~) C~^{-1}`` with ``C~`` the triangularized ``pinv(A_hat) S``.

    The result is indexed like the columns of ``A_hat``; its ``ordering`` lists
    those columns in a topological order. If peeling fails, a greedy order is used,
    the upper triangle of ``C~`` is dropped and ``approximate_ordering`` is set.
    """
    A_hat = np.asarray(A_hat, dtype=float)
    sv = np.linalg.svd(A_hat, compute_uv=False)
    if sv[-1] <= 1e-12 * sv[0]:
        raise RankDeficient("A_hat is not of full column rank")
    C = np.linalg.pinv(A_hat) @ np.asarray(S, dtype=float)
    approx = False
    try:
        Ct, rp, cp = triangularize(C, eps_zero)
    except NotTriangulable:
        rp, cp = _greedy_triangularize(C)
        Ct = np.tril(C[np.ix_(rp, cp)])
        approx = True
    lam_t = _lambda_from_triangular(Ct)
    lam = np.zeros_like(lam_t)
    lam[np.ix_(rp, rp)] = lam_t
    dag = DagMatrix(lam, tuple(int(r) for r in rp))
    if return_info:
        return dag, {"C": C, "C_tilde": Ct, "row_perm": rp, "col_perm": cp,
                     "approximate_ordering": approx}
    return dag


def learn_dag_second_order(hidden_moment, topo_order, k: int | None = None) -> DagMatrix:
    """DAG coefficients from the hidden second moment and a known topological order.

    The reordered moment is factored as ``B B^T``; the LQ factor of ``B`` with a
    positive diagonal gives ``Lambda = I - diag(L) L^{-1}``.
    """
    P = np.asarray(hidden_moment, dtype=float)
    k = P.shape[0] if k is None else k
    order = np.asarray(topo_order, dtype=int)
    if sorted(order.tolist()) != list(range(k)):
        raise ValueError("topo_order must be a permutation of range(k)")
    Pt = P[np.ix_(order, order)]
    Pt = 0.5 * (Pt + Pt.T)
    vals, vecs = np.linalg.eigh(Pt)
    if vals[0] <= 1e-12 * max(vals[-1], 0.0) or vals[-1] <= 0:
        raise NotPD("hidden second moment is not positive definite")
    B = vecs * np.sqrt(vals)
    # B = L Q  <=>  B^T = Q^T L^T
    _, R = np.linalg.qr(B.T)
    L = R.T * np.sign(np.diag(R))
    lam_t = np.tril(np.eye(k) - np.diag(np.diag(L)) @ np.linalg.inv(L), -1)
    lam = np.zeros((k, k))
    lam[np.ix_(order, order)] = lam_t
    return DagMatrix(lam, tuple(int(i) for i in order))


def hidden_moment_from_pairs(pairs_lowrank, A_hat) -> np.ndarray:
    """``B^ P B^T`` with ``B^`` the pseudo-inverse of ``A_hat``."""
    B = np.linalg.pinv(np.asarray(A_hat, dtype=float))
    M = B @ np.asarray(pairs_lowrank, dtype=float) @ B.T
    return 0.5 * (M + M.T)


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except (LVLearnError, np.linalg.LinAlgError) as exc:
        raise StageError(name, exc) from exc


def extract_columns(W, triples_fn, rng_seed, eca: str = "svd"):
    if eca == "svd":
        return eca_extract_svd(W, triples_fn, rng_seed)
    if eca == "power":
        return eca_extract_power(W, triples_fn, rng_seed)
    raise ValueError(f"unknown ECA variant {eca!r}")


def learn_bn_pipeline(momset: MomentSet, k: int, view: str | None = None, rng_seed: int = 0,
                      eca: str = "svd", variant: str = "alg1", trials: int = 100,
                      eps_zero: float = EPS_TRIANGULAR, sparsity_eps: float = EPS_ZERO) -> BNResult:
    """Denoise (single view), whiten, extract, recover ``A`` and read off the DAG.

    Parameters
    ----------
    momset : MomentSet
    k : int
        Number of hidden nodes.
    view : {"single", "multi"}, optional
        Defaults to ``momset.view``.
    rng_seed : int
    eca : {"svd", "power"}
    variant : {"alg1", "alg1proj"}
    trials : int
        Random partitions tried for the single-view denoising.
    eps_zero : float
        Zero threshold for triangularizing ``pinv(A_hat) S``.
    sparsity_eps : float
        Zero threshold of the sparsity count that ranks recovery candidates.
    """
    view = view or momset.view
    P = momset.pairs
    diag = {}
    if view == "single":
        part, score = _stage("decomp", find_partition, P, k, trials, rng_seed)
        L, d = _stage("decomp", diag_lowrank_decompose, P, part, k)
        diag.update(partition=part, partition_score=score, noise_variances=d)
    else:
        part, L = None, P
    W = _stage("whiten", whiten, L, k)
    if not momset.has_triples:
        raise StageError("eca", NotAvailable("moment set carries no third moments"))
    if view == "single":
        # orthonormal basis of the signal subspace, randomly rotated so no
        # basis direction is orthogonal to a mixing column
        U = np.linalg.qr(W)[0]
        Q = np.linalg.qr(np.random.default_rng(rng_seed).standard_normal((k, k)))[0]
        triples_fn = _stage("decomp", denoised_triples_fn, momset.triples, U @ Q, part, k)
    else:
        triples_fn = momset.triples
    S = _stage("eca", extract_columns, W, triples_fn, rng_seed, eca)
    recover = alg1 if variant == "alg1" else alg1_proj
    rec = _stage("recovery", recover, L, k, sparsity_eps)
    dag, info = _stage("lambda", extract_lambda, S, rec.A_hat, eps_zero, return_info=True)
    diag.update(C=info["C"], row_perm=info["row_perm"], lowrank_pairs=L, W=W)
    return BNResult(rec, dag, S, info["approximate_ordering"], diag)


def fully_observed_bn(pairs, triples_proj_fn: Callable, k: int | None = None, rng_seed: int = 0,
                      eca: str = "svd", eps_zero: float = EPS_TRIANGULAR) -> DagMatrix:
    """DAG among observed variables (``A = I``) from second and third moments."""
    P = np.asarray(pairs, dtype=float)
    k = P.shape[0] if k is None else k
    W = _stage("whiten", whiten, P, k)
    S = _stage("eca", extract_columns, W, triples_proj_fn, rng_seed, eca)
    return _stage("lambda", extract_lambda, S, np.eye(P.shape[0]), eps_zero)


def latent_third_moment(triples_fn: Callable, A_hat) -> np.ndarray:
    """``T(B, B, B)`` with ``B = pinv(A_hat)``, built from ``k`` projections.

    Slice ``c`` equals ``B Triples(B^T e_c) B^T`` by linearity of ``Triples``.
    """
    A_hat = np.asarray(A_hat, dtype=float)
    sv = np.linalg.svd(A_hat, compute_uv=False)
    if sv[-1] <= 1e-12 * sv[0]:
        raise RankDeficient("A_hat is not of full column rank")
    B = np.linalg.pinv(A_hat)
    k = B.shape[0]
    out = np.empty((k, k, k))
    for c in range(k):
        out[:, :, c] = B @ triples_fn(B[c]) @ B.T
    return out
