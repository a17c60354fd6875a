"""Evaluation metrics for estimated coefficient matrices."""
from __future__ import annotations

import numpy as np

from .errors import ShapeError

EPS_SUPPORT = 1e-6


def _check_shapes(A, A_hat):
    A = np.asarray(A, dtype=float)
    A_hat = np.asarray(A_hat, dtype=float)
    if A.ndim != 2 or A.shape != A_hat.shape:
        raise ShapeError(f"shape mismatch {A.shape} vs {A_hat.shape}")
    return A, A_hat


def _residuals(A, A_hat):
    """``R[i, j] = ||a_i - proj_{a^_j} a_i||^2``."""
    G = A.T @ A_hat
    sq = np.sum(A_hat ** 2, axis=0)
    a2 = np.sum(A ** 2, axis=0)[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        R = a2 - np.where(sq > 0, G ** 2 / sq, 0.0)
    return np.maximum(R, 0.0)


def dist(A, A_hat) -> float:
    """Normalized sum over true columns of the squared residual to the best estimated line.

    Each true column picks its own estimated column, so one estimate may serve
    several true columns. Estimated columns need not be unit norm: the residual
    uses the orthogonal projection onto the line spanned by the estimate.
    """
    A, A_hat = _check_shapes(A, A_hat)
    total = np.sum(A ** 2)
    if total == 0:
        return 0.0
    return float(_residuals(A, A_hat).min(axis=1).sum() / total)


def align_columns(A, A_hat):
    """Best estimated column and sign for every true column.

    Returns
    -------
    perm : ndarray of int
        ``perm[i]`` is the column of ``A_hat`` matched to ``A[:, i]``.
    signs : ndarray
        Sign of ``<A e_i, A_hat e_perm[i]>`` (+1 on ties at zero).
    """
    A, A_hat = _check_shapes(A, A_hat)
    perm = _residuals(A, A_hat).argmin(axis=1)
    ip = np.einsum("ij,ij->j", A, A_hat[:, perm])
    signs = np.where(ip < 0, -1.0, 1.0)
    return perm, signs


def aligned(A, A_hat):
    """``A_hat`` reordered and sign-flipped to line up with the columns of ``A``."""
    perm, signs = align_columns(A, A_hat)
    return np.asarray(A_hat, dtype=float)[:, perm] * signs


def _support(M, eps_zero):
    M = np.abs(np.asarray(M, dtype=float))
    top = M.max() if M.size else 0.0
    if top == 0:
        return np.zeros(M.shape, dtype=bool)
    return M > eps_zero * top


def support_precision_recall(A, A_hat, eps_zero: float = EPS_SUPPORT, align: bool = True):
    """Edge precision and recall after column alignment.

    Supports are entries above ``eps_zero`` times the largest magnitude of each
    matrix; ``eps_zero=0`` treats every nonzero estimate as an edge. Either value
    is None when its denominator is empty.
    """
    A, A_hat = _check_shapes(A, A_hat)
    if align:
        A_hat = aligned(A, A_hat)
    s_true, s_hat = _support(A, eps_zero), _support(A_hat, eps_zero)
    hit = np.sum(s_true & s_hat)
    precision = hit / s_hat.sum() if s_hat.any() else None
    recall = hit / s_true.sum() if s_true.any() else None
    return (None if precision is None else float(precision),
            None if recall is None else float(recall))


def equivalent_dag(lam, A, A_hat) -> np.ndarray:
    """Express a true DAG matrix in the hidden labeling and scaling implied by ``A_hat``.

    If column ``perm[i]`` of ``A_hat`` estimates ``s_i a_i / ||a_i||``, the matching
    hidden variable is ``s_i ||a_i|| h_i`` and edge weights rescale accordingly.
    """
    A = np.asarray(A, dtype=float)
    perm, signs = align_columns(A, A_hat)
    if len(set(perm.tolist())) != len(perm):
        raise ValueError("alignment is not one-to-one; no equivalent DAG")
    c = signs * np.linalg.norm(A, axis=0)
    lam = np.asarray(lam, dtype=float)
    out = np.zeros_like(lam)
    out[np.ix_(perm, perm)] = c[:, None] * lam / c[None, :]
    return out


def max_abs_error(X, Y) -> float:
    return float(np.max(np.abs(np.asarray(X, dtype=float) - np.asarray(Y, dtype=float))))


def report_rows(metrics: dict, params: dict) -> list:
    """``[{metric, value, params}, ...]`` in insertion order."""
    return [{"metric": m, "value": v, "params": dict(params)} for m, v in metrics.items()]
