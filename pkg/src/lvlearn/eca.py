"""Whitening and third-moment extraction of the scaled mixing columns."""
from __future__ import annotations

from typing import Callable

import numpy as np

from .decomp import Partition3, diag_lowrank_decompose
from .errors import DegenerateSpectrum, NotConverged, RankDeficient

TAU_GAP_REL = 1e-6
MAX_RETRIES = 10
POWER_TOL = 1e-10
POWER_MAX_SWEEPS = 1000


def whiten(pairs_lowrank, k: int) -> np.ndarray:
    """``W = U (U^T P U)^{-1/2}`` from the top-``k`` eigenvectors ``U`` of ``P``."""
    P = np.asarray(pairs_lowrank, dtype=float)
    P = 0.5 * (P + P.T)
    vals, vecs = np.linalg.eigh(P)
    vals, U = vals[::-1][:k], vecs[:, ::-1][:, :k]
    if vals.size < k or vals[-1] <= 1e-12 * max(vals[0], 0.0) or vals[-1] <= 0:
        raise RankDeficient(f"pairs has numerical rank below k={k}")
    G = U.T @ P @ U
    g, E = np.linalg.eigh(0.5 * (G + G.T))
    return U @ (E / np.sqrt(g)) @ E.T


def _fix_signs(V):
    idx = np.argmax(np.abs(V), axis=0)
    return V * np.sign(V[idx, np.arange(V.shape[1])])


def _unwhiten(W, Omega):
    # (W^+)^T = W (W^T W)^{-1}
    return W @ np.linalg.solve(W.T @ W, Omega)


def whitened_slice(W, triples_proj_fn: Callable, v) -> np.ndarray:
    """``W^T Triples(W v) W``."""
    T = triples_proj_fn(W @ v)
    return W.T @ T @ W


def eca_extract_svd(W, triples_proj_fn: Callable, rng_seed: int = 0,
                    tau_gap_rel: float = TAU_GAP_REL, max_retries: int = MAX_RETRIES,
                    return_info: bool = False):
    """Columns ``sigma_eta(i) M_i`` (up to order and sign) from one random projection.

    Parameters
    ----------
    W : ndarray, shape (n, k)
        Whitening matrix of the low-rank second moment.
    triples_proj_fn : callable
        ``zeta -> Triples(zeta)`` with any diagonal noise already removed.
    rng_seed : int
    tau_gap_rel : float
        Minimum singular-value gap, relative to the largest singular value.
    max_retries : int
        Fresh directions tried after the first one.
    """
    W = np.asarray(W, dtype=float)
    k = W.shape[1]
    rng = np.random.default_rng(rng_seed)
    for attempt in range(max_retries + 1):
        theta = rng.standard_normal(k)
        theta /= np.linalg.norm(theta)
        T = whitened_slice(W, triples_proj_fn, theta)
        Omega, s, _ = np.linalg.svd(T)
        gap = np.min(np.abs(np.diff(s))) if k > 1 else np.inf
        if s[0] > 0 and gap > tau_gap_rel * s[0]:
            S = _unwhiten(W, _fix_signs(Omega))
            if return_info:
                return S, {"theta": theta, "singular_values": s, "attempts": attempt + 1}
            return S
    raise DegenerateSpectrum(f"no singular-value gap above {tau_gap_rel:g} after {max_retries} retries")


def _orthonormalize(V):
    Q, R = np.linalg.qr(V)
    return Q * np.where(np.diag(R) < 0, -1.0, 1.0)


def eca_extract_power(W, triples_proj_fn: Callable, rng_seed: int = 0, tol: float = POWER_TOL,
                      max_sweeps: int = POWER_MAX_SWEEPS, return_info: bool = False):
    """Simultaneous fixed-point iteration ``v <- W^T Triples(W v) W v`` with re-orthonormalization."""
    W = np.asarray(W, dtype=float)
    k = W.shape[1]
    rng = np.random.default_rng(rng_seed)
    V = _orthonormalize(rng.standard_normal((k, k)))
    change = np.inf
    for sweep in range(1, max_sweeps + 1):
        new = np.column_stack([whitened_slice(W, triples_proj_fn, V[:, i]) @ V[:, i]
                               for i in range(k)])
        if not np.all(np.isfinite(new)) or np.linalg.norm(new) == 0:
            raise DegenerateSpectrum("third-moment projections vanished")
        new = _orthonormalize(new)
        # fixed points may flip sign each sweep when the skewness is negative
        signs = np.sign(np.sum(new * V, axis=0))
        signs[signs == 0] = 1.0
        change = np.linalg.norm(new * signs - V)
        V = new * signs
        if change < tol:
            S = _unwhiten(W, _fix_signs(V))
            if return_info:
                return S, {"sweeps": sweep, "change": change}
            return S
    raise NotConverged(f"power iteration did not settle in {max_sweeps} sweeps",
                       best=_unwhiten(W, _fix_signs(V)), info={"change": change})


def denoised_triples_fn(triples_proj_fn: Callable, basis, part: Partition3, k: int) -> Callable:
    """Low-rank part of ``Triples`` as a linear map on ``span(basis)``.

    Each ``Triples(basis[:, j])`` is split with the given partition; a direction
    ``zeta`` is handled through its coordinates ``basis^T zeta``, which is exact
    whenever the low-rank part only depends on the projection onto the basis.
    """
    basis = np.asarray(basis, dtype=float)
    slices = np.stack([diag_lowrank_decompose(triples_proj_fn(basis[:, j]), part, k)[0]
                       for j in range(basis.shape[1])])

    def fn(zeta):
        c = basis.T @ np.asarray(zeta, dtype=float)
        return np.tensordot(c, slices, axes=1)

    return fn
