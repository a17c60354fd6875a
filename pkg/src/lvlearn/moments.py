"""Population and empirical second/third moments."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientSamples, NotAvailable, NotPSD
from .model import LatentLinearModel, hidden_covariance


def population_pairs(model: LatentLinearModel, view: str | None = None) -> np.ndarray:
    """``A Cov(h) A^T``, plus ``diag(var_eps)`` for the single-view flavor."""
    view = view or ("single" if model.single_view else "multi")
    P = model.A @ hidden_covariance(model) @ model.A.T
    if view == "single":
        P = P + np.diag(model.eps_variances)
    return 0.5 * (P + P.T)


def population_triples(model: LatentLinearModel, zeta, view: str | None = None) -> np.ndarray:
    """``M diag(mu_eta) diag(M^T zeta) M^T`` (+ the diagonal eps term, single view)."""
    view = view or ("single" if model.single_view else "multi")
    zeta = np.asarray(zeta, dtype=float)
    M = model.mixing
    T = (M * (model.eta_third_moments * (M.T @ zeta))) @ M.T
    if view == "single":
        T = T + np.diag(model.eps_third_moments * zeta)
    return 0.5 * (T + T.T)


def empirical_pairs(samples, center: bool = True) -> np.ndarray:
    """``(1/N) sum (x - m)(x - m)^T`` (no centering when ``center`` is False)."""
    X = np.asarray(samples, dtype=float)
    N = X.shape[0]
    if N < 2:
        raise InsufficientSamples("need at least two samples")
    if center:
        X = X - X.mean(axis=0)
    P = X.T @ X / N
    return 0.5 * (P + P.T)


def empirical_triples(samples, zeta, center: bool = True) -> np.ndarray:
    """``(1/N) sum (x - m)(x - m)^T <zeta, x - m>``."""
    X = np.asarray(samples, dtype=float)
    if center:
        X = X - X.mean(axis=0)
    w = X @ np.asarray(zeta, dtype=float)
    T = (X * w[:, None]).T @ X / X.shape[0]
    return 0.5 * (T + T.T)


def cross_view_pairs(views, center: bool = True) -> np.ndarray:
    """Symmetrized ``E[x_1 x_2^T]`` from an ``N x V x n`` array of views (V >= 2)."""
    V = np.asarray(views, dtype=float)
    if V.shape[0] < 2:
        raise InsufficientSamples("need at least two samples")
    if center:
        V = V - V.mean(axis=(0, 1))
    P = V[:, 0].T @ V[:, 1] / V.shape[0]
    return 0.5 * (P + P.T)


def cross_view_triples(views, zeta, center: bool = True) -> np.ndarray:
    """Symmetrized ``E[x_1 x_2^T <zeta, x_3>]`` (needs three views)."""
    V = np.asarray(views, dtype=float)
    if V.shape[1] < 3:
        raise NotAvailable("cross triples need at least three views")
    if center:
        V = V - V.mean(axis=(0, 1))
    w = V[:, 2] @ np.asarray(zeta, dtype=float)
    T = (V[:, 0] * w[:, None]).T @ V[:, 1] / V.shape[0]
    return 0.5 * (T + T.T)


def documents_to_views(words, n: int, views: int = 3) -> np.ndarray:
    """One-hot encode the first ``views`` words of each document."""
    words = np.asarray(words)
    if words.shape[1] < views:
        raise NotAvailable(f"documents need at least {views} words")
    out = np.zeros((words.shape[0], views, n))
    rows = np.arange(words.shape[0])
    for v in range(views):
        out[rows, v, words[:, v]] = 1.0
    return out


@dataclass(frozen=True)
class MomentSet:
    """Second moment plus access to directional third-moment projections.

    Exactly one of ``model`` (closed form) and ``samples`` (empirical) backs
    the third moment; with neither, only ``pairs`` is available.
    ``samples`` is ``N x n`` (single view) or ``N x V x n`` (multi view).
    """

    pairs: np.ndarray
    view: str = "single"
    model: LatentLinearModel | None = None
    samples: np.ndarray | None = field(default=None, repr=False)
    center: bool = True

    def __post_init__(self):
        P = np.array(self.pairs, dtype=float)
        scale = max(np.abs(P).max(), np.finfo(float).tiny)
        if np.abs(P - P.T).max() > 1e-12 * scale:
            raise ValueError("pairs must be symmetric")
        if self.view not in ("single", "multi"):
            raise ValueError("view must be 'single' or 'multi'")
        P.setflags(write=False)
        object.__setattr__(self, "pairs", P)

    @property
    def n(self) -> int:
        return self.pairs.shape[0]

    @property
    def has_triples(self) -> bool:
        return self.model is not None or self.samples is not None

    @classmethod
    def from_model(cls, model: LatentLinearModel, view: str | None = None) -> "MomentSet":
        view = view or ("single" if model.single_view else "multi")
        return cls(pairs=population_pairs(model, view), view=view, model=model)

    @classmethod
    def from_samples(cls, samples, center: bool = True, retain: bool = True) -> "MomentSet":
        X = np.asarray(samples, dtype=float)
        if X.ndim == 3:
            return cls(pairs=cross_view_pairs(X, center), view="multi",
                       samples=X if retain else None, center=center)
        if center:
            X = X - X.mean(axis=0)
        return cls(pairs=empirical_pairs(X, center=False), view="single",
                   samples=X if retain else None, center=False)

    def triples(self, zeta) -> np.ndarray:
        return triples_project(self, zeta)

    def triples_tensor(self) -> np.ndarray:
        """Full ``n x n x n`` third moment (slices are ``triples(e_i)``)."""
        n = self.n
        T = np.empty((n, n, n))
        for i in range(n):
            e = np.zeros(n)
            e[i] = 1.0
            T[:, :, i] = self.triples(e)
        return T


def triples_project(momset: MomentSet, zeta) -> np.ndarray:
    """``Triples(zeta) = E[x_1 x_2^T <zeta, x_3>]`` for the moment set's flavor."""
    zeta = np.asarray(zeta, dtype=float)
    if not np.all(np.isfinite(zeta)):
        raise ValueError("zeta must be finite")
    if momset.model is not None:
        return population_triples(momset.model, zeta, momset.view)
    if momset.samples is None:
        raise NotAvailable("third moments need retained samples or a model")
    if momset.samples.ndim == 3:
        return cross_view_triples(momset.samples, zeta, momset.center)
    return empirical_triples(momset.samples, zeta, momset.center)


def matrix_sqrt_factor(P, k: int) -> np.ndarray:
    """``B = U_k diag(sqrt(lam_1..lam_k))`` so ``B B^T`` is the best rank-k PSD fit."""
    P = np.asarray(P, dtype=float)
    n = P.shape[0]
    if k > n:
        raise ValueError("k exceeds matrix size")
    vals, vecs = np.linalg.eigh(0.5 * (P + P.T))
    vals, vecs = vals[::-1][:k], vecs[:, ::-1][:, :k]
    top = vals[0] if vals.size else 0.0
    if vals.size and vals[-1] < -1e-8 * abs(top):
        raise NotPSD(f"eigenvalue {vals[-1]:.3e} of a rank-{k} factor is negative")
    vals = np.where(vals < 1e-12 * abs(top), 0.0, vals)
    return vecs * np.sqrt(vals)


def estimate_rank(P) -> int:
    """Index of the largest relative gap in the eigenvalues of ``P`` (optional helper)."""
    vals = np.sort(np.linalg.eigvalsh(np.asarray(P, dtype=float)))[::-1]
    vals = np.maximum(vals, 1e-300)
    ratios = vals[:-1] / vals[1:]
    return int(np.argmax(ratios)) + 1
