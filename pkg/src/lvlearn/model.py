"""Domain types for latent linear models and their structural validation.

Conventions
-----------
* ``A`` is ``n x k``: rows are observed (child) nodes, columns hidden (parent) nodes.
* ``lam[i, j] != 0`` encodes the edge ``j -> i`` among hidden nodes, so
  ``h = lam @ h + eta`` and ``h = inv(I - lam) @ eta``.
"""
from __future__ import annotations

import graphlib
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DegenerateColumn, ShapeError

NOISE_FAMILIES = ("exponential", "poisson", "chi-squared", "gaussian")
SKEWED_FAMILIES = ("exponential", "poisson", "chi-squared")


@dataclass(frozen=True)
class NoiseSpec:
    """Zero-mean additive noise of a given family and variance."""

    family: str
    variance: float

    def __post_init__(self):
        if self.family not in NOISE_FAMILIES:
            raise ValueError(f"unknown noise family {self.family!r}")
        if not self.variance > 0:
            raise ValueError("noise variance must be positive")

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)

    @property
    def third_moment(self) -> float:
        """Third central moment of the centered variable."""
        s = self.std
        if self.family == "exponential":
            return 2.0 * s**3
        if self.family == "poisson":
            return self.variance
        if self.family == "chi-squared":
            # (s/sqrt2) * chi2_1 has third central moment (s/sqrt2)^3 * 8
            return 2.0 * math.sqrt(2.0) * s**3
        return 0.0

    @property
    def skewness(self) -> float:
        return self.third_moment / self.std**3

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        s = self.std
        if self.family == "exponential":
            return rng.exponential(s, size) - s
        if self.family == "poisson":
            return rng.poisson(self.variance, size) - self.variance
        if self.family == "chi-squared":
            return (s / math.sqrt(2.0)) * (rng.chisquare(1, size) - 1.0)
        return rng.normal(0.0, s, size)

    def to_dict(self) -> dict:
        return {"family": self.family, "variance": float(self.variance)}


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def as_coefficient_matrix(A) -> np.ndarray:
    """Validate an ``n x k`` coefficient matrix (n >= k, no empty column)."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise ShapeError("coefficient matrix must be 2-D")
    n, k = A.shape
    if n < k:
        raise ShapeError(f"need n >= k, got {n} x {k}")
    empty = np.flatnonzero(~(A != 0).any(axis=0))
    if empty.size:
        raise DegenerateColumn(f"columns {empty.tolist()} have empty support")
    return A


def topological_order(lam) -> list[int]:
    """Parents-first ordering of the hidden DAG; raises ValueError on cycles."""
    lam = np.asarray(lam)
    k = lam.shape[0]
    ts = graphlib.TopologicalSorter()
    for i in range(k):
        ts.add(i, *np.flatnonzero(lam[i]).tolist())
    try:
        order = list(ts.static_order())
    except graphlib.CycleError as exc:
        raise ValueError(f"hidden graph is cyclic: {exc.args[1]}") from None
    return order


@dataclass(frozen=True)
class DagMatrix:
    """Weighted DAG among hidden nodes together with a topological ordering."""

    entries: np.ndarray
    ordering: tuple = field(default=None)

    def __post_init__(self):
        lam = _frozen(self.entries)
        if lam.ndim != 2 or lam.shape[0] != lam.shape[1]:
            raise ShapeError("DAG matrix must be square")
        if np.any(np.diag(lam) != 0):
            raise ValueError("DAG matrix must have a zero diagonal")
        order = self.ordering
        if order is None:
            order = topological_order(lam)
        order = tuple(int(i) for i in order)
        if sorted(order) != list(range(lam.shape[0])):
            raise ValueError("ordering is not a permutation")
        p = lam[np.ix_(order, order)]
        if np.any(np.triu(p) != 0):
            raise ValueError("matrix is not strictly lower triangular under ordering")
        object.__setattr__(self, "entries", lam)
        object.__setattr__(self, "ordering", order)

    @property
    def k(self) -> int:
        return self.entries.shape[0]


def canonicalize(A) -> np.ndarray:
    """Scale columns to unit norm and make each column's largest entry positive.

    Ties in magnitude are resolved by the smallest row index.
    """
    A = np.array(A, dtype=float)
    norms = np.linalg.norm(A, axis=0)
    if np.any(norms == 0):
        raise DegenerateColumn("cannot canonicalize a zero column")
    A = A / norms
    pivots = np.argmax(np.abs(A), axis=0)
    signs = np.sign(A[pivots, np.arange(A.shape[1])])
    return A * signs


def canonical_scaling(A) -> np.ndarray:
    """Diagonal ``d`` (as a vector) such that ``canonicalize(A) == A / d``."""
    A = np.asarray(A, dtype=float)
    norms = np.linalg.norm(A, axis=0)
    if np.any(norms == 0):
        raise DegenerateColumn("cannot canonicalize a zero column")
    pivots = np.argmax(np.abs(A), axis=0)
    return norms * np.sign(A[pivots, np.arange(A.shape[1])])


@dataclass(frozen=True)
class LatentLinearModel:
    """``x = A h + eps`` with ``h = lam h + eta``.

    ``eps_noise`` is empty for multi-view models, where per-view noise is
    irrelevant to the cross moments.
    """

    A: np.ndarray
    lam: np.ndarray = None
    eta_noise: tuple = ()
    eps_noise: tuple = ()

    def __post_init__(self):
        A = _frozen(as_coefficient_matrix(self.A))
        n, k = A.shape
        lam = np.zeros((k, k)) if self.lam is None else self.lam
        dag = DagMatrix(lam)
        if dag.k != k:
            raise ShapeError("lambda must be k x k")
        eta = tuple(self.eta_noise) or tuple(NoiseSpec("gaussian", 1.0) for _ in range(k))
        eps = tuple(self.eps_noise)
        if len(eta) != k:
            raise ShapeError("eta_noise must have k entries")
        if eps and len(eps) != n:
            raise ShapeError("eps_noise must be empty or have n entries")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "lam", dag.entries)
        object.__setattr__(self, "eta_noise", eta)
        object.__setattr__(self, "eps_noise", eps)
        object.__setattr__(self, "_dag", dag)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def k(self) -> int:
        return self.A.shape[1]

    @property
    def ordering(self) -> tuple:
        return self._dag.ordering

    @property
    def single_view(self) -> bool:
        return len(self.eps_noise) > 0

    @property
    def mixing(self) -> np.ndarray:
        """``M = A (I - lam)^{-1}``: the map from independent eta to x."""
        return self.A @ np.linalg.inv(np.eye(self.k) - self.lam)

    @property
    def eta_variances(self) -> np.ndarray:
        return np.array([s.variance for s in self.eta_noise])

    @property
    def eta_third_moments(self) -> np.ndarray:
        return np.array([s.third_moment for s in self.eta_noise])

    @property
    def eps_variances(self) -> np.ndarray:
        return np.array([s.variance for s in self.eps_noise])

    @property
    def eps_third_moments(self) -> np.ndarray:
        return np.array([s.third_moment for s in self.eps_noise])

    def to_dict(self) -> dict:
        return {
            "A": self.A.tolist(),
            "lambda": self.lam.tolist(),
            "eta_noise": [s.to_dict() for s in self.eta_noise],
            "eps_noise": [s.to_dict() for s in self.eps_noise],
            "ordering": list(self.ordering),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LatentLinearModel":
        model = cls(
            A=np.array(d["A"], dtype=float),
            lam=np.array(d["lambda"], dtype=float) if d.get("lambda") is not None else None,
            eta_noise=tuple(NoiseSpec(**s) for s in d.get("eta_noise", [])),
            eps_noise=tuple(NoiseSpec(**s) for s in d.get("eps_noise", [])),
        )
        if d.get("ordering") is not None:
            DagMatrix(model.lam, tuple(d["ordering"]))
        return model

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_json(cls, text: str) -> "LatentLinearModel":
        return cls.from_dict(json.loads(text))


def hidden_covariance(model: LatentLinearModel) -> np.ndarray:
    """``(I - lam)^{-1} diag(var_eta) (I - lam)^{-T}``."""
    T = np.linalg.inv(np.eye(model.k) - model.lam)
    C = (T * model.eta_variances) @ T.T
    return 0.5 * (C + C.T)


@dataclass(frozen=True)
class HierarchicalModel:
    """Levels ``L_1 .. L_m``; ``matrices[i]`` maps level ``i+1`` to ``i+2`` (1-based).

    ``level_noise[0]`` describes the sources at the top level; later entries
    are the additive noise of each lower level.  ``top_covariance`` optionally
    replaces the independent top level with correlated sources.
    """

    matrices: tuple
    level_noise: tuple = ()
    top_covariance: np.ndarray = None

    def __post_init__(self):
        mats = tuple(_frozen(m) for m in self.matrices)
        if not mats:
            raise ShapeError("need at least one coefficient matrix")
        for a, b in zip(mats, mats[1:]):
            if b.shape[1] != a.shape[0]:
                raise ShapeError("adjacent matrices do not chain")
        for m in mats:
            as_coefficient_matrix(m)
        sizes = [mats[0].shape[1]] + [m.shape[0] for m in mats]
        noise = tuple(tuple(lv) for lv in self.level_noise)
        if not noise:
            noise = tuple(tuple(NoiseSpec("gaussian", 1.0) for _ in range(s)) for s in sizes)
        if [len(lv) for lv in noise] != sizes:
            raise ShapeError("level_noise sizes do not match levels")
        top = None
        if self.top_covariance is not None:
            top = _frozen(self.top_covariance)
            if top.shape != (sizes[0], sizes[0]):
                raise ShapeError("top_covariance must be n_1 x n_1")
        object.__setattr__(self, "matrices", mats)
        object.__setattr__(self, "level_noise", noise)
        object.__setattr__(self, "top_covariance", top)

    @property
    def levels(self) -> list[int]:
        return [self.matrices[0].shape[1]] + [m.shape[0] for m in self.matrices]

    def satisfies_rank_ratio(self) -> bool:
        s = self.levels
        return all(b >= 3 * a for a, b in zip(s, s[1:]))

    def level_covariances(self) -> list[np.ndarray]:
        """Population second moments of every level, top to bottom."""
        if self.top_covariance is not None:
            cov = np.array(self.top_covariance)
        else:
            cov = np.diag([s.variance for s in self.level_noise[0]])
        out = [cov]
        for A, noise in zip(self.matrices, self.level_noise[1:]):
            cov = A @ cov @ A.T + np.diag([s.variance for s in noise])
            cov = 0.5 * (cov + cov.T)
            out.append(cov)
        return out

    def to_dict(self) -> dict:
        return {
            "levels": self.levels,
            "matrices": [m.tolist() for m in self.matrices],
            "level_noise": [[s.to_dict() for s in lv] for lv in self.level_noise],
            "top_covariance": None if self.top_covariance is None else self.top_covariance.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HierarchicalModel":
        return cls(
            matrices=tuple(np.array(m, dtype=float) for m in d["matrices"]),
            level_noise=tuple(tuple(NoiseSpec(**s) for s in lv) for lv in d.get("level_noise", [])),
            top_covariance=None if d.get("top_covariance") is None else np.array(d["top_covariance"]),
        )
