"""Low-rank plus diagonal splitting of a square matrix via a three-block partition."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IllConditionedPartition, NoValidPartition, RankDeficient

PIVOT_COND_MAX = 1e12


@dataclass(frozen=True)
class Partition3:
    """Three disjoint index blocks covering ``range(n)``."""

    I: tuple
    J: tuple
    K: tuple

    def __post_init__(self):
        blocks = [tuple(int(i) for i in b) for b in (self.I, self.J, self.K)]
        for name, b in zip("IJK", blocks):
            object.__setattr__(self, name, tuple(sorted(b)))
        allidx = [i for b in blocks for i in b]
        if len(set(allidx)) != len(allidx):
            raise ValueError("partition blocks overlap")
        if sorted(allidx) != list(range(len(allidx))):
            raise ValueError("partition does not cover 0..n-1")
        if any(len(b) == 0 for b in blocks):
            raise ValueError("empty partition block")

    @property
    def blocks(self):
        return (self.I, self.J, self.K)

    @property
    def n(self) -> int:
        return sum(len(b) for b in self.blocks)

    @classmethod
    def from_labels(cls, labels):
        labels = np.asarray(labels)
        return cls(*(tuple(np.flatnonzero(labels == b)) for b in range(3)))

    def labels(self) -> np.ndarray:
        out = np.empty(self.n, dtype=int)
        for b, idx in enumerate(self.blocks):
            out[list(idx)] = b
        return out

    def to_dict(self) -> dict:
        return {"I": list(self.I), "J": list(self.J), "K": list(self.K)}

    @classmethod
    def from_dict(cls, d):
        return cls(d["I"], d["J"], d["K"])


def _top_singular(M, k):
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    return U[:, :k], s, Vt[:k].T


def _block_lowrank(C, I, J, K, k):
    """Low-rank part of ``C[I, I]`` from the off-diagonal blocks through ``J`` and ``K``."""
    C_IJ, C_KJ, C_KI = C[np.ix_(I, J)], C[np.ix_(K, J)], C[np.ix_(K, I)]
    if min(C_IJ.shape) < k or min(C_KJ.shape) < k:
        raise IllConditionedPartition(f"block smaller than k={k}")
    _, _, V_J = _top_singular(C_IJ, k)
    U_K, _, _ = _top_singular(C_KJ, k)
    pivot = U_K.T @ C_KJ @ V_J
    cond = np.linalg.cond(pivot)
    if not np.isfinite(cond) or cond > PIVOT_COND_MAX:
        raise IllConditionedPartition(f"pivot condition number {cond:.3g} exceeds {PIVOT_COND_MAX:g}")
    return C_IJ @ V_J @ np.linalg.solve(pivot, U_K.T @ C_KI)


def block_residual(C, part: Partition3, k: int) -> np.ndarray:
    """Block-diagonal matrix holding ``C[I, I] - L[I, I]`` for each block, zero elsewhere."""
    C = np.asarray(C, dtype=float)
    R = np.zeros_like(C)
    I, J, K = (list(b) for b in part.blocks)
    for a, b, c in ((I, J, K), (J, K, I), (K, I, J)):
        R[np.ix_(a, a)] = C[np.ix_(a, a)] - _block_lowrank(C, a, b, c, k)
    return R


def diag_lowrank_decompose(C, part: Partition3, k: int, return_residual: bool = False):
    """Split ``C = L + diag(d)`` with ``L`` of rank ``k``.

    Parameters
    ----------
    C : ndarray, shape (n, n)
    part : Partition3
    k : int
        Rank of the low-rank part.
    return_residual : bool
        Also return the block-diagonal residual before it is reduced to its diagonal.

    Returns
    -------
    L : ndarray, shape (n, n)
        ``C - diag(d)``.
    d : ndarray, shape (n,)
    """
    C = np.asarray(C, dtype=float)
    if C.shape != (part.n, part.n):
        raise ValueError(f"matrix shape {C.shape} does not match partition of {part.n}")
    R = block_residual(C, part, k)
    d = np.diag(R).copy()
    L = C - np.diag(d)
    if return_residual:
        return L, d, R
    return L, d


def off_diagonal_ratio(M) -> float:
    """``sum_{i != j} |M_ij| / sum_ij |M_ij|``, 0 for the zero matrix."""
    M = np.abs(np.asarray(M, dtype=float))
    total = M.sum()
    if total == 0:
        return 0.0
    return float((total - np.trace(M)) / total)


def random_partition(n: int, k: int, rng: np.random.Generator, max_draws: int = 10_000) -> Partition3:
    """Uniform 3-way row assignment, redrawn until every block has at least ``k`` rows."""
    if n < 3 * k:
        raise ValueError(f"n={n} < 3k={3 * k}")
    for _ in range(max_draws):
        labels = rng.integers(0, 3, n)
        if np.bincount(labels, minlength=3).min() >= k:
            return Partition3.from_labels(labels)
    raise NoValidPartition("could not draw blocks of size >= k")


def find_partition(C, k: int, trials: int = 100, rng_seed: int = 0):
    """Best of ``trials`` random partitions by off-diagonal ratio of the residual.

    Returns
    -------
    part : Partition3
    score : float
    """
    C = np.asarray(C, dtype=float)
    rng = np.random.default_rng(rng_seed)
    best = None
    for t in range(trials):
        part = random_partition(C.shape[0], k, rng)
        try:
            R = block_residual(C, part, k)
        except (IllConditionedPartition, np.linalg.LinAlgError):
            continue
        score = off_diagonal_ratio(R)
        if best is None or score < best[1]:
            best = (part, score, t)
    if best is None:
        raise NoValidPartition(f"all {trials} partitions were ill-conditioned")
    return best[0], best[1]


def decompose(C, k: int, trials: int = 100, rng_seed: int = 0) -> dict:
    """``find_partition`` followed by ``diag_lowrank_decompose`` on the winner."""
    part, score = find_partition(C, k, trials, rng_seed)
    L, d = diag_lowrank_decompose(C, part, k)
    return {"lowrank": L, "diag": d, "partition": part, "score": score}


def incoherence_number(A) -> float:
    """``max_j (n/k) ||U^T e_j||^2`` over the left singular subspace of ``A``."""
    A = np.asarray(A, dtype=float)
    n, k = A.shape
    U, s, _ = np.linalg.svd(A, full_matrices=False)
    if s.size < k or s[-1] <= 1e-12 * s[0]:
        raise RankDeficient("A is not of full column rank")
    return float(n / k * np.max(np.sum(U ** 2, axis=1)))


def partition_success_bound(n, k, ell, delta) -> float:
    """Incoherence threshold ``(9/32) n / (k ell ln(k ell / delta))``."""
    return 9 / 32 * n / (k * ell * np.log(k * ell / delta))
