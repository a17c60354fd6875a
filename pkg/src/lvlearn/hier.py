"""Level-by-level learning of hierarchical latent models."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .decomp import diag_lowrank_decompose, find_partition
from .errors import LVLearnError, RankConditionUnmet, StageError
from .metrics import align_columns
from .recovery import EPS_ZERO, alg1, alg1_proj


@dataclass
class HierarchyResult:
    """Estimated matrices ``A_1 .. A_{m-1}`` (top to bottom) and per-level intermediates."""

    matrices: list
    top_moment: np.ndarray
    levels: list = field(default_factory=list)


def _run(stage, level, fn, *args):
    try:
        return fn(*args)
    except (LVLearnError, np.linalg.LinAlgError) as exc:
        raise StageError(stage, exc, level=level) from exc


def peel_level(C, k: int, rng_seed: int = 0, variant: str = "alg1", trials: int = 100,
               level: int | None = None, sparsity_eps: float = EPS_ZERO) -> dict:
    """Denoise ``C``, recover its ``k``-column factor and map ``C`` one level up."""
    part, score = _run("decomp", level, find_partition, C, k, trials, rng_seed)
    L, d = _run("decomp", level, diag_lowrank_decompose, C, part, k)
    recover = alg1 if variant == "alg1" else alg1_proj
    rec = _run("recovery", level, recover, L, k, sparsity_eps)
    B = np.linalg.pinv(rec.A_hat)
    up = B @ L @ B.T
    return {"A_hat": rec.A_hat, "lowrank": L, "diag": d, "partition": part,
            "score": score, "recovery": rec, "next_moment": 0.5 * (up + up.T)}


def learn_hierarchy(pairs, level_sizes, rng_seed: int = 0, variant="alg1", trials: int = 100,
                    return_result: bool = False, sparsity_eps: float = EPS_ZERO):
    """Recover ``A_{m-1}, ..., A_1`` from the covariance of the deepest level.

    Parameters
    ----------
    pairs : ndarray, shape (n_m, n_m)
    level_sizes : sequence of int
        ``n_1, ..., n_m`` from the top level down.
    rng_seed : int
    variant : str or sequence of str
        ``"alg1"`` or ``"alg1proj"``, optionally one entry per peeled level (top first).
    trials : int
        Random partitions per level.
    sparsity_eps : float
        Zero threshold of the sparsity count used to rank recovery candidates.

    Returns
    -------
    list of ndarray
        ``[A_1_hat, ..., A_{m-1}_hat]``; with ``return_result`` a HierarchyResult.
    """
    sizes = [int(s) for s in level_sizes]
    C = np.asarray(pairs, dtype=float)
    if C.shape != (sizes[-1], sizes[-1]):
        raise ValueError(f"pairs shape {C.shape} does not match deepest level {sizes[-1]}")
    for i, (a, b) in enumerate(zip(sizes, sizes[1:])):
        if b < 3 * a:
            raise RankConditionUnmet(f"level {i + 2} has {b} < 3 x {a} nodes")
    m = len(sizes)
    variants = [variant] * (m - 1) if isinstance(variant, str) else list(variant)
    seeds = np.random.SeedSequence(rng_seed).generate_state(m - 1)
    peeled = []
    for lvl in range(m - 1, 0, -1):
        # A_lvl (1-based) maps level lvl to lvl + 1
        out = peel_level(C, sizes[lvl - 1], int(seeds[lvl - 1]), variants[lvl - 1], trials, lvl,
                         sparsity_eps)
        peeled.append(out)
        C = out["next_moment"]
    peeled.reverse()
    mats = [p["A_hat"] for p in peeled]
    if return_result:
        return HierarchyResult(mats, top_level_moment(peeled), peeled)
    return mats


def top_level_moment(intermediates) -> np.ndarray:
    """Second moment of the top level (in the recovered labeling and scaling)."""
    if isinstance(intermediates, HierarchyResult):
        return intermediates.top_moment
    first = intermediates[0]
    return np.array(first["next_moment"])


def equivalent_truth(matrices_true, matrices_hat) -> list:
    """Planted matrices re-expressed in the labels and scales the estimates can see.

    A hidden level is only known up to the order and scale fixed by the canonical
    columns of the matrix below it, so each true matrix has its rows permuted and
    rescaled by the alignment of the next matrix down. The deepest matrix is
    unchanged.
    """
    out = [np.asarray(matrices_true[-1], dtype=float)]
    for i in range(len(matrices_true) - 2, -1, -1):
        lower_true, lower_hat = out[0], np.asarray(matrices_hat[i + 1], dtype=float)
        perm, signs = align_columns(lower_true, lower_hat)
        c = signs * np.linalg.norm(lower_true, axis=0)
        A = np.asarray(matrices_true[i], dtype=float)
        eq = np.zeros_like(A)
        eq[perm] = c[:, None] * A
        out.insert(0, eq)
    return out


def equivalent_top_moment(top_cov, A1_true_equiv, A1_hat) -> np.ndarray:
    """Top-level covariance in the labeling and scale of ``A1_hat``'s columns."""
    perm, signs = align_columns(A1_true_equiv, A1_hat)
    c = signs * np.linalg.norm(A1_true_equiv, axis=0)
    k = len(c)
    out = np.zeros((k, k))
    out[np.ix_(perm, perm)] = c[:, None] * np.asarray(top_cov, dtype=float) * c[None, :]
    return out
