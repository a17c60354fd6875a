"""Random model generation (Bernoulli-Gaussian protocol) and sampling."""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .errors import DegenerateColumn, DegenerateRow, GenerationFailed, NotStochastic
from .model import (
    SKEWED_FAMILIES,
    HierarchicalModel,
    LatentLinearModel,
    NoiseSpec,
)

MAX_REGENERATIONS = 100
MAX_REPAIR_ROUNDS = 10
_BOOST = 1.0 + 1e-3


def gen_bernoulli_gaussian(n: int, k: int, p: float, rng_seed: int) -> np.ndarray:
    """``B * G`` with ``B ~ Bernoulli(p)`` and ``G ~ N(0, 1)`` entrywise.

    Empty rows and columns are redrawn (at most ``MAX_REGENERATIONS`` rounds).
    """
    if not 0 < p < 1:
        raise ValueError("p must lie in (0, 1)")
    if n < k:
        raise ValueError("need n >= k")
    rng = np.random.default_rng(rng_seed)
    A = (rng.random((n, k)) < p) * rng.standard_normal((n, k))
    for _ in range(MAX_REGENERATIONS):
        rows = ~(A != 0).any(axis=1)
        cols = ~(A != 0).any(axis=0)
        if not rows.any() and not cols.any():
            return A
        if rows.any():
            r = int(rows.sum())
            A[rows] = (rng.random((r, k)) < p) * rng.standard_normal((r, k))
        if cols.any():
            c = int(cols.sum())
            A[:, cols] = (rng.random((n, c)) < p) * rng.standard_normal((n, c))
    raise GenerationFailed(f"could not draw a {n}x{k} support without empty rows/columns")


def gen_dag(k: int, p: float, rng_seed: int) -> np.ndarray:
    """Strictly lower-triangular Bernoulli-Gaussian weight matrix."""
    rng = np.random.default_rng(rng_seed)
    lam = (rng.random((k, k)) < p) * rng.standard_normal((k, k))
    return np.tril(lam, -1)


def _row_order(row):
    mags = np.abs(row)
    # stable: smallest index wins ties
    return np.argsort(-mags, kind="stable")


def row_gap_holds(A, gamma) -> bool:
    for row in np.asarray(A):
        nz = np.abs(row[row != 0])
        if nz.size >= 2:
            top2 = np.sort(nz)[-2:]
            if top2[0] > (1 - gamma) * top2[1] * (1 + 1e-12):
                return False
    return True


def enforce_row_gap(A, gamma: float) -> np.ndarray:
    """Raise each row's largest magnitude so that second/max <= 1 - gamma.

    Only the max entry of a violating row changes; its sign is kept.
    """
    if not 0 < gamma < 1:
        raise ValueError("gamma must lie in (0, 1)")
    A = np.array(A, dtype=float)
    for i, row in enumerate(A):
        if not np.any(row != 0):
            raise DegenerateRow(f"row {i} is all zeros")
        order = _row_order(row)
        first, second = abs(row[order[0]]), abs(row[order[1]]) if row.size > 1 else 0.0
        if second == 0.0:
            continue
        if second / first > 1 - gamma:
            A[i, order[0]] = np.sign(row[order[0]]) * second / (1 - gamma)
    return A


def row_argmax(A) -> np.ndarray:
    return np.argmax(np.abs(np.asarray(A)), axis=1)


def coverage_holds(A) -> bool:
    """Every column is the row-maximum of at least one row."""
    A = np.asarray(A)
    return set(row_argmax(A).tolist()) >= set(range(A.shape[1]))


def ensure_column_row_max_coverage(A, rng_seed: int) -> np.ndarray:
    """Boost entries until every column dominates at least one row."""
    A = np.array(A, dtype=float)
    n, k = A.shape
    if n < k:
        raise ValueError("need n >= k")
    empty = np.flatnonzero(~(A != 0).any(axis=0))
    if empty.size:
        raise DegenerateColumn(f"columns {empty.tolist()} have empty support")
    rng = np.random.default_rng(rng_seed)
    for _ in range(n * k + 1):
        winners = row_argmax(A)
        counts = np.bincount(winners, minlength=k)
        missing = np.flatnonzero(counts == 0)
        if missing.size == 0:
            return A
        j = int(missing[0])
        rows = np.flatnonzero(A[:, j] != 0)
        rowmax = np.abs(A[rows]).max(axis=1)
        ratio = np.abs(A[rows, j]) / rowmax
        # rows whose current winner dominates elsewhere too can be taken safely
        safe = counts[winners[rows]] >= 2
        pool = np.flatnonzero(safe) if safe.any() else np.arange(rows.size)
        best = ratio[pool].max()
        ties = pool[ratio[pool] >= best]
        pick = rows[int(rng.choice(ties))]
        A[pick, j] = np.sign(A[pick, j]) * np.abs(A[pick]).max() * _BOOST
    raise GenerationFailed("coverage repair did not terminate")


def prepare_coefficients(A, gamma: float, rng_seed: int) -> np.ndarray:
    """Coverage repair followed by gap enforcement, re-checked until both hold."""
    for _ in range(MAX_REPAIR_ROUNDS):
        A = ensure_column_row_max_coverage(A, rng_seed)
        A = enforce_row_gap(A, gamma)
        if coverage_holds(A) and row_gap_holds(A, gamma):
            return A
    raise GenerationFailed("coverage and gap constraints could not both be met")


def random_noise(size: int, families: Sequence[str], rng: np.random.Generator,
                 var_range=(0.5, 1.0)) -> tuple:
    """Variances ~ U[var_range], family drawn uniformly from ``families``."""
    fam = rng.integers(0, len(families), size)
    var = rng.uniform(var_range[0], var_range[1], size)
    return tuple(NoiseSpec(families[f], float(v)) for f, v in zip(fam, var))


def gen_bn_model(n: int, k: int, p: float = 0.3, gamma: float = 0.5, rng_seed: int = 0,
                 families: Sequence[str] = SKEWED_FAMILIES, dag_p: float | None = None,
                 single_view: bool = True) -> LatentLinearModel:
    """Latent DAG model in the style of the second simulation study."""
    ss = np.random.SeedSequence(rng_seed)
    s_a, s_fix, s_dag, s_noise = (int(c.generate_state(1)[0]) for c in ss.spawn(4))
    A = gen_bernoulli_gaussian(n, k, p, s_a)
    A = prepare_coefficients(A, gamma, s_fix)
    lam = gen_dag(k, p if dag_p is None else dag_p, s_dag)
    rng = np.random.default_rng(s_noise)
    eta = random_noise(k, families, rng)
    eps = random_noise(n, families, rng) if single_view else ()
    return LatentLinearModel(A=A, lam=lam, eta_noise=eta, eps_noise=eps)


def gen_hierarchical_model(levels: Sequence[int], p: float = 0.3, gamma: float = 0.5,
                           rng_seed: int = 0, families: Sequence[str] = ("exponential", "poisson", "chi-squared", "gaussian")
                           ) -> HierarchicalModel:
    """Hierarchical model in the style of the first simulation study."""
    levels = list(levels)
    children = np.random.SeedSequence(rng_seed).spawn(len(levels))
    mats = []
    for i in range(len(levels) - 1):
        s_a, s_fix = (int(x) for x in children[i].generate_state(2))
        A = gen_bernoulli_gaussian(levels[i + 1], levels[i], p, s_a)
        mats.append(prepare_coefficients(A, gamma, s_fix))
    rng = np.random.default_rng(children[-1])
    noise = tuple(random_noise(s, families, rng) for s in levels)
    return HierarchicalModel(matrices=tuple(mats), level_noise=noise)


def _draw_noise(specs, N, rng) -> np.ndarray:
    out = np.empty((N, len(specs)))
    for j, spec in enumerate(specs):
        out[:, j] = spec.sample(rng, N)
    return out


def _chunk_rngs(rng_seed, N, chunk):
    starts = list(range(0, N, chunk))
    seqs = np.random.SeedSequence(rng_seed).spawn(len(starts))
    for s, seq in zip(starts, seqs):
        yield s, min(chunk, N - s), np.random.default_rng(seq)


def sample_single_view(model: LatentLinearModel, N: int, rng_seed: int,
                       chunk: int = 100_000) -> np.ndarray:
    """Draw ``N`` observations ``x = M eta + eps`` as an ``N x n`` array.

    Each chunk of ``chunk`` rows has its own substream of the master seed, so
    the output does not depend on how chunks are scheduled.
    """
    if not model.single_view:
        raise ValueError("model has no observation noise; use sample_multi_view")
    M = model.mixing
    X = np.empty((N, model.n))
    for start, size, rng in _chunk_rngs(rng_seed, N, chunk):
        eta = _draw_noise(model.eta_noise, size, rng)
        eps = _draw_noise(model.eps_noise, size, rng)
        X[start:start + size] = eta @ M.T + eps
    return X


def sample_multi_view(model: LatentLinearModel, N: int, rng_seed: int, views: int = 3,
                      view_noise: Sequence[NoiseSpec] | None = None,
                      chunk: int = 100_000) -> np.ndarray:
    """``N x views x n`` array of exchangeable views ``x_v = M eta + eps_v``.

    ``view_noise`` (length n) defaults to the model's ``eps_noise`` or, when
    that is empty, unit-variance Gaussian noise.
    """
    if view_noise is None:
        view_noise = model.eps_noise or tuple(NoiseSpec("gaussian", 1.0) for _ in range(model.n))
    M = model.mixing
    X = np.empty((N, views, model.n))
    for start, size, rng in _chunk_rngs(rng_seed, N, chunk):
        h = _draw_noise(model.eta_noise, size, rng) @ M.T
        for v in range(views):
            X[start:start + size, v] = h + _draw_noise(view_noise, size, rng)
    return X


def dirichlet_prior(alpha) -> Callable:
    alpha = np.asarray(alpha, dtype=float)

    def draw(rng, N):
        return rng.dirichlet(alpha, N)

    return draw


def sample_documents(A_topicword, topic_prior: Callable, N_docs: int, words_per_doc: int,
                     rng_seed: int) -> np.ndarray:
    """Bag-of-words documents as an ``N_docs x words_per_doc`` array of word ids.

    ``topic_prior(rng, N)`` must return ``N x k`` rows on the simplex.
    """
    A = np.asarray(A_topicword, dtype=float)
    if np.any(A < 0) or not np.allclose(A.sum(axis=0), 1.0, atol=1e-10):
        raise NotStochastic("topic-word matrix columns must be probability vectors")
    n, k = A.shape
    rng = np.random.default_rng(rng_seed)
    h = np.asarray(topic_prior(rng, N_docs), dtype=float)
    topic_cdf = np.cumsum(h, axis=1)
    topic_cdf[:, -1] = 1.0
    u = rng.random((N_docs, words_per_doc))
    topics = (u[:, :, None] > topic_cdf[:, None, :]).sum(axis=2)
    topics = np.minimum(topics, k - 1)
    word_cdf = np.cumsum(A, axis=0)
    word_cdf[-1] = 1.0
    u = rng.random((N_docs, words_per_doc))
    words = np.empty((N_docs, words_per_doc), dtype=np.int64)
    for t in range(k):
        sel = topics == t
        words[sel] = np.searchsorted(word_cdf[:, t], u[sel], side="right")
    return np.minimum(words, n - 1)


def sample_hierarchical(model: HierarchicalModel, N: int, rng_seed: int,
                        chunk: int = 100_000) -> np.ndarray:
    """Draw ``N`` samples of the deepest level of a hierarchical model.

    Top-level sources follow ``level_noise[0]`` (or a Gaussian with
    ``top_covariance`` when one is set); each lower level adds its own noise.
    """
    X = np.empty((N, model.levels[-1]))
    top = model.top_covariance
    for start, size, rng in _chunk_rngs(rng_seed, N, chunk):
        if top is None:
            h = _draw_noise(model.level_noise[0], size, rng)
        else:
            h = rng.multivariate_normal(np.zeros(top.shape[0]), top, size)
        for A, noise in zip(model.matrices, model.level_noise[1:]):
            h = h @ A.T + _draw_noise(noise, size, rng)
        X[start:start + size] = h
    return X
