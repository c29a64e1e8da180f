"""Synthetic instances for tests, benchmarks and the acceptance suite."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .matrix import RawGraph, SparseColumnMatrix

__all__ = [
    "random_dense",
    "random_sparse",
    "planted_pairs",
    "pair_with_dot",
    "power_law_graph",
]


def random_dense(n_cols: int, n_rows: int, seed: int = 0) -> SparseColumnMatrix:
    """I.i.d. Uniform(0, 1) entries."""
    rng = np.random.default_rng(seed)
    return SparseColumnMatrix.from_dense(rng.random((n_rows, n_cols)))


def random_sparse(n_cols: int, n_rows: int, density: float, seed: int = 0) -> SparseColumnMatrix:
    rng = np.random.default_rng(seed)
    m = sp.random(n_rows, n_cols, density=density, random_state=rng, data_rvs=lambda k: rng.random(k) + 0.05)
    return SparseColumnMatrix.from_scipy(m)


def planted_pairs(
    n_cols: int = 200,
    n_pairs: int = 30,
    support: int = 100,
    n_rows: int = 100_000,
    dot_range: tuple[float, float] = (0.3, 0.9),
    seed: int = 0,
) -> tuple[SparseColumnMatrix, list[tuple[int, int]]]:
    """0/1 columns with ``support`` non-zeros each and planted similar pairs.

    Pair ``(2i, 2i+1)`` shares ``round(dot * support)`` rows, so its cosine
    is that share over ``support``. All other columns draw their support
    uniformly from ``n_rows`` rows, which keeps background cosines near 0.
    """
    if 2 * n_pairs > n_cols:
        raise ValueError("not enough columns for the planted pairs")
    rng = np.random.default_rng(seed)
    cols = []
    pairs = []
    for i in range(n_pairs):
        base = rng.choice(n_rows, size=support, replace=False)
        shared = int(round(rng.uniform(*dot_range) * support))
        rest = np.setdiff1d(rng.choice(n_rows, size=2 * support, replace=False), base)[: support - shared]
        cols.append(base)
        cols.append(np.concatenate([base[:shared], rest]))
        pairs.append((2 * i, 2 * i + 1))
    for _ in range(n_cols - 2 * n_pairs):
        cols.append(rng.choice(n_rows, size=support, replace=False))
    rows = np.concatenate(cols)
    colidx = np.repeat(np.arange(n_cols), [len(c) for c in cols])
    m = sp.coo_matrix((np.ones(len(rows)), (rows, colidx)), shape=(n_rows, n_cols))
    return SparseColumnMatrix.from_scipy(m), pairs


def pair_with_dot(support: int = 25, shared: int = 5, seed: int = 0) -> SparseColumnMatrix:
    """Two 0/1 columns whose cosine is exactly ``shared / support``."""
    rows_a = np.arange(support)
    rows_b = np.concatenate([np.arange(shared), support + np.arange(support - shared)])
    rows = np.concatenate([rows_a, rows_b])
    cols = np.repeat([0, 1], support)
    m = sp.coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(2 * support, 2))
    return SparseColumnMatrix.from_scipy(m)


def power_law_graph(
    n: int = 5000,
    exponent: float = 2.1,
    min_degree: int = 3,
    max_degree: int = 1000,
    copy_prob: float = 0.5,
    fidelity: tuple[float, float] = (0.2, 1.0),
    activity_exponent: float = 2.5,
    seed: int = 0,
) -> RawGraph:
    """Directed follow graph from a copying model with power-law degrees.

    Vertices arrive in order. With probability ``copy_prob`` a vertex picks
    an earlier prototype, takes over its in-degree and fills each follower
    slot with one of the prototype's followers with probability ``rho``
    (drawn per vertex from ``fidelity``); remaining slots and all slots of
    non-copying vertices draw followers proportional to a power-law
    activity weight. In-degrees of originals follow a discrete power law.
    """
    rng = np.random.default_rng(seed)
    support = np.arange(min_degree, max_degree + 1)
    p = support.astype(float) ** -exponent
    degrees = rng.choice(support, size=n, p=p / p.sum())
    activity = rng.pareto(activity_exponent - 1.0, size=n) + 1.0
    activity /= activity.sum()
    followers_of: list[np.ndarray] = []
    src, dst = [], []
    for v in range(n):
        chosen: set[int] = set()
        k = int(degrees[v])
        if v > 0 and rng.random() < copy_prob:
            u = int(rng.integers(0, v))
            proto = followers_of[u]
            k = len(proto) if len(proto) >= min_degree else k
            rho = rng.uniform(*fidelity)
            n_copy = min(int(rng.binomial(k, rho)), len(proto))
            chosen.update(rng.choice(proto, size=n_copy, replace=False).tolist())
        k = min(k, n - 1)
        chosen.discard(v)
        while len(chosen) < k:
            chosen.update(rng.choice(n, size=k - len(chosen), p=activity).tolist())
            chosen.discard(v)
        f = np.fromiter(sorted(chosen), dtype=np.int64)
        followers_of.append(f)
        src.append(f)
        dst.append(np.full(len(f), v, dtype=np.int64))
    ids = [str(i) for i in range(n)]
    src_a = np.concatenate(src) if src else np.zeros(0, np.int64)
    return RawGraph(
        ids=ids,
        src=src_a,
        dst=np.concatenate(dst) if dst else np.zeros(0, np.int64),
        weight=np.ones(len(src_a)),
    )
