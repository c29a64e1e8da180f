"""Per-row weighted samplers used to draw wedges.

A wedge at row ``r`` is a pair (a, b) with a drawn proportional to
``A[r, a]`` and b drawn proportional to ``B[r, b]``. Each row gets an
alias table so a draw costs O(1).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TextIO

import numpy as np

from .errors import ValidationError
from .matrix import SparseColumnMatrix

__all__ = [
    "RowSampler",
    "build_row_sampler",
    "build_row_samplers",
    "sample",
    "row_rng",
    "wedge_weight",
    "wedge_weights",
    "write_wedge_weights",
]

# Stream labels mixed into per-row generator keys.
ROUND3_STREAM = 3


@dataclass(frozen=True, eq=False)
class RowSampler:
    row_index: int
    l1_norm: float
    columns: np.ndarray
    prob: np.ndarray
    alias: np.ndarray

    @property
    def inert(self) -> bool:
        return len(self.columns) == 0

    def sample_many(self, rng: np.random.Generator, k: int) -> np.ndarray:
        """``k`` independent column draws. Uses k integers then k uniforms."""
        if self.inert:
            raise ValidationError(f"row {self.row_index} has no non-zeros to sample")
        slot = rng.integers(0, len(self.columns), size=k)
        coin = rng.random(size=k)
        take = np.where(coin < self.prob[slot], slot, self.alias[slot])
        return self.columns[take]


def build_row_sampler(row, row_index: int = -1) -> RowSampler:
    """Alias table (Vose two-worklist) over ``[(column, value), ...]``.

    An empty row gives an inert sampler with ``l1_norm == 0``.
    """
    if isinstance(row, tuple) and len(row) == 2 and isinstance(row[0], np.ndarray):
        cols, vals = row
    else:
        pairs = list(row)
        cols = np.array([c for c, _ in pairs], dtype=np.int64)
        vals = np.array([v for _, v in pairs], dtype=np.float64)
    cols = np.asarray(cols, dtype=np.int64)
    vals = np.asarray(vals, dtype=np.float64)
    k = len(cols)
    if k == 0:
        empty = np.zeros(0, dtype=np.int64)
        return RowSampler(row_index, 0.0, empty, np.zeros(0), empty)
    if np.any(vals <= 0) or not np.all(np.isfinite(vals)):
        raise ValidationError(f"row {row_index}: sampler weights must be finite and > 0")

    total = float(vals.sum())
    scaled = (vals * (k / total)).tolist()
    prob = [0.0] * k
    alias = list(range(k))
    small = [i for i, p in enumerate(scaled) if p < 1.0]
    large = [i for i, p in enumerate(scaled) if p >= 1.0]
    while small and large:
        lo = small.pop()
        hi = large.pop()
        prob[lo] = scaled[lo]
        alias[lo] = hi
        scaled[hi] = (scaled[hi] + scaled[lo]) - 1.0
        if scaled[hi] < 1.0:
            small.append(hi)
        else:
            large.append(hi)
    # Leftovers are 1 up to rounding; pin them so the table stays valid.
    for i in small + large:
        prob[i] = 1.0
        alias[i] = i
    p = np.clip(np.asarray(prob), 0.0, 1.0)
    return RowSampler(row_index, total, cols, p, np.asarray(alias, dtype=np.int64))


def sample(s: RowSampler, rng: np.random.Generator) -> int:
    return int(s.sample_many(rng, 1)[0])


def build_row_samplers(m: SparseColumnMatrix, rows=None) -> dict[int, RowSampler]:
    rows = np.flatnonzero(m.row_nnz) if rows is None else rows
    out = {}
    for r in np.asarray(rows).tolist():
        cols, vals = m.row(r)
        if len(cols):
            out[r] = build_row_sampler((cols, vals), r)
    return out


def row_rng(seed: int, stream: int, r: int) -> np.random.Generator:
    """Independent Philox stream keyed by (seed, stream, row)."""
    ss = np.random.SeedSequence([int(seed) & ((1 << 64) - 1), stream, int(r)])
    return np.random.Generator(np.random.Philox(ss))


def wedge_weight(r: int, A: SparseColumnMatrix, B: SparseColumnMatrix | None = None) -> float:
    B = A if B is None else B
    return float(A.row_l1_norms[r] * B.row_l1_norms[r])


def wedge_weights(A: SparseColumnMatrix, B: SparseColumnMatrix | None = None) -> np.ndarray:
    B = A if B is None else B
    if A.n_rows != B.n_rows:
        raise ValidationError(f"row dimensions differ: {A.n_rows} vs {B.n_rows}")
    return A.row_l1_norms * B.row_l1_norms


def write_wedge_weights(fh: TextIO, A: SparseColumnMatrix, B: SparseColumnMatrix | None = None) -> None:
    B = A if B is None else B
    w = wedge_weights(A, B)
    for r in np.flatnonzero(w).tolist():
        fh.write(f"{r}\t{float(A.row_l1_norms[r])!r}\t{float(B.row_l1_norms[r])!r}\t{float(w[r])!r}\n")
