"""SimHash sketches over a keyed Gaussian generator.

The Gaussian entry for (row ``r``, bit ``i``) is a pure function of
``(seed, r, i)``: a splitmix64-style mixing hash produces 53 uniform bits
that are pushed through the inverse normal CDF. Any worker can therefore
recompute the same projection entries without coordination.

Bit ``i`` of a column's sketch is 1 iff the projection onto Gaussian
direction ``i`` is >= 0, with the sum accumulated over the column's
non-zeros in ascending row order. Bits are packed LSB-first, 64 per word.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TextIO

import numpy as np
import scipy.sparse as sp
from scipy.special import ndtri

from .errors import DomainError, ParseError, ValidationError
from .matrix import SparseColumnMatrix

__all__ = [
    "GaussianKey",
    "Sketch",
    "SketchSet",
    "gaussian_at",
    "gaussian_row",
    "compute_sketch",
    "compute_sketches",
    "hamming",
    "estimate_dot",
    "sketch_length_heuristic",
    "theory_sketch_length",
    "DEFAULT_SKETCH_LEN",
]

DEFAULT_SKETCH_LEN = 8192

_MASK64 = (1 << 64) - 1
_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)

# Working-set budget for the per-block projection accumulator.
_BLOCK_BYTES = 1 << 27


def _mix64(x: np.ndarray) -> np.ndarray:
    # splitmix64 output function; uint64 arithmetic wraps mod 2**64.
    z = x + _GAMMA
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def _row_key(seed: int, r: int) -> np.ndarray:
    s = np.array([int(seed) & _MASK64], dtype=np.uint64)
    return _mix64(_mix64(s) ^ np.uint64(int(r) & _MASK64))


def _to_normal(h: np.ndarray) -> np.ndarray:
    # 53 high bits -> u in (0, 1), never 0 or 1, so ndtri stays finite.
    u = (h >> np.uint64(11)).astype(np.float64) * 2.0**-53 + 2.0**-54
    return ndtri(u)


@dataclass(frozen=True)
class GaussianKey:
    seed: int
    r: int
    i: int


def gaussian_row(seed: int, r: int, ell: int) -> np.ndarray:
    """g(seed, r, i) for i = 0 .. ell-1."""
    bits = np.arange(ell, dtype=np.uint64)
    return _to_normal(_mix64(_row_key(seed, r) ^ bits))


def gaussian_at(key: GaussianKey) -> float:
    """Standard normal variate determined entirely by ``key``."""
    h = _mix64(_row_key(key.seed, key.r) ^ np.uint64(int(key.i) & _MASK64))
    return float(_to_normal(h)[0])


def _n_words(ell: int) -> int:
    return (ell + 63) // 64


def _pack(bits: np.ndarray) -> np.ndarray:
    """Pack a (k, ell) boolean array into (k, n_words) uint64, LSB-first."""
    k, ell = bits.shape
    packed = np.packbits(bits, axis=1, bitorder="little")
    padded = np.zeros((k, _n_words(ell) * 8), dtype=np.uint8)
    padded[:, : packed.shape[1]] = packed
    return padded.view("<u8").astype(np.uint64)


@dataclass(frozen=True, eq=False)
class Sketch:
    words: np.ndarray
    ell: int
    l2_norm: float = 1.0

    def bits(self) -> np.ndarray:
        raw = self.words.astype("<u8").view(np.uint8)
        return np.unpackbits(raw, bitorder="little")[: self.ell].astype(bool)

    def complement(self) -> "Sketch":
        flipped = ~self.words
        tail = self.ell % 64
        if tail:
            flipped = flipped.copy()
            flipped[-1] &= np.uint64((1 << tail) - 1)
        return Sketch(flipped, self.ell, self.l2_norm)

    @classmethod
    def from_bits(cls, bits, l2_norm: float = 1.0) -> "Sketch":
        b = np.asarray(bits, dtype=bool)
        if b.ndim != 1 or len(b) < 1:
            raise ValidationError("sketch needs at least one bit")
        return cls(_pack(b[None, :])[0], len(b), l2_norm)

    def __eq__(self, other):
        if not isinstance(other, Sketch):
            return NotImplemented
        return self.ell == other.ell and np.array_equal(self.words, other.words)


def compute_sketch(rows, values, ell: int, seed: int, l2_norm: float = 1.0) -> Sketch:
    """SimHash of one column given its non-zeros (any order)."""
    rows = np.asarray(rows, dtype=np.int64)
    values = np.asarray(values, dtype=np.float64)
    if ell < 1:
        raise DomainError("sketch length must be >= 1")
    if len(rows) == 0:
        raise ValidationError("cannot sketch an empty column")
    order = np.argsort(rows, kind="stable")
    rows, values = rows[order], values[order]
    weights = sp.csr_matrix((values, np.arange(len(rows)), [0, len(rows)]), shape=(1, len(rows)))
    acc = _project(rows, weights, ell, seed)
    return Sketch(_pack(acc >= 0)[0], ell, float(l2_norm))


def hamming(a: Sketch, b: Sketch) -> int:
    if a.ell != b.ell:
        raise ValidationError(f"sketch lengths differ: {a.ell} vs {b.ell}")
    return int(np.bitwise_count(a.words ^ b.words).sum())


def estimate_dot(a: Sketch, b: Sketch, norm_a: float = 1.0, norm_b: float = 1.0) -> float:
    delta = hamming(a, b)
    return norm_a * norm_b * math.cos(math.pi * delta / a.ell)


def sketch_length_heuristic(tau: float) -> int:
    """Rule-of-thumb sketch length 10 / delta**2, delta = 1/2 - arccos(tau)/pi."""
    if not 0.0 < tau < 1.0:
        raise DomainError(f"tau must lie in (0, 1), got {tau}")
    delta = 0.5 - math.acos(tau) / math.pi
    return round(10.0 / delta**2)


def theory_sketch_length(tau: float, n: int, c: float) -> int:
    return math.ceil(c * tau**-2 * math.log(n))


class SketchSet:
    """Packed sketches for every column of one matrix.

    Empty columns get all-zero words and ``present[a] == False``.
    """

    def __init__(self, words: np.ndarray, ell: int, seed: int, l2_norms: np.ndarray, present: np.ndarray):
        self.words = words
        self.ell = int(ell)
        self.seed = int(seed)
        self.l2_norms = l2_norms
        self.present = present

    def __len__(self):
        return len(self.words)

    def __getitem__(self, a: int) -> Sketch:
        if not self.present[a]:
            raise KeyError(f"column {a} is empty and has no sketch")
        return Sketch(self.words[a], self.ell, float(self.l2_norms[a]))

    def hamming_many(self, a_idx: np.ndarray, b_idx: np.ndarray, other: "SketchSet | None" = None) -> np.ndarray:
        other = self if other is None else other
        return np.bitwise_count(self.words[a_idx] ^ other.words[b_idx]).sum(axis=1, dtype=np.int64)

    def write(self, fh: TextIO) -> None:
        fh.write(f"# ell={self.ell}\tseed={self.seed}\n")
        n_bytes = (self.ell + 7) // 8
        for a in np.flatnonzero(self.present).tolist():
            hexbits = self.words[a].astype("<u8").tobytes()[:n_bytes].hex()
            fh.write(f"{a}\t{float(self.l2_norms[a])!r}\t{hexbits}\n")

    @classmethod
    def read(cls, fh: TextIO, n_cols: int | None = None) -> "SketchSet":
        header = fh.readline()
        try:
            fields = dict(kv.split("=") for kv in header.lstrip("#").split())
            ell, seed = int(fields["ell"]), int(fields["seed"])
        except (ValueError, KeyError):
            raise ParseError(1, f"bad sketch header {header.strip()!r}") from None
        entries = []
        for lineno, line in enumerate(fh, start=2):
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 3:
                raise ParseError(lineno, "expected index<TAB>l2_norm<TAB>hex")
            entries.append((int(parts[0]), float(parts[1]), bytes.fromhex(parts[2])))
        size = n_cols if n_cols is not None else (max((e[0] for e in entries), default=-1) + 1)
        nw = _n_words(ell)
        words = np.zeros((size, nw), dtype=np.uint64)
        norms = np.zeros(size)
        present = np.zeros(size, dtype=bool)
        for a, norm, raw in entries:
            buf = raw + b"\0" * (nw * 8 - len(raw))
            words[a] = np.frombuffer(buf, dtype="<u8")
            norms[a] = norm
            present[a] = True
        return cls(words, ell, seed, norms, present)


def _project(rows: np.ndarray, weights, ell: int, seed: int) -> np.ndarray:
    """Projections of the columns in ``weights`` (k x len(rows), CSR).

    scipy's CSR-times-dense kernel accumulates every output entry over the
    stored indices in order, so with sorted indices each column's sum runs
    in ascending row order, starting from 0.0.
    """
    g = np.empty((len(rows), ell))
    for j, r in enumerate(rows.tolist()):
        g[j] = gaussian_row(seed, r, ell)
    return weights @ g


def _blocks(m: SparseColumnMatrix, c0: int, c1: int, ell: int) -> list[tuple[int, int]]:
    # Greedy column blocks whose Gaussian rows plus accumulator fit the budget.
    budget = max(1, _BLOCK_BYTES // (8 * ell))
    seen = np.zeros(m.n_rows, dtype=bool)
    out, start, used = [], c0, 0
    for c in range(c0, c1):
        rows = m.indices[m.indptr[c] : m.indptr[c + 1]]
        new = int(np.count_nonzero(~seen[rows]))
        if c > start and used + new + (c - start + 1) > budget:
            out.append((start, c))
            seen[:] = False
            start, new = c, len(rows)
            used = 0
        seen[rows] = True
        used += new
    if c1 > start:
        out.append((start, c1))
    return out


def _sketch_block(m: SparseColumnMatrix, c0: int, c1: int, ell: int, seed: int) -> np.ndarray:
    sub = m.to_scipy()[:, c0:c1]
    rows = np.unique(sub.indices)
    weights = sub[rows, :].T.tocsr()
    weights.sort_indices()
    return _pack(_project(rows, weights, ell, seed) >= 0)


def sketch_partitions(m: SparseColumnMatrix, ell: int, n_parts: int) -> list[tuple[int, int]]:
    """Column blocks: contiguous per-worker ranges, each cut to the budget."""
    bounds = np.linspace(0, m.n_cols, max(1, n_parts) + 1).astype(int)
    out = []
    for c0, c1 in zip(bounds[:-1].tolist(), bounds[1:].tolist()):
        out.extend(_blocks(m, c0, c1, ell))
    return out


def compute_sketches(m: SparseColumnMatrix, ell: int, seed: int, executor=None) -> SketchSet:
    """Sketch every non-empty column of ``m``; blocks may run on ``executor``."""
    if ell < 1:
        raise DomainError("sketch length must be >= 1")
    n_parts = getattr(executor, "_max_workers", 1) if executor is not None else 1
    blocks = sketch_partitions(m, ell, n_parts)
    if executor is None:
        parts = [_sketch_block(m, c0, c1, ell, seed) for c0, c1 in blocks]
    else:
        parts = list(executor.map(lambda b: _sketch_block(m, b[0], b[1], ell, seed), blocks))
    words = np.concatenate(parts) if parts else np.zeros((0, _n_words(ell)), dtype=np.uint64)
    present = m.column_nnz > 0
    words[~present] = 0
    return SketchSet(words, ell, seed, np.asarray(m.column_l2_norms), present)
