"""Edge-list ingestion, degree-cap cleaning and the normalized column matrix.

Graphs arrive as TSV edge lists with arbitrary external ids. Ids are mapped
to dense indices in first-seen order. The matrix built from a graph has one
column per vertex; column ``a`` is the (weighted) incidence vector of the
in- or out-neighbourhood of ``a``, scaled to unit L2 norm.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import DomainError, IngestError, ParseError

__all__ = [
    "RawGraph",
    "SparseColumnMatrix",
    "ingest_edge_list",
    "clean_degree_cap",
    "build_column_matrix",
    "read_id_dictionary",
    "write_id_dictionary",
    "DEFAULT_DEGREE_CAP",
]

DEFAULT_DEGREE_CAP = 10_000

FORMATS = ("auto", "pair", "weighted_triple")
ORIENTATIONS = ("in_neighborhood", "out_neighborhood")


@dataclass
class RawGraph:
    """Directed weighted edges over densely indexed vertices."""

    ids: list[str]
    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray
    dropped_zero: int = 0
    index: dict[str, int] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self.index:
            self.index = {v: i for i, v in enumerate(self.ids)}

    @property
    def n_vertices(self) -> int:
        return len(self.ids)

    @property
    def n_edges(self) -> int:
        return len(self.src)

    def out_degrees(self) -> np.ndarray:
        return np.bincount(self.src, minlength=self.n_vertices)

    def in_degrees(self) -> np.ndarray:
        return np.bincount(self.dst, minlength=self.n_vertices)

    def edge_lines(self, weighted: bool | None = None) -> Iterable[str]:
        """Yield the edges back as TSV lines (external ids)."""
        if weighted is None:
            weighted = bool(np.any(self.weight != 1.0))
        for s, d, w in zip(self.src.tolist(), self.dst.tolist(), self.weight.tolist()):
            if weighted:
                yield f"{self.ids[s]}\t{self.ids[d]}\t{w!r}\n"
            else:
                yield f"{self.ids[s]}\t{self.ids[d]}\n"


def _parse_weight(text: str, lineno: int) -> float:
    try:
        w = float(text)
    except ValueError:
        raise ParseError(lineno, f"weight {text!r} is not a number") from None
    if not math.isfinite(w):
        raise ParseError(lineno, f"weight {text!r} is not finite")
    if w < 0:
        raise DomainError(f"line {lineno}: negative weight {w}")
    return w


def ingest_edge_list(lines: Iterable[str], format: str = "auto") -> RawGraph:
    """Parse ``src<TAB>dst[<TAB>weight]`` lines into a :class:`RawGraph`.

    Blank lines and lines starting with ``#`` are skipped. Zero-weight
    lines are dropped (their endpoints are still registered as vertices)
    and counted in ``dropped_zero``. A repeated ``(src, dst)`` pair is an
    :class:`IngestError`; there is no summing of duplicates.
    """
    if format not in FORMATS:
        raise ValueError(f"unknown edge-list format {format!r}")
    ids: list[str] = []
    index: dict[str, int] = {}
    src: list[int] = []
    dst: list[int] = []
    wts: list[float] = []
    seen: dict[tuple[int, int], int] = {}
    dropped = 0

    def intern(name: str) -> int:
        i = index.get(name)
        if i is None:
            i = index[name] = len(ids)
            ids.append(name)
        return i

    for lineno, line in enumerate(lines, start=1):
        line = line.rstrip("\r\n")
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if format == "pair" and len(parts) != 2:
            raise ParseError(lineno, f"expected 2 tab-separated fields, got {len(parts)}")
        if format == "weighted_triple" and len(parts) != 3:
            raise ParseError(lineno, f"expected 3 tab-separated fields, got {len(parts)}")
        if len(parts) not in (2, 3):
            raise ParseError(lineno, f"expected 2 or 3 tab-separated fields, got {len(parts)}")
        s_name, d_name = parts[0].strip(), parts[1].strip()
        if not s_name or not d_name:
            raise ParseError(lineno, "empty vertex id")
        w = _parse_weight(parts[2].strip(), lineno) if len(parts) == 3 else 1.0
        s, d = intern(s_name), intern(d_name)
        if w == 0.0:
            dropped += 1
            continue
        key = (s, d)
        if key in seen:
            raise IngestError(
                f"line {lineno}: duplicate edge {s_name!r} -> {d_name!r} "
                f"(first seen on line {seen[key]})"
            )
        seen[key] = lineno
        src.append(s)
        dst.append(d)
        wts.append(w)

    return RawGraph(
        ids=ids,
        src=np.asarray(src, dtype=np.int64),
        dst=np.asarray(dst, dtype=np.int64),
        weight=np.asarray(wts, dtype=np.float64),
        dropped_zero=dropped,
        index=index,
    )


def clean_degree_cap(g: RawGraph, cap: int = DEFAULT_DEGREE_CAP) -> RawGraph:
    """Drop every out-edge of vertices whose out-degree exceeds ``cap``.

    Over-cap vertices keep their id; their edges are removed entirely,
    not truncated down to ``cap``.
    """
    if int(cap) != cap or cap < 1:
        raise DomainError(f"degree cap must be a positive integer, got {cap!r}")
    keep = g.out_degrees()[g.src] <= cap
    return RawGraph(
        ids=g.ids,
        src=g.src[keep],
        dst=g.dst[keep],
        weight=g.weight[keep],
        dropped_zero=g.dropped_zero,
        index=g.index,
    )


@dataclass(frozen=True, eq=False)
class SparseColumnMatrix:
    """Non-negative column-major sparse matrix with unit-norm columns.

    ``indptr``/``indices``/``data`` follow the CSC convention with row
    indices sorted inside each column. ``column_l2_norms`` are the norms
    *before* normalization; ``row_l1_norms`` are taken over the normalized
    values. Empty columns have norm 0 and no entries.
    """

    n_rows: int
    n_cols: int
    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray
    column_l2_norms: np.ndarray
    row_l1_norms: np.ndarray

    @classmethod
    def from_scipy(cls, m: sp.spmatrix) -> "SparseColumnMatrix":
        """Normalize the columns of a non-negative scipy matrix."""
        csc = sp.csc_matrix(m, dtype=np.float64, copy=True)
        csc.sum_duplicates()
        csc.eliminate_zeros()
        csc.sort_indices()
        if csc.nnz and csc.data.min() < 0:
            raise DomainError("matrix entries must be non-negative")
        n_rows, n_cols = csc.shape
        col_of = np.repeat(np.arange(n_cols), np.diff(csc.indptr))
        sq = np.bincount(col_of, weights=csc.data * csc.data, minlength=n_cols)
        norms = np.sqrt(sq)
        data = csc.data / norms[col_of] if csc.nnz else csc.data
        row_l1 = np.bincount(csc.indices, weights=data, minlength=n_rows)
        arrays = [
            csc.indptr.astype(np.int64),
            csc.indices.astype(np.int64),
            data,
            norms,
            row_l1.astype(np.float64),
        ]
        for a in arrays:
            a.setflags(write=False)
        return cls(n_rows, n_cols, *arrays)

    @classmethod
    def from_dense(cls, a) -> "SparseColumnMatrix":
        return cls.from_scipy(sp.csc_matrix(np.asarray(a, dtype=np.float64)))

    @classmethod
    def from_columns(cls, columns: Sequence[dict[int, float]], n_rows: int) -> "SparseColumnMatrix":
        """Build from one ``{row: value}`` mapping per column."""
        rows, cols, vals = [], [], []
        for c, col in enumerate(columns):
            for r, v in col.items():
                rows.append(r)
                cols.append(c)
                vals.append(v)
        m = sp.coo_matrix((vals, (rows, cols)), shape=(n_rows, len(columns)))
        return cls.from_scipy(m)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_rows, self.n_cols)

    @property
    def nnz(self) -> int:
        return len(self.data)

    @cached_property
    def column_nnz(self) -> np.ndarray:
        return np.diff(self.indptr)

    @cached_property
    def nonempty_columns(self) -> np.ndarray:
        return np.flatnonzero(self.column_nnz > 0)

    def column(self, a: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.indptr[a], self.indptr[a + 1]
        return self.indices[lo:hi], self.data[lo:hi]

    @cached_property
    def _csr(self) -> sp.csr_matrix:
        csr = self.to_scipy().tocsr()
        csr.sort_indices()
        return csr

    @cached_property
    def row_nnz(self) -> np.ndarray:
        return np.diff(self._csr.indptr)

    def row(self, r: int) -> tuple[np.ndarray, np.ndarray]:
        """Column indices (ascending) and normalized values of row ``r``."""
        csr = self._csr
        lo, hi = csr.indptr[r], csr.indptr[r + 1]
        return csr.indices[lo:hi].astype(np.int64), csr.data[lo:hi]

    def to_scipy(self) -> sp.csc_matrix:
        return sp.csc_matrix(
            (self.data, self.indices, self.indptr), shape=(self.n_rows, self.n_cols)
        )

    def to_dense(self) -> np.ndarray:
        return self.to_scipy().toarray()

    def write_tsv(self, fh) -> None:
        """Dump as ``column<TAB>row<TAB>value`` lines, column-major."""
        for a in range(self.n_cols):
            rows, vals = self.column(a)
            for r, v in zip(rows.tolist(), vals.tolist()):
                fh.write(f"{a}\t{r}\t{v!r}\n")

    def save_npz(self, path) -> None:
        np.savez(
            path,
            shape=np.array([self.n_rows, self.n_cols]),
            indptr=self.indptr,
            indices=self.indices,
            data=self.data,
            column_l2_norms=self.column_l2_norms,
            row_l1_norms=self.row_l1_norms,
        )

    @classmethod
    def load_npz(cls, path) -> "SparseColumnMatrix":
        with np.load(path) as z:
            n_rows, n_cols = (int(x) for x in z["shape"])
            arrays = [z[k].copy() for k in ("indptr", "indices", "data", "column_l2_norms", "row_l1_norms")]
        for a in arrays:
            a.setflags(write=False)
        return cls(n_rows, n_cols, *arrays)


def build_column_matrix(g: RawGraph, orientation: str = "in_neighborhood") -> SparseColumnMatrix:
    """Column ``a`` holds the followers of ``a`` (in) or its followees (out)."""
    if orientation not in ORIENTATIONS:
        raise ValueError(f"orientation must be one of {ORIENTATIONS}, got {orientation!r}")
    n = g.n_vertices
    if orientation == "in_neighborhood":
        rows, cols = g.src, g.dst
    else:
        rows, cols = g.dst, g.src
    m = sp.coo_matrix((g.weight, (rows, cols)), shape=(n, n))
    return SparseColumnMatrix.from_scipy(m)


def write_id_dictionary(ids: Sequence[str], fh) -> None:
    for i, name in enumerate(ids):
        fh.write(f"{name}\t{i}\n")


def read_id_dictionary(fh) -> list[str]:
    pairs = []
    for lineno, line in enumerate(fh, start=1):
        line = line.rstrip("\r\n")
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ParseError(lineno, "expected external_id<TAB>dense_index")
        pairs.append((int(parts[1]), parts[0]))
    pairs.sort()
    if [i for i, _ in pairs] != list(range(len(pairs))):
        raise ParseError(0, "id dictionary indices are not a dense range")
    if len(Counter(name for _, name in pairs)) != len(pairs):
        raise ParseError(0, "id dictionary repeats an external id")
    return [name for _, name in pairs]
