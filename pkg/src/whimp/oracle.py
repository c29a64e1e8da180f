"""Ground truth, quality metrics and closed-form baseline cost estimates.

Ground truth is exact but sample-based: columns are drawn uniformly inside
logarithmic degree buckets and their full similarity lists are computed by
sparse products. Metrics compare an output pair set against that truth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Sequence, TextIO

import numpy as np

from .errors import DomainError, ParseError, ValidationError
from .matrix import SparseColumnMatrix

__all__ = [
    "GroundTruth",
    "ColumnScore",
    "EvalReport",
    "stratified_sample",
    "exact_products",
    "precision_recall",
    "pr_curve",
    "default_sigma_grid",
    "disco_shuffle_estimate",
    "lsh_storage_estimate",
    "TERABYTE",
]

TERABYTE = 2**40
ORACLE_STREAM = 7


def _bucket(degree: int) -> int:
    # floor(log10) without float rounding at exact powers of ten
    return len(str(int(degree))) - 1


def stratified_sample(matrix: SparseColumnMatrix, per_bucket: int, seed: int = 0) -> np.ndarray:
    """Up to ``per_bucket`` columns from each degree bucket [10^i, 10^(i+1)).

    Draws are uniform without replacement; the result is sorted.
    """
    if int(per_bucket) != per_bucket or per_bucket < 1:
        raise DomainError(f"per_bucket must be a positive integer, got {per_bucket}")
    degrees = matrix.column_nnz
    cols = np.flatnonzero(degrees > 0)
    if len(cols) == 0:
        raise ValidationError("every column is empty; nothing to sample")
    buckets: dict[int, list[int]] = {}
    for c, d in zip(cols.tolist(), degrees[cols].tolist()):
        buckets.setdefault(_bucket(d), []).append(c)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed) & (2**64 - 1), ORACLE_STREAM]))
    picked = []
    for i in sorted(buckets):
        members = np.asarray(buckets[i])
        take = min(int(per_bucket), len(members))
        picked.append(rng.choice(members, size=take, replace=False))
    return np.sort(np.concatenate(picked))


def _key(a, b, self_join: bool):
    if self_join and b < a:
        return (b, a)
    return (a, b)


@dataclass
class GroundTruth:
    """Exact dots >= ``tau_min`` between every column and each sampled column.

    Each record is ``(a, b, dot)`` with ``b`` in the sample.
    """

    sample: list
    tau_min: float
    a: list
    b: list
    dot: list
    self_join: bool = True

    def __len__(self):
        return len(self.a)

    def relabel(self, names: Sequence[str]) -> "GroundTruth":
        return GroundTruth(
            [names[s] for s in self.sample],
            self.tau_min,
            [names[x] for x in self.a],
            [names[x] for x in self.b],
            list(self.dot),
            self.self_join,
        )

    def write(self, fh: TextIO) -> None:
        fh.write(f"# tau_min={self.tau_min!r}\n")
        fh.write(f"# self_join={int(self.self_join)}\n")
        for s in self.sample:
            fh.write(f"#sample\t{s}\n")
        order = sorted(range(len(self.a)), key=lambda i: (str(self.b[i]), str(self.a[i])))
        for i in order:
            fh.write(f"{self.a[i]}\t{self.b[i]}\t{float(self.dot[i])!r}\n")

    @classmethod
    def read(cls, fh: TextIO) -> "GroundTruth":
        tau_min, self_join = None, True
        sample, a, b, dot = [], [], [], []
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line:
                continue
            if line.startswith("#sample\t"):
                sample.append(line.split("\t", 1)[1])
            elif line.startswith("#"):
                body = line.lstrip("# ")
                if body.startswith("tau_min="):
                    tau_min = float(body.split("=", 1)[1])
                elif body.startswith("self_join="):
                    self_join = body.split("=", 1)[1].strip() == "1"
            else:
                parts = line.split("\t")
                if len(parts) != 3:
                    raise ParseError(lineno, "expected a<TAB>b<TAB>exact_dot")
                a.append(parts[0])
                b.append(parts[1])
                dot.append(float(parts[2]))
        if tau_min is None:
            raise ParseError(1, "ground truth file lacks a '# tau_min=' header")
        return cls(sample, tau_min, a, b, dot, self_join)


def exact_products(
    A: SparseColumnMatrix,
    B: SparseColumnMatrix | None,
    sample,
    tau_min: float,
) -> GroundTruth:
    """Exact ``A[:, a] . B[:, b]`` for every ``a`` and each sampled ``b``.

    ``B=None`` means a self-join on ``A``; the trivial ``a == b`` pairs are
    left out in that case.
    """
    if not tau_min > 0:
        raise DomainError(f"tau_min must be > 0, got {tau_min}")
    self_join = B is None
    B = A if B is None else B
    if A.n_rows != B.n_rows:
        raise ValidationError(f"row dimensions differ: {A.n_rows} vs {B.n_rows}")
    sample = [int(s) for s in np.asarray(sample).tolist()]
    thin = B.to_scipy()[:, sample]
    prod = (A.to_scipy().T @ thin).tocsc()
    prod.sort_indices()
    out_a, out_b, out_dot = [], [], []
    for j, b in enumerate(sample):
        lo, hi = prod.indptr[j], prod.indptr[j + 1]
        rows, vals = prod.indices[lo:hi], prod.data[lo:hi]
        keep = vals >= tau_min
        if self_join:
            keep &= rows != b
        out_a.extend(rows[keep].tolist())
        out_b.extend([b] * int(keep.sum()))
        out_dot.extend(vals[keep].tolist())
    return GroundTruth(sample, float(tau_min), out_a, out_b, out_dot, self_join)


@dataclass(frozen=True)
class ColumnScore:
    column: Hashable
    precision: float
    recall: float
    empty_output: bool = False
    empty_truth: bool = False

    @property
    def min_pr(self) -> float:
        return min(self.precision, self.recall)


@dataclass
class EvalReport:
    tau: float
    precision: float
    recall: float
    n_output: int
    n_truth: int
    n_correct: int
    empty_output: bool
    per_column: list[ColumnScore] = field(default_factory=list)
    curve: list[tuple[float, float, float]] = field(default_factory=list)

    def summary(self) -> str:
        flag = " (empty output)" if self.empty_output else ""
        return (
            f"tau={self.tau} precision={self.precision:.4f}{flag} recall={self.recall:.4f} "
            f"output={self.n_output} truth={self.n_truth} correct={self.n_correct}"
        )

    def write_curve_csv(self, fh: TextIO) -> None:
        fh.write("sigma,precision,recall\n")
        for s, p, r in self.curve:
            fh.write(f"{s!r},{p!r},{r!r}\n")

    def write_histogram_csv(self, fh: TextIO) -> None:
        fh.write("column,precision,recall,min_pr\n")
        for c in self.per_column:
            fh.write(f"{c.column},{c.precision!r},{c.recall!r},{c.min_pr!r}\n")

    def min_pr_fraction_at_least(self, level: float) -> float:
        """Fraction of scored columns whose min(P, R) reaches ``level``."""
        if not self.per_column:
            return math.nan
        return sum(c.min_pr >= level for c in self.per_column) / len(self.per_column)


def _triples(output) -> list[tuple]:
    out = []
    for item in output:
        if len(item) == 3:
            out.append((item[0], item[1], float(item[2])))
        else:
            out.append((item[0], item[1], math.inf))
    return out


def _ratio(num: int, den: int) -> float:
    # Empty denominators score 1.0; callers flag them.
    return num / den if den else 1.0


def _prepare(output, truth: GroundTruth, tau: float):
    if tau < truth.tau_min:
        raise DomainError(f"tau={tau} is below the ground truth's tau_min={truth.tau_min}")
    sj = truth.self_join
    sampled = set(truth.sample)
    hot = {}
    for a, b, d in zip(truth.a, truth.b, truth.dot):
        if d >= tau:
            hot.setdefault(b, set()).add(a)
    H = {_key(a, b, sj) for b, members in hot.items() for a in members}
    rows = []
    for a, b, est in _triples(output):
        touches = b in sampled or (sj and a in sampled)
        if touches:
            rows.append((_key(a, b, sj), a, b, est))
    return sampled, hot, H, rows


def _global(H: set, keys: set) -> tuple[float, float, int]:
    hit = len(H & keys)
    return _ratio(hit, len(keys)), _ratio(hit, len(H)), hit


def precision_recall(output, truth: GroundTruth, tau: float, sigma_grid=None) -> EvalReport:
    """Precision/recall of ``output`` against ``truth`` at threshold ``tau``.

    Only output pairs touching a sampled column are scored. With no output
    the precision is reported as 1.0 and ``empty_output`` is set. Per-column
    scores skip columns with neither true nor output neighbours. Passing
    ``sigma_grid`` also fills ``curve``.
    """
    sampled, hot, H, rows = _prepare(output, truth, tau)
    keys = {k for k, *_ in rows}
    precision, recall, hit = _global(H, keys)

    found: dict = {}
    for _, a, b, _ in rows:
        if b in sampled:
            found.setdefault(b, set()).add(a)
        if truth.self_join and a in sampled:
            found.setdefault(a, set()).add(b)
    per_column = []
    for col in truth.sample:
        t = hot.get(col, set())
        o = found.get(col, set())
        if not t and not o:
            continue
        both = len(t & o)
        per_column.append(ColumnScore(col, _ratio(both, len(o)), _ratio(both, len(t)), not o, not t))

    report = EvalReport(tau, precision, recall, len(keys), len(H), hit, not keys, per_column)
    if sigma_grid is not None:
        report.curve = pr_curve(output, truth, tau, sigma_grid)
    return report


def default_sigma_grid(tau: float, points: int = 24) -> np.ndarray:
    return np.linspace(tau / 2, 3 * tau / 2, points)


def pr_curve(output, truth: GroundTruth, tau: float, sigma_grid=None) -> list[tuple[float, float, float]]:
    """(sigma, precision, recall) for the output filtered at each sigma."""
    grid = default_sigma_grid(tau) if sigma_grid is None else np.sort(np.asarray(sigma_grid, dtype=float))
    _, _, H, rows = _prepare(output, truth, tau)
    curve = []
    for sigma in grid.tolist():
        keys = {k for k, _, _, est in rows if est >= sigma}
        p, r, _ = _global(H, keys)
        curve.append((sigma, p, r))
    return curve


def disco_shuffle_estimate(
    atb_l1: float,
    tau: float,
    bytes_per_wedge: int = 16,
    wedges_per_unit: float = 50.0,
) -> float:
    """Bytes plain wedge sampling shuffles: every wedge is emitted unfiltered.

    ``wedges_per_unit / tau`` wedges per unit of ``||A^T B||_1``, each
    ``bytes_per_wedge`` bytes.
    """
    if atb_l1 < 0 or not tau > 0 or bytes_per_wedge <= 0 or wedges_per_unit <= 0:
        raise DomainError("DISCO estimate needs atb_l1 >= 0 and positive tau, bytes and rate")
    return bytes_per_wedge * wedges_per_unit * atb_l1 / tau


def lsh_storage_estimate(n: float, tau: float) -> tuple[float, float]:
    """Exponent ``1 + ln P1 / ln P2`` and storage ``n**exponent`` in bytes.

    P1 is the single-bit SimHash collision probability at cosine ``tau``,
    P2 = 1/2 the one at cosine 0.
    """
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    if not 0.0 < tau < 1.0:
        raise DomainError(f"tau must lie in (0, 1), got {tau}")
    p1 = 1.0 - math.acos(tau) / math.pi
    exponent = 1.0 + math.log(p1) / math.log(0.5)
    return exponent, float(n) ** exponent
