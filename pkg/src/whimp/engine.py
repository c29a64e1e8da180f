"""Three-round WHIMP dataflow executed locally with modeled shuffle costs.

Round 1 sketches every column (partitioned by column). Round 2 builds one
alias sampler per row. Round 3 draws ``ceil(s * w_r)`` wedges per row,
scores each drawn pair from its sketches and emits pairs whose estimate
reaches ``sigma``. Emissions are merged through a keyed deduplication.

Partitions stand in for machines: any byte that would cross a partition
boundary on a cluster is charged to the :class:`CostReport`, even though
nothing is actually sent anywhere.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Iterable, NamedTuple

import numpy as np

from .errors import ConfigError, ConsistencyError, ValidationError
from .matrix import SparseColumnMatrix
from .simhash import DEFAULT_SKETCH_LEN, SketchSet, compute_sketches
from .wedges import ROUND3_STREAM, RowSampler, build_row_samplers, row_rng, wedge_weights

__all__ = [
    "WhimpConfig",
    "Candidate",
    "CostReport",
    "WhimpResult",
    "run_whimp",
    "draw_wedges",
    "generate_candidates_for_row",
    "deduplicate",
    "account_costs",
    "draws_for_weight",
    "count_generations",
    "RECORD_BYTES",
    "INDEX_BYTES",
]

DEFAULT_OVERSAMPLE = 150.0
INDEX_BYTES = 8
# (a, b, est): two longs and a double.
RECORD_BYTES = 24
# Norm plus column index shipped alongside every sketch.
SKETCH_OVERHEAD_BYTES = 16
# (row, column, value) records shipped in rounds 1 and 2.
ENTRY_BYTES = 16


@dataclass(frozen=True)
class WhimpConfig:
    tau: float
    sketch_len: int = DEFAULT_SKETCH_LEN
    oversample: float = DEFAULT_OVERSAMPLE
    filter_sigma: float | None = None
    seed: int = 0
    self_join: bool = True
    theory_c: float | None = None
    workers: int = 1

    @property
    def sigma(self) -> float:
        return self.tau if self.filter_sigma is None else self.filter_sigma

    def problems(self) -> list[str]:
        out = []
        if not 0.0 < self.tau < 1.0:
            out.append(f"tau must lie in (0, 1), got {self.tau}")
        if self.theory_c is not None and self.theory_c <= 0:
            out.append(f"theory_c must be > 0, got {self.theory_c}")
        if self.theory_c is None:
            if int(self.sketch_len) != self.sketch_len or self.sketch_len < 1:
                out.append(f"sketch_len must be an integer >= 1, got {self.sketch_len}")
            if not self.oversample > 0:
                out.append(f"oversample must be > 0, got {self.oversample}")
            if not 0.0 < self.sigma <= 1.0:
                out.append(f"filter_sigma must lie in (0, 1], got {self.sigma}")
        if not 0 <= int(self.seed) < 2**64:
            out.append(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.workers < 1:
            out.append(f"workers must be >= 1, got {self.workers}")
        return out

    def validate(self) -> None:
        problems = self.problems()
        if problems:
            raise ConfigError(problems)

    def resolved(self, n: int) -> "WhimpConfig":
        """Concrete parameters; theory mode derives them from ``c`` and ``n``."""
        self.validate()
        if self.theory_c is None:
            return self
        c, tau = self.theory_c, self.tau
        ln_n = math.log(max(n, 2))
        return replace(
            self,
            sketch_len=math.ceil(c * tau**-2 * ln_n),
            oversample=c * ln_n / tau,
            filter_sigma=tau / 2,
        )


class Candidate(NamedTuple):
    a: int
    b: int
    est: float


@dataclass(frozen=True)
class CostReport:
    sketch_shuffle_bytes: int = 0
    candidate_shuffle_bytes: int = 0
    output_bytes: int = 0
    round1_bytes: int = 0
    round2_bytes: int = 0
    wedges_drawn: int = 0
    candidates_emitted: int = 0
    candidates_after_dedup: int = 0

    @property
    def total_bytes(self) -> int:
        return (
            self.round1_bytes
            + self.round2_bytes
            + self.sketch_shuffle_bytes
            + self.candidate_shuffle_bytes
            + self.output_bytes
        )

    @property
    def candidate_output_ratio(self) -> float:
        if self.output_bytes == 0:
            return math.inf if self.candidate_shuffle_bytes else math.nan
        return self.candidate_shuffle_bytes / self.output_bytes

    def as_dict(self) -> dict:
        return asdict(self)

    def to_text(self) -> str:
        lines = [f"{k}={v}" for k, v in self.as_dict().items()]
        lines.append(f"total_bytes={self.total_bytes}")
        return "\n".join(lines) + "\n"

    def to_tsv(self) -> str:
        rows = ["key\tvalue"] + [f"{k}\t{v}" for k, v in self.as_dict().items()]
        rows.append(f"total_bytes\t{self.total_bytes}")
        return "\n".join(rows) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "CostReport":
        names = {f.name for f in fields(cls)}
        kv = {}
        for line in text.splitlines():
            if "=" in line:
                k, v = line.split("=", 1)
                if k in names:
                    kv[k] = int(v)
        return cls(**kv)


@dataclass
class WhimpResult:
    candidates: list[Candidate]
    cost: CostReport
    config: WhimpConfig
    timings: dict[str, float] = field(default_factory=dict)

    def __iter__(self):
        return iter((self.candidates, self.cost))

    def pairs(self) -> set[tuple[int, int]]:
        return {(c.a, c.b) for c in self.candidates}


def draws_for_weight(w: float, oversample: float) -> int:
    return math.ceil(oversample * w) if w > 0 else 0


def draw_wedges(sampler_a: RowSampler, sampler_b: RowSampler, k: int, rng: np.random.Generator):
    """``k`` wedge endpoints (a, b) from one row's samplers, A side first."""
    a = sampler_a.sample_many(rng, k)
    b = sampler_b.sample_many(rng, k)
    return a, b


def count_generations(
    A: SparseColumnMatrix, B: SparseColumnMatrix | None, cfg: WhimpConfig, pairs
) -> dict[tuple[int, int], int]:
    """How often each ordered pair in ``pairs`` is drawn in round 3, before filtering.

    Replays exactly the draws :func:`run_whimp` makes for ``cfg``.
    """
    B = A if B is None else B
    cfg = cfg.resolved(max(A.n_cols, B.n_cols))
    want = {(int(a), int(b)): 0 for a, b in pairs}
    w = wedge_weights(A, B)
    for r in np.flatnonzero(w > 0).tolist():
        sa = build_row_samplers(A, [r])[r]
        sb = sa if B is A else build_row_samplers(B, [r])[r]
        k = draws_for_weight(w[r], cfg.oversample)
        a, b = draw_wedges(sa, sb, k, row_rng(cfg.seed, ROUND3_STREAM, r))
        for key in want:
            want[key] += int(np.count_nonzero((a == key[0]) & (b == key[1])))
    return want


def _row_emissions(w_r, sampler_a, sampler_b, sk_a: SketchSet, sk_b: SketchSet, cfg: WhimpConfig, rng):
    """Arrays (a, b, est) emitted for one row of wedge weight ``w_r``, plus the draw count."""
    k = draws_for_weight(w_r, cfg.oversample)
    empty = (np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0))
    if k == 0:
        return (*empty, 0)
    a, b = draw_wedges(sampler_a, sampler_b, k, rng)
    if cfg.self_join:
        keep = a != b
        a, b = a[keep], b[keep]
        a, b = np.minimum(a, b), np.maximum(a, b)
    if len(a) == 0:
        return (*empty, k)
    # Score each distinct pair once; repeated draws reuse the estimate.
    n_b = np.int64(len(sk_b))
    code = a * n_b + b
    uniq, inverse = np.unique(code, return_inverse=True)
    delta = sk_a.hamming_many(uniq // n_b, uniq % n_b, sk_b)
    est_u = np.cos(np.pi * delta / cfg.sketch_len)
    est = est_u[inverse]
    keep = est >= cfg.sigma
    return a[keep], b[keep], est[keep], k


def generate_candidates_for_row(
    r, sampler_a, sampler_b, sk_a, sk_b, cfg: WhimpConfig, rng=None, w_r: float | None = None
) -> list[Candidate]:
    """Round-3 work for a single row, as a list of emitted candidates.

    ``w_r`` defaults to the product of the samplers' L1 norms.
    """
    if rng is None:
        rng = row_rng(cfg.seed, ROUND3_STREAM, r)
    if w_r is None:
        w_r = sampler_a.l1_norm * sampler_b.l1_norm
    a, b, est, _ = _row_emissions(w_r, sampler_a, sampler_b, sk_a, sk_b, cfg, rng)
    return [Candidate(x, y, e) for x, y, e in zip(a.tolist(), b.tolist(), est.tolist())]


def _dedup_arrays(a, b, est, n_b: int):
    if len(a) == 0:
        return a, b, est
    code = a.astype(np.int64) * np.int64(n_b) + b
    order = np.argsort(code, kind="stable")
    code, est = code[order], est[order]
    first = np.ones(len(code), dtype=bool)
    first[1:] = code[1:] != code[:-1]
    group_start = np.maximum.accumulate(np.where(first, np.arange(len(code)), 0))
    bad = est != est[group_start]
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise ConsistencyError(
            f"pair ({code[i] // n_b}, {code[i] % n_b}) emitted with estimates "
            f"{est[group_start[i]]!r} and {est[i]!r}"
        )
    code, est = code[first], est[first]
    return code // n_b, code % n_b, est


def deduplicate(candidates: Iterable[Candidate], self_join: bool = True) -> list[Candidate]:
    """Collapse repeated emissions of a pair into one entry, sorted by (a, b)."""
    seen: dict[tuple[int, int], float] = {}
    for a, b, est in candidates:
        key = (min(a, b), max(a, b)) if self_join else (a, b)
        prev = seen.setdefault(key, est)
        if prev != est:
            raise ConsistencyError(f"pair {key} emitted with estimates {prev!r} and {est!r}")
    return [Candidate(a, b, e) for (a, b), e in sorted(seen.items())]


def account_costs(
    A: SparseColumnMatrix,
    B: SparseColumnMatrix | None,
    sketch_len: int,
    self_join: bool,
    wedges_drawn: int,
    candidates_emitted: int,
    candidates_after_dedup: int,
) -> CostReport:
    """Bytes each round would move between partitions.

    Every column's sketch (ceil(ell/8) bytes) and its norm/index travel to
    each row the column has a non-zero in; in a self-join one copy serves
    both sides. Input entries move once in round 1 and once in round 2.
    """
    shipped = A.nnz if self_join or B is None else A.nnz + B.nnz
    per_sketch = (sketch_len + 7) // 8 + SKETCH_OVERHEAD_BYTES
    return CostReport(
        sketch_shuffle_bytes=shipped * per_sketch,
        candidate_shuffle_bytes=candidates_emitted * RECORD_BYTES,
        output_bytes=candidates_after_dedup * RECORD_BYTES,
        round1_bytes=shipped * ENTRY_BYTES,
        round2_bytes=shipped * ENTRY_BYTES,
        wedges_drawn=wedges_drawn,
        candidates_emitted=candidates_emitted,
        candidates_after_dedup=candidates_after_dedup,
    )


def _row_chunks(rows: np.ndarray, n_chunks: int) -> list[np.ndarray]:
    n_chunks = max(1, min(n_chunks, len(rows)))
    return [c for c in np.array_split(rows, n_chunks) if len(c)]


def run_whimp(A: SparseColumnMatrix, B: SparseColumnMatrix | None, cfg: WhimpConfig) -> WhimpResult:
    """Find column pairs whose cosine similarity is (likely) at least ``tau``.

    With ``cfg.self_join`` the second matrix must be omitted or be ``A``
    itself; pairs are then reported once as ``a < b``.
    """
    if cfg.self_join:
        if B is not None and B is not A:
            raise ValidationError("self_join requires B to be omitted or to be A itself")
        B = A
    elif B is None:
        B = A
    if A.n_rows != B.n_rows:
        raise ValidationError(f"row dimensions differ: {A.n_rows} vs {B.n_rows}")
    cfg = cfg.resolved(max(A.n_cols, B.n_cols))
    timings: dict[str, float] = {}

    executor = ThreadPoolExecutor(cfg.workers) if cfg.workers > 1 else None
    try:
        t0 = time.perf_counter()
        sk_a = compute_sketches(A, cfg.sketch_len, cfg.seed, executor)
        sk_b = sk_a if B is A else compute_sketches(B, cfg.sketch_len, cfg.seed, executor)
        timings["round1"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        w = wedge_weights(A, B)
        rows = np.flatnonzero(w > 0)
        chunks = _row_chunks(rows, 4 * cfg.workers)

        def round2(chunk):
            sa = build_row_samplers(A, chunk)
            sb = sa if B is A else build_row_samplers(B, chunk)
            return sa, sb

        built = list(executor.map(round2, chunks)) if executor else [round2(c) for c in chunks]
        timings["round2"] = time.perf_counter() - t0

        t0 = time.perf_counter()

        def round3(job):
            chunk, (sa, sb) = job
            out_a, out_b, out_e, drawn = [], [], [], 0
            for r in chunk.tolist():
                rng = row_rng(cfg.seed, ROUND3_STREAM, r)
                a, b, e, k = _row_emissions(w[r], sa[r], sb[r], sk_a, sk_b, cfg, rng)
                out_a.append(a)
                out_b.append(b)
                out_e.append(e)
                drawn += k
            return out_a, out_b, out_e, drawn

        jobs = list(zip(chunks, built))
        parts = list(executor.map(round3, jobs)) if executor else [round3(j) for j in jobs]
    finally:
        if executor is not None:
            executor.shutdown()

    all_a = [x for p in parts for x in p[0]]
    all_b = [x for p in parts for x in p[1]]
    all_e = [x for p in parts for x in p[2]]
    wedges_drawn = sum(p[3] for p in parts)
    cat = lambda xs, dt: np.concatenate(xs) if xs else np.zeros(0, dt)
    a, b, est = cat(all_a, np.int64), cat(all_b, np.int64), cat(all_e, np.float64)
    emitted = len(a)
    da, db, de = _dedup_arrays(a, b, est, B.n_cols)
    timings["round3"] = time.perf_counter() - t0

    cost = account_costs(A, B, cfg.sketch_len, cfg.self_join, wedges_drawn, emitted, len(da))
    candidates = [Candidate(x, y, e) for x, y, e in zip(da.tolist(), db.tolist(), de.tolist())]
    return WhimpResult(candidates, cost, cfg, timings)
