"""``whimp`` command line: clean, run, oracle, eval, estimate.

Commands talk to each other only through files. Exit codes: 0 success,
2 validation, 3 I/O, 4 internal consistency.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
import time
from pathlib import Path

from . import __version__
from .engine import WhimpConfig, run_whimp
from .errors import ConfigError, WhimpError
from .formats import atomic_write, read_pairs, sha256_file, write_pairs
from .matrix import (
    DEFAULT_DEGREE_CAP,
    ORIENTATIONS,
    build_column_matrix,
    clean_degree_cap,
    ingest_edge_list,
    write_id_dictionary,
)
from .oracle import (
    TERABYTE,
    GroundTruth,
    default_sigma_grid,
    disco_shuffle_estimate,
    exact_products,
    lsh_storage_estimate,
    precision_recall,
    stratified_sample,
)
from .simhash import compute_sketches
from .wedges import write_wedge_weights

log = logging.getLogger("whimp")

EXIT_OK, EXIT_VALIDATION, EXIT_IO, EXIT_INTERNAL = 0, 2, 3, 4


def _env_int(name: str, default: int) -> int:
    raw = os.environ.get(name)
    if raw is None or raw == "":
        return default
    try:
        return int(raw)
    except ValueError:
        raise ConfigError([f"environment variable {name}={raw!r} is not an integer"]) from None


def _load_graph(path, fmt: str, cap: int | None):
    with open(path, encoding="utf-8") as fh:
        g = ingest_edge_list(fh, fmt)
    log.info("read %s: %d vertices, %d edges, %d zero-weight lines dropped",
             path, g.n_vertices, g.n_edges, g.dropped_zero)
    if cap is not None:
        before = g.n_edges
        g = clean_degree_cap(g, cap)
        log.info("degree cap %d removed %d edges", cap, before - g.n_edges)
    return g


def cmd_clean(args) -> int:
    cap = args.cap if args.cap is not None else _env_int("WHIMP_DEGREE_CAP", DEFAULT_DEGREE_CAP)
    g = _load_graph(args.edges, args.format, None)
    kept = clean_degree_cap(g, cap)
    over = {g.ids[v] for v in (g.out_degrees() > cap).nonzero()[0].tolist()}
    removed = 0
    # Second pass copies surviving lines verbatim so no-op runs are byte-identical.
    with open(args.edges, encoding="utf-8", newline="") as src, atomic_write(args.out) as dst:
        for line in src:
            body = line.rstrip("\r\n")
            if body and not body.startswith("#"):
                if body.split("\t", 1)[0].strip() in over:
                    fields = body.split("\t")
                    if len(fields) < 3 or float(fields[2]) != 0.0:
                        removed += 1
                    continue
            dst.write(line)
    print(f"cap={cap} vertices_over_cap={len(over)} edges_removed={removed} edges_kept={kept.n_edges}")
    return EXIT_OK


def _config_from_args(args) -> WhimpConfig:
    workers = args.workers if args.workers is not None else _env_int("WHIMP_WORKERS", 1)
    cfg = WhimpConfig(
        tau=args.tau,
        sketch_len=args.ell,
        oversample=args.s,
        filter_sigma=args.sigma,
        seed=args.seed,
        self_join=args.self_join,
        theory_c=args.theory_c,
        workers=workers,
    )
    cfg.validate()
    return cfg


def cmd_run(args) -> int:
    cfg = _config_from_args(args)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    g = _load_graph(args.edges, args.format, args.cap)
    A = build_column_matrix(g, args.orientation)
    t_ingest = time.perf_counter() - t0
    result = run_whimp(A, None, cfg)
    cost = result.cost

    files = {
        "pairs": out / "pairs.tsv",
        "ids": out / "ids.tsv",
        "cost_text": out / "cost.txt",
        "cost_tsv": out / "cost.tsv",
    }
    with atomic_write(files["pairs"]) as fh:
        write_pairs(fh, result.candidates, g.ids)
    with atomic_write(files["ids"]) as fh:
        write_id_dictionary(g.ids, fh)
    with atomic_write(files["cost_text"]) as fh:
        fh.write(cost.to_text())
    with atomic_write(files["cost_tsv"]) as fh:
        fh.write(cost.to_tsv())
    if args.dump_weights:
        files["wedge_weights"] = out / "wedge_weights.tsv"
        with atomic_write(files["wedge_weights"]) as fh:
            write_wedge_weights(fh, A)
    if args.dump_sketches:
        files["sketches"] = out / "sketches.tsv"
        with atomic_write(files["sketches"]) as fh:
            compute_sketches(A, result.config.sketch_len, cfg.seed).write(fh)

    manifest = {
        "command": "run",
        "version": __version__,
        "requested": dataclasses.asdict(cfg),
        "config": dataclasses.asdict(result.config),
        "seed": cfg.seed,
        "orientation": args.orientation,
        "degree_cap": args.cap,
        "inputs": {str(args.edges): sha256_file(args.edges)},
        "matrix": {"n_rows": A.n_rows, "n_cols": A.n_cols, "nnz": A.nnz},
        "timings": {"ingest": t_ingest, **result.timings},
        "cost": {**cost.as_dict(), "total_bytes": cost.total_bytes},
        "outputs": {name: sha256_file(p) for name, p in files.items()},
    }
    with atomic_write(out / "manifest.json") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    sys.stdout.write(cost.to_text())
    print(f"pairs={len(result.candidates)} out_dir={out}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    g = _load_graph(args.edges, args.format, args.cap)
    A = build_column_matrix(g, args.orientation)
    sample = stratified_sample(A, args.per_bucket, args.seed)
    truth = exact_products(A, None, sample, args.tau_min).relabel(g.ids)
    with atomic_write(args.out) as fh:
        truth.write(fh)
    print(f"sampled={len(sample)} pairs={len(truth)} tau_min={args.tau_min}")
    return EXIT_OK


def cmd_eval(args) -> int:
    with open(args.output, encoding="utf-8") as fh:
        output = read_pairs(fh)
    with open(args.truth, encoding="utf-8") as fh:
        truth = GroundTruth.read(fh)
    grid = default_sigma_grid(args.tau, args.grid_points) if args.curve else None
    report = precision_recall(output, truth, args.tau, sigma_grid=grid)
    if args.curve:
        with atomic_write(args.curve) as fh:
            report.write_curve_csv(fh)
    if args.histogram:
        with atomic_write(args.histogram) as fh:
            report.write_histogram_csv(fh)
    print(report.summary())
    if report.per_column:
        print(f"columns_scored={len(report.per_column)} "
              f"frac_min_pr_ge_0.8={report.min_pr_fraction_at_least(0.8):.4f}")
    return EXIT_OK


def cmd_estimate(args) -> int:
    problems = []
    if args.model == "disco" and args.atb_l1 is None:
        problems.append("--atb-l1 is required for --model disco")
    if args.model == "lsh" and args.n is None:
        problems.append("--n is required for --model lsh")
    if problems:
        raise ConfigError(problems)
    if args.model == "disco":
        b = disco_shuffle_estimate(args.atb_l1, args.tau, args.bytes_per_wedge, args.wedges_per_unit)
        print(f"model=disco bytes={b!r} tb={b / TERABYTE:.1f}")
    else:
        exponent, b = lsh_storage_estimate(args.n, args.tau)
        print(f"model=lsh exponent={exponent:.4f} bytes={b!r} tb={b / TERABYTE:.1f}")
    return EXIT_OK


def _add_graph_args(p, with_cap: bool = True):
    p.add_argument("edges", help="TSV edge list: src<TAB>dst[<TAB>weight]")
    p.add_argument("--format", default="auto", choices=["auto", "pair", "weighted_triple"])
    p.add_argument("--orientation", default="in_neighborhood", choices=ORIENTATIONS)
    if with_cap:
        p.add_argument("--cap", type=int, default=None,
                       help="apply the out-degree cap before building the matrix (default: none)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="whimp", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("clean", help="drop every out-edge of vertices above the out-degree cap")
    p.add_argument("edges")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--cap", type=int, default=None, help="default $WHIMP_DEGREE_CAP or 10000")
    p.add_argument("--format", default="auto", choices=["auto", "pair", "weighted_triple"])
    p.set_defaults(func=cmd_clean)

    p = sub.add_parser("run", help="find all column pairs with cosine >= tau")
    _add_graph_args(p)
    p.add_argument("-o", "--out-dir", required=True)
    p.add_argument("--tau", type=float, required=True)
    p.add_argument("--ell", type=int, default=WhimpConfig.sketch_len, help="sketch length in bits")
    p.add_argument("--s", type=float, default=WhimpConfig.oversample, help="oversampling factor")
    p.add_argument("--sigma", type=float, default=None, help="filter value (default: tau)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--self-join", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--theory-c", type=float, default=None,
                   help="derive ell, s and sigma from this constant")
    p.add_argument("--workers", type=int, default=None, help="default $WHIMP_WORKERS or 1")
    p.add_argument("--dump-weights", action="store_true", help="also write wedge_weights.tsv")
    p.add_argument("--dump-sketches", action="store_true", help="also write sketches.tsv")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("oracle", help="exact similarities for a stratified column sample")
    _add_graph_args(p)
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--per-bucket", type=int, default=1000)
    p.add_argument("--tau-min", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("eval", help="precision/recall of a run against ground truth")
    p.add_argument("output", help="pairs.tsv from 'whimp run'")
    p.add_argument("truth", help="ground truth from 'whimp oracle'")
    p.add_argument("--tau", type=float, required=True)
    p.add_argument("--curve", help="write sigma,precision,recall CSV here")
    p.add_argument("--histogram", help="write column,precision,recall,min_pr CSV here")
    p.add_argument("--grid-points", type=int, default=24)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("estimate", help="closed-form shuffle/storage estimates for baselines")
    p.add_argument("--model", required=True, choices=["disco", "lsh"])
    p.add_argument("--tau", type=float, required=True)
    p.add_argument("--atb-l1", type=float, default=None, help="||A^T B||_1 (disco)")
    p.add_argument("--n", type=float, default=None, help="number of vectors (lsh)")
    p.add_argument("--bytes-per-wedge", type=int, default=16)
    p.add_argument("--wedges-per-unit", type=float, default=50.0)
    p.set_defaults(func=cmd_estimate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except WhimpError as e:
        print(f"whimp: error: {e}", file=sys.stderr)
        return e.exit_code
    except OSError as e:
        print(f"whimp: I/O error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
