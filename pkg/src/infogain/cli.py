"""Command-line interface.

Subcommands::

    build-graph   label-similarity graph artifact from embeddings
    select        greedy subset selection against a graph artifact
    score         measure an already-chosen subset
    stats         summarize a pool or a graph artifact
    baseline      non-graph selection baselines
    bench         sweeps, performance suite, method comparison

Option values resolve in order: built-in default, then the JSON ``--config``
file, then the explicit flag.  Exit codes: 0 success, 2 invalid input or
configuration, 3 I/O failure, 4 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import FacilityLocationSelector, RandomSelector, TopQualitySelector
from .bench import perf_run, render_sweep, sweep_alpha, sweep_threshold
from .compare import compare_methods
from .errors import ConfigError, InternalInvariantError, ValidationError
from .graph import (
    align_pool,
    build_graph,
    file_sha256,
    load_graph,
    save_graph,
    with_propagation,
)
from .measure import accumulate_raw, dataset_information, info_function
from .pool import (
    load_embeddings,
    load_pool,
    normalize_labels,
    read_label_file,
    remap_embeddings,
    write_pool,
    write_remap,
)
from .selection import DEFAULT_EPSILON, InfoGainSelector, lazy_select, select
from .synthetic import SyntheticPoolSpec, generate_pool

logger = logging.getLogger("infogain")

DEFAULT_THRESHOLD = 0.9
DEFAULT_ALPHA = 1.0
DEFAULT_INFO_FN = "power:0.8"


class Settings:
    """Layered option lookup: explicit flag beats config file beats default."""

    def __init__(self, config_path: str | None):
        self.values: dict = {}
        self.echo: dict = {}
        if config_path:
            with open(config_path, "r", encoding="utf-8") as handle:
                try:
                    data = json.load(handle)
                except json.JSONDecodeError as exc:
                    raise ConfigError(f"{config_path}: invalid JSON ({exc})") from exc
            if not isinstance(data, dict):
                raise ConfigError(f"{config_path}: config must be a JSON object")
            self.values = data

    def get(self, name, flag_value, default):
        if flag_value is not None:
            value = flag_value
        elif name in self.values:
            value = self.values[name]
        else:
            value = default
        self.echo[name] = value
        return value


def _threads_default() -> int:
    raw = os.environ.get("INFOGAIN_THREADS")
    if raw is None or not raw.strip():
        return 1
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"INFOGAIN_THREADS must be an integer, got {raw!r}") from None


def _setup_logging(args) -> None:
    level = logging.WARNING + 10 * args.quiet - 10 * args.verbose
    logging.basicConfig(
        level=min(logging.ERROR, max(logging.DEBUG, level)),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


# ---------------------------------------------------------------------------
# Subcommand handlers
# ---------------------------------------------------------------------------


def cmd_build_graph(args) -> int:
    settings = Settings(args.config)
    threshold = settings.get("threshold", args.threshold, DEFAULT_THRESHOLD)
    alpha = settings.get("alpha", args.alpha, DEFAULT_ALPHA)
    min_freq = settings.get("min_freq", args.min_freq, 1)
    merge_sim = settings.get("merge_sim", args.merge_sim, None)
    threads = settings.get("threads", args.threads, _threads_default())
    normalizing = (isinstance(min_freq, int) and min_freq > 1) or merge_sim is not None

    remap = None
    raw_hash = None
    if args.pool:
        pool = load_pool(args.pool)
        vocab = pool.vocab
        raw_hash = vocab.sha256()
        embeddings = load_embeddings(args.embeddings, vocab=vocab, labels_path=args.labels)
        labels = vocab
        if normalizing:
            new_vocab, remap = normalize_labels(
                vocab, embeddings, min_freq=min_freq, merge_sim=merge_sim
            )
            embeddings = remap_embeddings(embeddings, remap)
            labels = new_vocab
            print(
                f"normalized vocabulary: {len(vocab)} -> {len(new_vocab)} labels "
                f"({remap.n_dropped} dropped or merged)"
            )
            if args.remap_out:
                write_remap(remap, args.remap_out)
                print(f"remap table: {args.remap_out}")
    else:
        if normalizing:
            raise ValidationError("--min-freq/--merge-sim need --pool for label frequencies")
        if args.remap_out:
            raise ValidationError("--remap-out needs --pool")
        labels_path = Path(args.labels) if args.labels else Path(str(args.embeddings) + ".labels")
        if not labels_path.exists():
            raise ValidationError(
                f"need label names: pass --pool or a label sidecar ({labels_path} not found)"
            )
        labels = read_label_file(labels_path)
        embeddings = load_embeddings(args.embeddings, labels_path=args.labels)

    graph = build_graph(
        embeddings,
        labels,
        threshold,
        threads=threads,
        source_sha256=file_sha256(args.embeddings),
        raw_vocab_sha256=raw_hash,
        remap=remap,
    )
    graph = with_propagation(graph, alpha)
    save_graph(graph, args.out)
    print(
        f"graph: {graph.n_labels} labels, {graph.n_edges} edges "
        f"(density {graph.density:.5f}), threshold {graph.threshold}, alpha {graph.alpha}"
    )
    print(f"wrote {args.out}")
    return 0


def cmd_select(args) -> int:
    settings = Settings(args.config)
    budget = settings.get("budget", args.budget, None)
    if budget is None:
        raise ValidationError("a budget is required (flag --budget or config key 'budget')")
    gain = settings.get("gain", args.gain, "gradient")
    orientation = settings.get("orientation", args.orientation, "adjoint")
    epsilon = settings.get("epsilon", args.epsilon, DEFAULT_EPSILON)
    lazy = settings.get("lazy", args.lazy, True)
    fn_spec = settings.get("info_fn", args.info_fn, DEFAULT_INFO_FN)
    force = bool(settings.get("force", args.force, False))

    fn = info_function(fn_spec)
    pool = load_pool(args.pool)
    graph = load_graph(args.graph)
    aligned = align_pool(graph, pool, force=force)
    if not aligned.points:
        raise ValidationError("no usable records after aligning the pool to the graph")

    echo = dict(settings.echo)
    echo.update(
        pool=str(args.pool),
        graph=str(args.graph),
        threshold=graph.threshold,
        alpha=graph.alpha,
    )
    driver = lazy_select if lazy else select
    result = driver(
        aligned.points,
        graph,
        budget,
        info_fn=fn,
        gain=gain,
        orientation=orientation,
        epsilon=epsilon,
        config_echo=echo,
    )
    count = write_pool(result.points, args.out)
    report = result.report
    print(
        f"selected {count} of {len(aligned.points)} records "
        f"(objective {report.objective:.6f}, coverage {report.coverage:.4f}, "
        f"{report.wall_time_s:.2f}s, {report.n_evaluations} evaluations)"
    )
    print(f"wrote {args.out}")
    if args.report:
        Path(args.report).write_text(report.to_text(), encoding="utf-8")
        print(f"report: {args.report}")
    return 0


def cmd_score(args) -> int:
    settings = Settings(args.config)
    fn = info_function(settings.get("info_fn", args.info_fn, DEFAULT_INFO_FN))
    force = bool(settings.get("force", args.force, False))
    pool = load_pool(args.pool)
    graph = load_graph(args.graph)
    aligned = align_pool(graph, pool, force=force)
    k = graph.n_labels
    objective = dataset_information(aligned.points, graph, fn)
    if aligned.points:
        touched = int(np.count_nonzero(accumulate_raw(aligned.points, k)))
    else:
        touched = 0
    print(f"records={len(aligned.points)}")
    print(f"objective={objective!r}")
    print(f"distinct_labels={touched}")
    print(f"coverage={touched / k:.6f}")
    return 0


def cmd_stats(args) -> int:
    if not args.pool and not args.graph:
        raise ValidationError("nothing to summarize: pass --pool and/or --graph")
    if args.selection and not args.pool:
        raise ValidationError("--selection needs --pool to compare against")
    if args.pool:
        pool = load_pool(args.pool)
        print(f"[pool] {args.pool}")
        print(f"records={len(pool.points)}")
        print(f"labels={len(pool.vocab)}")
        print(f"skipped_empty={pool.n_skipped_empty}")
        if pool.points:
            counts = np.array([len(p.labels) for p in pool.points])
            qualities = np.array([p.quality for p in pool.points])
            print(f"labels_per_record_mean={counts.mean():.4f}")
            print(f"labels_per_record_max={counts.max()}")
            print(f"quality_mean={qualities.mean():.4f}")
            print(f"quality_min={qualities.min():.4f}")
            print(f"quality_max={qualities.max():.4f}")
        order = np.argsort(-pool.vocab.frequency, kind="stable")[:10]
        for i in order:
            print(f"top_label {pool.vocab.frequency[i]} {pool.vocab.labels[i]}")
        if args.selection:
            chosen = load_pool(args.selection)
            pool_names = {label.casefold() for label in pool.vocab.labels}
            chosen_names = {label.casefold() for label in chosen.vocab.labels}
            shared = len(pool_names & chosen_names)
            coverage = shared / len(pool_names) if pool_names else 0.0
            print(f"[selection] {args.selection}")
            print(f"selection_records={len(chosen.points)}")
            print(f"selection_labels={len(chosen.vocab)}")
            print(f"label_coverage_vs_pool={coverage:.6f}")
    if args.graph:
        graph = load_graph(args.graph)
        print(f"[graph] {args.graph}")
        print(f"labels={graph.n_labels}")
        print(f"edges={graph.n_edges}")
        print(f"density={graph.density:.6f}")
        print(f"threshold={graph.threshold}")
        print(f"alpha={graph.alpha}")
        degrees = graph.degree_weights()
        print(f"isolated_labels={int(np.sum(degrees == 0))}")
        if graph.transition is not None:
            retention = graph.self_retention()
            print(f"self_retention_mean={retention.mean():.6f}")
            print(f"self_retention_min={retention.min():.6f}")
    return 0


def _point_matrix(path: str, n_expected: int) -> np.ndarray:
    vectors = load_embeddings(path).vectors
    if vectors.shape[0] != n_expected:
        raise ValidationError(
            f"{path}: {vectors.shape[0]} embedding rows for {n_expected} records; "
            "point embeddings must align row-for-row with the records being selected from"
        )
    return vectors


def cmd_baseline(args) -> int:
    settings = Settings(args.config)
    budget = settings.get("budget", args.budget, None)
    if budget is None:
        raise ValidationError("a budget is required (flag --budget or config key 'budget')")
    seed = settings.get("seed", args.seed, 42)
    quality_weight = settings.get("quality_weight", args.quality_weight, 0.5)
    force = bool(settings.get("force", args.force, False))

    pool = load_pool(args.pool)
    graph = None
    points = pool.points
    if args.graph:
        graph = load_graph(args.graph)
        points = align_pool(graph, pool, force=force).points
    if not points:
        raise ValidationError("no usable records to select from")

    if args.method == "random":
        estimator = RandomSelector(budget=budget, seed=seed)
    elif args.method == "top-quality":
        estimator = TopQualitySelector(budget=budget)
    else:
        if not args.embeddings:
            raise ValidationError("facility-location needs --embeddings with one row per record")
        vectors = _point_matrix(args.embeddings, len(points))
        estimator = FacilityLocationSelector(
            budget=budget, embeddings=vectors, quality_weight=quality_weight
        )
    estimator.fit(points)
    chosen = [points[i] for i in estimator.selected_indices_]

    print(f"method={args.method}")
    print(f"selected={len(chosen)}")
    print(f"mean_quality={float(np.mean([p.quality for p in chosen])):.4f}")
    print(f"wall_time_s={estimator.wall_time_s_:.3f}")
    if graph is not None:
        fn = info_function(settings.get("info_fn", args.info_fn, DEFAULT_INFO_FN))
        print(f"objective={dataset_information(chosen, graph, fn)!r}")
    if args.out:
        count = write_pool(chosen, args.out)
        print(f"wrote {count} records to {args.out}")
    return 0


def cmd_bench(args) -> int:
    settings = Settings(args.config)
    seed = settings.get("seed", args.seed, 42)
    threshold = settings.get("threshold", args.threshold, DEFAULT_THRESHOLD)
    alpha = settings.get("alpha", args.alpha, DEFAULT_ALPHA)

    if args.suite == "perf":
        report = perf_run(
            n_points=settings.get("n_points", args.n_points, 100_000),
            n_labels=settings.get("n_labels", args.n_labels, 1_000),
            budget=settings.get("budget", args.budget, 10_000),
            threshold=threshold,
            alpha=alpha,
            seed=seed,
            fl_budget=settings.get("fl_budget", args.fl_budget, 10),
            skip_fl=args.skip_fl,
        )
        print(report.to_text())
        return 0

    n_points = settings.get("n_points", args.n_points, 2_000)
    n_labels = settings.get("n_labels", args.n_labels, 120)
    budget = settings.get("budget", args.budget, 100)
    data = generate_pool(SyntheticPoolSpec(n_points=n_points, n_labels=n_labels, seed=seed))
    points = data.pool.points

    if args.suite == "sweep-alpha":
        rows = sweep_alpha(
            points, data.embeddings, data.pool.vocab.labels, budget, threshold=threshold
        )
        print(render_sweep(rows))
    elif args.suite == "sweep-threshold":
        rows = sweep_threshold(
            points, data.embeddings, data.pool.vocab.labels, budget, alpha=alpha
        )
        print(render_sweep(rows))
    else:  # compare
        graph = with_propagation(build_graph(data.embeddings, data.pool.vocab, threshold), alpha)
        methods: dict = {
            "info-gain": InfoGainSelector(budget=budget, graph=graph),
            "random": RandomSelector(budget=budget, seed=seed),
            "top-quality": TopQualitySelector(budget=budget),
        }
        if data.point_vectors is not None:
            methods["facility-loc"] = FacilityLocationSelector(
                budget=budget, embeddings=data.point_vectors
            )
        report = compare_methods(points, graph, budget, methods)
        print(report.to_text())
        if args.csv:
            report.write_csv(args.csv)
            print(f"csv: {args.csv}")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="FILE", help="JSON file of option defaults")
    common.add_argument(
        "-v", "--verbose", action="count", default=0, help="more logging (repeatable)"
    )
    common.add_argument("-q", "--quiet", action="count", default=0, help="less logging")
    common.add_argument(
        "--threads",
        type=int,
        default=None,
        metavar="N",
        help="worker threads for graph construction (env INFOGAIN_THREADS)",
    )
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="infogain",
        description="graph-aware information-maximizing subset selection",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    common = _common_flags()

    p = sub.add_parser(
        "build-graph", parents=[common], help="build a label-similarity graph artifact"
    )
    p.add_argument("--embeddings", required=True, metavar="FILE",
                   help="label embedding matrix ('K dim' header, one row per label)")
    p.add_argument("--labels", metavar="FILE",
                   help="label sidecar file (default: <embeddings>.labels)")
    p.add_argument("--pool", metavar="FILE",
                   help="JSONL pool supplying the vocabulary and label frequencies")
    p.add_argument("--threshold", type=float, default=None,
                   help=f"similarity floor for keeping an edge (default {DEFAULT_THRESHOLD})")
    p.add_argument("--alpha", type=float, default=None,
                   help=f"propagation spread weight (default {DEFAULT_ALPHA})")
    p.add_argument("--min-freq", type=int, default=None, metavar="N",
                   help="drop labels occurring fewer than N times (needs --pool)")
    p.add_argument("--merge-sim", type=float, default=None, metavar="S",
                   help="merge labels with cosine similarity >= S (needs --pool)")
    p.add_argument("--remap-out", metavar="FILE", help="write the normalization table (TSV)")
    p.add_argument("--out", required=True, metavar="FILE", help="artifact output path")
    p.set_defaults(func=cmd_build_graph)

    p = sub.add_parser("select", parents=[common], help="greedy selection against a graph")
    p.add_argument("--pool", required=True, metavar="FILE", help="JSONL pool to select from")
    p.add_argument("--graph", required=True, metavar="FILE", help="graph artifact")
    p.add_argument("--budget", type=int, default=None, metavar="N", help="number of records to keep")
    p.add_argument("--gain", choices=("gradient", "exact"), default=None,
                   help="candidate scoring rule (default gradient)")
    p.add_argument("--info-fn", default=None, metavar="SPEC",
                   help=f"concave information function, e.g. power:0.8, exp:1.0, linear "
                        f"(default {DEFAULT_INFO_FN})")
    p.add_argument("--orientation", choices=("adjoint", "forward"), default=None,
                   help="gradient propagation orientation (default adjoint)")
    p.add_argument("--epsilon", type=float, default=None,
                   help=f"derivative floor for singular slopes (default {DEFAULT_EPSILON})")
    p.add_argument("--lazy", action=argparse.BooleanOptionalAction, default=None,
                   help="stale-score re-evaluation order (default on; --no-lazy scans fully)")
    p.add_argument("--force", action="store_true", default=None,
                   help="resolve vocabulary mismatches by name instead of failing")
    p.add_argument("--out", required=True, metavar="FILE", help="selected records (JSONL)")
    p.add_argument("--report", metavar="FILE", help="write the full selection report")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("score", parents=[common], help="measure an already-chosen subset")
    p.add_argument("--pool", required=True, metavar="FILE", help="JSONL records to score")
    p.add_argument("--graph", required=True, metavar="FILE", help="graph artifact")
    p.add_argument("--info-fn", default=None, metavar="SPEC",
                   help=f"information function (default {DEFAULT_INFO_FN})")
    p.add_argument("--force", action="store_true", default=None,
                   help="resolve vocabulary mismatches by name instead of failing")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("stats", parents=[common], help="summarize a pool or graph artifact")
    p.add_argument("--pool", metavar="FILE", help="JSONL pool")
    p.add_argument("--selection", metavar="FILE",
                   help="selected records to compare against --pool (label coverage)")
    p.add_argument("--graph", metavar="FILE", help="graph artifact")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("baseline", parents=[common], help="non-graph selection baselines")
    p.add_argument("--pool", required=True, metavar="FILE", help="JSONL pool to select from")
    p.add_argument("--method", required=True,
                   choices=("random", "top-quality", "facility-location"))
    p.add_argument("--budget", type=int, default=None, metavar="N")
    p.add_argument("--seed", type=int, default=None, help="random baseline seed (default 42)")
    p.add_argument("--embeddings", metavar="FILE",
                   help="per-record embedding matrix (facility-location)")
    p.add_argument("--quality-weight", type=float, default=None,
                   help="facility-location quality/diversity mix in [0, 1] (default 0.5)")
    p.add_argument("--graph", metavar="FILE",
                   help="also score the pick with the graph measure")
    p.add_argument("--info-fn", default=None, metavar="SPEC",
                   help=f"information function for --graph scoring (default {DEFAULT_INFO_FN})")
    p.add_argument("--force", action="store_true", default=None,
                   help="resolve vocabulary mismatches by name instead of failing")
    p.add_argument("--out", metavar="FILE", help="write the selected records (JSONL)")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("bench", parents=[common], help="sweeps and performance runs")
    p.add_argument("--suite", required=True,
                   choices=("sweep-alpha", "sweep-threshold", "compare", "perf"))
    p.add_argument("--n-points", type=int, default=None, help="synthetic pool size")
    p.add_argument("--n-labels", type=int, default=None, help="synthetic vocabulary size")
    p.add_argument("--budget", type=int, default=None)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--fl-budget", type=int, default=None,
                   help="perf suite: pick count for the facility-location leg "
                        "(default 10; its greedy time grows with budget, so "
                        "the reported ratio is a floor)")
    p.add_argument("--skip-fl", action="store_true",
                   help="perf suite: skip the facility-location leg")
    p.add_argument("--csv", metavar="FILE", help="compare suite: also write rows as CSV")
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _setup_logging(args)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 3
    except InternalInvariantError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 4
    except Exception as exc:  # pragma: no cover - last-resort guard
        logger.exception("unexpected failure")
        print(f"internal error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
