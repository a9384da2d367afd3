"""Weighted label graph and its propagation (transition) matrix.

Edges connect labels whose embedding cosine similarity reaches a threshold;
everything below the threshold is pruned to exactly zero.  Each label also
has a constant self-weight of 1.  The propagation matrix ``A`` spreads a
label's information mass to its neighbours:

    a[p][q] = alpha * w[p][q] / (1 + alpha * sum_k w[p][k])   for an edge p-q
    a[p][p] = 1            / (1 + alpha * sum_k w[p][k])

so every row sums to exactly one and propagation conserves total mass.
``alpha = 0`` yields the identity matrix (no spreading); raising ``alpha``
strictly lowers every self-retention ``a[p][p]`` on rows that have at least
one edge.

Graph artifacts are plain text, versioned, and deterministic: rebuilding
from identical inputs produces byte-identical files.  The artifact records
the content hash of the embedding inputs and of the raw pool vocabulary it
was built against, so ``select`` can refuse a pool/graph mismatch.
"""

from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import sparse

from ._validation import check_alpha, check_threshold
from .errors import GraphArtifactError, InternalInvariantError, ValidationError
from .pool import DROPPED, DataPoint, LabelEmbeddings, LabelRemap, LabelVocabulary, Pool

logger = logging.getLogger(__name__)

ARTIFACT_FORMAT_VERSION = 1
ROW_SUM_TOLERANCE = 1e-9
_BLOCK_ROWS = 1024


@dataclass(slots=True)
class LabelGraph:
    """A thresholded similarity graph over K labels.

    ``weights`` is the symmetric CSR edge matrix (zero diagonal, entries in
    ``[threshold, 1]``); ``transition`` is the row-stochastic propagation
    matrix, present once an ``alpha`` has been applied.
    """

    labels: tuple[str, ...]
    threshold: float
    weights: sparse.csr_matrix
    alpha: float | None = None
    transition: sparse.csr_matrix | None = None
    source_sha256: str | None = None
    raw_vocab_sha256: str | None = None
    remap_pairs: tuple[tuple[str, int], ...] | None = None
    _adjoint: sparse.csr_matrix | None = field(default=None, repr=False)

    @property
    def n_labels(self) -> int:
        return len(self.labels)

    @property
    def n_edges(self) -> int:
        """Number of undirected edges."""
        return self.weights.nnz // 2

    @property
    def density(self) -> float:
        """Stored entries over possible off-diagonal entries."""
        k = self.n_labels
        return self.weights.nnz / max(1, k * (k - 1))

    @property
    def transition_adjoint(self) -> sparse.csr_matrix:
        """Transpose of the transition matrix, cached in CSR form."""
        if self.transition is None:
            raise ValidationError("graph has no propagation matrix; apply an alpha first")
        if self._adjoint is None:
            self._adjoint = self.transition.T.tocsr()
        return self._adjoint

    def vocab_sha256(self) -> str:
        return hashlib.sha256("\n".join(self.labels).encode("utf-8")).hexdigest()

    def degree_weights(self) -> np.ndarray:
        """Per-label sum of incident edge weights."""
        return np.asarray(self.weights.sum(axis=1)).ravel()

    def self_retention(self) -> np.ndarray:
        """Diagonal of the transition matrix."""
        if self.transition is None:
            raise ValidationError("graph has no propagation matrix; apply an alpha first")
        return self.transition.diagonal()


def cosine_similarity(embeddings: LabelEmbeddings, p: int, q: int) -> float:
    """Cosine similarity of two label embeddings, clipped into [-1, 1]."""
    unit = embeddings.unit_vectors
    k = embeddings.n_labels
    if not (0 <= p < k and 0 <= q < k):
        raise ValidationError(f"label indices ({p}, {q}) outside [0, {k})")
    return float(np.clip(unit[p] @ unit[q], -1.0, 1.0))


def _similarity_block(unit: np.ndarray, start: int, stop: int, threshold: float):
    """Upper-triangle thresholded entries for rows [start, stop)."""
    block = unit[start:stop] @ unit.T
    np.clip(block, -1.0, 1.0, out=block)
    cols = np.arange(unit.shape[0])
    keep = block >= threshold
    keep &= cols[None, :] > (start + np.arange(stop - start))[:, None]
    r, c = np.nonzero(keep)
    return r + start, c, block[r, c]


def build_graph(
    embeddings: LabelEmbeddings,
    labels: Sequence[str] | LabelVocabulary,
    threshold: float,
    *,
    threads: int = 1,
    source_sha256: str | None = None,
    raw_vocab_sha256: str | None = None,
    remap: LabelRemap | None = None,
) -> LabelGraph:
    """Build the thresholded similarity graph (no propagation yet).

    All-pairs cosine similarity is computed in fixed row blocks, so the
    result is deterministic regardless of ``threads``; blocks are merged in
    row order.  Pairs strictly below ``threshold`` are not stored at all.
    """
    threshold = check_threshold(threshold)
    label_tuple = tuple(labels.labels if isinstance(labels, LabelVocabulary) else labels)
    k = embeddings.n_labels
    if len(label_tuple) != k:
        raise ValidationError(
            f"{len(label_tuple)} labels for {k} embedding rows"
        )
    if not isinstance(threads, int) or isinstance(threads, bool) or threads < 1:
        raise ValidationError(f"threads must be a positive integer, got {threads!r}")

    unit = embeddings.unit_vectors
    starts = list(range(0, k, _BLOCK_ROWS))
    if threads == 1 or len(starts) == 1:
        parts = [
            _similarity_block(unit, s, min(s + _BLOCK_ROWS, k), threshold) for s in starts
        ]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = {
                s: pool.submit(_similarity_block, unit, s, min(s + _BLOCK_ROWS, k), threshold)
                for s in starts
            }
            parts = [futures[s].result() for s in starts]

    rows = np.concatenate([p[0] for p in parts]) if parts else np.empty(0, dtype=np.intp)
    cols = np.concatenate([p[1] for p in parts]) if parts else np.empty(0, dtype=np.intp)
    vals = np.concatenate([p[2] for p in parts]) if parts else np.empty(0, dtype=np.float64)

    weights = sparse.coo_matrix(
        (
            np.concatenate([vals, vals]),
            (np.concatenate([rows, cols]), np.concatenate([cols, rows])),
        ),
        shape=(k, k),
    ).tocsr()
    graph = LabelGraph(
        labels=label_tuple,
        threshold=threshold,
        weights=weights,
        source_sha256=source_sha256,
        raw_vocab_sha256=raw_vocab_sha256,
        remap_pairs=tuple((lbl, idx) for lbl, idx in remap.pairs()) if remap is not None else None,
    )
    logger.info(
        "built graph: %d labels, %d edges (density %.4f%%) at threshold %g",
        k,
        graph.n_edges,
        100.0 * graph.density,
        threshold,
    )
    return graph


def with_propagation(graph: LabelGraph, alpha: float) -> LabelGraph:
    """Return a copy of ``graph`` with the propagation matrix for ``alpha``.

    ``alpha = 0`` produces the identity matrix exactly.
    """
    alpha = check_alpha(alpha)
    k = graph.n_labels
    if alpha == 0.0:
        transition = sparse.identity(k, dtype=np.float64, format="csr")
    else:
        degree = graph.degree_weights()
        denom = 1.0 + alpha * degree
        scaled = graph.weights.multiply((alpha / denom)[:, None]).tocsr()
        transition = (scaled + sparse.diags(1.0 / denom)).tocsr()
    transition.sum_duplicates()
    transition.sort_indices()
    _check_row_stochastic(transition)
    return replace(graph, alpha=alpha, transition=transition, _adjoint=None)


def _check_row_stochastic(transition: sparse.csr_matrix) -> None:
    row_sums = np.asarray(transition.sum(axis=1)).ravel()
    worst = float(np.max(np.abs(row_sums - 1.0))) if row_sums.size else 0.0
    if worst > ROW_SUM_TOLERANCE:
        raise InternalInvariantError(
            f"propagation rows must sum to 1 within {ROW_SUM_TOLERANCE}, worst error {worst:g}"
        )


# ---------------------------------------------------------------------------
# Artifact serialization
# ---------------------------------------------------------------------------


def save_graph(graph: LabelGraph, path: str | Path) -> None:
    """Write a graph artifact (text, versioned, byte-deterministic)."""
    path = Path(path)
    upper = sparse.triu(graph.weights, k=1).tocsr().tocoo()
    remap_pairs = graph.remap_pairs or ()
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(f"infogain-graph {ARTIFACT_FORMAT_VERSION}\n")
        handle.write(f"labels {graph.n_labels}\n")
        handle.write(f"threshold {graph.threshold!r}\n")
        handle.write(f"alpha {'unset' if graph.alpha is None else repr(graph.alpha)}\n")
        handle.write(f"source_sha256 {graph.source_sha256 or '-'}\n")
        handle.write(f"raw_vocab_sha256 {graph.raw_vocab_sha256 or '-'}\n")
        handle.write(f"vocab_sha256 {graph.vocab_sha256()}\n")
        handle.write(f"remap {len(remap_pairs)}\n")
        handle.write(f"edges {upper.nnz}\n")
        for label in graph.labels:
            handle.write(f"L {json.dumps(label, ensure_ascii=False)}\n")
        for label, new_idx in remap_pairs:
            handle.write(f"R {json.dumps(label, ensure_ascii=False)} {new_idx}\n")
        for p, q, w in zip(upper.row, upper.col, upper.data):
            handle.write(f"E {p} {q} {float(w)!r}\n")
    logger.info("wrote graph artifact %s (%d edges)", path, upper.nnz)


def _artifact_error(path: Path, lineno: int, message: str) -> GraphArtifactError:
    return GraphArtifactError(f"{path}:{lineno}: {message}")


def load_graph(path: str | Path) -> LabelGraph:
    """Load and validate a graph artifact written by :func:`save_graph`."""
    path = Path(path)
    with open(path, "r", encoding="utf-8") as handle:
        lines = handle.read().splitlines()

    def expect(lineno: int, key: str) -> str:
        if lineno > len(lines):
            raise GraphArtifactError(f"{path}: truncated artifact (missing {key!r})")
        line = lines[lineno - 1]
        prefix = key + " "
        if not line.startswith(prefix):
            raise _artifact_error(path, lineno, f"expected {key!r} line, got {line!r}")
        return line[len(prefix):]

    if not lines:
        raise GraphArtifactError(f"{path}: empty artifact")
    head = lines[0].split()
    if len(head) != 2 or head[0] != "infogain-graph":
        raise _artifact_error(path, 1, "not a graph artifact")
    if head[1] != str(ARTIFACT_FORMAT_VERSION):
        raise _artifact_error(
            path, 1, f"unsupported format version {head[1]} (supported: {ARTIFACT_FORMAT_VERSION})"
        )
    try:
        k = int(expect(2, "labels"))
        threshold = float(expect(3, "threshold"))
        alpha_text = expect(4, "alpha")
        source_sha = expect(5, "source_sha256")
        raw_vocab_sha = expect(6, "raw_vocab_sha256")
        vocab_sha = expect(7, "vocab_sha256")
        n_remap = int(expect(8, "remap"))
        n_edges = int(expect(9, "edges"))
    except ValueError as exc:
        raise GraphArtifactError(f"{path}: malformed header ({exc})") from None
    if k < 1 or n_edges < 0 or n_remap < 0:
        raise GraphArtifactError(f"{path}: malformed header counts")

    body = 9
    if len(lines) != body + k + n_remap + n_edges:
        raise GraphArtifactError(
            f"{path}: expected {body + k + n_remap + n_edges} lines, found {len(lines)}"
        )

    labels: list[str] = []
    for i in range(k):
        lineno = body + i + 1
        text = lines[lineno - 1]
        if not text.startswith("L "):
            raise _artifact_error(path, lineno, "expected label line")
        try:
            labels.append(json.loads(text[2:]))
        except json.JSONDecodeError:
            raise _artifact_error(path, lineno, "bad label encoding") from None

    remap_pairs: list[tuple[str, int]] = []
    for i in range(n_remap):
        lineno = body + k + i + 1
        text = lines[lineno - 1]
        if not text.startswith("R "):
            raise _artifact_error(path, lineno, "expected remap line")
        name, _, idx_text = text[2:].rpartition(" ")
        try:
            remap_pairs.append((json.loads(name), int(idx_text)))
        except (json.JSONDecodeError, ValueError):
            raise _artifact_error(path, lineno, "bad remap entry") from None

    rows = np.empty(n_edges, dtype=np.intp)
    cols = np.empty(n_edges, dtype=np.intp)
    vals = np.empty(n_edges, dtype=np.float64)
    for i in range(n_edges):
        lineno = body + k + n_remap + i + 1
        parts = lines[lineno - 1].split()
        if len(parts) != 4 or parts[0] != "E":
            raise _artifact_error(path, lineno, "expected edge line 'E p q w'")
        try:
            p, q, w = int(parts[1]), int(parts[2]), float(parts[3])
        except ValueError:
            raise _artifact_error(path, lineno, "bad edge values") from None
        if not (0 <= p < q < k):
            raise _artifact_error(path, lineno, f"edge ({p}, {q}) is not upper-triangular in range")
        if not (threshold <= w <= 1.0):
            raise _artifact_error(
                path, lineno, f"edge weight {w!r} outside [threshold={threshold!r}, 1]"
            )
        rows[i], cols[i], vals[i] = p, q, w

    weights = sparse.coo_matrix(
        (np.concatenate([vals, vals]), (np.concatenate([rows, cols]), np.concatenate([cols, rows]))),
        shape=(k, k),
    ).tocsr()
    if weights.nnz != 2 * n_edges:
        raise GraphArtifactError(f"{path}: duplicate edges in artifact")

    graph = LabelGraph(
        labels=tuple(labels),
        threshold=threshold,
        weights=weights,
        source_sha256=None if source_sha == "-" else source_sha,
        raw_vocab_sha256=None if raw_vocab_sha == "-" else raw_vocab_sha,
        remap_pairs=tuple(remap_pairs) or None,
    )
    if graph.vocab_sha256() != vocab_sha:
        raise GraphArtifactError(f"{path}: vocabulary hash mismatch (artifact corrupted?)")
    if alpha_text != "unset":
        try:
            alpha = float(alpha_text)
        except ValueError:
            raise GraphArtifactError(f"{path}: bad alpha {alpha_text!r}") from None
        graph = with_propagation(graph, alpha)
    return graph


# ---------------------------------------------------------------------------
# Pool/graph compatibility
# ---------------------------------------------------------------------------


@dataclass(slots=True)
class AlignedPool:
    """A pool re-expressed in a graph's label space."""

    points: list[DataPoint]
    n_unknown_dropped: int
    n_emptied: int


def align_pool(graph: LabelGraph, pool: Pool, *, force: bool = False) -> AlignedPool:
    """Resolve a pool's labels against a graph artifact's vocabulary.

    When the artifact records the raw-vocabulary hash of the pool it was
    built from, a differing pool is refused unless ``force`` is given.
    Resolution itself is by label name: through the artifact's remap table
    when normalization was applied at build time, directly against the
    graph vocabulary otherwise.  Unknown labels are an error, or dropped
    (and counted) under ``force``; points left with no labels are excluded.
    """
    pool_hash = pool.vocab.sha256()
    if graph.raw_vocab_sha256 is not None and pool_hash != graph.raw_vocab_sha256:
        if not force:
            raise GraphArtifactError(
                "pool vocabulary does not match the one this graph was built from "
                f"(pool {pool_hash[:12]}…, graph {graph.raw_vocab_sha256[:12]}…); "
                "rebuild the graph or pass force to resolve labels by name"
            )
        logger.warning("pool/graph vocabulary hash mismatch; resolving labels by name")

    if graph.remap_pairs is not None:
        table = {label.casefold(): idx for label, idx in graph.remap_pairs}
    else:
        table = {label.casefold(): idx for idx, label in enumerate(graph.labels)}

    points: list[DataPoint] = []
    unknown = 0
    emptied = 0
    unknown_example: str | None = None
    for point in pool.points:
        resolved: set[int] = set()
        for li in point.labels:
            name = pool.vocab.labels[li]
            idx = table.get(name.casefold())
            if idx is None:
                if not force:
                    raise GraphArtifactError(
                        f"record {point.id!r}: label {name!r} is unknown to the graph; "
                        "rebuild the graph or pass force to drop unknown labels"
                    )
                unknown += 1
                unknown_example = name
                continue
            if idx != DROPPED:
                resolved.add(idx)
        if not resolved:
            emptied += 1
            continue
        points.append(
            DataPoint(
                id=point.id,
                labels=tuple(sorted(resolved)),
                quality=point.quality,
                payload=point.payload,
            )
        )
    if unknown:
        logger.warning(
            "dropped %d unknown label occurrence(s) (e.g. %r)", unknown, unknown_example
        )
    if emptied:
        logger.info("%d record(s) had no labels left after alignment; excluded", emptied)
    return AlignedPool(points=points, n_unknown_dropped=unknown, n_emptied=emptied)


def file_sha256(path: str | Path) -> str:
    """Content hash of a file (used for artifact provenance)."""
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()
