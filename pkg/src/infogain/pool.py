"""Pool ingestion: records, label vocabulary, label embeddings.

Pool file format
----------------
A pool is a line-delimited JSON file. Every line is one record with at
least:

``id``
    unique string identifier,
``labels``
    array of label strings (the record's semantic tags), and
``quality``
    a non-negative number.

All other fields are preserved verbatim: each :class:`DataPoint` keeps the
raw line as its ``payload``, so a selection can be written back out as
training-ready records without this package knowing anything about the
rest of the schema.  Each record carries exactly one label set; data with
per-round substructure must be flattened to one set before ingestion.

Label strings are trimmed of surrounding whitespace, and two labels that
differ only by case are treated as the same label (first-seen spelling
wins).  Records with an empty ``labels`` array contribute nothing to the
measure; they are counted, logged, and excluded from the pool.

Embedding file format
---------------------
A label embedding file is text: a header line ``K dim`` followed by K
whitespace-separated rows of floats, row i belonging to vocabulary index i.
A sidecar file at ``<path>.labels`` (one label per line, same order) guards
against misalignment between the embedding rows and the vocabulary.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from ._validation import check_quality
from .errors import EmbeddingFormatError, PoolFormatError, ValidationError

logger = logging.getLogger(__name__)

DROPPED = -1
"""Remap value for a label removed by normalization."""


@dataclass(slots=True, frozen=True)
class DataPoint:
    """One pool record.

    ``labels`` holds sorted, strictly increasing vocabulary indices; the
    original strings live in the :class:`LabelVocabulary`.  ``payload`` is
    the raw serialized record, emitted untouched when the point is selected.
    """

    id: str
    labels: tuple[int, ...]
    quality: float
    payload: bytes


class LabelVocabulary:
    """Ordered set of label strings with pool occurrence counts."""

    __slots__ = ("labels", "frequency", "_index")

    def __init__(self, labels: Sequence[str], frequency: Sequence[int] | None = None):
        self.labels: tuple[str, ...] = tuple(labels)
        if frequency is None:
            freq = np.zeros(len(self.labels), dtype=np.int64)
        else:
            freq = np.asarray(frequency, dtype=np.int64)
        if freq.shape != (len(self.labels),):
            raise ValidationError(
                f"frequency has shape {freq.shape}, expected ({len(self.labels)},)"
            )
        self.frequency = freq
        self._index: dict[str, int] = {}
        for i, label in enumerate(self.labels):
            if not label or label != label.strip():
                raise ValidationError(f"label {label!r} is empty or untrimmed")
            key = label.casefold()
            if key in self._index:
                raise ValidationError(f"duplicate label (after case-folding): {label!r}")
            self._index[key] = i

    def __len__(self) -> int:
        return len(self.labels)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, LabelVocabulary)
            and self.labels == other.labels
            and bool(np.array_equal(self.frequency, other.frequency))
        )

    def index_of(self, label: str) -> int:
        """Index of ``label`` (case-insensitive); raises KeyError if absent."""
        return self._index[label.strip().casefold()]

    def __contains__(self, label: str) -> bool:
        return label.strip().casefold() in self._index

    def sha256(self) -> str:
        """Content hash of the ordered label list."""
        return hashlib.sha256("\n".join(self.labels).encode("utf-8")).hexdigest()


@dataclass(slots=True)
class Pool:
    """A loaded pool: points plus the vocabulary they index into."""

    points: list[DataPoint]
    vocab: LabelVocabulary
    n_skipped_empty: int = 0
    source: str | None = None

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self) -> Iterator[DataPoint]:
        return iter(self.points)

    @classmethod
    def build(cls, records: Iterable[Mapping], source: str | None = None) -> "Pool":
        """Build a pool from in-memory record dicts (id/labels/quality/...).

        Each record is serialized to a canonical JSON line so that payload
        passthrough behaves exactly as for a loaded file.
        """
        builder = _PoolBuilder(source=source)
        for n, record in enumerate(records, start=1):
            payload = json.dumps(record, ensure_ascii=False, separators=(",", ":"))
            builder.add(record, payload.encode("utf-8"), n)
        return builder.finish()


class _PoolBuilder:
    """Shared record validation for file loading and in-memory building."""

    def __init__(self, source: str | None = None):
        self.points: list[DataPoint] = []
        self.labels: list[str] = []
        self.freq: list[int] = []
        self._label_index: dict[str, int] = {}
        self._seen_ids: set[str] = set()
        self.n_skipped_empty = 0
        self.source = source

    def _where(self, lineno: int | None) -> str:
        return f"line {lineno}" if lineno is not None else "record"

    def add(self, record: Mapping, payload: bytes, lineno: int | None) -> None:
        where = self._where(lineno)
        if not isinstance(record, Mapping):
            raise PoolFormatError(f"{where}: record must be a JSON object")
        try:
            point_id = record["id"]
            raw_labels = record["labels"]
            quality = record["quality"]
        except KeyError as exc:
            raise PoolFormatError(f"{where}: missing required field {exc.args[0]!r}") from None
        if not isinstance(point_id, str) or not point_id:
            raise PoolFormatError(f"{where}: id must be a non-empty string, got {point_id!r}")
        if point_id in self._seen_ids:
            raise PoolFormatError(f"{where}: duplicate id {point_id!r}")
        if not isinstance(raw_labels, list) or any(not isinstance(l, str) for l in raw_labels):
            raise PoolFormatError(
                f"{where}: record {point_id!r} labels must be an array of strings"
            )
        try:
            quality = check_quality(quality, point_id)
        except ValidationError as exc:
            raise PoolFormatError(f"{where}: {exc}") from None

        indices: set[int] = set()
        for raw in raw_labels:
            label = raw.strip()
            if not label:
                raise PoolFormatError(f"{where}: record {point_id!r} has an empty label")
            if "\n" in label or "\r" in label:
                raise PoolFormatError(
                    f"{where}: record {point_id!r} label contains a line break"
                )
            key = label.casefold()
            idx = self._label_index.get(key)
            if idx is None:
                idx = len(self.labels)
                self._label_index[key] = idx
                self.labels.append(label)
                self.freq.append(0)
            indices.add(idx)

        self._seen_ids.add(point_id)
        if not indices:
            self.n_skipped_empty += 1
            logger.debug("skipping zero-label record %r (%s)", point_id, where)
            return
        for idx in indices:
            self.freq[idx] += 1
        self.points.append(
            DataPoint(id=point_id, labels=tuple(sorted(indices)), quality=quality, payload=payload)
        )

    def finish(self) -> Pool:
        if self.n_skipped_empty:
            logger.info(
                "excluded %d zero-label record(s) from %s",
                self.n_skipped_empty,
                self.source or "pool",
            )
        return Pool(
            points=self.points,
            vocab=LabelVocabulary(self.labels, self.freq),
            n_skipped_empty=self.n_skipped_empty,
            source=self.source,
        )


def load_pool(path: str | Path, fmt: str = "jsonl") -> Pool:
    """Load a pool file; see the module docstring for the format.

    Malformed records raise :class:`PoolFormatError` naming the 1-based
    line number.  Blank lines are ignored.
    """
    if fmt != "jsonl":
        raise ValidationError(f"unsupported pool format {fmt!r} (only 'jsonl')")
    path = Path(path)
    builder = _PoolBuilder(source=str(path))
    with open(path, "rb") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.rstrip(b"\n")
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise PoolFormatError(f"line {lineno}: invalid JSON ({exc.msg})") from None
            builder.add(record, line, lineno)
    pool = builder.finish()
    logger.info(
        "loaded %d point(s), %d label(s) from %s", len(pool), len(pool.vocab), path
    )
    return pool


def write_pool(points: Iterable[DataPoint], path: str | Path) -> int:
    """Write points as line-delimited records (payload passthrough).

    Returns the number of records written.  Output order is input order,
    so writing a selection preserves selection order.
    """
    count = 0
    with open(path, "wb") as handle:
        for point in points:
            handle.write(point.payload)
            handle.write(b"\n")
            count += 1
    return count


class LabelEmbeddings:
    """Dense float64 label embedding matrix, rows aligned to the vocabulary."""

    __slots__ = ("vectors", "_unit")

    def __init__(self, vectors: np.ndarray):
        vectors = np.ascontiguousarray(vectors, dtype=np.float64)
        if vectors.ndim != 2 or vectors.shape[1] < 1:
            raise EmbeddingFormatError(
                f"embeddings must be a 2-D matrix, got shape {vectors.shape}"
            )
        if not np.all(np.isfinite(vectors)):
            raise EmbeddingFormatError("embeddings contain non-finite values")
        norms = np.linalg.norm(vectors, axis=1)
        zero = np.flatnonzero(norms == 0.0)
        if zero.size:
            raise EmbeddingFormatError(
                f"embedding row {zero[0]} is all-zero; cosine similarity is undefined"
            )
        self.vectors = vectors
        self._unit: np.ndarray | None = None

    @property
    def n_labels(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @property
    def unit_vectors(self) -> np.ndarray:
        """Row-normalized copy (cached); rows have unit Euclidean norm."""
        if self._unit is None:
            norms = np.linalg.norm(self.vectors, axis=1, keepdims=True)
            self._unit = self.vectors / norms
        return self._unit

    def select_rows(self, rows: np.ndarray) -> "LabelEmbeddings":
        return LabelEmbeddings(self.vectors[np.asarray(rows, dtype=np.intp)])


def load_embeddings(
    path: str | Path,
    vocab: LabelVocabulary | None = None,
    labels_path: str | Path | None = None,
) -> LabelEmbeddings:
    """Load a label embedding file (header ``K dim``, one row per label).

    If a sidecar label file exists (``labels_path`` or ``<path>.labels``),
    its order must match ``vocab`` exactly when a vocabulary is given.
    """
    path = Path(path)
    with open(path, "r", encoding="utf-8") as handle:
        lines = handle.read().splitlines()
    if not lines:
        raise EmbeddingFormatError(f"{path}: empty embedding file")
    header = lines[0].split()
    if len(header) != 2:
        raise EmbeddingFormatError(f"{path}: header must be 'K dim', got {lines[0]!r}")
    try:
        n_labels, dim = int(header[0]), int(header[1])
    except ValueError:
        raise EmbeddingFormatError(f"{path}: header must be 'K dim', got {lines[0]!r}") from None
    if n_labels < 1 or dim < 1:
        raise EmbeddingFormatError(f"{path}: header K and dim must be positive")

    rows = [line for line in lines[1:] if line.strip()]
    if len(rows) != n_labels:
        raise EmbeddingFormatError(
            f"{path}: expected {n_labels} embedding rows, found {len(rows)}"
        )
    matrix = np.empty((n_labels, dim), dtype=np.float64)
    for i, row in enumerate(rows):
        parts = row.split()
        if len(parts) != dim:
            raise EmbeddingFormatError(
                f"{path}: row {i} has {len(parts)} values, expected {dim}"
            )
        try:
            matrix[i] = [float(p) for p in parts]
        except ValueError:
            raise EmbeddingFormatError(f"{path}: row {i} has a non-numeric value") from None

    if vocab is not None and len(vocab) != n_labels:
        raise EmbeddingFormatError(
            f"{path}: file has {n_labels} rows but vocabulary has {len(vocab)} labels"
        )

    sidecar = Path(labels_path) if labels_path is not None else Path(str(path) + ".labels")
    if sidecar.exists():
        sidecar_labels = read_label_file(sidecar)
        if len(sidecar_labels) != n_labels:
            raise EmbeddingFormatError(
                f"{sidecar}: has {len(sidecar_labels)} labels, embedding file has {n_labels} rows"
            )
        if vocab is not None and list(vocab.labels) != sidecar_labels:
            mism = next(
                i for i, (a, b) in enumerate(zip(vocab.labels, sidecar_labels)) if a != b
            )
            raise EmbeddingFormatError(
                f"{sidecar}: label order differs from vocabulary at row {mism} "
                f"({sidecar_labels[mism]!r} vs {vocab.labels[mism]!r})"
            )
    elif labels_path is not None:
        raise EmbeddingFormatError(f"label file {sidecar} does not exist")

    try:
        return LabelEmbeddings(matrix)
    except EmbeddingFormatError as exc:
        raise EmbeddingFormatError(f"{path}: {exc}") from None


def write_embeddings(
    embeddings: LabelEmbeddings, path: str | Path, labels: Sequence[str] | None = None
) -> None:
    """Write embeddings (and the sidecar label file when labels are given).

    Floats are written with ``repr`` so a rebuild from the same matrix is
    byte-identical and round-trips exactly.
    """
    path = Path(path)
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(f"{embeddings.n_labels} {embeddings.dim}\n")
        for row in embeddings.vectors:
            handle.write(" ".join(repr(float(v)) for v in row))
            handle.write("\n")
    if labels is not None:
        if len(labels) != embeddings.n_labels:
            raise ValidationError(
                f"{len(labels)} labels for {embeddings.n_labels} embedding rows"
            )
        with open(str(path) + ".labels", "w", encoding="utf-8") as handle:
            for label in labels:
                handle.write(label)
                handle.write("\n")


def read_label_file(path: str | Path) -> list[str]:
    """Read a one-label-per-line file (the embedding sidecar format)."""
    with open(path, "r", encoding="utf-8") as handle:
        return [line.rstrip("\n") for line in handle if line.strip()]


@dataclass(slots=True)
class LabelRemap:
    """Result of vocabulary normalization.

    ``mapping[i]`` is the new index of original label ``i``, or ``DROPPED``.
    ``representatives[j]`` is the original index whose string (and embedding
    row) represents new label ``j``.
    """

    mapping: np.ndarray
    representatives: np.ndarray
    old_labels: tuple[str, ...]
    new_labels: tuple[str, ...]
    members: dict[int, list[int]] = field(default_factory=dict)

    @property
    def n_dropped(self) -> int:
        return int(np.sum(self.mapping == DROPPED))

    def pairs(self) -> list[tuple[str, int]]:
        """(original label, new index or DROPPED) in original order."""
        return [(label, int(self.mapping[i])) for i, label in enumerate(self.old_labels)]


def normalize_labels(
    vocab: LabelVocabulary,
    embeddings: LabelEmbeddings,
    min_freq: int = 1,
    merge_sim: float | None = None,
) -> tuple[LabelVocabulary, LabelRemap]:
    """Drop rare labels, then merge near-duplicates by embedding cosine.

    Labels with pool frequency below ``min_freq`` are dropped.  When
    ``merge_sim`` is given, the surviving labels are scanned once in
    frequency-descending order (ties by lexicographic label order); each
    label merges into the first already-accepted representative whose
    cosine similarity is at least ``merge_sim``, otherwise it becomes a
    representative itself.  Representatives therefore end up pairwise less
    similar than ``merge_sim``, which makes the operation idempotent.

    Returns the new vocabulary (frequencies are the summed occurrence
    counts of each merged group) and the remap table.  Use
    :func:`apply_remap` to re-label points and :func:`remap_embeddings`
    for the matching embedding rows.
    """
    if isinstance(min_freq, bool) or not isinstance(min_freq, (int, np.integer)):
        raise ValidationError(f"min_freq must be an integer >= 1, got {min_freq!r}")
    if min_freq < 1:
        raise ValidationError(f"min_freq must be >= 1, got {min_freq}")
    if merge_sim is not None and not 0.0 <= float(merge_sim) <= 1.0:
        raise ValidationError(f"merge_sim must lie in [0, 1], got {merge_sim}")
    if embeddings.n_labels != len(vocab):
        raise ValidationError(
            f"embeddings have {embeddings.n_labels} rows for {len(vocab)} labels"
        )

    n = len(vocab)
    kept = np.flatnonzero(vocab.frequency >= min_freq)
    dropped_rare = n - kept.size
    mapping = np.full(n, DROPPED, dtype=np.int64)

    # representative original-index per kept label
    rep_of = np.empty(kept.size, dtype=np.int64)
    if merge_sim is None:
        rep_of[:] = kept
    else:
        order = sorted(
            range(kept.size),
            key=lambda j: (-int(vocab.frequency[kept[j]]), vocab.labels[kept[j]]),
        )
        unit = embeddings.unit_vectors
        rep_rows = np.empty((kept.size, embeddings.dim), dtype=np.float64)
        rep_orig: list[int] = []
        for j in order:
            orig = int(kept[j])
            vec = unit[orig]
            target = -1
            if rep_orig:
                sims = rep_rows[: len(rep_orig)] @ vec
                hits = np.flatnonzero(sims >= merge_sim)
                if hits.size:
                    target = int(hits[0])
            if target < 0:
                target = len(rep_orig)
                rep_rows[target] = vec
                rep_orig.append(orig)
            rep_of[j] = rep_orig[target]

    # New vocabulary keeps the representatives in original vocabulary order.
    reps_sorted = np.unique(rep_of)
    new_index_of = {int(orig): j for j, orig in enumerate(reps_sorted)}
    members: dict[int, list[int]] = {j: [] for j in range(reps_sorted.size)}
    summed = np.zeros(reps_sorted.size, dtype=np.int64)
    for j, orig in enumerate(kept):
        new_idx = new_index_of[int(rep_of[j])]
        mapping[int(orig)] = new_idx
        members[new_idx].append(int(orig))
        summed[new_idx] += int(vocab.frequency[int(orig)])

    new_labels = tuple(vocab.labels[int(orig)] for orig in reps_sorted)
    remap = LabelRemap(
        mapping=mapping,
        representatives=reps_sorted,
        old_labels=vocab.labels,
        new_labels=new_labels,
        members=members,
    )
    logger.info(
        "normalize: %d labels -> %d (%d below min_freq=%d, %d merged at sim>=%s)",
        n,
        len(new_labels),
        dropped_rare,
        min_freq,
        kept.size - reps_sorted.size,
        "off" if merge_sim is None else f"{merge_sim:g}",
    )
    return LabelVocabulary(new_labels, summed), remap


def apply_remap(points: Iterable[DataPoint], remap: LabelRemap) -> tuple[list[DataPoint], int]:
    """Re-label points through a remap table.

    Points whose labels were all dropped are excluded; the second return
    value counts them.  Merging can only shrink a point's label set, so the
    total label-occurrence count never increases.
    """
    out: list[DataPoint] = []
    emptied = 0
    mapping = remap.mapping
    for point in points:
        new = {int(mapping[i]) for i in point.labels if mapping[i] != DROPPED}
        if not new:
            emptied += 1
            continue
        out.append(
            DataPoint(
                id=point.id,
                labels=tuple(sorted(new)),
                quality=point.quality,
                payload=point.payload,
            )
        )
    if emptied:
        logger.info("remap emptied %d record(s); excluded", emptied)
    return out, emptied


def pool_after_remap(pool: Pool, remap: LabelRemap) -> Pool:
    """Apply a remap to a whole pool, recounting exact label frequencies."""
    points, emptied = apply_remap(pool.points, remap)
    freq = np.zeros(len(remap.new_labels), dtype=np.int64)
    for point in points:
        for idx in point.labels:
            freq[idx] += 1
    vocab = LabelVocabulary(remap.new_labels, freq)
    return Pool(
        points=points,
        vocab=vocab,
        n_skipped_empty=pool.n_skipped_empty + emptied,
        source=pool.source,
    )


def remap_embeddings(embeddings: LabelEmbeddings, remap: LabelRemap) -> LabelEmbeddings:
    """Embedding rows for the normalized vocabulary (representative rows)."""
    return embeddings.select_rows(remap.representatives)


def write_remap(remap: LabelRemap, path: str | Path) -> None:
    """Write a two-column audit table: original label -> representative or DROPPED."""
    with open(path, "w", encoding="utf-8") as handle:
        for label, new_idx in remap.pairs():
            target = "DROPPED" if new_idx == DROPPED else remap.new_labels[new_idx]
            handle.write(f"{json.dumps(label, ensure_ascii=False)}\t{json.dumps(target, ensure_ascii=False) if new_idx != DROPPED else target}\n")
