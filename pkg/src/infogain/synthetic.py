"""Seeded synthetic pool generator for benchmarks and property tests.

Label embeddings are drawn around cluster centers on the unit sphere, so a
similarity threshold in the usual range produces a sparse within-cluster
edge structure; each point samples its labels mostly from one cluster,
which mimics how real tag sets co-occur.  Everything is drawn from one
seeded generator in a fixed order: the same spec yields byte-identical
pools and embedding files.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .errors import ValidationError
from .pool import LabelEmbeddings, Pool

logger = logging.getLogger(__name__)


@dataclass(slots=True)
class SyntheticPoolSpec:
    """Shape parameters of a generated pool.

    ``n_clusters`` defaults to roughly one cluster per ten labels.  Quality
    scores are uniform in ``[quality_low, quality_high]``.  ``point_dim``
    adds dense per-point embeddings (for diversity baselines); set it to
    ``None`` to skip them.
    """

    n_points: int
    n_labels: int
    mean_labels_per_point: float = 3.0
    max_labels_per_point: int = 8
    label_dim: int = 32
    n_clusters: int | None = None
    cluster_spread: float = 0.06
    point_dim: int | None = 64
    quality_low: float = 1.0
    quality_high: float = 6.0
    seed: int = 42

    def validate(self) -> "SyntheticPoolSpec":
        if self.n_points < 1:
            raise ValidationError(f"n_points must be >= 1, got {self.n_points}")
        if self.n_labels < 1:
            raise ValidationError(f"n_labels must be >= 1, got {self.n_labels}")
        if self.mean_labels_per_point < 1:
            raise ValidationError("mean_labels_per_point must be >= 1")
        if self.max_labels_per_point < 1:
            raise ValidationError("max_labels_per_point must be >= 1")
        if self.label_dim < 2 or (self.point_dim is not None and self.point_dim < 2):
            raise ValidationError("embedding dimensions must be >= 2")
        if self.cluster_spread < 0:
            raise ValidationError("cluster_spread must be >= 0")
        if not 0 <= self.quality_low <= self.quality_high:
            raise ValidationError("need 0 <= quality_low <= quality_high")
        if self.n_clusters is not None and not 1 <= self.n_clusters <= self.n_labels:
            raise ValidationError("n_clusters must lie in [1, n_labels]")
        return self

    @property
    def clusters(self) -> int:
        if self.n_clusters is not None:
            return self.n_clusters
        return max(1, self.n_labels // 10)


@dataclass(slots=True)
class SyntheticDataset:
    """A generated pool plus embeddings aligned to its vocabulary."""

    pool: Pool
    embeddings: LabelEmbeddings
    point_vectors: np.ndarray | None
    spec: SyntheticPoolSpec


def _unit_rows(matrix: np.ndarray) -> np.ndarray:
    return matrix / np.linalg.norm(matrix, axis=1, keepdims=True)


def generate_pool(spec: SyntheticPoolSpec) -> SyntheticDataset:
    """Generate a pool per ``spec``; same spec, same bytes."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    n, k, c = spec.n_points, spec.n_labels, spec.clusters

    centers = _unit_rows(rng.standard_normal((c, spec.label_dim)))
    label_cluster = np.arange(k) % c
    label_vectors = _unit_rows(
        centers[label_cluster] + spec.cluster_spread * rng.standard_normal((k, spec.label_dim))
    )
    cluster_members = [np.flatnonzero(label_cluster == j) for j in range(c)]

    point_cluster = rng.integers(0, c, size=n)
    cap = min(spec.max_labels_per_point, k)
    counts = np.minimum(1 + rng.poisson(max(0.0, spec.mean_labels_per_point - 1.0), size=n), cap)

    tag_names = [f"tag-{j:05d}" for j in range(k)]
    label_sets: list[np.ndarray] = []
    for i in range(n):
        members = cluster_members[point_cluster[i]]
        want = int(counts[i])
        if want <= members.size:
            chosen = rng.choice(members, size=want, replace=False)
        else:
            extra_pool = rng.permutation(k)
            chosen_set = set(members.tolist())
            fill = [j for j in extra_pool.tolist() if j not in chosen_set][: want - members.size]
            chosen = np.concatenate([members, np.asarray(fill, dtype=np.int64)])
        label_sets.append(np.sort(chosen))

    qualities = rng.uniform(spec.quality_low, spec.quality_high, size=n)

    point_vectors: np.ndarray | None = None
    if spec.point_dim is not None:
        point_centers = _unit_rows(rng.standard_normal((c, spec.point_dim)))
        point_vectors = _unit_rows(
            point_centers[point_cluster]
            + 0.35 * rng.standard_normal((n, spec.point_dim))
        )

    def records() -> Iterator[dict]:
        for i in range(n):
            yield {
                "id": f"p{i:08d}",
                "labels": [tag_names[j] for j in label_sets[i].tolist()],
                "quality": float(qualities[i]),
            }

    pool = Pool.build(records(), source=f"synthetic(seed={spec.seed})")

    # The pool's vocabulary is first-occurrence ordered; align embedding rows
    # to it (labels that were never drawn are simply absent).
    tag_index = {name: j for j, name in enumerate(tag_names)}
    row_order = np.asarray([tag_index[label] for label in pool.vocab.labels], dtype=np.intp)
    embeddings = LabelEmbeddings(label_vectors[row_order])

    logger.info(
        "generated synthetic pool: %d points, %d/%d labels used, %d clusters",
        n,
        len(pool.vocab),
        k,
        c,
    )
    return SyntheticDataset(
        pool=pool, embeddings=embeddings, point_vectors=point_vectors, spec=spec
    )
