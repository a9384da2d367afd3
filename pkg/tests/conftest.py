"""Shared fixtures: hand-checkable instances and a seeded instance factory."""

from __future__ import annotations

import numpy as np
import pytest
from scipy import sparse

from infogain.graph import LabelGraph, build_graph, with_propagation
from infogain.pool import DataPoint, LabelEmbeddings, Pool
from infogain.synthetic import SyntheticPoolSpec, generate_pool


def make_pool(rows) -> Pool:
    """Build a pool from (id, labels, quality) tuples."""
    return Pool.build(
        {"id": pid, "labels": list(labels), "quality": quality}
        for pid, labels, quality in rows
    )


@pytest.fixture
def three_point_pool() -> Pool:
    """Two points on one label, a third on another; qualities 1, 1, 0.8.

    Small enough to enumerate every subset by hand.  With a concave measure
    and a budget of 2, the best pick is one point from each label.
    """
    return make_pool(
        [
            ("d1", ["L1"], 1.0),
            ("d2", ["L1"], 1.0),
            ("d3", ["L2"], 0.8),
        ]
    )


def edgeless_graph(labels: tuple[str, ...], alpha: float = 1.0) -> LabelGraph:
    """A graph with no edges; its propagation matrix is exactly the identity."""
    k = len(labels)
    weights = sparse.csr_matrix((k, k), dtype=np.float64)
    return with_propagation(LabelGraph(labels=labels, threshold=0.9, weights=weights), alpha)


@pytest.fixture
def no_edge_graph() -> LabelGraph:
    return edgeless_graph(("L1", "L2"))


def pair_graph(weight: float = 0.9, alpha: float = 1.0) -> LabelGraph:
    """Two labels joined by a single edge of exact weight ``weight``."""
    weights = sparse.csr_matrix(
        np.array([[0.0, weight], [weight, 0.0]], dtype=np.float64)
    )
    return with_propagation(
        LabelGraph(labels=("L1", "L2"), threshold=min(weight, 0.9), weights=weights),
        alpha,
    )


@pytest.fixture
def two_label_graph() -> LabelGraph:
    """One edge of weight exactly 0.9, spread weight 1."""
    return pair_graph(0.9, 1.0)


@pytest.fixture
def chain_embeddings() -> LabelEmbeddings:
    """Three unit vectors with pairwise cosines 0.95, 0.92, 0.88.

    At a 0.9 threshold this yields a two-edge chain a—b—c (the a—c pair
    falls below the floor).  Rows come from a Cholesky factor of the Gram
    matrix, so the cosines are exact up to factorization roundoff.
    """
    gram = np.array(
        [
            [1.0, 0.95, 0.88],
            [0.95, 1.0, 0.92],
            [0.88, 0.92, 1.0],
        ]
    )
    return LabelEmbeddings(np.linalg.cholesky(gram))


def seeded_instance(
    seed: int,
    n_points: int = 200,
    n_labels: int = 40,
    *,
    threshold: float = 0.9,
    alpha: float = 1.0,
):
    """A clustered synthetic pool plus its propagation graph."""
    data = generate_pool(
        SyntheticPoolSpec(n_points=n_points, n_labels=n_labels, seed=seed)
    )
    graph = with_propagation(
        build_graph(data.embeddings, data.pool.vocab, threshold), alpha
    )
    return data, graph
