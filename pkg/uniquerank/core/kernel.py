"""RBF attribute similarity, bandwidth selection and per-node uniqueness."""
from __future__ import annotations
import typing

import numpy as np
import psutil
from scipy.spatial.distance import pdist, squareform

from uniquerank.core.base import (
    KernelError,
    DenseMatrixTooLarge,
    LogMessages,
    LogLevels,
    log,
)
from uniquerank.core.graph import AttributedGraph

# exp() underflows to 0 for very distant rows; the attribute walk needs s > 0
SIMILARITY_FLOOR = 1e-300
DEFAULT_DENSE_CAP = 50000


class Similarity(typing.Protocol):
    gamma: float

    @property
    def size(self) -> int: ...

    def pair(self, rows: np.ndarray, cols: np.ndarray) -> np.ndarray: ...

    def row(self, node: int) -> np.ndarray: ...


class SimilarityMatrix:
    """Dense N x N RBF similarities: symmetric, unit diagonal, entries in (0, 1]"""
    def __init__(self, values: np.ndarray, gamma: float) -> None:
        values = np.asarray(values, dtype=float)
        values.flags.writeable = False
        self.values: np.ndarray = values
        self.gamma: float = gamma

    @property
    def size(self) -> int:
        return int(self.values.shape[0])

    def pair(self, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        return self.values[rows, cols]

    def row(self, node: int) -> np.ndarray:
        return self.values[node]


class AttributeKernel:
    """Similarities evaluated on demand from the attribute rows (no N x N storage)"""
    def __init__(self, attributes: np.ndarray, gamma: float) -> None:
        _check_gamma(gamma)
        self.attributes: np.ndarray = np.asarray(attributes, dtype=float)
        self.gamma: float = gamma

    @property
    def size(self) -> int:
        return int(self.attributes.shape[0])

    def pair(self, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        rows, cols = np.asarray(rows), np.asarray(cols)
        result = np.empty(rows.shape, dtype=float)
        # chunked so 10^6 edges with wide attribute rows stay small
        step = 1 << 18
        for start in range(0, rows.size, step):
            stop = start + step
            diff = self.attributes[rows[start:stop]] - self.attributes[cols[start:stop]]
            result[start:stop] = np.exp(-self.gamma * np.einsum('ij,ij->i', diff, diff))
        return np.maximum(result, SIMILARITY_FLOOR)

    def row(self, node: int) -> np.ndarray:
        diff = self.attributes - self.attributes[node]
        values = np.maximum(np.exp(-self.gamma * np.einsum('ij,ij->i', diff, diff)), SIMILARITY_FLOOR)
        values[node] = 1.0
        return values


def _check_gamma(gamma: float) -> None:
    if not np.isfinite(gamma) or gamma <= 0:
        raise KernelError(f'gamma must be a positive finite number (got {gamma!r})')


def rbf_similarity(x_i: typing.Sequence[float], x_j: typing.Sequence[float], gamma: float) -> float:
    """exp(-gamma * ||x_i - x_j||^2)"""
    _check_gamma(gamma)
    a, b = np.asarray(x_i, dtype=float), np.asarray(x_j, dtype=float)
    if a.shape != b.shape:
        raise KernelError(f'attribute vectors differ in length ({a.size} vs {b.size})')
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise KernelError('attribute vectors must be finite')
    diff = a - b
    return max(float(np.exp(-gamma * float(np.dot(diff, diff)))), SIMILARITY_FLOOR)


def gamma_median_heuristic(
        g: AttributedGraph,
        sample_pairs: int = 10000,
        seed: int = 0,
        log_messages: LogMessages | None = None
) -> float:
    """1 / median squared distance over seeded random distinct pairs; 1 if that median is 0"""
    if g.node_count < 2:
        raise KernelError('the median heuristic needs at least two nodes')
    rng = np.random.default_rng(seed)
    first = rng.integers(0, g.node_count, size=sample_pairs)
    second = rng.integers(0, g.node_count - 1, size=sample_pairs)
    second = second + (second >= first)

    diff = g.attributes[first] - g.attributes[second]
    median = float(np.median(np.einsum('ij,ij->i', diff, diff)))
    if median <= 0.0:
        log(log_messages, 'All sampled attribute pairs coincide; gamma falls back to 1', LogLevels.WARNING)
        return 1.0
    gamma = 1.0 / median
    log(log_messages, f'Median heuristic chose gamma = {gamma!r}', LogLevels.DEBUG)
    return gamma


def similarity_matrix(g: AttributedGraph, gamma: float, dense_cap: int = DEFAULT_DENSE_CAP) -> SimilarityMatrix:
    _check_gamma(gamma)
    n = g.node_count
    if n > dense_cap:
        raise DenseMatrixTooLarge(n, dense_cap, 'node count above the dense-matrix cap')
    # pdist scratch plus the square matrix plus the exp result
    needed = 8 * (n * (n - 1) // 2 + 2 * n * n)
    if needed > psutil.virtual_memory().available:
        raise DenseMatrixTooLarge(n, dense_cap, f'needs about {needed >> 20} MiB of free memory')

    if n == 1:
        return SimilarityMatrix(np.ones((1, 1)), gamma)
    squared = squareform(pdist(g.attributes, metric='sqeuclidean'))
    values = np.maximum(np.exp(-gamma * squared), SIMILARITY_FLOOR)
    np.fill_diagonal(values, 1.0)
    return SimilarityMatrix(values, gamma)


def uniqueness_scores(g: AttributedGraph, s: Similarity) -> np.ndarray:
    """u_i = 1 / mean similarity to the (in and out) neighbors; isolated nodes get 1"""
    adjacency = g.undirected_adjacency.tocoo()
    rows, cols = adjacency.row, adjacency.col
    similarities = s.pair(rows, cols)
    totals = np.bincount(rows, weights=similarities, minlength=g.node_count)
    counts = np.bincount(rows, minlength=g.node_count).astype(float)

    scores = np.ones(g.node_count)
    has_neighbors = counts > 0
    scores[has_neighbors] = counts[has_neighbors] / totals[has_neighbors]
    return scores
