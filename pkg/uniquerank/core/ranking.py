"""Transition operators, power iteration and the ranking methods built on them.

Both operators are column-stochastic: entry (j, i) is the probability of a
step from i to j, so ``pi <- (1 - d) Q pi + d P pi`` conserves mass.
"""
from __future__ import annotations
import typing

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph

from uniquerank.core.base import (
    RankingConfig,
    ConvergenceError,
    LogMessages,
    LogLevels,
    log,
)
from uniquerank.core.graph import AttributedGraph
from uniquerank.core.kernel import Similarity, SimilarityMatrix

CENTRALITY_KINDS: tuple[str, ...] = ('degree', 'closeness', 'eigenvector')


class TransitionMatrix:
    """Column-stochastic operator.

    Stored either dense, as a sparse edge part plus a mask of dangling
    columns that jump uniformly, or as the implicit uniform-jump matrix.
    """

    def __init__(
            self,
            size: int,
            values: np.ndarray | sp.csc_matrix | None = None,
            dangling: np.ndarray | None = None
    ) -> None:
        self.size: int = size
        self.values: np.ndarray | sp.csc_matrix | None = values
        self.dangling: np.ndarray = dangling if dangling is not None else np.zeros(size, dtype=bool)

    @classmethod
    def uniform(cls, size: int) -> TransitionMatrix:
        return cls(size)

    @property
    def is_uniform(self) -> bool:
        return self.values is None

    def apply(self, vector: np.ndarray) -> np.ndarray:
        if self.values is None:
            return np.full(self.size, vector.sum() / self.size)
        result = np.asarray(self.values @ vector, dtype=float).reshape(-1)
        if self.dangling.any():
            result += vector[self.dangling].sum() / self.size
        return result

    def to_dense(self) -> np.ndarray:
        if self.values is None:
            return np.full((self.size, self.size), 1.0 / self.size)
        dense = self.values.toarray() if sp.issparse(self.values) else np.array(self.values, dtype=float)
        dense[:, self.dangling] += 1.0 / self.size
        return dense

    def column_sums(self) -> np.ndarray:
        if self.values is None:
            return np.ones(self.size)
        sums = np.asarray(self.values.sum(axis=0), dtype=float).reshape(-1)
        return sums + self.dangling.astype(float)


class RankVector:
    def __init__(self, scores: np.ndarray, iterations_used: int, converged: bool) -> None:
        self.scores: np.ndarray = scores
        self.iterations_used: int = iterations_used
        self.converged: bool = converged

    def __repr__(self) -> str:
        return f'RankVector(n={self.scores.size}, iterations={self.iterations_used}, converged={self.converged})'


def build_attribute_transition(s: SimilarityMatrix) -> TransitionMatrix:
    """Column i is the similarity profile of node i normalized to sum 1"""
    values = np.array(s.values, dtype=float)
    values /= values.sum(axis=0, keepdims=True)
    return TransitionMatrix(s.size, values)


def destination_weights(g: AttributedGraph, s: Similarity | None, alpha: float) -> np.ndarray:
    """w_j = 1 / (alpha + (1 - alpha) * min over neighbors n of j of s_nj); 1 without neighbors"""
    weights = np.ones(g.node_count)
    if alpha >= 1.0 or s is None:
        return weights

    adjacency = g.undirected_adjacency
    counts = np.diff(adjacency.indptr)
    has_neighbors = counts > 0
    if not has_neighbors.any():
        return weights

    rows = np.repeat(np.arange(g.node_count), counts)
    similarities = s.pair(adjacency.indices, rows)
    minima = np.minimum.reduceat(similarities, adjacency.indptr[:-1][has_neighbors])
    weights[has_neighbors] = 1.0 / (alpha + (1.0 - alpha) * minima)
    return weights


def build_structural_transition(g: AttributedGraph, s: Similarity | None, alpha: float) -> TransitionMatrix:
    """Column i spreads over the out-neighbors of i in proportion to their destination weight"""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f'alpha must be in [0, 1] (got {alpha!r})')
    weights = destination_weights(g, s, alpha)

    coo = g.adjacency.tocoo()
    sources, targets = coo.row, coo.col
    edge_weights = weights[targets]
    totals = np.bincount(sources, weights=edge_weights, minlength=g.node_count)
    values = sp.csc_matrix(
        (edge_weights / totals[sources], (targets, sources)), shape=(g.node_count, g.node_count)
    )
    dangling = g.out_degrees() == 0
    return TransitionMatrix(g.node_count, values, dangling)


def initial_vector(size: int, config: RankingConfig) -> np.ndarray:
    if config.init == 'random':
        start = np.random.default_rng(config.seed).random(size) + 1e-12
        return start / start.sum()
    return np.full(size, 1.0 / size)


def power_iterate(
        p: TransitionMatrix,
        q: TransitionMatrix,
        config: RankingConfig,
        callback: typing.Callable[[int, np.ndarray], None] | None = None,
        log_messages: LogMessages | None = None
) -> RankVector:
    """Iterate pi <- (1 - d) Q pi + d P pi until the L1 change drops below the tolerance"""
    if p.size != q.size:
        raise ValueError(f'transition matrices differ in size ({p.size} vs {q.size})')

    pi = initial_vector(p.size, config)
    d = config.d
    for iteration in range(1, config.max_iterations + 1):
        updated = d * p.apply(pi)
        if d < 1.0:
            updated += (1.0 - d) * q.apply(pi)
        updated /= updated.sum()
        change = float(np.abs(updated - pi).sum())
        pi = updated
        if callback is not None:
            callback(iteration, pi)
        if change < config.tolerance:
            return RankVector(pi, iteration, True)

    log(log_messages, f'Power iteration stopped after {config.max_iterations} iterations without converging',
        LogLevels.WARNING)
    return RankVector(pi, config.max_iterations, False)


def uniquerank(
        g: AttributedGraph,
        s: Similarity,
        config: RankingConfig,
        uniform_jump: bool = False,
        log_messages: LogMessages | None = None
) -> RankVector:
    """Structural walk biased toward unique destinations, mixed with the attribute walk"""
    p = build_structural_transition(g, s, config.alpha)
    if uniform_jump or not isinstance(s, SimilarityMatrix):
        q = TransitionMatrix.uniform(g.node_count)
    else:
        q = build_attribute_transition(s)
    return power_iterate(p, q, config, log_messages=log_messages)


def attrirank(
        g: AttributedGraph,
        s: Similarity,
        config: RankingConfig,
        uniform_jump: bool = False,
        log_messages: LogMessages | None = None
) -> RankVector:
    return uniquerank(g, s, config.replace(alpha=1.0), uniform_jump, log_messages)


def pagerank(g: AttributedGraph, config: RankingConfig, log_messages: LogMessages | None = None) -> RankVector:
    p = build_structural_transition(g, None, 1.0)
    return power_iterate(p, TransitionMatrix.uniform(g.node_count), config, log_messages=log_messages)


def centrality(
        g: AttributedGraph,
        kind: str,
        max_iterations: int = 1000,
        tolerance: float = 1e-6
) -> np.ndarray:
    if kind == 'degree':
        if g.directed:
            return (g.out_degrees() + g.in_degrees()).astype(float)
        return g.out_degrees().astype(float)
    if kind == 'closeness':
        return harmonic_closeness(g)
    if kind == 'eigenvector':
        return eigenvector_centrality(g, max_iterations, tolerance)
    raise ValueError(f'unknown centrality kind {kind!r} (expected one of {", ".join(CENTRALITY_KINDS)})')


def harmonic_closeness(g: AttributedGraph, chunk: int = 256) -> np.ndarray:
    """Sum over j != i of 1/d_ij along edge direction, divided by N - 1"""
    n = g.node_count
    if n < 2:
        return np.zeros(n)
    scores = np.zeros(n)
    for start in range(0, n, chunk):
        rows = np.arange(start, min(start + chunk, n))
        distances = csgraph.dijkstra(g.adjacency, directed=True, indices=rows, unweighted=True)
        with np.errstate(divide='ignore'):
            inverse = 1.0 / distances
        inverse[np.arange(rows.size), rows] = 0.0
        scores[rows] = inverse.sum(axis=1)
    return scores / (n - 1)


def eigenvector_centrality(g: AttributedGraph, max_iterations: int = 1000, tolerance: float = 1e-6) -> np.ndarray:
    """Principal eigenvector of the symmetrized adjacency, nonnegative with unit L2 norm.

    Iterates with A + I, which has the same eigenvectors but no period-2
    oscillation on bipartite graphs. Stops once the L1 change is below
    N * tolerance.
    """
    n = g.node_count
    shifted = g.undirected_adjacency + sp.identity(n, format='csr')
    x = np.full(n, 1.0 / np.sqrt(n))
    for _ in range(max_iterations):
        updated = shifted @ x
        updated /= np.linalg.norm(updated)
        if np.abs(updated - x).sum() < n * tolerance:
            return updated
        x = updated
    raise ConvergenceError('eigenvector centrality', max_iterations)
