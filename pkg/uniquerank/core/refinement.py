"""Dominance-count refinement of the chain's top candidates."""
from __future__ import annotations
import math
import typing

import numpy as np

from uniquerank.core.base import RefinementError, TRACKER_INITS, TIE_BREAKS


class ScorePlane:
    """Per-node (importance, uniqueness) points plus the seed set T from the chain"""
    def __init__(
            self,
            importance: typing.Sequence[float] | np.ndarray,
            uniqueness: typing.Sequence[float] | np.ndarray,
            seed_set: typing.Sequence[int]
    ) -> None:
        importance = np.asarray(importance, dtype=float)
        uniqueness = np.asarray(uniqueness, dtype=float)
        if importance.ndim != 1 or importance.size == 0:
            raise RefinementError('empty score plane')
        if uniqueness.shape != importance.shape:
            raise RefinementError('importance and uniqueness vectors differ in length')
        if not (np.all(np.isfinite(importance)) and np.all(np.isfinite(uniqueness))):
            raise RefinementError('scores must be finite')
        if np.any(importance < 0) or np.any(uniqueness < 0):
            raise RefinementError('scores must be nonnegative')

        seeds = [int(node) for node in seed_set]
        if len(set(seeds)) != len(seeds):
            raise RefinementError('seed set contains duplicates')
        if any(not 0 <= node < importance.size for node in seeds):
            raise RefinementError('seed set references a node outside the plane')

        self.importance: np.ndarray = importance
        self.uniqueness: np.ndarray = uniqueness
        self.seed_set: list[int] = seeds

    @property
    def size(self) -> int:
        return int(self.importance.size)


def top_k_by_score(scores: np.ndarray, k: int) -> list[int]:
    """Highest scores first, smaller id on ties"""
    order = np.lexsort((np.arange(scores.size), -np.asarray(scores, dtype=float)))
    return [int(node) for node in order[:k]]


def dominance_count(plane: ScorePlane, i: int) -> int:
    """b(i): seeds that node i beats strictly in both coordinates"""
    if not 0 <= i < plane.size:
        raise RefinementError(f'node {i} is outside the plane')
    seeds = np.asarray(plane.seed_set, dtype=np.int64)
    beats = (plane.importance[i] > plane.importance[seeds]) & (plane.uniqueness[i] > plane.uniqueness[seeds])
    return int(np.count_nonzero(beats))


def dominance_counts(plane: ScorePlane, nodes: np.ndarray) -> np.ndarray:
    seeds = np.asarray(plane.seed_set, dtype=np.int64)
    counts = np.zeros(nodes.size, dtype=np.int64)
    step = max(1, (1 << 22) // max(1, seeds.size))
    for start in range(0, nodes.size, step):
        block = nodes[start:start + step]
        beats = (plane.importance[block, None] > plane.importance[None, seeds]) \
            & (plane.uniqueness[block, None] > plane.uniqueness[None, seeds])
        counts[start:start + step] = beats.sum(axis=1)
    return counts


def refine_top_k(
        plane: ScorePlane,
        k: int,
        tracker_init: str = 'infinity',
        tie_break: str = 'sum_first'
) -> list[int]:
    """Final top-k by dominance count over the seed set.

    Nodes weaker than the weakest seed in either coordinate are skipped.
    Order: larger b(i), then larger a_i + u_i and larger u_i (swapped when
    ``tie_break`` is ``uniqueness_first``), then smaller id. No node left
    out strictly dominates a node that is returned.
    """
    if tracker_init not in TRACKER_INITS:
        raise RefinementError(f'unknown tracker_init {tracker_init!r}')
    if tie_break not in TIE_BREAKS:
        raise RefinementError(f'unknown tie_break {tie_break!r}')
    if k < 0 or k > len(plane.seed_set):
        raise RefinementError(f'k = {k} exceeds the seed set size {len(plane.seed_set)}')
    if k == 0:
        return []

    seeds = np.asarray(plane.seed_set, dtype=np.int64)
    start = math.inf if tracker_init == 'infinity' else 1.0
    min_importance = min(start, float(plane.importance[seeds].min()))
    min_uniqueness = min(start, float(plane.uniqueness[seeds].min()))

    survivors = np.flatnonzero((plane.importance >= min_importance) & (plane.uniqueness >= min_uniqueness))
    counts = dominance_counts(plane, survivors)
    a, u = plane.importance[survivors], plane.uniqueness[survivors]
    if tie_break == 'sum_first':
        order = np.lexsort((survivors, -u, -(a + u), -counts))
    else:
        order = np.lexsort((survivors, -(a + u), -u, -counts))
    return [int(node) for node in survivors[order[:k]]]


def violates_dominance(plane: ScorePlane, selected: typing.Sequence[int]) -> list[tuple[int, int]]:
    """(outside, inside) pairs where the outside node strictly dominates the inside one"""
    inside = np.asarray(list(selected), dtype=np.int64)
    outside_mask = np.ones(plane.size, dtype=bool)
    outside_mask[inside] = False
    outside = np.flatnonzero(outside_mask)
    violations: list[tuple[int, int]] = []
    for m in inside:
        beats = (plane.importance[outside] > plane.importance[m]) & (plane.uniqueness[outside] > plane.uniqueness[m])
        violations.extend((int(n), int(m)) for n in outside[beats])
    return violations
