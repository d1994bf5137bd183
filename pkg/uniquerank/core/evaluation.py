"""Disruption experiments: remove a node, try a similar replacement, measure local efficiency."""
from __future__ import annotations
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
import typing

import numpy as np
import pandas as pd
from scipy import stats
from scipy.sparse import csgraph

from uniquerank.core.base import (
    ConfigSpecificException,
    GraphFormatError,
    LogMessages,
    LogLevels,
    log,
)
from uniquerank.core.graph import (
    AttributedGraph,
    check_node,
    hop_distances,
    induced_adjacency,
    khop_neighborhood,
    remove_and_redirect,
)
from uniquerank.core.kernel import Similarity
from uniquerank.core.registry import RankContext, Selection
from uniquerank.core.refinement import top_k_by_score
from uniquerank.core.reports import write_frame

NAIVE_DISTANCE_LIMIT = 2


class ReplacementPolicy:
    def __init__(
            self,
            similarity_threshold: float,
            search_hops: int = 2,
            distance_cap: int = 10,
            efficiency_hops: int = 2,
            include_removed_pairs: bool = False
    ) -> None:
        errors: LogMessages = LogMessages()
        if not 0.0 < similarity_threshold <= 1.0:
            errors.error(f'similarity threshold must be in (0, 1] (got {similarity_threshold!r})')
        if search_hops < 1:
            errors.error(f'search_hops must be at least 1 (got {search_hops!r})')
        if distance_cap < 1:
            errors.error(f'distance_cap must be at least 1 (got {distance_cap!r})')
        if efficiency_hops < 1:
            errors.error(f'efficiency_hops must be at least 1 (got {efficiency_hops!r})')
        if errors.contains_error():
            raise ConfigSpecificException(errors)

        self.similarity_threshold: float = float(similarity_threshold)
        self.search_hops: int = search_hops
        self.distance_cap: int = distance_cap
        self.efficiency_hops: int = efficiency_hops
        self.include_removed_pairs: bool = include_removed_pairs

    def with_threshold(self, threshold: float, search_hops: int | None = None) -> ReplacementPolicy:
        return ReplacementPolicy(
            threshold,
            self.search_hops if search_hops is None else search_hops,
            self.distance_cap,
            self.efficiency_hops,
            self.include_removed_pairs
        )


class DisruptionReport:
    def __init__(
            self,
            node: int,
            replacement: int | None,
            replacement_similarity: float | None,
            efficiency_before: float,
            efficiency_after: float,
            pair_set_size: int,
            distance_to_nearest_similar: float
    ) -> None:
        self.node: int = node
        self.replacement: int | None = replacement
        self.replacement_similarity: float | None = replacement_similarity
        self.efficiency_before: float = efficiency_before
        self.efficiency_after: float = efficiency_after
        self.pair_set_size: int = pair_set_size
        self.distance_to_nearest_similar: float = distance_to_nearest_similar

        if efficiency_before > 0:
            self.efficiency_reduction_unclamped: float = 1.0 - efficiency_after / efficiency_before
        else:
            self.efficiency_reduction_unclamped = 0.0
        self.efficiency_reduction: float = min(1.0, max(0.0, self.efficiency_reduction_unclamped))

    def __repr__(self) -> str:
        return (f'DisruptionReport(node={self.node}, replacement={self.replacement}, '
                f'reduction={self.efficiency_reduction:.6f})')


def find_replacement(
        g: AttributedGraph,
        s: Similarity,
        removed: int,
        policy: ReplacementPolicy
) -> tuple[int, float] | None:
    """Most similar node within search_hops passing the threshold; fewer hops, then smaller id on ties"""
    hops = hop_distances(g, removed, policy.search_hops)
    if not hops:
        return None
    candidates = np.fromiter(hops.keys(), dtype=np.int64, count=len(hops))
    distances = np.fromiter(hops.values(), dtype=np.int64, count=len(hops))
    similarities = s.row(removed)[candidates]

    qualifies = similarities >= policy.similarity_threshold
    if not qualifies.any():
        return None
    candidates, distances, similarities = candidates[qualifies], distances[qualifies], similarities[qualifies]
    best = np.lexsort((candidates, distances, -similarities))[0]
    return int(candidates[best]), float(similarities[best])


def local_efficiency(
        g: AttributedGraph,
        pair_nodes: typing.Iterable[int],
        path_nodes: typing.Iterable[int]
) -> float:
    """Sum of 1/d_ij over ordered pairs of pair_nodes; paths stay inside path_nodes"""
    pairs = sorted({int(node) for node in pair_nodes})
    nodes = np.array(sorted(set(pairs) | {int(node) for node in path_nodes}), dtype=np.int64)
    if len(pairs) < 2:
        return 0.0

    positions = np.searchsorted(nodes, pairs)
    distances = csgraph.dijkstra(
        induced_adjacency(g, nodes), directed=True, indices=positions, unweighted=True
    )[:, positions]
    with np.errstate(divide='ignore'):
        inverse = 1.0 / distances
    np.fill_diagonal(inverse, 0.0)
    return float(inverse.sum())


def distance_to_nearest_similar(
        g: AttributedGraph,
        s: Similarity,
        node: int,
        threshold: float,
        cap: int = 10
) -> float:
    """Hops (direction ignored) to the closest other node with similarity >= threshold, capped"""
    hops = hop_distances(g, node, cap)
    if not hops:
        return float(cap)
    candidates = np.fromiter(hops.keys(), dtype=np.int64, count=len(hops))
    distances = np.fromiter(hops.values(), dtype=np.int64, count=len(hops))
    qualifies = s.row(node)[candidates] >= threshold
    if not qualifies.any():
        return float(cap)
    return float(distances[qualifies].min())


def simulate_disruption(
        g: AttributedGraph,
        s: Similarity,
        node: int,
        policy: ReplacementPolicy
) -> DisruptionReport:
    """Remove ``node``, redirect its edges to a replacement if one qualifies, compare local efficiency.

    The pair set is fixed before removal: the node's neighborhood without
    the node itself (with it when ``include_removed_pairs`` is set).
    """
    check_node(g, node)
    neighborhood = khop_neighborhood(g, node, policy.efficiency_hops)
    pairs = neighborhood | {node} if policy.include_removed_pairs else neighborhood
    distance = distance_to_nearest_similar(g, s, node, policy.similarity_threshold, policy.distance_cap)

    if not neighborhood:
        return DisruptionReport(node, None, None, 0.0, 0.0, 0, distance)

    replacement, similarity = find_replacement(g, s, node, policy) or (None, None)
    before = local_efficiency(g, pairs, neighborhood | {node})
    # the removed node is isolated after surgery
    after = local_efficiency(remove_and_redirect(g, node, replacement), pairs, pairs | neighborhood)

    return DisruptionReport(node, replacement, similarity, before, after, len(pairs), distance)


def naive_baseline_select(
        g: AttributedGraph,
        s: Similarity,
        importance: np.ndarray,
        threshold: float,
        k: int,
        log_messages: LogMessages | None = None
) -> Selection:
    """Most important nodes with no node of similarity >= threshold within two hops"""
    chosen: list[int] = []
    for node in top_k_by_score(np.asarray(importance, dtype=float), g.node_count):
        if len(chosen) == k:
            break
        if distance_to_nearest_similar(g, s, node, threshold, NAIVE_DISTANCE_LIMIT + 1) > NAIVE_DISTANCE_LIMIT:
            chosen.append(node)

    shortfall = len(chosen) < k
    if shortfall:
        log(log_messages,
            f'naive({threshold}) found only {len(chosen)} of {k} nodes without a similar node within two hops',
            LogLevels.WARNING)
    return Selection(chosen, shortfall=shortfall)


# Grids


GRID_COLUMNS: list[str] = [
    'method', 'top_k', 'search_hops', 'threshold', 'selected_count', 'shortfall', 'replaced_count',
    'efficiency_reduction_mean', 'efficiency_reduction_stderr', 'efficiency_reduction_unclamped_mean',
    'replacement_distance_mean', 'replacement_distance_stderr', 'selected_nodes',
]


def _mean_and_error(values: list[float]) -> tuple[float, float]:
    if not values:
        return float('nan'), float('nan')
    if len(values) == 1:
        return float(values[0]), 0.0
    return float(np.mean(values)), float(stats.sem(values))


def run_grid(
        context: RankContext,
        methods: typing.Sequence[str],
        top_k: typing.Sequence[int],
        thresholds: typing.Sequence[float],
        policy_base: ReplacementPolicy,
        search_hops: typing.Sequence[int] | None = None,
        threads: int = 1
) -> pd.DataFrame:
    """Mean and standard error of reduction and distance over each method's top-k, per cell.

    Rows are ordered (method, k, hops, threshold) as given; the per-node
    simulations are shared between methods and may run in parallel.
    """
    for method in methods:
        context.validate_method(method)
    hop_values = list(search_hops) if search_hops else [policy_base.search_hops]

    selections: dict[tuple[str, int], Selection] = {
        (method, k): context.select(method, k) for method in methods for k in top_k
    }

    jobs = sorted({
        (node, hops, float(threshold))
        for selection in selections.values() for node in selection.nodes
        for hops in hop_values for threshold in thresholds
    })

    context.g.undirected_adjacency  # cached before the workers share the graph

    def run(job: tuple[int, int, float]) -> DisruptionReport:
        node, hops, threshold = job
        return simulate_disruption(context.g, context.s, node, policy_base.with_threshold(threshold, hops))

    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            reports = dict(zip(jobs, pool.map(run, jobs)))
    else:
        reports = {job: run(job) for job in jobs}

    rows: list[dict[str, typing.Any]] = []
    labels = context.g.node_labels
    for method in methods:
        for k in top_k:
            selection = selections[(method, k)]
            for hops in hop_values:
                for threshold in thresholds:
                    cell = [reports[(node, hops, float(threshold))] for node in selection.nodes]
                    reduction_mean, reduction_error = _mean_and_error([r.efficiency_reduction for r in cell])
                    distance_mean, distance_error = _mean_and_error([r.distance_to_nearest_similar for r in cell])
                    unclamped_mean, _ = _mean_and_error([r.efficiency_reduction_unclamped for r in cell])
                    rows.append({
                        'method': method,
                        'top_k': k,
                        'search_hops': hops,
                        'threshold': float(threshold),
                        'selected_count': len(selection.nodes),
                        'shortfall': int(selection.shortfall),
                        'replaced_count': sum(r.replacement is not None for r in cell),
                        'efficiency_reduction_mean': reduction_mean,
                        'efficiency_reduction_stderr': reduction_error,
                        'efficiency_reduction_unclamped_mean': unclamped_mean,
                        'replacement_distance_mean': distance_mean,
                        'replacement_distance_stderr': distance_error,
                        'selected_nodes': ';'.join(labels[node] for node in selection.nodes),
                    })
    return pd.DataFrame(rows, columns=GRID_COLUMNS)


def metric_table(grid: pd.DataFrame, metric: str, index: typing.Sequence[str] = ('threshold', 'top_k')) -> pd.DataFrame:
    """One metric's means with methods as columns, in the order they appear in the grid"""
    index = list(index)
    if grid['search_hops'].nunique() > 1 and 'search_hops' not in index:
        index = ['search_hops'] + index
    table = grid.pivot_table(
        index=index, columns='method', values=f'{metric}_mean', aggfunc='first', dropna=False
    )
    table = table[list(dict.fromkeys(grid['method']))]
    table.columns.name = None
    return table.reset_index()


def baseline_table(grid: pd.DataFrame, metric: str) -> pd.DataFrame:
    """Replacement thresholds as rows (descending), UniqueRank then each naive threshold as columns"""
    table = metric_table(grid, metric, index=('threshold', 'top_k'))
    return table.sort_values('threshold', ascending=False, kind='stable').reset_index(drop=True)


# Exports


def scatter_frame(
        importance: np.ndarray,
        uniqueness: np.ndarray,
        selected: typing.Iterable[int],
        labels: typing.Sequence[str] | None = None
) -> pd.DataFrame:
    importance, uniqueness = np.asarray(importance, dtype=float), np.asarray(uniqueness, dtype=float)
    if importance.shape != uniqueness.shape:
        raise ValueError('importance and uniqueness vectors differ in length')
    if np.any(uniqueness <= 0):
        raise ValueError('uniqueness scores must be positive to take the logarithm')
    flags = np.zeros(importance.size, dtype=int)
    flags[list(selected)] = 1
    return pd.DataFrame({
        'node_label': list(labels) if labels is not None else [str(i) for i in range(importance.size)],
        'importance': importance,
        'log_uniqueness': np.log(uniqueness),
        'selected': flags,
    })


def scatter_export(
        importance: np.ndarray,
        uniqueness: np.ndarray,
        selected: typing.Iterable[int],
        path: Path,
        labels: typing.Sequence[str] | None = None,
        header_lines: list[str] | None = None
) -> Path:
    return write_frame(scatter_frame(importance, uniqueness, selected, labels), path, header_lines)


def histogram_frame(g: AttributedGraph, selected: typing.Iterable[int], bins: int = 20) -> pd.DataFrame:
    if g.node_count == 0:
        raise GraphFormatError('empty graph')
    chosen = np.array(sorted({int(node) for node in selected}), dtype=np.int64)
    for node in chosen:
        check_node(g, int(node))

    frames: list[pd.DataFrame] = []
    for column, name in enumerate(g.attribute_names):
        values = g.attributes[:, column]
        edges = np.histogram_bin_edges(values, bins=bins)
        all_counts, _ = np.histogram(values, bins=edges)
        selected_counts, _ = np.histogram(values[chosen], bins=edges)
        frames.append(pd.DataFrame({
            'attribute': name,
            'bin_index': np.arange(bins),
            'bin_left': edges[:-1],
            'bin_right': edges[1:],
            'count_all': all_counts,
            'count_selected': selected_counts,
        }))
    return pd.concat(frames, ignore_index=True)


def attribute_histogram_export(
        g: AttributedGraph,
        selected: typing.Iterable[int],
        path: Path,
        bins: int = 20,
        header_lines: list[str] | None = None
) -> Path:
    return write_frame(histogram_frame(g, selected, bins), path, header_lines)


def alpha_sweep(context: RankContext, alphas: typing.Sequence[float], k: int) -> pd.DataFrame:
    """Refined UniqueRank selection for each alpha, with the score-plane coordinates of each pick"""
    rows: list[dict[str, typing.Any]] = []
    for alpha in alphas:
        swept = context.with_config(context.config.replace(alpha=float(alpha)))
        selection = swept.select('uniquerank', k)
        scores = swept.scores('uniquerank')
        for position, node in enumerate(selection.nodes, start=1):
            rows.append({
                'alpha': float(alpha),
                'rank_position': position,
                'node_label': context.g.node_labels[node],
                'chain_score': float(scores[node]),
                'importance': float(swept.importance[node]),
                'uniqueness': float(swept.uniqueness[node]),
                'log_uniqueness': float(np.log(swept.uniqueness[node])),
            })
    return pd.DataFrame(rows, columns=[
        'alpha', 'rank_position', 'node_label', 'chain_score', 'importance', 'uniqueness', 'log_uniqueness'
    ])


def parse_threshold_range(text: str) -> list[float]:
    """'0.5,0.7' or 'start:stop:step' (stop included) or a mix of both"""
    thresholds: list[float] = []
    for part in text.split(','):
        part = part.strip()
        if not part:
            continue
        bounds = part.split(':')
        if len(bounds) == 1:
            thresholds.append(float(bounds[0]))
            continue
        if len(bounds) != 3:
            raise ValueError(f'threshold range {part!r} must look like start:stop:step')
        start, stop, step = (float(bound) for bound in bounds)
        if step <= 0 or stop < start:
            raise ValueError(f'threshold range {part!r} is empty')
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        thresholds.extend(round(start + i * step, 10) for i in range(count))

    for threshold in thresholds:
        if not 0.0 < threshold <= 1.0:
            raise ValueError(f'threshold {threshold!r} is outside (0, 1]')
    return list(dict.fromkeys(thresholds))
