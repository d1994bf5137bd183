import math
from pathlib import Path
from types import SimpleNamespace

import numpy as np
import pandas as pd
import pytest

from uniquerank.core.base import ConfigSpecificException, LogLevels, LogMessages, RankingConfig
from uniquerank.core.evaluation import (
    GRID_COLUMNS,
    DisruptionReport,
    ReplacementPolicy,
    alpha_sweep,
    baseline_table,
    distance_to_nearest_similar,
    find_replacement,
    histogram_frame,
    local_efficiency,
    metric_table,
    naive_baseline_select,
    parse_threshold_range,
    run_grid,
    scatter_export,
    scatter_frame,
    simulate_disruption,
)
from uniquerank.core.graph import AttributedGraph, hop_distances
from uniquerank.core.kernel import similarity_matrix
from uniquerank.core.ranking import centrality
from uniquerank.core.registry import RankContext, naive_method
from uniquerank.core.reports import read_frame

from conftest import make_graph, random_attributed_graph, relabel


def floyd_warshall_efficiency(g: AttributedGraph, pairs: set[int], allowed: set[int]) -> float:
    nodes = sorted(pairs | allowed)
    index = {node: i for i, node in enumerate(nodes)}
    distance = np.full((len(nodes), len(nodes)), np.inf)
    np.fill_diagonal(distance, 0.0)
    sources, targets = g.edge_arrays()
    for a, b in zip(sources.tolist(), targets.tolist()):
        if a in index and b in index:
            distance[index[a], index[b]] = 1.0
            if not g.directed:
                distance[index[b], index[a]] = 1.0
    for via in range(len(nodes)):
        distance = np.minimum(distance, distance[:, [via]] + distance[[via], :])
    total = 0.0
    for i in pairs:
        for j in pairs:
            if i != j and np.isfinite(distance[index[i], index[j]]):
                total += 1.0 / distance[index[i], index[j]]
    return total


def test_local_efficiency_small_graphs() -> None:
    complete = make_graph(4, [(a, b) for a in range(4) for b in range(a + 1, 4)])
    assert local_efficiency(complete, range(4), range(4)) == pytest.approx(12.0)

    path = make_graph(3, [(0, 1), (1, 2)])
    assert local_efficiency(path, range(3), range(3)) == pytest.approx(5.0)
    # without node 1 the ends cannot reach each other
    assert local_efficiency(path, [0, 2], [0, 2]) == 0.0

    assert local_efficiency(make_graph(2, []), [0, 1], [0, 1]) == 0.0
    assert local_efficiency(path, [1], range(3)) == 0.0


@pytest.mark.parametrize('directed', [False, True])
def test_local_efficiency_matches_floyd_warshall(rng: np.random.Generator, directed: bool) -> None:
    for _ in range(20):
        g = random_attributed_graph(rng, 25, 0.12, directed=directed)
        pairs = set(rng.choice(25, size=8, replace=False).tolist())
        allowed = set(rng.choice(25, size=12, replace=False).tolist())
        assert local_efficiency(g, pairs, allowed) == pytest.approx(floyd_warshall_efficiency(g, pairs, allowed))


def test_replacement_policy_validation() -> None:
    with pytest.raises(ConfigSpecificException):
        ReplacementPolicy(0.0)
    with pytest.raises(ConfigSpecificException):
        ReplacementPolicy(0.5, search_hops=0, distance_cap=0)
    policy = ReplacementPolicy(0.5, search_hops=3).with_threshold(0.9)
    assert (policy.similarity_threshold, policy.search_hops) == (0.9, 3)


def test_disruption_report_clamps() -> None:
    worse = DisruptionReport(0, None, None, 4.0, 6.0, 3, 2.0)
    assert worse.efficiency_reduction_unclamped == pytest.approx(-0.5)
    assert worse.efficiency_reduction == 0.0

    empty = DisruptionReport(0, None, None, 0.0, 0.0, 0, 10.0)
    assert empty.efficiency_reduction == empty.efficiency_reduction_unclamped == 0.0


def test_removing_a_unique_star_center_cuts_all_paths(star: AttributedGraph) -> None:
    report = simulate_disruption(star, similarity_matrix(star, 1.0), 0, ReplacementPolicy(0.9))

    assert report.replacement is None
    assert report.pair_set_size == 3
    assert report.efficiency_before == pytest.approx(3.0)
    assert report.efficiency_after == 0.0
    assert report.efficiency_reduction == 1.0
    assert report.distance_to_nearest_similar == 10.0


def test_removing_a_node_with_a_twin_costs_nothing(twin_gadget: AttributedGraph) -> None:
    report = simulate_disruption(twin_gadget, similarity_matrix(twin_gadget, 1.0), 0, ReplacementPolicy(0.9))

    assert report.replacement == 1
    assert report.replacement_similarity == 1.0
    assert report.efficiency_before == pytest.approx(9.0)
    assert report.efficiency_after == pytest.approx(9.0)
    assert report.efficiency_reduction == 0.0
    assert report.distance_to_nearest_similar == 2.0


def test_removed_node_joins_the_pairs_on_request(twin_gadget: AttributedGraph) -> None:
    policy = ReplacementPolicy(0.9, include_removed_pairs=True)
    report = simulate_disruption(twin_gadget, similarity_matrix(twin_gadget, 1.0), 0, policy)

    assert report.pair_set_size == 5
    assert report.efficiency_after < report.efficiency_before


def test_isolated_node_reports_zero() -> None:
    g = make_graph(3, [(1, 2)])
    report = simulate_disruption(g, similarity_matrix(g, 1.0), 0, ReplacementPolicy(0.5, distance_cap=4))

    assert report.pair_set_size == 0
    assert report.efficiency_reduction == 0.0
    assert report.distance_to_nearest_similar == 4.0


def test_replacement_prefers_fewer_hops_on_equal_similarity() -> None:
    delta = math.sqrt(-math.log(0.8))
    attributes = [[0.0], [delta], [-delta], [10.0], [10.0], [10.0]]
    g = make_graph(6, [(0, 1), (1, 2), (0, 3), (3, 4), (4, 5)], attributes)
    s = similarity_matrix(g, 1.0)

    node, similarity = find_replacement(g, s, 0, ReplacementPolicy(0.75))

    assert node == 1
    assert similarity == pytest.approx(0.8)
    assert find_replacement(g, s, 0, ReplacementPolicy(0.9)) is None


def test_higher_threshold_never_adds_replacements(rng: np.random.Generator) -> None:
    g = random_attributed_graph(rng, 40, 0.1)
    s = similarity_matrix(g, 2.0)
    thresholds = [0.3, 0.5, 0.7, 0.9]
    for node in range(40):
        found = [find_replacement(g, s, node, ReplacementPolicy(t)) is not None for t in thresholds]
        assert found == sorted(found, reverse=True)


def test_distance_to_nearest_similar(twin_gadget: AttributedGraph) -> None:
    s = similarity_matrix(twin_gadget, 1.0)
    assert distance_to_nearest_similar(twin_gadget, s, 0, 0.9) == 2.0
    assert distance_to_nearest_similar(twin_gadget, s, 2, 0.9) == 2.0

    adjacent = make_graph(5, [(0, 1), (0, 2), (1, 2)], [[0.0], [0.0], [5.0], [5.0], [5.0]])
    assert distance_to_nearest_similar(adjacent, similarity_matrix(adjacent, 1.0), 0, 0.9) == 1.0

    lonely = make_graph(3, [(0, 1), (1, 2)], [[0.0], [4.0], [8.0]])
    assert distance_to_nearest_similar(lonely, similarity_matrix(lonely, 1.0), 0, 0.9, cap=6) == 6.0


def test_naive_baseline_skips_nodes_with_similar_neighbors(star: AttributedGraph) -> None:
    log_messages = LogMessages()
    importance = np.array([0.1, 0.4, 0.3, 0.2])

    selection = naive_baseline_select(star, similarity_matrix(star, 1.0), importance, 0.9, 2, log_messages)

    assert selection.nodes == [0]
    assert selection.shortfall
    assert [m.level for m in log_messages.log_messages] == [LogLevels.WARNING.key]


def test_naive_baseline_selects_isolated_nodes() -> None:
    g = make_graph(4, [(1, 2), (2, 3)], [[0.0], [0.0], [0.0], [0.0]])
    selection = naive_baseline_select(g, similarity_matrix(g, 1.0), np.array([0.9, 0.5, 0.3, 0.1]), 0.5, 1)
    assert selection.nodes == [0]
    assert not selection.shortfall


def test_naive_baseline_matches_brute_force(rng: np.random.Generator) -> None:
    for _ in range(10):
        g = random_attributed_graph(rng, 30, 0.08, attribute_count=1)
        s = similarity_matrix(g, 4.0)
        importance = rng.random(30)
        threshold = 0.8

        eligible = [
            node for node in range(30)
            if not any(s.values[node, other] >= threshold for other in hop_distances(g, node, 2))
        ]
        expected = sorted(eligible, key=lambda node: (-importance[node], node))[:5]

        assert naive_baseline_select(g, s, importance, threshold, 5).nodes == expected


def make_context(g: AttributedGraph, **kwargs) -> RankContext:
    return RankContext(g, similarity_matrix(g, 1.0), RankingConfig(), **kwargs)


def test_single_cell_grid_matches_direct_simulation(rng: np.random.Generator) -> None:
    g = random_attributed_graph(rng, 30, 0.12)
    context = make_context(g)
    policy = ReplacementPolicy(0.5)

    grid = run_grid(context, ['degree'], [4], [0.5], policy)

    assert list(grid.columns) == GRID_COLUMNS
    assert len(grid) == 1
    row = grid.iloc[0]
    selected = context.select('degree', 4).nodes
    reports = [simulate_disruption(g, context.s, node, policy) for node in selected]
    assert row['efficiency_reduction_mean'] == pytest.approx(np.mean([r.efficiency_reduction for r in reports]))
    assert row['replacement_distance_mean'] == pytest.approx(
        np.mean([r.distance_to_nearest_similar for r in reports])
    )
    assert row['replaced_count'] == sum(r.replacement is not None for r in reports)
    assert row['selected_nodes'] == ';'.join(g.node_labels[node] for node in selected)


def test_identical_rankers_give_identical_rows(rng: np.random.Generator) -> None:
    g = random_attributed_graph(rng, 30, 0.12)
    ranker = SimpleNamespace(score=lambda context: centrality(context.g, 'degree'))
    context = make_context(g, rankers={'first': ranker, 'second': ranker})

    grid = run_grid(context, ['first', 'second'], [3, 6], [0.4, 0.8], ReplacementPolicy(0.5))

    first = grid[grid['method'] == 'first'].drop(columns='method').reset_index(drop=True)
    second = grid[grid['method'] == 'second'].drop(columns='method').reset_index(drop=True)
    pd.testing.assert_frame_equal(first, second)


def test_grid_is_bounded_and_independent_of_threads(rng: np.random.Generator) -> None:
    g = random_attributed_graph(rng, 50, 0.08)
    methods = ['uniquerank', 'pagerank', 'degree', naive_method(0.99)]
    policy = ReplacementPolicy(0.5, distance_cap=6)

    serial = run_grid(make_context(g), methods, [3, 5], [0.5, 0.9], policy, search_hops=[1, 2])
    parallel = run_grid(make_context(g), methods, [3, 5], [0.5, 0.9], policy, search_hops=[1, 2], threads=4)

    pd.testing.assert_frame_equal(serial, parallel)
    assert len(serial) == 4 * 2 * 2 * 2
    assert serial['efficiency_reduction_mean'].between(0.0, 1.0).all()
    assert serial['replacement_distance_mean'].between(1.0, 6.0).all()
    assert (serial['efficiency_reduction_stderr'] >= 0).all()


def test_grid_does_not_depend_on_node_ids(rng: np.random.Generator) -> None:
    g = random_attributed_graph(rng, 30, 0.12)
    relabelled = relabel(g, rng.permutation(g.node_count))
    methods, policy = ['uniquerank', 'attrirank'], ReplacementPolicy(0.5)

    grid = run_grid(make_context(g), methods, [3, 5], [0.5, 0.8], policy)
    moved = run_grid(make_context(relabelled), methods, [3, 5], [0.5, 0.8], policy)

    pd.testing.assert_frame_equal(grid, moved)

def test_one_node_cell_has_zero_error(star: AttributedGraph) -> None:
    grid = run_grid(make_context(star), ['degree'], [1], [0.9], ReplacementPolicy(0.9))
    assert grid.loc[0, 'efficiency_reduction_mean'] == 1.0
    assert grid.loc[0, 'efficiency_reduction_stderr'] == 0.0


def test_metric_and_baseline_tables(rng: np.random.Generator) -> None:
    g = random_attributed_graph(rng, 30, 0.12)
    grid = run_grid(make_context(g), ['pagerank', 'degree'], [2, 4], [0.5, 0.8], ReplacementPolicy(0.5))

    table = metric_table(grid, 'efficiency_reduction')
    assert list(table.columns) == ['threshold', 'top_k', 'pagerank', 'degree']
    assert len(table) == 4
    cell = grid[(grid['method'] == 'degree') & (grid['top_k'] == 4) & (grid['threshold'] == 0.8)]
    picked = table[(table['top_k'] == 4) & (table['threshold'] == 0.8)]['degree']
    assert picked.iloc[0] == cell['efficiency_reduction_mean'].iloc[0]

    baseline = baseline_table(grid, 'replacement_distance')
    assert baseline['threshold'].tolist() == [0.8, 0.8, 0.5, 0.5]


def test_metric_table_keeps_search_hops_when_varied(rng: np.random.Generator) -> None:
    g = random_attributed_graph(rng, 20, 0.15)
    grid = run_grid(make_context(g), ['degree'], [2], [0.5], ReplacementPolicy(0.5), search_hops=[1, 3])
    table = metric_table(grid, 'efficiency_reduction')
    assert list(table.columns) == ['search_hops', 'threshold', 'top_k', 'degree']


def test_scatter_frame() -> None:
    frame = scatter_frame([0.5, 0.25, 0.25], [1.0, 1.0, np.e], [])
    assert frame['log_uniqueness'].tolist() == pytest.approx([0.0, 0.0, 1.0])
    assert frame['selected'].tolist() == [0, 0, 0]
    assert frame['node_label'].tolist() == ['0', '1', '2']

    with pytest.raises(ValueError):
        scatter_frame([0.5, 0.5], [1.0, 0.0], [0])


def test_scatter_export_reads_back(tmp_path: Path, rng: np.random.Generator) -> None:
    importance = rng.random(12)
    uniqueness = 1.0 + rng.random(12)

    path = scatter_export(importance, uniqueness, [3, 7], tmp_path / 'scatter.csv', header_lines=['note'])
    frame = read_frame(path)

    np.testing.assert_allclose(frame['importance'], importance, rtol=1e-12)
    np.testing.assert_allclose(frame['log_uniqueness'], np.log(uniqueness), rtol=1e-12)
    assert frame.index[frame['selected'] == 1].tolist() == [3, 7]
    assert path.read_text(encoding='utf-8').startswith('# note\n')


def test_histogram_frame() -> None:
    attributes = np.column_stack([np.arange(10.0), np.full(10, 2.0)])
    g = make_graph(10, [(0, 1)], attributes)

    frame = histogram_frame(g, [0, 5, 9], bins=3)

    first = frame[frame['attribute'] == 'a1']
    assert first['count_all'].tolist() == [3, 3, 4]
    assert first['count_selected'].tolist() == [1, 1, 1]
    assert first['bin_left'].tolist() == pytest.approx([0.0, 3.0, 6.0])

    flat = frame[frame['attribute'] == 'a2']
    assert flat['count_all'].sum() == 10
    assert (flat['count_all'] > 0).sum() == 1
    assert flat['count_selected'].sum() == 3


def test_alpha_sweep_shape(rng: np.random.Generator) -> None:
    g = random_attributed_graph(rng, 25, 0.15)
    frame = alpha_sweep(make_context(g), [0.2, 0.8], 3)

    assert len(frame) == 6
    assert frame['rank_position'].tolist() == [1, 2, 3, 1, 2, 3]
    np.testing.assert_allclose(frame['log_uniqueness'], np.log(frame['uniqueness']))


def test_parse_threshold_range() -> None:
    assert parse_threshold_range('0.7:1.0:0.05') == [0.7, 0.75, 0.8, 0.85, 0.9, 0.95, 1.0]
    assert parse_threshold_range('0.5, 0.7,0.5') == [0.5, 0.7]
    assert parse_threshold_range('0.2,0.5:0.6:0.1') == [0.2, 0.5, 0.6]
    for bad in ('0:1:0.5', '1.0:0.5:0.1', '0.5:0.6', '1.5'):
        with pytest.raises(ValueError):
            parse_threshold_range(bad)
