from pathlib import Path
import typing

import networkx as nx
import numpy as np
import pytest

from uniquerank.core.graph import AttributedGraph, write_graph
from uniquerank.core.kernel import SimilarityMatrix, similarity_matrix


@pytest.fixture(autouse=True)
def isolated_home(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> Path:
    """Keep ~/.config/uniquerank and UNIQUERANK_THREADS of the machine out of the tests"""
    home = tmp_path / 'home'
    home.mkdir()
    monkeypatch.setenv('HOME', str(home))
    monkeypatch.delenv('UNIQUERANK_THREADS', raising=False)
    return home


def make_graph(
        node_count: int,
        edges: typing.Sequence[tuple[int, int]],
        attributes: typing.Sequence[typing.Sequence[float]] | np.ndarray | None = None,
        directed: bool = False
) -> AttributedGraph:
    sources = [edge[0] for edge in edges]
    targets = [edge[1] for edge in edges]
    if attributes is not None:
        attributes = np.asarray(attributes, dtype=float).reshape(node_count, -1)
    return AttributedGraph.from_edges(node_count, sources, targets, directed, attributes=attributes)


def random_attributed_graph(
        rng: np.random.Generator,
        node_count: int,
        edge_probability: float,
        attribute_count: int = 2,
        directed: bool = False
) -> AttributedGraph:
    graph = nx.gnp_random_graph(node_count, edge_probability, seed=int(rng.integers(2 ** 31)), directed=directed)
    attributes = rng.random((node_count, attribute_count))
    edges = np.array(list(graph.edges()), dtype=np.int64).reshape(-1, 2)
    return AttributedGraph.from_edges(node_count, edges[:, 0], edges[:, 1], directed, attributes=attributes)


def relabel(g: AttributedGraph, order: np.ndarray) -> AttributedGraph:
    """Node i of ``g`` becomes node order[i], keeping its label and attributes"""
    sources, targets = g.edge_arrays()
    attributes = np.empty_like(g.attributes)
    attributes[order] = g.attributes
    labels = [''] * g.node_count
    for old, new in enumerate(order.tolist()):
        labels[new] = g.node_labels[old]
    return AttributedGraph.from_edges(
        g.node_count, order[sources], order[targets], g.directed, attributes=attributes, node_labels=labels
    )


def dense_similarity(g: AttributedGraph, gamma: float = 1.0) -> SimilarityMatrix:
    return similarity_matrix(g, gamma)


def write_inputs(directory: Path, g: AttributedGraph) -> tuple[Path, Path]:
    edge_file, attribute_file = directory / 'edges.csv', directory / 'attributes.csv'
    write_graph(g, edge_file, attribute_file, header_lines=[])
    return edge_file, attribute_file


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240601)


@pytest.fixture
def star() -> AttributedGraph:
    """Center 0 with attribute 0, leaves 1-3 with attribute 1"""
    return make_graph(4, [(0, 1), (0, 2), (0, 3)], [[0.0], [1.0], [1.0], [1.0]])


@pytest.fixture
def twin_gadget() -> AttributedGraph:
    """Nodes 0 and 1 are attribute-identical and share the neighbors 2, 3, 4"""
    edges = [(0, 2), (0, 3), (0, 4), (1, 2), (1, 3), (1, 4)]
    return make_graph(5, edges, [[0.0], [0.0], [5.0], [5.0], [5.0]])
