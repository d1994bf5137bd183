"""Attributed graphs: loading, normalization, neighborhoods, paths and surgery."""
from __future__ import annotations
from pathlib import Path
import csv
import io
import typing

import networkx as nx
import numpy as np
import pandas as pd
import scipy.sparse as sp
from scipy.sparse import csgraph
from sklearn.preprocessing import MinMaxScaler, StandardScaler

from uniquerank.core.base import (
    GraphFormatError,
    NodeIndexError,
    LogMessages,
    LogLevels,
    NORMALIZATION_MODES,
    log,
)
from uniquerank.core.reports import data_lines, write_frame


class AttributedGraph:
    """Immutable graph with dense zero-based node ids and an N x K attribute matrix.

    Adjacency is held as CSR matrices: row i of ``adjacency`` lists the
    out-neighbors of i in ascending order. Undirected graphs store both
    directions, so ``in`` and ``out`` adjacency coincide.
    """

    def __init__(
            self,
            node_count: int,
            directed: bool,
            adjacency: sp.csr_matrix,
            attributes: np.ndarray,
            node_labels: typing.Sequence[str] | None = None,
            attribute_names: typing.Sequence[str] | None = None,
            dropped_self_loops: int = 0,
            dropped_duplicates: int = 0
    ) -> None:
        self.node_count: int = node_count
        self.directed: bool = directed
        self._adjacency: sp.csr_matrix = adjacency
        self._in_adjacency: sp.csr_matrix = adjacency.T.tocsr() if directed else adjacency
        self._in_adjacency.sort_indices()
        self._undirected: sp.csr_matrix | None = None if directed else adjacency

        attributes = np.array(attributes, dtype=float, copy=True)
        attributes.flags.writeable = False
        self.attributes: np.ndarray = attributes

        if node_labels is None:
            node_labels = [str(i) for i in range(node_count)]
        self.node_labels: tuple[str, ...] = tuple(node_labels)
        if attribute_names is None:
            attribute_names = [f'a{k + 1}' for k in range(attributes.shape[1])]
        self.attribute_names: tuple[str, ...] = tuple(attribute_names)

        self.dropped_self_loops: int = dropped_self_loops
        self.dropped_duplicates: int = dropped_duplicates

    @classmethod
    def from_edges(
            cls,
            node_count: int,
            sources: typing.Sequence[int] | np.ndarray,
            targets: typing.Sequence[int] | np.ndarray,
            directed: bool,
            attributes: np.ndarray | None = None,
            node_labels: typing.Sequence[str] | None = None,
            attribute_names: typing.Sequence[str] | None = None,
            log_messages: LogMessages | None = None
    ) -> AttributedGraph:
        if node_count < 1:
            raise GraphFormatError('empty graph: at least one node is required')

        if attributes is None:
            attributes = np.zeros((node_count, 1))
        attributes = np.asarray(attributes, dtype=float)
        if attributes.ndim != 2 or attributes.shape[0] != node_count:
            raise GraphFormatError(
                f'attribute matrix has shape {attributes.shape}, expected {node_count} rows'
            )
        if not np.all(np.isfinite(attributes)):
            raise GraphFormatError('attribute matrix contains non-finite values')
        if node_labels is not None and len(node_labels) != node_count:
            raise GraphFormatError(f'{len(node_labels)} labels given for {node_count} nodes')

        sources = np.asarray(sources, dtype=np.int64).reshape(-1)
        targets = np.asarray(targets, dtype=np.int64).reshape(-1)
        if sources.shape != targets.shape:
            raise GraphFormatError('edge source and target lists differ in length')
        out_of_range = (sources < 0) | (sources >= node_count) | (targets < 0) | (targets >= node_count)
        if np.any(out_of_range):
            bad = int(np.flatnonzero(out_of_range)[0])
            raise NodeIndexError(f'edge ({sources[bad]}, {targets[bad]}) references a node outside [0, {node_count})')

        loops = sources == targets
        dropped_self_loops = int(np.count_nonzero(loops))
        sources, targets = sources[~loops], targets[~loops]

        if not directed:
            sources, targets = np.minimum(sources, targets), np.maximum(sources, targets)
        keys = np.unique(sources * node_count + targets)
        dropped_duplicates = int(sources.size - keys.size)
        sources, targets = keys // node_count, keys % node_count

        if not directed:
            sources, targets = np.concatenate([sources, targets]), np.concatenate([targets, sources])

        adjacency = sp.csr_matrix(
            (np.ones(sources.size), (sources, targets)), shape=(node_count, node_count)
        )
        adjacency.sort_indices()

        if dropped_self_loops:
            log(log_messages, f'Dropped {dropped_self_loops} self-loop(s)', LogLevels.INFO)
        if dropped_duplicates:
            log(log_messages, f'Collapsed {dropped_duplicates} duplicate edge(s)', LogLevels.INFO)

        return cls(
            node_count, directed, adjacency, attributes, node_labels, attribute_names,
            dropped_self_loops=dropped_self_loops, dropped_duplicates=dropped_duplicates
        )

    @classmethod
    def from_networkx(cls, graph: nx.Graph, attributes: np.ndarray | None = None) -> AttributedGraph:
        """Relabel a networkx graph to 0..N-1 in sorted node order"""
        relabeled = nx.convert_node_labels_to_integers(graph, ordering='sorted', label_attribute='original')
        labels = [str(i) for i in range(relabeled.number_of_nodes())]
        edges = np.array(list(relabeled.edges()), dtype=np.int64).reshape(-1, 2)
        return cls.from_edges(
            relabeled.number_of_nodes(), edges[:, 0], edges[:, 1], relabeled.is_directed(),
            attributes=attributes, node_labels=labels
        )

    # Views

    @property
    def adjacency(self) -> sp.csr_matrix:
        return self._adjacency

    @property
    def in_adjacency_matrix(self) -> sp.csr_matrix:
        return self._in_adjacency

    @property
    def undirected_adjacency(self) -> sp.csr_matrix:
        """Adjacency with direction ignored (binary, symmetric)"""
        if self._undirected is None:
            symmetric = (self._adjacency + self._adjacency.T).tocsr()
            symmetric.data[:] = 1.0
            symmetric.sort_indices()
            self._undirected = symmetric
        return self._undirected

    @property
    def out_adjacency(self) -> list[list[int]]:
        return _rows(self._adjacency)

    @property
    def in_adjacency(self) -> list[list[int]]:
        return _rows(self._in_adjacency)

    @property
    def attribute_count(self) -> int:
        return int(self.attributes.shape[1])

    @property
    def edge_count(self) -> int:
        if self.directed:
            return int(self._adjacency.nnz)
        return int(self._adjacency.nnz // 2)

    def out_neighbors(self, node: int) -> np.ndarray:
        check_node(self, node)
        return self._adjacency.indices[self._adjacency.indptr[node]:self._adjacency.indptr[node + 1]]

    def in_neighbors(self, node: int) -> np.ndarray:
        check_node(self, node)
        return self._in_adjacency.indices[self._in_adjacency.indptr[node]:self._in_adjacency.indptr[node + 1]]

    def neighbors(self, node: int) -> np.ndarray:
        """In- and out-neighbors together"""
        check_node(self, node)
        undirected = self.undirected_adjacency
        return undirected.indices[undirected.indptr[node]:undirected.indptr[node + 1]]

    def out_degrees(self) -> np.ndarray:
        return np.diff(self._adjacency.indptr)

    def in_degrees(self) -> np.ndarray:
        return np.diff(self._in_adjacency.indptr)

    def neighbor_counts(self) -> np.ndarray:
        return np.diff(self.undirected_adjacency.indptr)

    def edge_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Edge list; undirected edges appear once with source < target"""
        coo = self._adjacency.tocoo()
        sources, targets = coo.row.astype(np.int64), coo.col.astype(np.int64)
        if not self.directed:
            keep = sources < targets
            sources, targets = sources[keep], targets[keep]
        order = np.lexsort((targets, sources))
        return sources[order], targets[order]

    def is_isolated(self) -> np.ndarray:
        return self.neighbor_counts() == 0

    def index_of(self, label: str) -> int:
        try:
            return self.node_labels.index(label)
        except ValueError:
            raise NodeIndexError(f'unknown node {label}')

    def with_attributes(self, attributes: np.ndarray) -> AttributedGraph:
        attributes = np.asarray(attributes, dtype=float)
        if attributes.shape[0] != self.node_count or not np.all(np.isfinite(attributes)):
            raise GraphFormatError('replacement attribute matrix must have N rows of finite values')
        return AttributedGraph(
            self.node_count, self.directed, self._adjacency, attributes,
            self.node_labels, self.attribute_names if attributes.shape[1] == self.attribute_count else None
        )

    def to_networkx(self) -> nx.Graph:
        graph: nx.Graph = nx.DiGraph() if self.directed else nx.Graph()
        graph.add_nodes_from(range(self.node_count))
        sources, targets = self.edge_arrays()
        graph.add_edges_from(zip(sources.tolist(), targets.tolist()))
        return graph


def _rows(matrix: sp.csr_matrix) -> list[list[int]]:
    return [matrix.indices[matrix.indptr[i]:matrix.indptr[i + 1]].tolist() for i in range(matrix.shape[0])]


def check_node(g: AttributedGraph, node: int) -> None:
    if isinstance(node, bool) or not isinstance(node, (int, np.integer)) or not 0 <= node < g.node_count:
        raise NodeIndexError(f'node {node!r} is out of range [0, {g.node_count})')


# Loading


def detect_delimiter(lines: list[str]) -> str:
    """Tab if the first data line contains one, comma otherwise"""
    return '\t' if lines and '\t' in lines[0] else ','


def _read_table(path: Path, header: int | None, min_fields: int | None = None) -> pd.DataFrame:
    """Parse the data lines of ``path``; with ``header`` every row must be as wide as the header row"""
    lines = data_lines(path)
    sep = detect_delimiter(lines)
    widths = [len(row) for row in csv.reader(lines, delimiter=sep, skipinitialspace=True)]
    for row, width in enumerate(widths):
        if header is not None and width != widths[0]:
            raise GraphFormatError(
                f'ragged attribute rows in "{path}": row {row} has {width} fields, the header has {widths[0]}'
            )
        if min_fields is not None and width < min_fields:
            raise GraphFormatError(f'malformed edge file "{path}": row {row + 1} needs a source and a target')
    return pd.read_csv(
        io.StringIO('\n'.join(lines)),
        sep=sep,
        header=header,
        dtype=str,
        keep_default_na=False,
        index_col=False,
        skipinitialspace=True,
    )


def read_attribute_table(attribute_file: Path) -> tuple[list[str], list[str], np.ndarray]:
    """Labels, attribute names and the numeric matrix of an attribute file"""
    try:
        frame = _read_table(attribute_file, header=0)
    except pd.errors.EmptyDataError:
        raise GraphFormatError(f'empty graph: attribute file "{attribute_file}" has no rows')
    except pd.errors.ParserError as e:
        raise GraphFormatError(f'ragged attribute rows in "{attribute_file}": {e}')
    except (OSError, UnicodeDecodeError) as e:
        raise GraphFormatError(f'cannot read attribute file "{attribute_file}": {e}')

    if frame.shape[0] == 0:
        raise GraphFormatError(f'empty graph: attribute file "{attribute_file}" has no rows')
    if frame.shape[1] < 2:
        raise GraphFormatError(f'attribute file "{attribute_file}" needs a label column and at least one attribute')

    labels = [str(label).strip() for label in frame.iloc[:, 0]]
    duplicated = pd.Index(labels).duplicated()
    if duplicated.any():
        raise GraphFormatError(f'duplicate node label {labels[int(np.flatnonzero(duplicated)[0])]}')

    names = [str(name).strip() for name in frame.columns[1:]]
    columns: list[np.ndarray] = []
    for position, name in enumerate(frame.columns[1:], start=1):
        raw = frame.iloc[:, position].str.strip()
        values = pd.to_numeric(raw, errors='coerce').to_numpy(dtype=float)
        bad = ~np.isfinite(values)
        if bad.any():
            row = int(np.flatnonzero(bad)[0])
            raise GraphFormatError(
                f'non-numeric attribute cell {raw.iloc[row]!r} (node {labels[row]}, column {name})'
            )
        columns.append(values)
    return labels, names, np.column_stack(columns)


def load_graph(
        edge_file: Path | str,
        attribute_file: Path | str,
        directed: bool,
        log_messages: LogMessages | None = None
) -> AttributedGraph:
    """Read an edge list and an attribute table into an AttributedGraph.

    Node ids follow the row order of the attribute file, so nodes without
    edges are kept.
    """
    edge_file, attribute_file = Path(edge_file), Path(attribute_file)
    labels, names, attributes = read_attribute_table(attribute_file)

    try:
        edges = _read_table(edge_file, header=None, min_fields=2)
    except pd.errors.EmptyDataError:
        edges = pd.DataFrame(columns=[0, 1], dtype=str)
    except pd.errors.ParserError as e:
        raise GraphFormatError(f'malformed edge file "{edge_file}": {e}')
    except (OSError, UnicodeDecodeError) as e:
        raise GraphFormatError(f'cannot read edge file "{edge_file}": {e}')

    if edges.shape[0] and (edges.shape[1] < 2 or edges.iloc[:, :2].isna().any().any()):
        raise GraphFormatError(f'malformed edge file "{edge_file}": every row needs a source and a target')

    index = pd.Index(labels)
    endpoints: list[np.ndarray] = []
    for position in (0, 1):
        column = edges.iloc[:, position].astype(str).str.strip() if edges.shape[0] else pd.Series([], dtype=str)
        ids = index.get_indexer(column)
        if np.any(ids < 0):
            raise GraphFormatError(f'unknown node {column.iloc[int(np.flatnonzero(ids < 0)[0])]}')
        endpoints.append(ids)

    log(log_messages, f'Loaded {len(labels)} nodes and {edges.shape[0]} edge rows from "{edge_file}"',
        LogLevels.DEBUG)
    return AttributedGraph.from_edges(
        len(labels), endpoints[0], endpoints[1], directed,
        attributes=attributes, node_labels=labels, attribute_names=names, log_messages=log_messages
    )


def write_graph(g: AttributedGraph, edge_file: Path, attribute_file: Path, header_lines: list[str]) -> None:
    """Write the edge list and attribute table in the format load_graph reads"""
    sources, targets = g.edge_arrays()
    labels = np.array(g.node_labels, dtype=object)
    edge_frame = pd.DataFrame({'source': labels[sources], 'target': labels[targets]})
    write_frame(edge_frame, edge_file, header_lines, header=False)

    attribute_frame = pd.DataFrame(g.attributes, columns=list(g.attribute_names))
    attribute_frame.insert(0, 'label', list(g.node_labels))
    write_frame(attribute_frame, attribute_file, header_lines)


# Attribute scaling


def normalize_attributes(g: AttributedGraph, mode: str) -> AttributedGraph:
    """Column-wise min-max or z-score scaling; constant columns become 0"""
    if mode not in NORMALIZATION_MODES:
        raise ValueError(f'unknown normalization mode {mode!r}')
    if mode == 'none':
        return g
    scaler = MinMaxScaler() if mode == 'min_max' else StandardScaler()
    return g.with_attributes(scaler.fit_transform(g.attributes))


# Neighborhoods and paths


def hop_distances(g: AttributedGraph, source: int, max_hops: int | None = None) -> dict[int, int]:
    """Hop counts ignoring edge direction; the source itself is left out"""
    check_node(g, source)
    distances = csgraph.dijkstra(
        g.undirected_adjacency, directed=True, indices=source, unweighted=True,
        limit=np.inf if max_hops is None else max_hops + 0.5
    )
    reachable = np.flatnonzero(np.isfinite(distances))
    return {int(node): int(distances[node]) for node in reachable if node != source}


def khop_neighborhood(g: AttributedGraph, v: int, k: int) -> set[int]:
    if k < 1:
        raise ValueError('hop count must be at least 1')
    return set(hop_distances(g, v, k))


def induced_adjacency(g: AttributedGraph, nodes: np.ndarray) -> sp.csr_matrix:
    return g.adjacency[nodes][:, nodes]


def shortest_path_lengths(
        g: AttributedGraph,
        source: int,
        restrict_to: typing.Iterable[int] | None = None
) -> dict[int, int]:
    """Unweighted distances from source along edge direction.

    With ``restrict_to`` the paths may only use nodes of that set (the
    source is always usable). Unreachable nodes are absent.
    """
    check_node(g, source)
    if restrict_to is None:
        nodes = np.arange(g.node_count)
    else:
        allowed = {int(node) for node in restrict_to} | {source}
        for node in allowed:
            check_node(g, node)
        nodes = np.array(sorted(allowed), dtype=np.int64)

    position = int(np.searchsorted(nodes, source))
    distances = csgraph.dijkstra(
        induced_adjacency(g, nodes), directed=True, indices=position, unweighted=True
    )
    return {
        int(nodes[i]): int(distances[i])
        for i in np.flatnonzero(np.isfinite(distances)) if i != position
    }


# Surgery


def remove_and_redirect(g: AttributedGraph, removed: int, replacement: int | None = None) -> AttributedGraph:
    """Isolate ``removed``; with a replacement, its edges are re-attached there first"""
    check_node(g, removed)
    if replacement is not None:
        check_node(g, replacement)
        if replacement == removed:
            raise NodeIndexError(f'replacement {replacement} is the removed node itself')

    sources, targets = g.edge_arrays()
    if replacement is None:
        keep = (sources != removed) & (targets != removed)
        sources, targets = sources[keep], targets[keep]
    else:
        sources = np.where(sources == removed, replacement, sources)
        targets = np.where(targets == removed, replacement, targets)

    return AttributedGraph.from_edges(
        g.node_count, sources, targets, g.directed,
        attributes=g.attributes, node_labels=g.node_labels, attribute_names=g.attribute_names
    )
