"""Vertex-transitive test graphs and attribute perturbations with a known ranking answer."""
from __future__ import annotations
import typing

import networkx as nx
import numpy as np

from uniquerank.core.base import GraphFormatError, NodeIndexError, RankingConfig, LogMessages
from uniquerank.core.graph import AttributedGraph
from uniquerank.core.kernel import similarity_matrix
from uniquerank.core.ranking import uniquerank

SYMMETRIC_KINDS: dict[str, tuple[typing.Callable[[int], nx.Graph], int, str]] = {
    'cycle': (nx.cycle_graph, 3, 'cycle size'),
    'complete': (nx.complete_graph, 2, 'complete graph size'),
    'hypercube': (nx.hypercube_graph, 1, 'hypercube dimension'),
}

DELTA_LOW = 0.5
DELTA_HIGH = 1.0


def make_symmetric_graph(kind: str, size_param: int, attribute_count: int = 1) -> AttributedGraph:
    """Cycle on n nodes, complete graph on n nodes or the d-dimensional hypercube, with zero attributes"""
    if kind not in SYMMETRIC_KINDS:
        raise GraphFormatError(f'unknown symmetric graph kind {kind!r} (expected one of {", ".join(SYMMETRIC_KINDS)})')
    generator, minimum, what = SYMMETRIC_KINDS[kind]
    if size_param < minimum:
        raise GraphFormatError(f'{what} must be at least {minimum} (got {size_param})')
    if attribute_count < 1:
        raise GraphFormatError('at least one attribute column is required')

    # hypercube nodes are bit tuples; sorted order matches their binary value
    graph = AttributedGraph.from_networkx(generator(size_param))
    return graph.with_attributes(np.zeros((graph.node_count, attribute_count)))


class PerturbationSpec:
    def __init__(
            self,
            base_attributes: typing.Sequence[float] | np.ndarray,
            perturbed_nodes: typing.Iterable[int],
            perturbation_delta: typing.Sequence[float] | np.ndarray,
            seed: int = 0
    ) -> None:
        base = np.asarray(base_attributes, dtype=float).reshape(-1)
        delta = np.asarray(perturbation_delta, dtype=float).reshape(-1)
        nodes = sorted({int(node) for node in perturbed_nodes})
        if base.shape != delta.shape:
            raise GraphFormatError('base attributes and perturbation delta differ in length')
        if not np.any(delta != 0.0):
            raise GraphFormatError('perturbation delta must not be the zero vector')
        if not nodes:
            raise GraphFormatError('at least one node must be perturbed')
        if nodes[0] < 0:
            raise NodeIndexError(f'perturbed node {nodes[0]} is negative')

        self.base_attributes: np.ndarray = base
        self.perturbed_nodes: list[int] = nodes
        self.perturbation_delta: np.ndarray = delta
        self.seed: int = seed

    @classmethod
    def random(cls, g: AttributedGraph, perturbed_count: int, seed: int = 0) -> PerturbationSpec:
        """Seeded choice of nodes and a delta drawn uniformly from [0.5, 1] per attribute"""
        if not 1 <= perturbed_count <= g.node_count:
            raise GraphFormatError(f'cannot perturb {perturbed_count} of {g.node_count} nodes')
        rng = np.random.default_rng(seed)
        nodes = rng.choice(g.node_count, size=perturbed_count, replace=False)
        delta = rng.uniform(DELTA_LOW, DELTA_HIGH, size=g.attribute_count)
        return cls(np.zeros(g.attribute_count), nodes.tolist(), delta, seed)

    def as_dict(self) -> dict[str, typing.Any]:
        return {
            'base_attributes': self.base_attributes.tolist(),
            'perturbed_nodes': list(self.perturbed_nodes),
            'perturbation_delta': self.perturbation_delta.tolist(),
            'seed': self.seed,
        }


def apply_perturbation(g: AttributedGraph, spec: PerturbationSpec) -> AttributedGraph:
    if spec.base_attributes.size != g.attribute_count:
        raise GraphFormatError(
            f'perturbation has {spec.base_attributes.size} attributes, graph has {g.attribute_count}'
        )
    if spec.perturbed_nodes[-1] >= g.node_count:
        raise NodeIndexError(f'perturbed node {spec.perturbed_nodes[-1]} is out of range [0, {g.node_count})')

    attributes = np.tile(spec.base_attributes, (g.node_count, 1))
    attributes[spec.perturbed_nodes] += spec.perturbation_delta
    return g.with_attributes(attributes)


def ground_truth_check(
        g: AttributedGraph,
        spec: PerturbationSpec,
        config: RankingConfig,
        gamma: float = 1.0,
        log_messages: LogMessages | None = None
) -> bool:
    """True iff every perturbed node scores strictly above every default node"""
    perturbed = np.zeros(g.node_count, dtype=bool)
    perturbed[[node for node in spec.perturbed_nodes if node < g.node_count]] = True
    if perturbed.all() or not perturbed.any():
        return False

    scores = uniquerank(g, similarity_matrix(g, gamma), config, log_messages=log_messages).scores
    return bool(scores[perturbed].min() - scores[~perturbed].max() > 1e-12)
