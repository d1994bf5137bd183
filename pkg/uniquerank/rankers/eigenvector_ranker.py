"""Eigenvector centrality of the symmetrized adjacency."""
import numpy as np
from uniquerank.core.registry import RankContext
from uniquerank.core.ranking import centrality


def score(context: RankContext) -> np.ndarray:
    return centrality(context.g, 'eigenvector', max_iterations=context.config.max_iterations)
