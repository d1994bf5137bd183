"""Degree centrality: neighbor count (in + out on directed graphs)."""
import numpy as np
from uniquerank.core.registry import RankContext
from uniquerank.core.ranking import centrality


def score(context: RankContext) -> np.ndarray:
    return centrality(context.g, 'degree')
