"""Harmonic closeness centrality along edge direction."""
import numpy as np
from uniquerank.core.registry import RankContext
from uniquerank.core.ranking import centrality


def score(context: RankContext) -> np.ndarray:
    return centrality(context.g, 'closeness')
