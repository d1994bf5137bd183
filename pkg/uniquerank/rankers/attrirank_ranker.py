"""AttriRank: the chain with every destination weight equal to 1."""
import numpy as np
from uniquerank.core.registry import RankContext


def score(context: RankContext) -> np.ndarray:
    return context.importance
