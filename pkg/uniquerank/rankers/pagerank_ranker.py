"""PageRank: structure-only walk with uniform teleportation."""
import numpy as np
from uniquerank.core.registry import RankContext
from uniquerank.core.ranking import pagerank


def score(context: RankContext) -> np.ndarray:
    return pagerank(context.g, context.config, context.log_messages).scores
