"""UniqueRank: uniqueness-biased structural walk plus attribute walk, refined by dominance count."""
import numpy as np
from uniquerank.core.registry import RankContext, Selection
from uniquerank.core.ranking import uniquerank
from uniquerank.core.refinement import ScorePlane, refine_top_k, top_k_by_score


def score(context: RankContext) -> np.ndarray:
    return uniquerank(
        context.g, context.s, context.config, context.uniform_jump, context.log_messages
    ).scores


def select(context: RankContext, scores: np.ndarray, k: int) -> Selection:
    if not context.refine:
        return Selection(top_k_by_score(scores, k))

    seeds = top_k_by_score(scores, context.seed_size(k))
    plane = ScorePlane(context.importance, context.uniqueness, seeds)
    return Selection(
        refine_top_k(plane, k, tracker_init=context.tracker_init, tie_break=context.tie_break),
        refined=True
    )
