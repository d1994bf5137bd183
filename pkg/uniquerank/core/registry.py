"""Ranking-method plug-ins and the shared per-run context they score against."""
from __future__ import annotations
from pathlib import Path
import importlib
import importlib.util
import pkgutil
import re
import sys
import types

import numpy as np

from uniquerank.core.base import (
    RankingConfig,
    UnknownMethodError,
    RefinementError,
    LogMessages,
    LogLevels,
    log,
)
from uniquerank.core.graph import AttributedGraph
from uniquerank.core.kernel import Similarity, uniqueness_scores
from uniquerank.core.ranking import RankVector, attrirank
from uniquerank.core.refinement import top_k_by_score

NAIVE_PATTERN = re.compile(r'^naive\(\s*([0-9]*\.?[0-9]+)\s*\)$')


class Selection:
    def __init__(self, nodes: list[int], shortfall: bool = False, refined: bool = False) -> None:
        self.nodes: list[int] = nodes
        self.shortfall: bool = shortfall
        self.refined: bool = refined


class RankerLoader:
    def __init__(self) -> None:
        self.CONFIG_DIR = Path.home() / '.config' / 'uniquerank'
        self.PER_RANKER_PY_DIR = self.CONFIG_DIR / 'py_rankers'

    @staticmethod
    def discover_builtin_rankers(rankers_pkg: types.ModuleType) -> list[str]:
        """Discover built-in rankers in uniquerank/rankers/*_ranker.py"""
        return sorted(
            module.name[:-len('_ranker')]
            for module in pkgutil.iter_modules(rankers_pkg.__path__)
            if module.name.endswith('_ranker')
        )

    @staticmethod
    def load_builtin_ranker_modules(ranker_names: list[str]) -> dict[str, types.ModuleType]:
        return {
            name: importlib.import_module(f'uniquerank.rankers.{name}_ranker')
            for name in ranker_names
        }

    def discover_custom_rankers(self) -> list[str]:
        """Discover user-defined rankers in ~/.config/uniquerank/py_rankers/*_ranker.py"""
        if not self.PER_RANKER_PY_DIR.exists():
            return []
        return sorted(
            file.stem[:-len('_ranker')]
            for file in self.PER_RANKER_PY_DIR.iterdir()
            if file.is_file() and file.name.endswith('_ranker.py')
        )

    def load_custom_ranker_modules(self) -> dict[str, types.ModuleType]:
        """Load custom rankers dynamically from files"""
        modules: dict[str, types.ModuleType] = {}
        for name in self.discover_custom_rankers():
            file = self.PER_RANKER_PY_DIR / f'{name}_ranker.py'
            module_name = f'uniquerank_custom_{name}_ranker'
            spec = importlib.util.spec_from_file_location(module_name, file)
            if spec and spec.loader:
                module = importlib.util.module_from_spec(spec)
                sys.modules[module_name] = module
                spec.loader.exec_module(module)
                modules[name] = module
        return modules

    def load_all(self, include_custom: bool = True) -> dict[str, types.ModuleType]:
        import uniquerank.rankers as rankers_pkg

        modules = self.load_builtin_ranker_modules(self.discover_builtin_rankers(rankers_pkg))
        if include_custom:
            modules = modules | self.load_custom_ranker_modules()
        return modules


def builtin_rankers() -> dict[str, types.ModuleType]:
    return RankerLoader().load_all(include_custom=False)


class RankContext:
    """Graph, similarity and settings for one run, with the shared scores cached"""
    def __init__(
            self,
            g: AttributedGraph,
            s: Similarity,
            config: RankingConfig,
            rankers: dict[str, types.ModuleType] | None = None,
            uniform_jump: bool = False,
            k_seed: int | None = None,
            refine: bool = True,
            tracker_init: str = 'infinity',
            tie_break: str = 'sum_first',
            log_messages: LogMessages | None = None
    ) -> None:
        self.g: AttributedGraph = g
        self.s: Similarity = s
        self.config: RankingConfig = config
        self.rankers: dict[str, types.ModuleType] = rankers if rankers is not None else builtin_rankers()
        self.uniform_jump: bool = uniform_jump
        self.k_seed: int | None = k_seed
        self.refine: bool = refine
        self.tracker_init: str = tracker_init
        self.tie_break: str = tie_break
        self.log_messages: LogMessages | None = log_messages
        self._scores: dict[str, np.ndarray] = {}
        self._importance: RankVector | None = None
        self._uniqueness: np.ndarray | None = None

    def with_config(self, config: RankingConfig) -> RankContext:
        """Same inputs under other chain settings; uniqueness is reused"""
        other = RankContext(
            self.g, self.s, config, self.rankers, self.uniform_jump, self.k_seed, self.refine,
            self.tracker_init, self.tie_break, self.log_messages
        )
        other._uniqueness = self._uniqueness
        if config.replace(alpha=1.0).as_dict() == self.config.replace(alpha=1.0).as_dict():
            other._importance = self._importance
        return other

    @property
    def importance(self) -> np.ndarray:
        """AttriRank scores, the importance axis of the score plane"""
        if self._importance is None:
            self._importance = attrirank(self.g, self.s, self.config, self.uniform_jump, self.log_messages)
        return self._importance.scores

    @property
    def uniqueness(self) -> np.ndarray:
        if self._uniqueness is None:
            self._uniqueness = uniqueness_scores(self.g, self.s)
        return self._uniqueness

    def ranker(self, method: str) -> types.ModuleType:
        module = self.rankers.get(method)
        if module is None or not hasattr(module, 'score'):
            raise UnknownMethodError(method, list(self.rankers))
        return module

    def validate_method(self, method: str) -> None:
        if parse_naive(method) is None:
            self.ranker(method)

    def scores(self, method: str) -> np.ndarray:
        naive_threshold = parse_naive(method)
        if naive_threshold is not None:
            return self.importance
        if method not in self._scores:
            scores = np.asarray(self.ranker(method).score(self), dtype=float)
            if scores.shape != (self.g.node_count,):
                raise UnknownMethodError(method, list(self.rankers))
            self._scores[method] = scores
            log(self.log_messages, f'Scored {self.g.node_count} nodes with {method}', LogLevels.DEBUG)
        return self._scores[method]

    def select(self, method: str, k: int) -> Selection:
        """The method's top-k nodes in rank order"""
        naive_threshold = parse_naive(method)
        if naive_threshold is not None:
            from uniquerank.core.evaluation import naive_baseline_select

            return naive_baseline_select(
                self.g, self.s, self.importance, naive_threshold, k, log_messages=self.log_messages
            )

        module = self.ranker(method)
        scores = self.scores(method)
        k = min(k, self.g.node_count)
        if hasattr(module, 'select'):
            return module.select(self, scores, k)
        return Selection(top_k_by_score(scores, k))

    def seed_size(self, k: int) -> int:
        k_seed = self.k_seed if self.k_seed is not None else k
        k_seed = min(k_seed, self.g.node_count)
        if k_seed < k:
            raise RefinementError(f'k = {k} exceeds the seed set size {k_seed}')
        return k_seed


def parse_naive(method: str) -> float | None:
    """Threshold of a 'naive(<t>)' method name, None for other names"""
    match = NAIVE_PATTERN.match(method.strip())
    if match is None:
        if method.strip().startswith('naive'):
            raise UnknownMethodError(method, [])
        return None
    threshold = float(match.group(1))
    if not 0 < threshold <= 1:
        raise UnknownMethodError(method, [])
    return threshold


def naive_method(threshold: float) -> str:
    return f'naive({threshold:g})'
