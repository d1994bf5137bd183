from __future__ import annotations  # allows forward references in type hints
from enum import Enum
from pathlib import Path
import math
import os
import sys
import typing
import yaml
import yaml.parser
import yaml.scanner
from dotenv import load_dotenv
import psutil


class GraphFormatError(Exception):
    """Raised when an edge or attribute file cannot be turned into a graph"""
    def __init__(self, error_details: str) -> None:
        self.error_details: str = error_details
        super().__init__(error_details)


class NodeIndexError(Exception):
    """Raised when a node id is out of range or otherwise not allowed"""
    def __init__(self, error_details: str) -> None:
        self.error_details: str = error_details
        super().__init__(error_details)


class KernelError(Exception):
    """Raised when similarity inputs are invalid"""
    def __init__(self, error_details: str) -> None:
        self.error_details: str = error_details
        super().__init__(error_details)


class DenseMatrixTooLarge(Exception):
    def __init__(self, node_count: int, cap: int, reason: str) -> None:
        self.node_count = node_count
        self.cap = cap
        self.reason = reason
        super().__init__(node_count, cap)

    def __repr__(self) -> str:
        return self.__str__()

    def __str__(self) -> str:
        return \
            f'Dense similarity matrix refused for N={self.node_count} (cap {self.cap}): {self.reason}. ' \
            f'Use --uniform-jump to rank without the dense attribute walk.'


class ConvergenceError(Exception):
    def __init__(self, what: str, iterations: int) -> None:
        self.what = what
        self.iterations = iterations
        super().__init__(what, iterations)

    def __str__(self) -> str:
        return f'{self.what} did not converge after {self.iterations} iterations'


class RefinementError(Exception):
    """Raised when a score plane or refinement request is invalid"""
    def __init__(self, error_details: str) -> None:
        self.error_details: str = error_details
        super().__init__(error_details)


class UnknownMethodError(Exception):
    def __init__(self, method: str, known: list[str]) -> None:
        self.method = method
        self.known = known
        super().__init__(method)

    def __str__(self) -> str:
        return f'Unknown method "{self.method}" (known: {", ".join(sorted(self.known))}, naive(<threshold>))'


class YAMLParseException(Exception):
    """Raised to signal that there was an error parsing a YAML file"""


class ConfigFileNotFoundError(Exception):
    def __init__(self, error_details: str) -> None:
        self.error_details: str = error_details
        super().__init__(error_details)


class ConfigSpecificException(Exception):
    def __init__(self, log_messages: LogMessages) -> None:
        self.log_messages: LogMessages = log_messages
        super().__init__(log_messages)

    def __str__(self) -> str:
        return '; '.join(str(message) for message in self.log_messages.log_messages)


class ConfigScanFoundError(Exception):
    def __init__(self, log_messages: LogMessages) -> None:
        self.log_messages: LogMessages = log_messages
        super().__init__(log_messages)


class UnknownException(Exception):
    def __init__(self, log_messages: LogMessages, error_message: str) -> None:
        self.log_messages: LogMessages = log_messages
        self.error_message = error_message
        super().__init__(log_messages, error_message)


class LogLevels(Enum):
    UNKNOWN = (0, '? Unknown')
    INFO = (1, 'Info')
    DEBUG = (2, 'Debug')
    WARNING = (3, 'Warnings')
    ERROR = (4, 'Errors')

    @property
    def key(self) -> int:
        return self.value[0]

    @property
    def label(self) -> str:
        return self.value[1]

    @classmethod
    def from_key(cls, key: int) -> LogLevels:
        """Return the LogLevels member that matches the key"""
        for level in cls:
            if level.key == key:
                return level
        return LogLevels.UNKNOWN


class LogMessage:
    def __init__(self, message: str, level: int) -> None:
        self.message: str = message
        self.level: int = level

    def __str__(self) -> str:
        return self.message

    def __repr__(self) -> str:
        return self.message

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LogMessage):
            return NotImplemented
        return self.message == other.message and self.level == other.level

    def is_error(self) -> bool:
        return self.level == LogLevels.ERROR.key


class LogMessages:
    def __init__(self, log_messages: list[LogMessage] | None = None) -> None:
        if log_messages is None:
            self.log_messages: list[LogMessage] = []
        else:
            self.log_messages = log_messages

    def __add__(self, other: LogMessages) -> LogMessages:
        new_log: LogMessages = LogMessages()
        new_log.log_messages = self.log_messages + other.log_messages
        return new_log

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LogMessages):
            return NotImplemented
        return self.log_messages == other.log_messages

    def __len__(self) -> int:
        return len(self.log_messages)

    def add_log_message(self, message: LogMessage) -> None:
        self.log_messages.append(message)

    def info(self, message: str) -> None:
        self.add_log_message(LogMessage(message, LogLevels.INFO.key))

    def debug(self, message: str) -> None:
        self.add_log_message(LogMessage(message, LogLevels.DEBUG.key))

    def warning(self, message: str) -> None:
        self.add_log_message(LogMessage(message, LogLevels.WARNING.key))

    def error(self, message: str) -> None:
        self.add_log_message(LogMessage(message, LogLevels.ERROR.key))

    def print_log_messages(
            self,
            heading: str,
            file: typing.TextIO | None = None,
            include_debug: bool = True
    ) -> None:
        stream = file if file is not None else sys.stderr
        shown = [message for message in self.log_messages
                 if include_debug or message.level != LogLevels.DEBUG.key]
        if not shown:
            return

        print(heading, end='', file=stream)
        log_messages_by_level: dict[int, list[LogMessage]] = {}
        for message in shown:
            log_messages_by_level.setdefault(message.level, []).append(message)

        for level in sorted(log_messages_by_level.keys()):
            print(f'\n{LogLevels.from_key(level).label}:', file=stream)
            for message in log_messages_by_level[level]:
                print(message, file=stream)

    def contains_error(self) -> bool:
        return any(message.is_error() for message in self.log_messages)

    def is_empty(self) -> bool:
        return not self.log_messages


def log(log_messages: LogMessages | None, message: str, level: LogLevels) -> None:
    """Append to an optional collector; library calls accept None"""
    if log_messages is not None:
        log_messages.add_log_message(LogMessage(message, level.key))


# Config


NORMALIZATION_MODES: tuple[str, ...] = ('min_max', 'z_score', 'none')
INIT_MODES: tuple[str, ...] = ('uniform', 'random')
TRACKER_INITS: tuple[str, ...] = ('infinity', 'one')
TIE_BREAKS: tuple[str, ...] = ('sum_first', 'uniqueness_first')


class RankingConfig:
    """Damping, trade-off and power-iteration settings for the Markov chain"""
    def __init__(
            self,
            d: float = 0.85,
            alpha: float = 0.5,
            tolerance: float = 1e-10,
            max_iterations: int = 1000,
            init: str = 'uniform',
            seed: int = 0
    ) -> None:
        errors: LogMessages = LogMessages()

        if not _is_real(d) or not 0.0 <= d <= 1.0:
            errors.error(f'Configuration for d must be in [0, 1] (got {d!r})')
        if not _is_real(alpha) or not 0.0 <= alpha <= 1.0:
            errors.error(f'Configuration for alpha must be in [0, 1] (got {alpha!r})')
        if not _is_real(tolerance) or not tolerance > 0.0:
            errors.error(f'Configuration for tolerance must be positive (got {tolerance!r})')
        if not isinstance(max_iterations, int) or isinstance(max_iterations, bool) or max_iterations < 1:
            errors.error(f'Configuration for max_iterations must be a positive integer (got {max_iterations!r})')
        if init not in INIT_MODES:
            errors.error(f'Configuration for init must be one of {", ".join(INIT_MODES)} (got {init!r})')
        if not isinstance(seed, int) or isinstance(seed, bool):
            errors.error(f'Configuration for seed must be an integer (got {seed!r})')

        if errors.contains_error():
            raise ConfigSpecificException(errors)

        self.d: float = float(d)
        self.alpha: float = float(alpha)
        self.tolerance: float = float(tolerance)
        self.max_iterations: int = max_iterations
        self.init: str = init
        self.seed: int = seed

    def replace(self, **changes: typing.Any) -> RankingConfig:
        values = self.as_dict()
        values.update(changes)
        return RankingConfig(**values)

    def as_dict(self) -> dict[str, typing.Any]:
        return {
            'd': self.d,
            'alpha': self.alpha,
            'tolerance': self.tolerance,
            'max_iterations': self.max_iterations,
            'init': self.init,
            'seed': self.seed,
        }


def _is_real(value: typing.Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)


class StandardFallBackConfig:
    def __init__(self) -> None:
        self.ranking: dict[str, typing.Any] = RankingConfig().as_dict()

        self.kernel: dict[str, typing.Any] = {
            'gamma': 'median',
            'sample_pairs': 10000,
            'seed': 0,
            'dense_cap': 50000,
        }

        self.graph: dict[str, typing.Any] = {
            'normalization': 'min_max',
            'directed': False,
        }

        self.refinement: dict[str, typing.Any] = {
            'k_final': 5,
            'k_seed': None,
            'tracker_init': 'infinity',
            'tie_break': 'sum_first',
        }

        self.evaluation: dict[str, typing.Any] = {
            'methods': ['uniquerank', 'attrirank', 'pagerank', 'degree', 'closeness', 'eigenvector'],
            'top_k': [5, 10],
            'thresholds': [0.5, 0.7],
            'search_hops': [2],
            'efficiency_hops': 2,
            'distance_cap': 10,
            'include_removed_pairs': False,
            'baseline_thresholds': [],
            'histogram_bins': 20,
            'alphas': [0.1, 0.3, 0.5, 0.7, 0.9],
        }


class BaseConfig:
    """Validated run configuration; falls back section by section"""
    def __init__(
            self,
            log_messages: LogMessages,
            ranking: dict[str, typing.Any] | None = None,
            kernel: dict[str, typing.Any] | None = None,
            graph: dict[str, typing.Any] | None = None,
            refinement: dict[str, typing.Any] | None = None,
            evaluation: dict[str, typing.Any] | None = None,
            file_name: str = 'base',
            **kwargs: typing.Any
    ) -> None:
        fallback: StandardFallBackConfig = StandardFallBackConfig()

        for unknown_key in kwargs:
            log_messages.warning(f'Configuration key {unknown_key} is unknown and ignored ("{file_name}" config)')

        self.ranking_values = self._merge_section('ranking', ranking, fallback.ranking, log_messages, file_name)
        self.kernel = self._merge_section('kernel', kernel, fallback.kernel, log_messages, file_name)
        self.graph = self._merge_section('graph', graph, fallback.graph, log_messages, file_name)
        self.refinement = self._merge_section('refinement', refinement, fallback.refinement, log_messages,
                                              file_name)
        self.evaluation = self._merge_section('evaluation', evaluation, fallback.evaluation, log_messages,
                                              file_name)

        try:
            self.ranking: RankingConfig = RankingConfig(**self.ranking_values)
        except ConfigSpecificException as e:
            for message in e.log_messages.log_messages:
                log_messages.add_log_message(message)
            self.ranking = RankingConfig()
        except TypeError as e:
            log_messages.error(f'Configuration for ranking is invalid: {e}')
            self.ranking = RankingConfig()

        self.validate(log_messages)

    @staticmethod
    def _merge_section(
            section_name: str,
            section: dict[str, typing.Any] | None,
            defaults: dict[str, typing.Any],
            log_messages: LogMessages,
            file_name: str
    ) -> dict[str, typing.Any]:
        merged: dict[str, typing.Any] = dict(defaults)
        if section is None:
            return merged
        if not isinstance(section, dict):
            log_messages.error(f'Configuration for {section_name} must be a mapping ("{file_name}" config)')
            return merged
        for key, value in section.items():
            if key not in defaults:
                log_messages.warning(f'Configuration key {section_name}.{key} is unknown and ignored')
                continue
            merged[key] = value
        return merged

    def validate(self, log_messages: LogMessages) -> None:
        gamma = self.kernel['gamma']
        if gamma != 'median' and (not _is_real(gamma) or gamma <= 0):
            log_messages.error(f'Configuration for kernel.gamma must be "median" or a positive number (got {gamma!r})')
        for key in ('sample_pairs', 'dense_cap'):
            value = self.kernel[key]
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                log_messages.error(f'Configuration for kernel.{key} must be a positive integer (got {value!r})')
        if self.graph['normalization'] not in NORMALIZATION_MODES:
            log_messages.error(
                f'Configuration for graph.normalization must be one of {", ".join(NORMALIZATION_MODES)}'
            )
        if not isinstance(self.graph['directed'], bool):
            log_messages.error('Configuration for graph.directed must be True or False')

        k_final = self.refinement['k_final']
        k_seed = self.refinement['k_seed']
        if not isinstance(k_final, int) or isinstance(k_final, bool) or k_final < 1:
            log_messages.error(f'Configuration for refinement.k_final must be a positive integer (got {k_final!r})')
        if k_seed is not None and (not isinstance(k_seed, int) or isinstance(k_seed, bool) or k_seed < 1):
            log_messages.error(f'Configuration for refinement.k_seed must be empty or a positive integer')
        if self.refinement['tracker_init'] not in TRACKER_INITS:
            log_messages.error(f'Configuration for refinement.tracker_init must be one of {", ".join(TRACKER_INITS)}')
        if self.refinement['tie_break'] not in TIE_BREAKS:
            log_messages.error(f'Configuration for refinement.tie_break must be one of {", ".join(TIE_BREAKS)}')

        evaluation = self.evaluation
        for key in ('top_k', 'search_hops'):
            values = evaluation[key]
            if not isinstance(values, list) or not values or not all(
                    isinstance(v, int) and not isinstance(v, bool) and v >= 1 for v in values):
                log_messages.error(f'Configuration for evaluation.{key} must be a list of positive integers')
        for key in ('thresholds', 'baseline_thresholds'):
            values = evaluation[key]
            if not isinstance(values, list) or not all(_is_real(v) and 0 < v <= 1 for v in values):
                log_messages.error(f'Configuration for evaluation.{key} must be a list of numbers in (0, 1]')
        if isinstance(evaluation['thresholds'], list) and not evaluation['thresholds']:
            log_messages.error('Configuration for evaluation.thresholds must not be empty')
        if not isinstance(evaluation['methods'], list) or not evaluation['methods']:
            log_messages.error('Configuration for evaluation.methods must be a non-empty list')
        for key in ('efficiency_hops', 'distance_cap', 'histogram_bins'):
            value = evaluation[key]
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                log_messages.error(f'Configuration for evaluation.{key} must be a positive integer (got {value!r})')
        if not isinstance(evaluation['include_removed_pairs'], bool):
            log_messages.error('Configuration for evaluation.include_removed_pairs must be True or False')
        alphas = evaluation['alphas']
        if not isinstance(alphas, list) or not all(_is_real(a) and 0 <= a <= 1 for a in alphas):
            log_messages.error('Configuration for evaluation.alphas must be a list of numbers in [0, 1]')


class ConfigLoader:
    CONFIG_FILES: tuple[str, ...] = ('base.yaml', 'evaluation.yaml')

    def __init__(self, config_dir: Path | None = None) -> None:
        self.PACKAGED_CONFIG_DIR = Path(__file__).resolve().parent.parent / 'config'
        self.USER_CONFIG_DIR = Path.home() / '.config' / 'uniquerank'
        self.CONFIG_DIR = config_dir
        load_dotenv(self.USER_CONFIG_DIR / 'uniquerank.env')

    def reload_env(self) -> None:
        load_dotenv(self.USER_CONFIG_DIR / 'uniquerank.env', override=True)

    @staticmethod
    def get_env(name: str, default: typing.Any | None = None) -> str | None:
        return os.getenv(name, default)

    def thread_count(self, requested: int | None = None) -> int:
        """Worker count: flag, then UNIQUERANK_THREADS, then the logical CPU count"""
        if requested is not None:
            return max(1, requested)
        value = self.get_env('UNIQUERANK_THREADS')
        if value:
            try:
                return max(1, int(value))
            except ValueError:
                pass
        return psutil.cpu_count(logical=True) or 1

    @staticmethod
    def load_yaml(path: Path) -> dict[str, typing.Any]:
        try:
            with open(path, 'r', encoding='utf-8') as f:
                loaded = yaml.safe_load(f) or {}
        except (yaml.scanner.ScannerError, yaml.parser.ParserError):
            raise YAMLParseException(f'Config for path "{path}" not valid YAML')
        if not isinstance(loaded, dict):
            raise YAMLParseException(f'Config for path "{path}" must be a mapping')
        return loaded

    def config_paths(self) -> list[Path]:
        """Files that contribute to the configuration, lowest precedence first"""
        paths: list[Path] = []
        for directory in (self.PACKAGED_CONFIG_DIR, self.USER_CONFIG_DIR, self.CONFIG_DIR):
            if directory is None:
                continue
            for name in self.CONFIG_FILES:
                path = directory / name
                if path.exists():
                    paths.append(path)
        if self.CONFIG_DIR is not None and not self.CONFIG_DIR.exists():
            raise ConfigFileNotFoundError(f'Config directory "{self.CONFIG_DIR}" not found')
        return paths

    def load_raw(self) -> dict[str, typing.Any]:
        merged: dict[str, typing.Any] = {}
        for path in self.config_paths():
            pure_yaml = self.load_yaml(path)
            for section, values in pure_yaml.items():
                if isinstance(values, dict) and isinstance(merged.get(section), dict):
                    merged[section] = {**merged[section], **values}
                else:
                    merged[section] = values
        return merged

    def load_base_config(self, log_messages: LogMessages) -> BaseConfig:
        return BaseConfig(log_messages=log_messages, **self.load_raw())


class ConfigScanner:
    def __init__(self, config_loader: ConfigLoader) -> None:
        self.config_loader = config_loader

    def scan_config(self) -> LogMessages | typing.Literal[True]:
        """Scan config, either returns log messages or 'True' representing that no errors were found"""
        final_log: LogMessages = LogMessages()

        current_log: LogMessages = LogMessages()
        try:
            self.config_loader.load_base_config(current_log)
            final_log += current_log
        except YAMLParseException as e:
            final_log += LogMessages([LogMessage(str(e), LogLevels.ERROR.key)])

        if final_log.contains_error():
            return final_log
        return True
