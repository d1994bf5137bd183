import io
from pathlib import Path

import pytest

from uniquerank.core.base import (
    BaseConfig,
    ConfigFileNotFoundError,
    ConfigLoader,
    ConfigScanner,
    LogLevels,
    LogMessages,
    RankingConfig,
    YAMLParseException,
)


def write_yaml(directory: Path, name: str, text: str) -> Path:
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / name
    path.write_text(text, encoding='utf-8')
    return path


def levels(log_messages: LogMessages) -> list[int]:
    return [message.level for message in log_messages.log_messages]


def test_defaults_without_any_file() -> None:
    log_messages = LogMessages()
    config = BaseConfig(log_messages)

    assert log_messages.is_empty()
    assert config.ranking.d == 0.85 and config.ranking.alpha == 0.5
    assert config.kernel['gamma'] == 'median'
    assert config.refinement['k_seed'] is None
    assert config.evaluation['top_k'] == [5, 10]


def test_unknown_keys_only_warn() -> None:
    log_messages = LogMessages()
    config = BaseConfig(log_messages, ranking={'alpha': 0.2, 'dampening': 0.9}, plotting={})

    assert config.ranking.alpha == 0.2
    assert levels(log_messages) == [LogLevels.WARNING.key, LogLevels.WARNING.key]
    assert not log_messages.contains_error()


@pytest.mark.parametrize('section, values', [
    ('ranking', {'d': 2.0}),
    ('ranking', {'init': 'zeros'}),
    ('kernel', {'gamma': -1.0}),
    ('graph', {'normalization': 'log'}),
    ('refinement', {'k_final': 0}),
    ('refinement', {'tie_break': 'random'}),
    ('evaluation', {'thresholds': [0.5, 1.5]}),
    ('evaluation', {'top_k': []}),
    ('evaluation', {'thresholds': []}),
    ('evaluation', {'alphas': [1.2]}),
])
def test_invalid_values_are_errors(section: str, values: dict) -> None:
    log_messages = LogMessages()
    config = BaseConfig(log_messages, **{section: values})

    assert log_messages.contains_error()
    if section == 'ranking':
        assert config.ranking.as_dict() == RankingConfig().as_dict()


def test_packaged_files_load_cleanly() -> None:
    log_messages = LogMessages()
    config = ConfigLoader().load_base_config(log_messages)

    assert log_messages.is_empty()
    assert config.ranking.tolerance == 1e-10
    assert config.evaluation['methods'][0] == 'uniquerank'


def test_user_and_override_directories_layer(isolated_home: Path, tmp_path: Path) -> None:
    write_yaml(isolated_home / '.config' / 'uniquerank', 'base.yaml', 'ranking:\n  alpha: 0.3\n')
    override = tmp_path / 'override'
    write_yaml(override, 'base.yaml', 'ranking:\n  d: 0.9\nrefinement:\n  k_final: 7\n')

    config = ConfigLoader(override).load_base_config(LogMessages())

    assert (config.ranking.d, config.ranking.alpha) == (0.9, 0.3)
    assert config.refinement['k_final'] == 7
    assert config.refinement['tracker_init'] == 'infinity'


def test_missing_override_directory(tmp_path: Path) -> None:
    with pytest.raises(ConfigFileNotFoundError):
        ConfigLoader(tmp_path / 'absent').load_base_config(LogMessages())


def test_bad_yaml(tmp_path: Path) -> None:
    with pytest.raises(YAMLParseException):
        ConfigLoader.load_yaml(write_yaml(tmp_path, 'base.yaml', 'ranking: [1, 2\n'))
    with pytest.raises(YAMLParseException):
        ConfigLoader.load_yaml(write_yaml(tmp_path, 'list.yaml', '- 1\n- 2\n'))
    assert ConfigLoader.load_yaml(write_yaml(tmp_path, 'empty.yaml', '')) == {}


def test_scanner(tmp_path: Path) -> None:
    assert ConfigScanner(ConfigLoader()).scan_config() is True

    broken = tmp_path / 'broken'
    write_yaml(broken, 'evaluation.yaml', 'evaluation:\n  distance_cap: zero\n')
    result = ConfigScanner(ConfigLoader(broken)).scan_config()
    assert result is not True
    assert result.contains_error()


def test_thread_count(isolated_home: Path, monkeypatch: pytest.MonkeyPatch) -> None:
    loader = ConfigLoader()
    assert loader.thread_count(3) == 3
    assert loader.thread_count() >= 1

    monkeypatch.setenv('UNIQUERANK_THREADS', '2')
    assert loader.thread_count() == 2
    monkeypatch.setenv('UNIQUERANK_THREADS', 'many')
    assert loader.thread_count() >= 1

    write_yaml(isolated_home / '.config' / 'uniquerank', 'uniquerank.env', 'UNIQUERANK_THREADS=5\n')
    loader.reload_env()
    assert loader.thread_count() == 5


def test_print_log_messages_groups_by_level() -> None:
    log_messages = LogMessages()
    log_messages.warning('gamma fell back to 1.0')
    log_messages.debug('scored 5 nodes')
    log_messages.error('alpha out of range')
    log_messages.info('wrote ranking.csv')

    stream = io.StringIO()
    log_messages.print_log_messages('Run messages:\n', file=stream, include_debug=False)
    text = stream.getvalue()

    assert 'scored 5 nodes' not in text
    assert text.index('Info:') < text.index('Warnings:') < text.index('Errors:')

    quiet = LogMessages()
    quiet.debug('only debug')
    stream = io.StringIO()
    quiet.print_log_messages('Run messages:\n', file=stream, include_debug=False)
    assert stream.getvalue() == ''
