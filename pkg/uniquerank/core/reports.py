"""Run manifests and CSV report files."""
from __future__ import annotations
from pathlib import Path
import hashlib
import io
import os
import tempfile
import typing

import pandas as pd
import yaml

from uniquerank import __version__

MANIFEST_MARKER = 'uniquerank-manifest'


def file_digest(path: Path) -> str:
    sha = hashlib.sha256()
    with open(path, 'rb') as f:
        for chunk in iter(lambda: f.read(1 << 20), b''):
            sha.update(chunk)
    return sha.hexdigest()


class RunManifest:
    """Everything needed to reproduce one output file"""
    def __init__(
            self,
            command: str,
            parameters: dict[str, typing.Any],
            inputs: dict[str, Path] | None = None,
            version: str = __version__
    ) -> None:
        self.command: str = command
        self.parameters: dict[str, typing.Any] = parameters
        self.version: str = version
        self.inputs: dict[str, dict[str, str]] = {
            name: {'file': Path(path).name, 'sha256': file_digest(Path(path))}
            for name, path in (inputs or {}).items()
        }

    def as_dict(self) -> dict[str, typing.Any]:
        return {
            'tool': 'uniquerank',
            'version': self.version,
            'command': self.command,
            'parameters': self.parameters,
            'inputs': self.inputs,
        }

    def header_lines(self) -> list[str]:
        dumped = yaml.safe_dump(self.as_dict(), sort_keys=True, default_flow_style=False)
        return [MANIFEST_MARKER] + dumped.splitlines()


def write_frame(
        frame: pd.DataFrame,
        path: Path,
        header_lines: list[str] | None = None,
        header: bool = True
) -> Path:
    """Write '#'-prefixed header lines then the CSV, atomically (temp file + rename)"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    handle, temp_name = tempfile.mkstemp(dir=path.parent, prefix=f'.{path.name}.', suffix='.tmp')
    try:
        with os.fdopen(handle, 'w', encoding='utf-8', newline='') as f:
            for line in header_lines or []:
                f.write(f'# {line}\n')
            frame.to_csv(f, index=False, header=header, lineterminator='\n')
        os.replace(temp_name, path)
    except BaseException:
        if os.path.exists(temp_name):
            os.unlink(temp_name)
        raise
    return path


def data_lines(path: Path) -> list[str]:
    """Lines of a table file without blank lines and lines starting with '#'"""
    with open(path, 'r', encoding='utf-8') as f:
        return [line.rstrip('\r\n') for line in f if line.strip() and not line.lstrip().startswith('#')]


def read_frame(path: Path) -> pd.DataFrame:
    return pd.read_csv(io.StringIO('\n'.join(data_lines(path))), keep_default_na=True, dtype={'node_label': str})


def read_manifest(path: Path) -> dict[str, typing.Any]:
    """Parse the manifest block back out of a report header"""
    lines: list[str] = []
    with open(path, 'r', encoding='utf-8') as f:
        for line in f:
            if not line.startswith('# '):
                break
            lines.append(line[2:].rstrip('\n'))
    if not lines or lines[0] != MANIFEST_MARKER:
        return {}
    return yaml.safe_load('\n'.join(lines[1:])) or {}
