"""Application configuration: one YAML document with ${ENV_VAR} interpolation
for secrets, hashed for run manifests. Command-line flags override file values.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
from dataclasses import dataclass
from pathlib import Path

import yaml

from .errors import ConfigurationError

_ENV_PATTERN = re.compile(r"\$\{([A-Za-z_][A-Za-z0-9_]*)\}")

_SECRET_KEYS = {"api_key"}


def _interpolate(value, *, path: str):
    if isinstance(value, str):
        def replace(match: re.Match) -> str:
            name = match.group(1)
            if name not in os.environ:
                raise ConfigurationError(
                    f"config value {path} references unset environment variable {name}"
                )
            return os.environ[name]

        return _ENV_PATTERN.sub(replace, value)
    if isinstance(value, dict):
        return {k: _interpolate(v, path=f"{path}.{k}") for k, v in value.items()}
    if isinstance(value, list):
        return [_interpolate(v, path=f"{path}[{i}]") for i, v in enumerate(value)]
    return value


def _strip_secrets(value):
    if isinstance(value, dict):
        return {
            k: ("***" if k in _SECRET_KEYS else _strip_secrets(v))
            for k, v in value.items()
        }
    if isinstance(value, list):
        return [_strip_secrets(v) for v in value]
    return value


@dataclass
class AppConfig:
    raw: dict
    source_path: Path | None = None

    @classmethod
    def load(cls, path: str | Path) -> "AppConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigurationError(f"config file not found: {path}")
        try:
            data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        except yaml.YAMLError as exc:
            raise ConfigurationError(f"config file {path} is not valid YAML: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigurationError(f"config file {path} must hold a mapping")
        return cls(raw=_interpolate(data, path="$"), source_path=path)

    def section(self, name: str, default: dict | None = None) -> dict:
        value = self.raw.get(name, default if default is not None else {})
        if not isinstance(value, dict):
            raise ConfigurationError(f"config section {name!r} must be a mapping")
        return value

    def get(self, dotted: str, default=None):
        node = self.raw
        for part in dotted.split("."):
            if not isinstance(node, dict) or part not in node:
                return default
            node = node[part]
        return node

    def require(self, dotted: str):
        sentinel = object()
        value = self.get(dotted, sentinel)
        if value is sentinel:
            raise ConfigurationError(f"missing required config value {dotted!r}")
        return value

    def work_dir(self) -> Path:
        base = Path(self.get("paths.work_dir", "work"))
        if not base.is_absolute() and self.source_path is not None:
            base = self.source_path.parent / base
        return base

    def hash(self) -> str:
        canonical = json.dumps(_strip_secrets(self.raw), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]
