"""Minimal flat key-value config reader.

Format: one ``key = value`` pair per line, ``#`` starts a comment,
blank lines are ignored. Keys must be unique. Insertion order is
preserved so configs can express ordered structures (predictor lists,
sentencing strata).
"""

from __future__ import annotations

import os

from .errors import ConfigError


def read_kv(path: str | os.PathLike[str]) -> dict[str, str]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return parse_kv(lines, source=str(path))


def parse_kv(lines: list[str], source: str = "<config>") -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out
