"""Run configuration: one JSON document with a section per pipeline stage.

Lookups go through `require`/`optional` so failures always name the offending
key path (e.g. "scene.width").
"""

from __future__ import annotations

import json
from pathlib import Path


class ConfigError(ValueError):
    def __init__(self, key: str, problem: str):
        super().__init__(f"config key {key!r}: {problem}")
        self.key = key


def load_config(path) -> dict:
    p = Path(path)
    if not p.exists():
        raise ConfigError(str(path), "file not found")
    try:
        cfg = json.loads(p.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(str(path), f"invalid JSON: {e}") from e
    if not isinstance(cfg, dict):
        raise ConfigError(str(path), "top level must be an object")
    return cfg


def require(cfg: dict, dotted: str, expect: type | tuple | None = None):
    cur = cfg
    walked = []
    for part in dotted.split("."):
        walked.append(part)
        if not isinstance(cur, dict) or part not in cur:
            raise ConfigError(".".join(walked), "missing")
        cur = cur[part]
    if expect is not None and not isinstance(cur, expect):
        raise ConfigError(dotted, f"expected {expect}, got {type(cur).__name__}")
    return cur


def optional(cfg: dict, dotted: str, default=None):
    cur = cfg
    for part in dotted.split("."):
        if not isinstance(cur, dict) or part not in cur:
            return default
        cur = cur[part]
    return cur
