"""Flat key-value config files for the simulation and verify runners.

Format: one ``key = value`` per line, ``#`` starts a comment, blank
lines ignored.  Values parse as int, then float, then comma-separated
list (elementwise int/float/str), then plain string.

Example::

    # sweep configuration
    n = 4096
    c_sample = 3
    delta = 0.05
    source_opinion = 1
    max_rounds = 10000
    seed = 42
    backend = aggregate
    preset = all_wrong_max_counters
    trials = 200
"""

from __future__ import annotations

from pathlib import Path

from .errors import UsageError

__all__ = ["parse_config_file", "parse_value"]


def parse_value(raw: str):
    raw = raw.strip()
    if "," in raw:
        return [parse_value(part) for part in raw.split(",") if part.strip()]
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        pass
    return raw


def parse_config_file(path) -> dict:
    path = Path(path)
    settings: dict = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, raw = line.split("=", 1)
        key = key.strip()
        if not key:
            raise UsageError(f"{path}:{lineno}: empty key")
        settings[key] = parse_value(raw)
    return settings
