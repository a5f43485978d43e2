"""Runtime configuration: planner budget, worker count, sparsity threshold, seed."""

from __future__ import annotations

import configparser
from dataclasses import dataclass, fields, replace
from pathlib import Path

DEFAULT_SEED = 20180101
DEFAULT_BUDGET = 512 * 1024 * 1024


@dataclass(frozen=True)
class Config:
    memory_budget_bytes: int = DEFAULT_BUDGET
    max_workers: int = 4
    sparsity_threshold: float = 0.4
    # rows per gradient block in data-parallel training; partitions are made of whole blocks
    block_rows: int = 16
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        if self.memory_budget_bytes <= 0:
            raise ValueError("memory_budget_bytes must be positive")
        if self.max_workers < 1:
            raise ValueError("max_workers must be >= 1")
        if not 0.0 <= self.sparsity_threshold <= 1.0:
            raise ValueError("sparsity_threshold must lie in [0, 1]")
        if self.block_rows < 1:
            raise ValueError("block_rows must be >= 1")

    def with_overrides(self, **kwargs) -> "Config":
        return replace(self, **{k: v for k, v in kwargs.items() if v is not None})


_CASTS = {f.name: (float if f.name == "sparsity_threshold" else int) for f in fields(Config)}


def load_config(path, base: Config | None = None) -> Config:
    """Read ``key = value`` pairs from an ini/TOML-style file.

    Keys may appear at top level or in any section; section names are ignored.
    Values may be quoted. Unknown keys raise ``ValueError``.
    """
    text = Path(path).read_text(encoding="utf-8")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.read_string("[__top__]\n" + text)
    values = {}
    for section in parser.sections():
        for key, raw in parser.items(section):
            if key not in _CASTS:
                raise ValueError(f"unknown config key {key!r} in {path}")
            raw = raw.strip().strip('"').strip("'").replace("_", "")
            values[key] = _CASTS[key](float(raw)) if _CASTS[key] is int else float(raw)
    return replace(base or Config(), **values)
