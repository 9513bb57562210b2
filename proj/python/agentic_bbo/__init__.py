# SPDX-License-Identifier: Apache-2.0
"""Agentic black-box sequence optimizer.

Thin wrappers over the C++ core in ``_core``; JSON payloads are decoded here.
"""
from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Mapping

_pkg_prompts = Path(__file__).with_name("prompts")
if _pkg_prompts.is_dir():
    os.environ.setdefault("ABO_PROMPTS_DIR", str(_pkg_prompts))

from . import _core  # noqa: E402
from ._core import (  # noqa: E402,F401
    AboError,
    canonicalize,
    format_score,
    levenshtein,
    normalized_edit_distance,
    parse_candidates,
    select_diverse_seeds,
    similarity,
    validate,
)

__all__ = [
    "AboError",
    "best_portfolio",
    "canonicalize",
    "curve",
    "default_config",
    "format_score",
    "levenshtein",
    "merged_config",
    "normalized_edit_distance",
    "parse_candidates",
    "portfolio_report",
    "resume",
    "run",
    "select_diverse_seeds",
    "similarity",
    "synthetic_scores",
    "token_report",
    "validate",
]


def _ov(overrides: Mapping[str, object] | None) -> dict[str, str]:
    out: dict[str, str] = {}
    for k, v in (overrides or {}).items():
        out[k] = v if isinstance(v, str) else json.dumps(v)
    return out


def default_config() -> dict:
    return json.loads(_core.default_config())


def merged_config(path: str | os.PathLike, overrides: Mapping[str, object] | None = None) -> dict:
    return json.loads(_core.merged_config(str(path), _ov(overrides)))


def run(path: str | os.PathLike, overrides: Mapping[str, object] | None = None) -> dict:
    """Runs the config at ``path``; dotted keys in ``overrides`` replace config values."""
    return json.loads(_core.run(str(path), _ov(overrides)))


def resume(checkpoint: str | os.PathLike, overrides: Mapping[str, object] | None = None) -> dict:
    return json.loads(_core.resume(str(checkpoint), _ov(overrides)))


def curve(run_dir: str | os.PathLike) -> list[dict]:
    """Best-so-far curve rows as dicts of floats."""
    lines = _core.curve_csv(str(run_dir)).strip().splitlines()
    header = lines[0].split(",")
    return [dict(zip(header, map(float, row.split(",")))) for row in lines[1:]]


def portfolio_report(run_dir: str | os.PathLike) -> dict:
    return json.loads(_core.portfolio_report(str(run_dir)))


def token_report(run_dir: str | os.PathLike) -> dict:
    return json.loads(_core.token_report(str(run_dir)))


def best_portfolio(items, size: int, beta: float, direction: str = "maximize") -> list[dict]:
    return json.loads(_core.best_portfolio(list(items), size, beta, direction))


def synthetic_scores(config: Mapping, candidates) -> list[float]:
    """Scores with the oracle section of ``config`` (merged over defaults)."""
    return _core.synthetic_scores(json.dumps(dict(config)), list(candidates))
