"""Bundled deterministic strategies and the name -> factory registry.

Momentum and contrarian are long-biased by default: they hold one share or
nothing, so a trend follower that wins on a rally really does lose on the
reversed (falling) path. Pass ``allow_short=True`` for the symmetric {-1, +1}
variants.
"""

from __future__ import annotations

import csv
from fractions import Fraction
from pathlib import Path
from typing import Callable, Dict, Mapping

from .errors import InvalidInput
from .market import Strategy, to_exact


def flat() -> Strategy:
    return Strategy("flat", lambda h: 0, Fraction(1))


def buy_and_hold(size=1) -> Strategy:
    size = to_exact(size)
    return Strategy("buy-and-hold", lambda h: size, abs(size), {"size": size})


def _reference(history, lookback):
    return history[max(0, len(history) - 1 - lookback)]


def momentum(lookback: int = 1, allow_short: bool = False) -> Strategy:
    """Long while the price is at or above its level ``lookback`` steps back."""
    if lookback < 1:
        raise InvalidInput("lookback must be >= 1", "lookback")
    low = -1 if allow_short else 0

    def decide(h):
        return 1 if h[-1] >= _reference(h, lookback) else low

    return Strategy("momentum", decide, Fraction(1),
                    {"lookback": lookback, "allow_short": allow_short})


def contrarian(lookback: int = 1, allow_short: bool = False) -> Strategy:
    """Long while the price is at or below its level ``lookback`` steps back."""
    if lookback < 1:
        raise InvalidInput("lookback must be >= 1", "lookback")
    low = -1 if allow_short else 0

    def decide(h):
        return 1 if h[-1] <= _reference(h, lookback) else low

    return Strategy("contrarian", decide, Fraction(1),
                    {"lookback": lookback, "allow_short": allow_short})


def threshold(level=100) -> Strategy:
    """Buy below ``level``, sell above it, flat exactly at it."""
    level = to_exact(level)

    def decide(h):
        return -1 if h[-1] > level else (1 if h[-1] < level else 0)

    return Strategy("threshold", decide, Fraction(1), {"level": level})


def history_key(history) -> str:
    return "|".join(str(to_exact(p)) for p in history)


def table(entries: Mapping, name: str = "table-strategy", default=0) -> Strategy:
    """Lookup strategy keyed by the exact history prefix; unknown histories get ``default``."""
    lookup = {history_key(k.split("|") if isinstance(k, str) else k): to_exact(v)
              for k, v in entries.items()}
    default = to_exact(default)
    bound = max([abs(v) for v in lookup.values()] + [abs(default), Fraction(0)])

    def decide(h):
        return lookup.get(history_key(h), default)

    return Strategy(name, decide, bound, {"entries": len(lookup)})


def table_from_file(file, default=0) -> Strategy:
    """Read a ``history,position`` CSV (history is ``|``-separated prices)."""
    with open(Path(file), newline="") as fh:
        rows = [r for r in csv.DictReader(line for line in fh if not line.startswith("#"))]
    try:
        entries = {r["history"]: r["position"] for r in rows}
    except KeyError as exc:
        raise InvalidInput(f"table file needs columns history,position: {file}", "file") from exc
    return table(entries, default=default)


def _wheel(**params) -> Strategy:
    from .wheel import wheel_strategy_from_params

    return wheel_strategy_from_params(params)


REGISTRY: Dict[str, Callable[..., Strategy]] = {
    "flat": flat,
    "buy-and-hold": buy_and_hold,
    "momentum": momentum,
    "contrarian": contrarian,
    "threshold": threshold,
    "wheel-as-strategy": _wheel,
    "table-strategy": lambda file, default=0: table_from_file(file, default),
}

BUNDLED = ("flat", "buy-and-hold", "momentum", "contrarian", "threshold", "wheel-as-strategy")


def make_strategy(name: str, **params) -> Strategy:
    try:
        factory = REGISTRY[name]
    except KeyError:
        raise InvalidInput(f"unknown strategy {name!r}", "strategies") from None
    try:
        return factory(**params)
    except TypeError as exc:
        raise InvalidInput(f"bad parameters for {name}: {exc}", "strategies") from exc


def bundled_strategies(overrides: Mapping = None) -> list:
    """Every bundled strategy with default (or overridden) parameters."""
    overrides = overrides or {}
    return [make_strategy(n, **dict(overrides.get(n, {}))) for n in BUNDLED]
