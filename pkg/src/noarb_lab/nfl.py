"""Uniform enumeration of additive ±δ price paths and the exact zero-sum tie."""

from __future__ import annotations

import itertools
import random
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Optional, Sequence

from .errors import InvalidInput
from .io import fmt_number
from .market import (DEFAULT_TICK, ZERO_COST, CostModel, PricePath, Strategy,
                     checked_position, ledger, positions_of, to_exact)

MAX_EXHAUSTIVE_HORIZON = 24


@dataclass(frozen=True)
class UniformPathSpace:
    horizon: int
    initial_price: Fraction = Fraction(100)
    increment: Fraction = Fraction(1)
    tick_size: Fraction = DEFAULT_TICK

    def __post_init__(self):
        p0, delta, tick = (to_exact(self.initial_price), to_exact(self.increment),
                           to_exact(self.tick_size))
        object.__setattr__(self, "initial_price", p0)
        object.__setattr__(self, "increment", delta)
        object.__setattr__(self, "tick_size", tick)
        if not isinstance(self.horizon, int) or self.horizon < 1:
            raise InvalidInput("horizon T must be a positive integer", "T")
        if delta <= 0:
            raise InvalidInput("increment must be positive", "delta")
        for name, v in (("P0", p0), ("delta", delta)):
            if (v / tick).denominator != 1:
                raise InvalidInput(f"{name}={v} is not a multiple of tick {tick}", name)
        if p0 - self.horizon * delta <= 0:
            need = self.horizon * delta + tick
            raise InvalidInput(f"P0={fmt_number(p0)} lets paths reach zero; "
                               f"need P0 >= {fmt_number(need)}", "P0")

    @property
    def size(self) -> int:
        return 2 ** self.horizon

    def path(self, index: int) -> PricePath:
        """Path number ``index`` in enumeration order (bit 0 of the ordering = up)."""
        T, p, prices = self.horizon, self.initial_price, [self.initial_price]
        for k in range(T):
            p = p - self.increment if (index >> (T - 1 - k)) & 1 else p + self.increment
            prices.append(p)
        return PricePath(prices, self.tick_size)


def enumerate_paths(space: UniformPathSpace, start: int = 0,
                    stop: Optional[int] = None) -> Iterator[PricePath]:
    """All 2^T paths, up-moves first (UU, UD, DU, DD for T=2).

    ``start``/``stop`` select an index range so the space can be split across
    workers; concatenating consecutive ranges reproduces the full stream.
    """
    stop = space.size if stop is None else min(stop, space.size)
    if start == 0 and stop == space.size:
        delta = space.increment
        for steps in itertools.product((delta, -delta), repeat=space.horizon):
            yield PricePath(itertools.accumulate(steps, initial=space.initial_price),
                            space.tick_size)
        return
    for i in range(start, stop):
        yield space.path(i)


def sample_paths(space: UniformPathSpace, samples: int, seed: int) -> Iterator[PricePath]:
    rng = random.Random(f"nfl:{seed}:{space.horizon}")
    for _ in range(samples):
        yield space.path(rng.getrandbits(space.horizon))


_NO_BOUND = Fraction(10**30)


def _walk(strategy: Strategy, space: UniformPathSpace, costs: CostModel) -> Iterator[Fraction]:
    """Π of every path in enumeration order, deciding each shared prefix only once."""
    T, delta, tick = space.horizon, space.increment, space.tick_size
    prices, positions = [space.initial_price], []

    def rec(t):
        if t == T:
            path = PricePath.trusted(tuple(prices), tick)
            yield ledger(positions, path, costs, _NO_BOUND).pnl
            return
        positions.append(checked_position(strategy, tuple(prices)))
        for step in (delta, -delta):
            prices.append(prices[-1] + step)
            yield from rec(t + 1)
            prices.pop()
        positions.pop()

    yield from rec(0)


@dataclass(frozen=True)
class EnsembleStats:
    total: Fraction
    count: int
    minimum: Fraction
    maximum: Fraction
    histogram: Counter
    exhaustive: bool = True

    @property
    def mean(self) -> Fraction:
        return self.total / self.count


def ensemble_pnl(strategy: Strategy, space: UniformPathSpace, costs: CostModel = ZERO_COST,
                 *, samples: Optional[int] = None, seed: int = 0) -> EnsembleStats:
    """Sum of Π over every path of the space.

    Beyond the enumeration guard, pass ``samples`` to get a seeded Monte Carlo
    estimate instead; the result is then flagged ``exhaustive=False``.
    """
    hist = Counter()
    if space.horizon > MAX_EXHAUSTIVE_HORIZON:
        if samples is None:
            raise InvalidInput(f"T={space.horizon} exceeds the exhaustive limit "
                               f"{MAX_EXHAUSTIVE_HORIZON}; pass samples for Monte Carlo", "T")
        exhaustive = False
        for path in sample_paths(space, samples, seed):
            hist[ledger(positions_of(strategy, path), path, costs, _NO_BOUND).pnl] += 1
    else:
        exhaustive = True
        for pnl in _walk(strategy, space, costs):
            hist[pnl] += 1
    total = sum((v * n for v, n in hist.items()), Fraction(0))
    return EnsembleStats(total, sum(hist.values()), min(hist), max(hist), hist, exhaustive)


@dataclass(frozen=True)
class RankRow:
    name: str
    total: Fraction
    mean: Fraction
    minimum: Fraction
    maximum: Fraction


def rank_strategies(strategies: Sequence[Strategy], space: UniformPathSpace,
                    costs: CostModel = ZERO_COST) -> list:
    """One row per strategy, sorted by total (descending), ties kept in input order."""
    rows = []
    for s in strategies:
        st = ensemble_pnl(s, space, costs)
        rows.append(RankRow(s.name, st.total, st.mean, st.minimum, st.maximum))
    return sorted(rows, key=lambda r: -r.total)
