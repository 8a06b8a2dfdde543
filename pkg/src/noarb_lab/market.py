"""Price paths, strategies and the self-financing P&L ledger.

Everything here works on exact rationals. A position ``w_t`` is chosen after
observing ``P_0..P_t`` and is held over the increment ``P_{t+1} - P_t``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Optional, Sequence

from .errors import InvalidInput, StrategyViolation

DEFAULT_TICK = Fraction(1, 100)
DEFAULT_BOUND = Fraction(10**6)


def to_exact(value) -> Fraction:
    """Convert a user-facing number to a Fraction.

    Floats are read through their shortest decimal repr, so ``0.01`` becomes
    ``1/100`` rather than the nearest binary double.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise InvalidInput(f"expected a number, got {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(repr(value))
    if isinstance(value, (str, Decimal)):
        try:
            return Fraction(str(value).strip())
        except ValueError as exc:
            raise InvalidInput(f"not a number: {value!r}") from exc
    raise InvalidInput(f"expected a number, got {type(value).__name__}")


def sign(x) -> int:
    return (x > 0) - (x < 0)


@dataclass(frozen=True)
class PricePath:
    """Strictly positive discrete price trajectory ``P_0..P_T``.

    With a ``tick_size`` every price must be an exact multiple of it. Paths
    built by the adversary carry no tick (their prices are exp-multiples).
    """

    prices: tuple
    tick_size: Optional[Fraction] = DEFAULT_TICK

    @classmethod
    def trusted(cls, prices: tuple, tick_size=None) -> "PricePath":
        """Skip validation; for generators that guarantee positivity and tick alignment."""
        path = object.__new__(cls)
        object.__setattr__(path, "prices", prices)
        object.__setattr__(path, "tick_size", tick_size)
        return path

    def __post_init__(self):
        prices = tuple(to_exact(p) for p in self.prices)
        tick = None if self.tick_size is None else to_exact(self.tick_size)
        if len(prices) < 2:
            raise InvalidInput("a price path needs at least two points", "prices")
        if tick is not None and tick <= 0:
            raise InvalidInput("tick_size must be positive", "tick_size")
        for t, p in enumerate(prices):
            if p <= 0:
                raise InvalidInput(f"non-positive price {p} at t={t}", "prices")
            if tick is not None and (p / tick).denominator != 1:
                raise InvalidInput(f"price {p} at t={t} is not a multiple of tick {tick}", "prices")
        object.__setattr__(self, "prices", prices)
        object.__setattr__(self, "tick_size", tick)

    @property
    def horizon(self) -> int:
        return len(self.prices) - 1

    def __len__(self):
        return len(self.prices)

    def __getitem__(self, t):
        return self.prices[t]

    def increments(self) -> tuple:
        p = self.prices
        return tuple(p[t + 1] - p[t] for t in range(len(p) - 1))

    def __str__(self):
        return "[" + ", ".join(_fmt(p) for p in self.prices) + "]"


def _fmt(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 else str(x)


@dataclass(frozen=True, eq=False)
class Strategy:
    """Deterministic map from a history prefix ``(P_0, ..., P_t)`` to a position."""

    name: str
    decide: Callable[[tuple], object]
    position_bound: Fraction = Fraction(1)
    params: Mapping = field(default_factory=dict)

    def position(self, history: Sequence) -> Fraction:
        return to_exact(self.decide(tuple(history)))

    def __repr__(self):
        return f"Strategy({self.name!r})"


@dataclass(frozen=True)
class CostModel:
    """Proportional transaction cost, charged as a fraction of traded notional."""

    rate: Fraction = Fraction(0)

    def __post_init__(self):
        rate = to_exact(self.rate)
        if rate < 0:
            raise InvalidInput("cost rate must be non-negative", "cost")
        object.__setattr__(self, "rate", rate)

    @property
    def zero_cost(self) -> bool:
        return self.rate == 0


ZERO_COST = CostModel()


@dataclass(frozen=True)
class LedgerResult:
    wealth: tuple
    positions: tuple
    admissible: bool
    breach_index: Optional[int]
    bound: Fraction

    @property
    def pnl(self) -> Fraction:
        return self.wealth[-1]


def ledger(positions: Sequence, path: PricePath, costs: CostModel = ZERO_COST,
           bound=DEFAULT_BOUND) -> LedgerResult:
    """Run the wealth recursion for a fixed position sequence ``w_0..w_{T-1}``."""
    bound = to_exact(bound)
    if bound <= 0:
        raise InvalidInput("admissibility bound must be positive", "bound")
    p = path.prices
    if len(positions) != len(p) - 1:
        raise InvalidInput(f"expected {len(p) - 1} positions, got {len(positions)}")
    c = costs.rate
    wealth = [Fraction(0)]
    prev = Fraction(0)
    for t, w in enumerate(positions):
        v = wealth[-1] + w * (p[t + 1] - p[t])
        if c:
            v -= c * abs(w - prev) * p[t]
        prev = w
        wealth.append(v)
    if c and prev:
        wealth[-1] -= c * abs(prev) * p[-1]
    breach = next((t for t, v in enumerate(wealth) if v < -bound), None)
    return LedgerResult(tuple(wealth), tuple(positions), breach is None, breach, bound)


def checked_position(strategy: Strategy, history: Sequence) -> Fraction:
    w = strategy.position(history)
    if abs(w) > strategy.position_bound:
        t = len(history) - 1
        raise StrategyViolation(
            f"{strategy.name}: |w_{t}| = {abs(w)} exceeds bound {strategy.position_bound}", t)
    return w


def positions_of(strategy: Strategy, path: PricePath) -> tuple:
    return tuple(checked_position(strategy, path.prices[: t + 1]) for t in range(path.horizon))


def evaluate(strategy: Strategy, path: PricePath, costs: CostModel = ZERO_COST,
             admissibility_bound=DEFAULT_BOUND) -> LedgerResult:
    return ledger(positions_of(strategy, path), path, costs, admissibility_bound)


def time_reverse(path: PricePath) -> PricePath:
    return PricePath(path.prices[::-1], path.tick_size)


@dataclass(frozen=True)
class UniversalityVerdict:
    universal: bool
    witness: Optional[PricePath] = None
    ledger: Optional[LedgerResult] = None


def check_universal(strategy: Strategy, paths: Iterable[PricePath],
                    costs: CostModel = ZERO_COST, bound=DEFAULT_BOUND) -> UniversalityVerdict:
    """Universal iff Π > 0 and admissible on every path; else the first witness."""
    seen = False
    for path in paths:
        seen = True
        res = evaluate(strategy, path, costs, bound)
        if not (res.pnl > 0 and res.admissible):
            return UniversalityVerdict(False, path, res)
    if not seen:
        raise InvalidInput("path set is empty", "paths")
    return UniversalityVerdict(True)


@dataclass(frozen=True)
class ReversalViolation:
    path: PricePath
    pnl_forward: Fraction
    pnl_reversed: Fraction


@dataclass(frozen=True)
class ReversalReport:
    violations: tuple

    @property
    def consistent(self) -> bool:
        return not self.violations


def check_time_reversal_consistency(strategy: Strategy, paths: Iterable[PricePath],
                                    costs: CostModel = ZERO_COST,
                                    bound=DEFAULT_BOUND) -> ReversalReport:
    paths = list(paths)
    if not paths:
        raise InvalidInput("path set is empty", "paths")
    members = set(p.prices for p in paths)
    for p in paths:
        if p.prices[::-1] not in members:
            raise InvalidInput(f"path set is not closed under reversal: reverse of {p} is missing",
                               "paths")
    pnl = {}
    for p in paths:
        if p.prices not in pnl:
            pnl[p.prices] = evaluate(strategy, p, costs, bound).pnl
    violations = []
    for p in paths:
        fwd, rev = pnl[p.prices], pnl[p.prices[::-1]]
        if fwd > 0 and rev <= 0:
            violations.append(ReversalViolation(p, fwd, rev))
    return ReversalReport(tuple(violations))
