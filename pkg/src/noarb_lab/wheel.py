"""The Wheel options strategy on discrete paths, with lattice-consistent premiums.

Cycle: write a cash-secured put; if it finishes in the money take assignment
and write covered calls at a fixed strike above the entry price until the
shares are called away; then start over. Options are European and expire
after ``expiry_steps`` path steps. On a bounded run no option is written that
would outlive the path, so the terminal P&L is realized cash plus shares
marked at ``P_T``.
"""

from __future__ import annotations

import enum
import math
import random
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import lru_cache
from typing import Mapping, Optional, Sequence

from .errors import InvalidInput
from .finite_market import MarketTree, path_probability, solve_emm
from .market import (DEFAULT_TICK, ZERO_COST, CostModel, LedgerResult, PricePath, Strategy,
                     time_reverse, to_exact)


class Phase(str, enum.Enum):
    SHORT_PUT = "ShortPut"
    ASSIGNED_LONG = "AssignedLong"
    SHORT_CALL = "ShortCall"
    CALLED_AWAY = "CalledAway"


ALLOWED_TRANSITIONS = {
    (Phase.SHORT_PUT, Phase.SHORT_PUT),
    (Phase.SHORT_PUT, Phase.ASSIGNED_LONG),
    (Phase.ASSIGNED_LONG, Phase.SHORT_CALL),
    (Phase.SHORT_CALL, Phase.SHORT_CALL),
    (Phase.SHORT_CALL, Phase.CALLED_AWAY),
    (Phase.CALLED_AWAY, Phase.SHORT_PUT),
}


class FailureMode(str, enum.Enum):
    I_CRASH = "I_crash"
    II_BLEED = "II_bleed"
    III_BREAKOUT = "III_breakout"
    IV_RUIN = "IV_ruin"
    NONE = "none"


# --- lattice pricing --------------------------------------------------------


@lru_cache(maxsize=200_000)
def _backward(up, down, q, kind, spot, strike, steps):
    values = []
    for j in range(steps + 1):
        s = spot * up**j * down ** (steps - j)
        values.append(max(s - strike, 0) if kind == "call" else max(strike - s, 0))
    for n in range(steps, 0, -1):
        values = [q * values[j + 1] + (1 - q) * values[j] for j in range(n)]
    return values[0]


@dataclass(frozen=True)
class LatticePricer:
    """Recombining binomial pricer at zero rate; ``q`` is the tree's own EMM."""

    up: Fraction
    down: Fraction
    q: Fraction
    steps: int = 1

    def __post_init__(self):
        up, down, q = to_exact(self.up), to_exact(self.down), to_exact(self.q)
        object.__setattr__(self, "up", up)
        object.__setattr__(self, "down", down)
        object.__setattr__(self, "q", q)
        if not 0 < down < 1 < up:
            raise InvalidInput(f"need 0 < d < 1 < u, got u={up}, d={down}", "lattice")
        if not 0 < q < 1 or q * up + (1 - q) * down != 1:
            raise InvalidInput(f"q={q} is not the martingale probability for u={up}, d={down}",
                               "lattice")
        if self.steps < 1:
            raise InvalidInput("lattice steps must be >= 1", "steps")

    @classmethod
    def from_factors(cls, up, down, steps: int = 1) -> "LatticePricer":
        up, down = to_exact(up), to_exact(down)
        one_step = MarketTree.from_records([
            {"id": "s", "parent": None, "price": 1},
            {"id": "u", "parent": "s", "price": up},
            {"id": "d", "parent": "s", "price": down},
        ])
        emm = solve_emm(one_step)
        if not emm.exists:
            raise InvalidInput(f"u={up}, d={down} admit arbitrage; no risk-neutral q", "lattice")
        return cls(up, down, emm.q["s"][0], steps)

    @classmethod
    def from_tree(cls, tree: MarketTree, steps: int = 1) -> "LatticePricer":
        """Pricer for a binomial tree with constant up/down factors at every node."""
        ratios = set()
        for nid in tree.internal_nodes():
            kids = tree.child_prices(nid)
            if len(kids) != 2:
                raise InvalidInput(f"node {nid} is not binomial", "tree")
            p = tree.nodes[nid].price
            ratios.add(tuple(sorted((kids[0] / p, kids[1] / p), reverse=True)))
        if len(ratios) != 1:
            raise InvalidInput("tree factors vary between nodes; no single lattice", "tree")
        up, down = ratios.pop()
        return cls.from_factors(up, down, steps)

    def value(self, kind: str, spot, strike, steps: Optional[int] = None) -> Fraction:
        if kind not in ("put", "call"):
            raise InvalidInput(f"option kind must be put or call, got {kind!r}", "kind")
        strike = to_exact(strike)
        if strike < 0:
            raise InvalidInput("strike must be non-negative", "strike")
        n = self.steps if steps is None else steps
        return _backward(self.up, self.down, self.q, kind, to_exact(spot), strike, n)

    def delta(self, kind: str, spot, strike, steps: int) -> Fraction:
        spot = to_exact(spot)
        hi = self.value(kind, spot * self.up, strike, steps - 1)
        lo = self.value(kind, spot * self.down, strike, steps - 1)
        return (hi - lo) / (spot * (self.up - self.down))


def price_option(pricer: LatticePricer, kind: str, spot, strike, steps: Optional[int] = None):
    return pricer.value(kind, spot, strike, steps)


# --- configuration ----------------------------------------------------------


@dataclass(frozen=True)
class WheelConfig:
    put_strike_ratio: Fraction = Fraction(95, 100)
    call_strike_ratio: Fraction = Fraction(105, 100)
    expiry_steps: int = 5
    pricing: str = "lattice"
    fixed_premium: Optional[Fraction] = None
    capital: Fraction = Fraction(100_000)
    contract_size: int = 100
    tick_size: Fraction = DEFAULT_TICK

    def __post_init__(self):
        for name in ("put_strike_ratio", "call_strike_ratio", "capital", "tick_size"):
            object.__setattr__(self, name, to_exact(getattr(self, name)))
        if self.fixed_premium is not None:
            object.__setattr__(self, "fixed_premium", to_exact(self.fixed_premium))
        if not 0 < self.put_strike_ratio <= 1 <= self.call_strike_ratio:
            raise InvalidInput("need 0 < put_strike_ratio <= 1 <= call_strike_ratio",
                               "put_strike_ratio")
        if self.expiry_steps < 1:
            raise InvalidInput("expiry_steps must be >= 1", "expiry_steps")
        if self.pricing not in ("lattice", "fixed"):
            raise InvalidInput("pricing must be 'lattice' or 'fixed'", "pricing")
        if self.pricing == "fixed" and (self.fixed_premium is None or self.fixed_premium < 0):
            raise InvalidInput("fixed pricing needs a non-negative fixed_premium", "fixed_premium")
        if self.contract_size < 1 or self.tick_size <= 0:
            raise InvalidInput("contract_size and tick_size must be positive", "contract_size")

    def put_strike(self, spot) -> Fraction:
        k = self.put_strike_ratio * spot
        return math.floor(k / self.tick_size) * self.tick_size

    def call_strike(self, entry) -> Fraction:
        k = self.call_strike_ratio * entry
        return math.ceil(k / self.tick_size) * self.tick_size


@dataclass(frozen=True)
class WheelState:
    t: int
    phase: Phase
    entry_price: Optional[Fraction]
    active_strike: Optional[Fraction]
    collected_premiums: Fraction
    shares_held: int
    cash: Fraction
    expiry: Optional[int] = None


@dataclass(frozen=True)
class StepRow:
    t: int
    price: Fraction
    phase: Phase
    cash: Fraction
    shares: int
    wealth: Fraction


@dataclass(frozen=True)
class FailureThresholds:
    """Classifier knobs. ``step_scale`` defaults to 1% of ``P_0``."""

    step_scale: Optional[Fraction] = None
    crash_multiple: Fraction = Fraction(3)


@dataclass(frozen=True)
class WheelRun:
    ledger: LedgerResult
    state_trace: tuple
    steps: tuple
    premiums: Fraction
    assignments: tuple
    call_aways: tuple
    classification: FailureMode = FailureMode.NONE
    contract_size: int = 100

    @property
    def pnl(self) -> Fraction:
        return self.ledger.pnl

    @property
    def opportunity_cost(self) -> Fraction:
        """Forgone upside ``(P_T - K_call) * shares`` of the last call-away, else 0."""
        if not self.call_aways:
            return Fraction(0)
        final = self.steps[-1].price
        return max(final - self.call_aways[-1][1], 0) * self.contract_size


# --- state machine -----------------------------------------------------------


@dataclass
class _Book:
    cash: Fraction
    shares: int = 0
    phase: Phase = Phase.SHORT_PUT
    entry: Optional[Fraction] = None
    option: Optional[tuple] = None  # (kind, strike, expiry)
    premiums: Fraction = Fraction(0)
    fees: Fraction = Fraction(0)
    trace: list = field(default_factory=list)
    assignments: list = field(default_factory=list)
    call_aways: list = field(default_factory=list)

    def snapshot(self, t):
        strike = self.option[1] if self.option else None
        expiry = self.option[2] if self.option else None
        self.trace.append(WheelState(t, self.phase, self.entry, strike, self.premiums,
                                     self.shares, self.cash, expiry))


def _premium(config, pricer, kind, spot, strike):
    if config.pricing == "fixed":
        return config.fixed_premium
    return pricer.value(kind, spot, strike, config.expiry_steps)


def _simulate(config: WheelConfig, prices: Sequence, pricer: Optional[LatticePricer],
              costs: CostModel, horizon: Optional[int], marks: bool = True):
    """Drive the cycle over ``prices``; yields the book and per-step wealth."""
    size, c, tenor = config.contract_size, costs.rate, config.expiry_steps
    book = _Book(cash=config.capital)
    wealth = []
    for t, price in enumerate(prices):
        if book.option is not None and book.option[2] == t:
            kind, strike, _ = book.option
            book.option = None
            if kind == "put" and price < strike:
                book.cash -= strike * size
                book.fees += c * strike * size
                book.shares, book.entry, book.phase = size, strike, Phase.ASSIGNED_LONG
                book.assignments.append((t, strike))
                book.snapshot(t)
            elif kind == "call" and price >= strike:
                book.cash += strike * size
                book.fees += c * strike * size
                book.shares, book.phase = 0, Phase.CALLED_AWAY
                book.call_aways.append((t, strike))
                book.snapshot(t)

        mark = Fraction(0)
        if book.option is not None and marks:
            kind, strike, expiry = book.option
            if pricer is not None and config.pricing == "lattice":
                mark = pricer.value(kind, price, strike, expiry - t)
            else:
                mark = max(strike - price, 0) if kind == "put" else max(price - strike, 0)
        wealth.append(book.cash - book.fees + book.shares * price - size * mark - config.capital)

        if book.option is None and (horizon is None or t + tenor <= horizon):
            if book.shares:
                kind, strike, phase = "call", config.call_strike(book.entry), Phase.SHORT_CALL
            else:
                kind, strike, phase = "put", config.put_strike(price), Phase.SHORT_PUT
                book.entry = None
            prem = _premium(config, pricer, kind, price, strike) * size
            book.cash += prem
            book.premiums += prem
            book.fees += c * prem
            book.option, book.phase = (kind, strike, t + tenor), phase
            book.snapshot(t)
    if c and book.shares:
        wealth[-1] -= c * book.shares * prices[-1]
    return book, wealth


def _check_capital(config: WheelConfig, path: PricePath):
    last_sale = path.horizon - config.expiry_steps
    if last_sale < 0:
        return
    need = config.put_strike(max(path.prices[: last_sale + 1])) * config.contract_size
    if config.capital < need:
        raise InvalidInput(f"capital {config.capital} cannot secure a put worth {need} "
                           "on this path", "capital")


def run_wheel(config: WheelConfig, path: PricePath, pricer: Optional[LatticePricer] = None,
              costs: CostModel = ZERO_COST,
              thresholds: FailureThresholds = FailureThresholds()) -> WheelRun:
    if config.pricing == "lattice" and pricer is None:
        raise InvalidInput("lattice pricing needs a LatticePricer", "pricing")
    if path.horizon < config.expiry_steps:
        raise InvalidInput(f"path of {path.horizon} steps is shorter than one tenor "
                           f"({config.expiry_steps})", "expiry_steps")
    _check_capital(config, path)
    book, wealth = _simulate(config, path.prices, pricer, costs, path.horizon)
    bound = config.capital
    breach = next((t for t, v in enumerate(wealth) if v < -bound), None)
    shares_at = _shares_by_step(book.trace, path.horizon)
    led = LedgerResult(tuple(wealth), tuple(Fraction(s) for s in shares_at[:-1]), breach is None,
                       breach, bound)
    steps = _step_rows(book.trace, path, wealth, config.capital)
    run = WheelRun(led, tuple(book.trace), steps, book.premiums, tuple(book.assignments),
                   tuple(book.call_aways), contract_size=config.contract_size)
    return replace(run, classification=classify_failure(run, path, thresholds, config.tick_size))


def _shares_by_step(trace, horizon):
    out, shares, i = [], 0, 0
    for t in range(horizon + 1):
        while i < len(trace) and trace[i].t == t:
            shares = trace[i].shares_held
            i += 1
        out.append(shares)
    return out


def _step_rows(trace, path, wealth, capital):
    rows, i = [], 0
    state = WheelState(0, Phase.SHORT_PUT, None, None, Fraction(0), 0, capital)
    for t, price in enumerate(path.prices):
        while i < len(trace) and trace[i].t == t:
            state = trace[i]
            i += 1
        rows.append(StepRow(t, price, state.phase, state.cash, state.shares_held, wealth[t]))
    return tuple(rows)


def classify_failure(run: WheelRun, path: PricePath,
                     thresholds: FailureThresholds = FailureThresholds(),
                     tick=None) -> FailureMode:
    """Map a completed run onto the four canonical failure modes.

    Checked in order IV, II, I, III: a slow bleed also ends below its
    assignment price, so the "no crash step" test has to come before I.
    """
    prices = path.prices
    tick = path.tick_size or to_exact(tick if tick is not None else DEFAULT_TICK)
    size = run.contract_size
    if any(r.price <= tick and r.shares > 0 for r in run.steps):
        return FailureMode.IV_RUIN
    scale = thresholds.step_scale if thresholds.step_scale is not None else prices[0] / 100
    worst_drop = max(prices[t] - prices[t + 1] for t in range(len(prices) - 1))
    if worst_drop <= thresholds.crash_multiple * scale and prices[-1] < prices[0] and run.pnl < 0:
        return FailureMode.II_BLEED
    if run.assignments and (run.assignments[-1][1] - prices[-1]) * size > run.premiums:
        return FailureMode.I_CRASH
    if run.call_aways and (prices[-1] - run.call_aways[-1][1]) * size > run.premiums:
        return FailureMode.III_BREAKOUT
    return FailureMode.NONE


def check_transitions(trace: Sequence[WheelState]) -> bool:
    """Phase edges follow the Wheel cycle and share counts match the phase."""
    prev = Phase.SHORT_PUT
    for s in trace:
        if s.phase in (Phase.SHORT_CALL, Phase.ASSIGNED_LONG) and s.shares_held == 0:
            return False
        if s.phase in (Phase.SHORT_PUT, Phase.CALLED_AWAY) and s.shares_held != 0:
            return False
        if s is not trace[0] and (prev, s.phase) not in ALLOWED_TRANSITIONS:
            return False
        prev = s.phase
    premiums = [s.collected_premiums for s in trace]
    return all(a <= b for a, b in zip(premiums, premiums[1:]))


# --- expectation under the EMM -----------------------------------------------


def emm_expectation(config: WheelConfig, tree: MarketTree, pricer: LatticePricer,
                    costs: CostModel = ZERO_COST) -> Fraction:
    """Expected wheel P&L over the tree's leaves under its own martingale measure."""
    emm = solve_emm(tree)
    if not emm.exists:
        raise InvalidInput("tree admits arbitrage; there is no EMM to average under", "tree")
    for nid in tree.internal_nodes():
        node = tree.nodes[nid]
        up_id = max(node.children, key=lambda c: tree.nodes[c].price)
        q_up = emm.q[nid][node.children.index(up_id)]
        ratios = sorted((tree.nodes[c].price / node.price for c in node.children), reverse=True)
        if q_up != pricer.q or ratios != [pricer.up, pricer.down]:
            raise InvalidInput(f"pricer (u={pricer.up}, d={pricer.down}, q={pricer.q}) does not "
                               f"match the tree at node {nid}", "pricer")
    total = Fraction(0)
    for ids in tree.leaf_paths():
        path = tree.price_path(ids)
        run = run_wheel(config, path, pricer, costs)
        total += path_probability(emm.q, tree, ids) * run.pnl
    return total


# --- scenarios ----------------------------------------------------------------

SCENARIOS = ("crash", "bleed", "breakout", "ruin", "rally", "flat")


def _jitter(prices, seed, ticks, tick):
    if seed is None or not ticks:
        return prices
    rng = random.Random(f"scenario:{seed}")
    out = list(prices)
    for t in range(1, len(out) - 1):
        out[t] = max(tick, out[t] + rng.randint(-ticks, ticks) * tick)
    return out


_DEFAULT_STEPS = {"rally": 20, "crash": 20, "bleed": 50, "flat": 20}


def generate_scenario(kind: str, *, p0=100, steps: Optional[int] = None, step=10,
                      drift=Fraction(-3, 2),
                      decay=Fraction(7, 10), expiry_steps: int = 5,
                      put_strike_ratio=Fraction(95, 100), call_strike_ratio=Fraction(105, 100),
                      gap=Fraction(13, 10), tick=DEFAULT_TICK, seed: Optional[int] = None,
                      jitter_ticks: int = 0) -> PricePath:
    """Canonical path for each trajectory class; ``seed`` + ``jitter_ticks`` perturb it.

    rally:    p0 rising by ``step`` per step.
    crash:    exact time reversal of the rally with the same parameters.
    bleed:    p0 moving by ``drift`` (negative) per step.
    breakout: dips under the put strike for one tenor (assignment), stays flat,
              then gaps to ``gap * p0`` at the covered call's expiry.
    ruin:     geometric ``decay`` rounded down to ticks until the one-tick floor.
    flat:     pinned at p0.
    """
    p0, step, drift, decay, gap, tick = map(to_exact, (p0, step, drift, decay, gap, tick))
    if steps is None:
        steps = _DEFAULT_STEPS.get(kind, 0)
    if p0 <= 0 or (p0 / tick).denominator != 1:
        raise InvalidInput("p0 must be a positive tick multiple", "p0")
    if kind == "rally":
        if step <= 0:
            raise InvalidInput("rally step must be positive", "step")
        prices = [p0 + t * step for t in range(steps + 1)]
    elif kind == "crash":
        rally = generate_scenario("rally", p0=p0, steps=steps, step=step, tick=tick, seed=seed,
                                  jitter_ticks=jitter_ticks)
        return time_reverse(rally)
    elif kind == "bleed":
        if drift >= 0:
            raise InvalidInput("bleed drift must be negative", "drift")
        if p0 + steps * drift <= 0:
            raise InvalidInput(f"bleed reaches zero; need p0 > {-steps * drift}", "p0")
        prices = [p0 + t * drift for t in range(steps + 1)]
    elif kind == "breakout":
        cfg = WheelConfig(put_strike_ratio, call_strike_ratio, expiry_steps, tick_size=tick)
        k_put = cfg.put_strike(p0)
        low = k_put - tick * max(1, math.ceil(k_put / 50 / tick))
        if low <= 0 or gap * p0 <= cfg.call_strike(k_put):
            raise InvalidInput("breakout gap must clear the call strike", "gap")
        prices = [p0] + [low] * (2 * expiry_steps - 1) + [math.ceil(gap * p0 / tick) * tick]
    elif kind == "ruin":
        if not 0 < decay < 1:
            raise InvalidInput("ruin decay must lie in (0, 1)", "decay")
        prices = [p0]
        while prices[-1] > tick:
            nxt = math.floor(prices[-1] * decay / tick) * tick
            prices.append(max(tick, min(nxt, prices[-1] - tick)))
    elif kind == "flat":
        prices = [p0] * (steps + 1)
    else:
        raise InvalidInput(f"unknown scenario {kind!r}; expected one of {SCENARIOS}", "kind")
    for p in prices:
        if p <= 0:
            raise InvalidInput(f"scenario {kind} leaves the positive half-line", "p0")
    return PricePath(_jitter(prices, seed, jitter_ticks, tick), tick)


# --- wheel as a plain position strategy ----------------------------------------


def wheel_strategy(config: WheelConfig, pricer: Optional[LatticePricer]) -> Strategy:
    """Share-equivalent exposure of the wheel: shares held minus the written option's delta.

    The horizon is unknown to a strategy, so the cycle never stops writing
    options. Without a lattice (fixed premiums) only the shares count.
    """
    size = config.contract_size

    def decide(history):
        book, _ = _simulate(config, history, pricer, ZERO_COST, None, marks=False)
        exposure = Fraction(book.shares)
        if book.option is not None and pricer is not None:
            kind, strike, expiry = book.option
            exposure -= size * pricer.delta(kind, history[-1], strike, expiry - (len(history) - 1))
        return exposure

    return Strategy("wheel-as-strategy", decide, Fraction(size),
                    {"put_strike_ratio": config.put_strike_ratio,
                     "call_strike_ratio": config.call_strike_ratio,
                     "expiry_steps": config.expiry_steps})


def wheel_strategy_from_params(params: Mapping) -> Strategy:
    params = dict(params)
    up = params.pop("up", Fraction(102, 100))
    down = params.pop("down", Fraction(98, 100))
    config = WheelConfig(**params)
    pricer = LatticePricer.from_factors(up, down) if config.pricing == "lattice" else None
    return wheel_strategy(config, pricer)
