"""Diagonalizing market: simulate the strategy's next position, then move against it.

Prices live on the grid ``P_0 * exp(k * eps)`` for integer ``k``; each price is
stored as the exact rational value of its double, so the ledger stays exact
and an adverse move is always a strict loss.
"""

from __future__ import annotations

import logging
import math
import random
import statistics
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from .errors import InvalidInput, NonDeterministicStrategy, StrategyViolation
from .market import (ZERO_COST, CostModel, LedgerResult, PricePath, Strategy, ledger,
                     positions_of, to_exact)

logger = logging.getLogger(__name__)

UNBOUNDED = Fraction(10**30)


@dataclass(frozen=True)
class AdversaryConfig:
    epsilon: float = 0.01
    horizon: int = 10
    p0: Fraction = Fraction(100)
    dead_band: Fraction = Fraction(0)
    adaptivity: float = 1.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "p0", to_exact(self.p0))
        object.__setattr__(self, "dead_band", to_exact(self.dead_band))
        if not (isinstance(self.epsilon, (int, float)) and self.epsilon > 0
                and math.isfinite(self.epsilon)):
            raise InvalidInput("epsilon must be a positive finite number", "epsilon")
        if not isinstance(self.horizon, int) or self.horizon < 1:
            raise InvalidInput("horizon must be a positive integer", "horizon")
        if self.p0 <= 0:
            raise InvalidInput("p0 must be positive", "p0")
        if self.dead_band < 0:
            raise InvalidInput("dead_band must be non-negative", "dead_band")
        if not 0 <= self.adaptivity <= 1:
            raise InvalidInput("adaptivity must lie in [0, 1]", "adaptivity")

    def price(self, level: int) -> Fraction:
        if level == 0:
            return self.p0
        return Fraction(float(self.p0) * math.exp(level * self.epsilon))


def derive_rng(seed: int, name: str, alpha: float, replication: int) -> random.Random:
    """Independent stream per (seed, strategy, alpha, replication); schedule-free."""
    return random.Random(f"{seed}:{name}:{alpha!r}:{replication}")


@dataclass(frozen=True)
class DuelRecord:
    strategy: str
    path: PricePath
    positions: tuple
    ledger: LedgerResult
    adversarial: tuple

    @property
    def pnl(self) -> Fraction:
        return self.ledger.pnl

    @property
    def defeated(self) -> bool:
        return self.ledger.pnl <= 0


def duel(strategy: Strategy, config: AdversaryConfig, costs: CostModel = ZERO_COST,
         replication: int = 0) -> DuelRecord:
    alpha, eta = config.adaptivity, config.dead_band
    rng = derive_rng(config.seed, strategy.name, alpha, replication)
    level, prices, positions, adversarial = 0, [config.p0], [], []
    for t in range(config.horizon):
        w = strategy.position(prices)
        if abs(w) > strategy.position_bound:
            raise StrategyViolation(f"{strategy.name}: |w_{t}| = {abs(w)} exceeds bound", t)
        positions.append(w)
        attack = alpha >= 1 or rng.random() < alpha
        if attack:
            level += -1 if w > eta else (1 if w < -eta else 0)
        else:
            level += 1 if rng.random() < 0.5 else -1
        adversarial.append(attack)
        prices.append(config.price(level))
    path = PricePath(prices, tick_size=None)
    replay = positions_of(strategy, path)
    for t, (a, b) in enumerate(zip(positions, replay)):
        if a != b:
            raise NonDeterministicStrategy(
                f"{strategy.name} is not deterministic: step {t} gave {a} live, {b} on replay", t)
    led = ledger(positions, path, costs, UNBOUNDED)
    return DuelRecord(strategy.name, path, tuple(positions), led, tuple(adversarial))


@dataclass(frozen=True)
class TournamentRow:
    strategy: str
    pnl: Optional[Fraction]
    defeated: Optional[bool]
    active_steps: int
    error: Optional[str] = None
    record: Optional[DuelRecord] = None


def tournament(strategies: Sequence[Strategy], config: AdversaryConfig,
               costs: CostModel = ZERO_COST) -> list:
    """One personalized duel per strategy; a failing strategy yields an error row."""
    rows = []
    for s in strategies:
        try:
            rec = duel(s, config, costs)
        except (NonDeterministicStrategy, StrategyViolation, InvalidInput) as exc:
            logger.warning("duel for %s failed: %s", s.name, exc)
            rows.append(TournamentRow(s.name, None, None, 0, str(exc)))
            continue
        active = sum(1 for w in rec.positions if abs(w) > config.dead_band)
        rows.append(TournamentRow(s.name, rec.pnl, rec.defeated, active, None, rec))
    return rows


@dataclass(frozen=True)
class SweepPoint:
    alpha: float
    mean: Fraction
    stderr: float
    replications: int


def sweep_adaptivity(strategy: Strategy, config: AdversaryConfig, alphas: Sequence[float],
                     replications: int = 100, costs: CostModel = ZERO_COST) -> list:
    if replications < 1:
        raise InvalidInput("replications must be >= 1", "replications")
    points = []
    for alpha in alphas:
        cfg = AdversaryConfig(config.epsilon, config.horizon, config.p0, config.dead_band,
                              float(alpha), config.seed)
        pnls = [duel(strategy, cfg, costs, r).pnl for r in range(replications)]
        mean = sum(pnls, Fraction(0)) / replications
        se = statistics.stdev(map(float, pnls)) / math.sqrt(replications) if replications > 1 else 0.0
        points.append(SweepPoint(float(alpha), mean, se, replications))
    return points
