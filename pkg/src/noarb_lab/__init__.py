"""Desk-scale laboratory for the impossibility of universally winning trading strategies."""

__version__ = "0.1.0"

from .errors import (InternalConsistencyError, InvalidInput, NonDeterministicStrategy,
                     StrategyViolation)
from .market import (CostModel, LedgerResult, PricePath, Strategy, check_time_reversal_consistency,
                     check_universal, evaluate, time_reverse)

__all__ = [
    "CostModel", "InternalConsistencyError", "InvalidInput", "LedgerResult",
    "NonDeterministicStrategy", "PricePath", "Strategy", "StrategyViolation",
    "check_time_reversal_consistency", "check_universal", "evaluate", "time_reverse",
]
