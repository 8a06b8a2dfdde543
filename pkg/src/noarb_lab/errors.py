"""Exception types shared across the lab."""


class InvalidInput(ValueError):
    """Rejected input: a value or configuration violates a documented guard."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class StrategyViolation(ValueError):
    """A strategy returned a position outside its declared bound."""

    def __init__(self, message, index):
        super().__init__(message)
        self.index = index


class NonDeterministicStrategy(RuntimeError):
    """Replaying a strategy on recorded history produced a different position."""

    def __init__(self, message, step):
        super().__init__(message)
        self.step = step


class InternalConsistencyError(RuntimeError):
    """Two routes that must agree (e.g. EMM vs arbitrage search) disagreed."""
