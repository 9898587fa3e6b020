"""
Exception hierarchy for mfmc.
Validation problems are ValueErrors, numerical failures are ArithmeticErrors,
so callers that only know the builtins still catch them.
"""

from __future__ import annotations

from typing import Optional


class ChannelError(Exception):
    pass


class ConfigError(ChannelError, ValueError):
    """A scenario or config failed to parse or validate. `key` names the culprit."""

    def __init__(self, message: str, key: Optional[str] = None):
        super().__init__(message)
        self.key = key


class StabilityViolation(ConfigError):
    def __init__(self, quantity: str, value: float, bound: str):
        super().__init__(
            f"{quantity} = {value:.6g} violates {bound}", key=quantity
        )
        self.quantity = quantity
        self.value = value


class ReceiverIndexError(ConfigError, IndexError):
    pass


class NonPositiveStep(ConfigError):
    pass


class UnknownKey(ConfigError):
    pass


class MissingKey(ConfigError):
    pass


class MalformedLine(ConfigError):
    pass


class DimensionMismatch(ChannelError, ValueError):
    pass


class ScheduleMismatch(ChannelError, ValueError):
    pass


class NumericalError(ChannelError, ArithmeticError):
    pass


class SingularSystem(NumericalError):
    pass


class NoConvergence(NumericalError):
    """Iteration cap reached. The best estimate so far rides along."""

    def __init__(self, message: str, estimate: float, iterations: int):
        super().__init__(message)
        self.estimate = estimate
        self.iterations = iterations
