"""Exception hierarchy shared by every module."""

from __future__ import annotations


class CarlemanLabError(Exception):
    """Base class for all library errors."""


class ConfigError(CarlemanLabError, ValueError):
    """Invalid user input: bad parameters, malformed specs, unreadable tables."""


class CertificateFailure(CarlemanLabError):
    """A computed certificate did not hold.

    ``quantity`` names the violated check and ``details`` carries the
    measured and allowed values.
    """

    def __init__(self, quantity: str, details: dict | None = None):
        self.quantity = quantity
        self.details = dict(details or {})
        super().__init__(f"certificate failed: {quantity} {self.details}")


class NotApplicable(CarlemanLabError):
    """The operation's regime preconditions do not hold."""


class Inconclusive(CarlemanLabError):
    """Numerical evidence is insufficient for any verdict."""


class NonPositiveWeight(CarlemanLabError, ValueError):
    pass


class DegenerateInfinite(CarlemanLabError):
    pass


class NotLogConvex(CarlemanLabError):
    def __init__(self, index: int):
        self.index = index
        super().__init__(f"sequence is not log-convex at n={index}")


class DivergentTail(CarlemanLabError):
    """The p-characteristic is infinite, so the requested series has no value."""


DivergentKappa = DivergentTail


class NonPositiveWidth(CarlemanLabError, ValueError):
    pass


class DegreeCapExceeded(CarlemanLabError):
    pass


class RootIsolationFailure(CarlemanLabError):
    def __init__(self, bracket: tuple[float, float]):
        self.bracket = bracket
        super().__init__(f"root isolation failed inside {bracket}")


class QuadratureNonConvergence(CarlemanLabError):
    pass


class DistributionalDerivative(CarlemanLabError):
    """A requested derivative has a singular part that is not a plain measure."""


class UnderflowWidth(CarlemanLabError):
    pass


class KExhausted(CarlemanLabError):
    pass


class BadPeriod(CarlemanLabError, ValueError):
    pass


class DepthExhausted(CarlemanLabError):
    pass


class RhoNotFound(CarlemanLabError):
    pass
