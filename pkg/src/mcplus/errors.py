"""Exception types raised across the package."""


class MCPlusError(Exception):
    """Base class for all package errors."""


class ZeroColumn(MCPlusError, ValueError):
    def __init__(self, j):
        super().__init__(f"column {j} has zero norm and cannot be standardized")
        self.j = j


class SingularMatrix(MCPlusError, ArithmeticError):
    def __init__(self, message, condition=float("inf")):
        super().__init__(f"{message} (condition estimate {condition:.3g})")
        self.condition = condition


class NotSymmetric(MCPlusError, ValueError):
    pass


class BadGamma(MCPlusError, ValueError):
    pass


class InvalidPenalty(MCPlusError, ValueError):
    pass


class NegativeT(MCPlusError, ValueError):
    pass


class AllZeroGradient(MCPlusError):
    pass


class AmbiguousTransition(MCPlusError):
    pass


class SingularQ(SingularMatrix):
    pass


class NotStandardized(MCPlusError, ValueError):
    pass


class LambdaNotReached(MCPlusError, ValueError):
    pass


class SingularSubGram(SingularMatrix):
    pass


class NonpositiveWeight(MCPlusError, ValueError):
    pass


class EmptyActiveSet(MCPlusError, ValueError):
    pass


class RankDeficientDesign(MCPlusError, ValueError):
    pass


class DegenerateDoF(MCPlusError, ValueError):
    pass


class BadDims(MCPlusError, ValueError):
    pass


class BadRange(MCPlusError, ValueError):
    pass


class InvalidRegime(MCPlusError, ValueError):
    pass


class BadParams(MCPlusError, ValueError):
    pass


class BadSize(MCPlusError, ValueError):
    pass


class BadPool(MCPlusError, ValueError):
    pass


class BadRho(MCPlusError, ValueError):
    pass


class InfeasiblePattern(MCPlusError, ValueError):
    pass


class ConfigError(MCPlusError, ValueError):
    pass


class InputError(MCPlusError, ValueError):
    pass
