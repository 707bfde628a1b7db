"""Exception types shared across modules."""


class OneSidedError(Exception):
    """Base class; ``module`` names the component that raised."""

    module = "onesided"


class InvalidReward(OneSidedError, ValueError):
    module = "reward"


class InvalidTruncation(InvalidReward):
    module = "reward"


class InvalidLaw(OneSidedError, ValueError):
    module = "stochastic"


class DegenerateLaw(InvalidLaw):
    module = "stochastic"


class PreconditionError(OneSidedError, ValueError):
    module = "onesided"


class UnboundedExpectation(OneSidedError, ArithmeticError):
    module = "stochastic"


class TruncationDominates(OneSidedError, ArithmeticError):
    module = "stochastic"


class GridTooNarrow(OneSidedError):
    module = "oracle"


class ScheduleTooShort(OneSidedError):
    module = "solver"


class MonotonicityViolated(OneSidedError):
    module = "levy"


class NoiseDominates(OneSidedError):
    module = "smoothfit"
