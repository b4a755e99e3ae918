"""Exception types raised across the package."""


class ConhjError(Exception):
    """Base class for all solver and verification errors."""


class UnknownFamily(ConhjError, KeyError):
    pass


class ParamOutOfRange(ConhjError, ValueError):
    def __init__(self, name, value, reason=""):
        self.name = name
        self.value = value
        msg = f"parameter {name!r}={value!r} out of range"
        if reason:
            msg += f": {reason}"
        super().__init__(msg)


class NegativeI(ConhjError, ValueError):
    pass


class Saturated(ConhjError, ValueError):
    pass


class OutOfDomain(ConhjError, ValueError):
    pass


class NotDiagonallyDominant(ConhjError, ValueError):
    pass


class SingularPivot(ConhjError, ZeroDivisionError):
    pass


class BracketInvalid(ConhjError, ValueError):
    pass


class OverflowDetected(ConhjError, FloatingPointError):
    pass


class CflViolation(ConhjError, RuntimeError):
    pass


class MonotonicityViolated(ConhjError, RuntimeError):
    pass


class InfeasibleLow(ConhjError, RuntimeError):
    """The constraint cannot be met even with a zero multiplier."""


class SaturatedHigh(ConhjError, RuntimeError):
    """The constraint cannot be met even with the multiplier at I_max."""


class AssumptionsFailed(ConhjError, ValueError):
    pass


class PreconditionFailed(ConhjError, ValueError):
    pass


class HorizonMismatch(ConhjError, ValueError):
    pass


class LeftDomain(ConhjError, RuntimeError):
    pass


class NoHit(ConhjError, RuntimeError):
    pass


class ConfigInvalid(ConhjError, ValueError):
    def __init__(self, field, reason="missing or invalid"):
        self.field = field
        super().__init__(f"config field {field!r}: {reason}")


class InputMismatch(ConhjError, ValueError):
    pass
