"""Exception types shared across the package."""


class QuasiNeutralError(Exception):
    """Base class for all package errors."""


class ValidationError(QuasiNeutralError, ValueError):
    """Invalid parameters, scenario contents or call arguments."""


class NumericalError(QuasiNeutralError, RuntimeError):
    """An integration or numerical procedure failed."""


class StepSizeUnderflow(NumericalError):
    def __init__(self, t, h):
        super().__init__(f"step size underflow at t={t!r} (h={h!r})")
        self.t = t
        self.h = h


class NegativeStateError(NumericalError):
    def __init__(self, t, index, value, bound):
        super().__init__(
            f"state component {index} reached {value!r} at t={t!r}, "
            f"below the allowed excursion {-bound!r}"
        )
        self.t = t
        self.index = index
        self.value = value
