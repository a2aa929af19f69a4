"""Exception taxonomy shared across the toolkit."""


class CabKitError(Exception):
    """Base class for all toolkit errors."""


class DomainError(CabKitError, ValueError):
    """Argument lies outside the valid domain (time, ratio, or range)."""


class NumericError(CabKitError, ArithmeticError):
    """A computed quantity came out non-finite or singular.

    Carries the name of the offending quantity in ``quantity``.
    """

    def __init__(self, quantity: str, detail: str = ""):
        self.quantity = quantity
        message = f"non-finite or invalid value for {quantity!r}"
        if detail:
            message += f": {detail}"
        super().__init__(message)


class ScheduleViolationError(CabKitError):
    """Schedule breaks a positivity or monotonicity requirement."""


class GeometryError(CabKitError, ValueError):
    """Invalid multistep step geometry (mixed signs, zero or non-finite steps)."""


class HistoryError(CabKitError):
    """Not enough stored evaluations for the requested multistep update."""


class DivergenceError(CabKitError):
    """Integration state became non-finite; carries the offending step index."""

    def __init__(self, step_index: int, detail: str = ""):
        self.step_index = step_index
        message = f"non-finite state at step {step_index}"
        if detail:
            message += f": {detail}"
        super().__init__(message)


class StiffnessError(CabKitError):
    """Adaptive integration could not proceed within its step budget."""


class StepUnderflowError(StiffnessError):
    """Adaptive step size collapsed below resolvable spacing."""


class FitError(CabKitError):
    """Too few usable points to fit a convergence order."""
