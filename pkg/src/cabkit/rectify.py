"""Adapters presenting noise/data/velocity models as one rectified field.

Rescaling the state as y = x/s and reparameterizing time by rho = sigma/s
turns the reverse-time ODE into dy/drho = eps(s y, t(rho)), where eps is the
noise-prediction field.  Data-prediction and velocity-prediction models are
converted to that same field pointwise:

    noise:     eps = model(x, t)
    data:      eps = (y - model(x, t)) / rho
    velocity:  eps = (model(x, t) - sdot * y) / (s * rhodot)

with x = s * y throughout, so wrapped networks always see original coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainError, NumericError, ScheduleViolationError
from .schedule import Schedule, ScheduleValues

PARAMETERIZATIONS = ("noise", "data", "velocity")

#: The data-prediction conversion divides by rho; refuse anything below this.
RHO_DIVISION_GUARD = 1e-12


@dataclass(frozen=True, eq=False)
class ModelField:
    """A model evaluator in one of the three interchangeable parameterizations.

    ``fn(x, t)`` must return a vector of length ``dimension`` for a state
    vector ``x`` of the same length.  Set ``reentrant`` only if ``fn`` may be
    called concurrently; the sampler itself always calls sequentially.
    """

    parameterization: str
    fn: Callable[[np.ndarray, float], np.ndarray]
    dimension: int
    reentrant: bool = False

    def __post_init__(self):
        if self.parameterization not in PARAMETERIZATIONS:
            raise DomainError(
                f"unknown parameterization {self.parameterization!r}; "
                f"expected one of {PARAMETERIZATIONS}"
            )
        if self.dimension < 1:
            raise DomainError("model dimension must be a positive integer")

    def evaluate(self, x: np.ndarray, t: float) -> np.ndarray:
        """Call the wrapped evaluator, checking shape and finiteness."""
        out = np.asarray(self.fn(np.asarray(x, dtype=float), float(t)), dtype=float)
        if out.shape != (self.dimension,):
            raise ValueError(
                f"model returned shape {out.shape}, expected ({self.dimension},)"
            )
        if not np.all(np.isfinite(out)):
            raise NumericError("model output", f"at t={t}")
        return out


@dataclass(frozen=True, eq=False)
class RectifiedField:
    """A model plus its schedule, evaluated as the rectified noise field.

    Immutable; concurrent evaluation is permitted only when the wrapped model
    is declared reentrant.
    """

    model: ModelField
    schedule: Schedule

    def __call__(self, y: np.ndarray, rho: float) -> np.ndarray:
        """Rectified field at (y, rho); inverts rho to recover the model time."""
        t = self.schedule.invert_rho(rho)
        return self._adapt(y, self.schedule.eval(t), t, rho=float(rho))

    def eval_at_time(self, y: np.ndarray, t: float) -> np.ndarray:
        """Rectified field at (y, rho(t)) when the time is already known."""
        return self._adapt(y, self.schedule.eval(t), float(t))

    def eval_with_values(self, y: np.ndarray, vals: ScheduleValues, t: float) -> np.ndarray:
        """Variant taking precomputed schedule values; used by the sampler loop."""
        return self._adapt(y, vals, float(t))

    def _adapt(
        self, y: np.ndarray, vals: ScheduleValues, t: float, rho: float | None = None
    ) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if rho is None:
            rho = vals.rho
        x = vals.s * y
        kind = self.model.parameterization
        if kind == "noise":
            return self.model.evaluate(x, t)
        if kind == "data":
            if rho < RHO_DIVISION_GUARD:
                raise DomainError(
                    f"rho={rho} below division guard {RHO_DIVISION_GUARD} "
                    "for data-prediction conversion"
                )
            return (y - self.model.evaluate(x, t)) / rho
        denom = vals.s * vals.rhodot
        if denom <= 0:
            raise ScheduleViolationError(
                f"s * rhodot = {denom} <= 0 at t={t} in velocity conversion"
            )
        return (self.model.evaluate(x, t) - vals.sdot * y) / denom


def rectify_eval(field: RectifiedField, y: np.ndarray, rho: float) -> np.ndarray:
    """Evaluate the rectified noise field at (y, rho); one model call."""
    return field(y, rho)


def reverse_ode_rhs(
    model: ModelField, schedule: Schedule, x: np.ndarray, t: float
) -> np.ndarray:
    """Right-hand side of the reverse-time ODE in original (x, t) coordinates.

    Returns f(t) x + (g(t)^2 / (2 sigma)) eps(x, t), converting data or
    velocity models to the noise field first.  Serves as the un-rectified
    reference dynamics in equivalence checks.
    """
    x = np.asarray(x, dtype=float)
    vals = schedule.eval(t)
    if vals.sigma <= 0:
        raise NumericError("sigma", f"singular schedule noise level at t={t}")
    f = vals.sdot / vals.s
    g_squared = 2.0 * vals.sigma * (vals.sigmadot - f * vals.sigma)
    if g_squared < -1e-12:
        raise ScheduleViolationError(f"g^2 = {g_squared} < 0 at t={t}")
    out = model.evaluate(x, t)
    kind = model.parameterization
    if kind == "noise":
        eps = out
    elif kind == "data":
        eps = (x - vals.s * out) / vals.sigma
    else:
        eps = (out - f * x) / (vals.s * vals.rhodot)
    return f * x + (max(g_squared, 0.0) / (2.0 * vals.sigma)) * eps


def model_from_rho_field(
    fn: Callable[[np.ndarray, float], np.ndarray],
    dimension: int,
    schedule: Schedule,
    reentrant: bool = False,
) -> ModelField:
    """Wrap a field defined on (y, rho) as a noise model on (x, t).

    The wrapper computes y = x/s(t) and rho(t), so sampling this model through
    ``schedule`` integrates dy/drho = fn(y, rho) exactly.
    """

    def noise_fn(x: np.ndarray, t: float) -> np.ndarray:
        vals = schedule.eval(t)
        return fn(x / vals.s, vals.rho)

    return ModelField(
        parameterization="noise", fn=noise_fn, dimension=dimension, reentrant=reentrant
    )
