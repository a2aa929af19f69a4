"""Affine-Gaussian forward schedules and the noise-to-signal time map.

A schedule is the pair (s(t), sigma(t)) of scale and noise level defining the
forward corruption path x_t = s(t) x_0 + sigma(t) noise.  Everything downstream
works in the noise-to-signal ratio rho(t) = sigma(t)/s(t), which must be
strictly increasing on the schedule domain so that t(rho) exists.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from .errors import DomainError, NumericError, ScheduleViolationError

#: Number of probe points used to validate a schedule at construction.
PROBE_POINTS = 1024

_BISECT_TOL = 1e-13
_BISECT_MAX_ITER = 200

ScalarFn = Callable[[float], float]


@dataclass(frozen=True)
class ScheduleValues:
    """Schedule state at one time: scale, noise level, their rates, and rho."""

    s: float
    sdot: float
    sigma: float
    sigmadot: float
    rho: float
    rhodot: float


@dataclass(frozen=True)
class SdeCoefficients:
    """Drift rate f(t) and squared diffusion g(t)^2 of the forward SDE."""

    f: float
    g_squared: float


@dataclass(frozen=True, eq=False)
class Schedule:
    """Immutable schedule over [t_min, t_max] with analytic derivatives.

    Instances are built through :func:`vp_linear`, :func:`ve`,
    :func:`rectified_flow`, :func:`custom_schedule` or :func:`make_schedule`;
    construction validates positivity of s and sigma and strict growth of rho
    on a dense probe grid.  Values are immutable and safe to share across
    threads.
    """

    kind: str
    t_min: float
    t_max: float
    params: tuple[tuple[str, float], ...]
    _s: ScalarFn
    _sdot: ScalarFn
    _sigma: ScalarFn
    _sigmadot: ScalarFn

    def __post_init__(self):
        if not (math.isfinite(self.t_min) and math.isfinite(self.t_max)):
            raise DomainError("schedule domain must be finite")
        if not self.t_min < self.t_max:
            raise DomainError(f"empty schedule domain [{self.t_min}, {self.t_max}]")
        self._validate_probes()

    def _validate_probes(self):
        prev_rho = None
        for k in range(PROBE_POINTS):
            t = self.t_min + (self.t_max - self.t_min) * k / (PROBE_POINTS - 1)
            vals = self.eval(t)
            if vals.s <= 0:
                raise ScheduleViolationError(f"s(t) <= 0 at t={t}")
            if vals.sigma <= 0:
                raise ScheduleViolationError(f"sigma(t) <= 0 at t={t}")
            if prev_rho is not None and not vals.rho > prev_rho:
                raise ScheduleViolationError(f"rho not strictly increasing near t={t}")
            prev_rho = vals.rho

    def eval(self, t: float) -> ScheduleValues:
        """Evaluate s, sigma, their derivatives, and rho, rhodot at time t."""
        t = float(t)
        if not self.t_min <= t <= self.t_max:
            raise DomainError(
                f"t={t} outside schedule domain [{self.t_min}, {self.t_max}]"
            )
        s = self._s(t)
        sdot = self._sdot(t)
        sigma = self._sigma(t)
        sigmadot = self._sigmadot(t)
        for name, value in (("s", s), ("sdot", sdot), ("sigma", sigma), ("sigmadot", sigmadot)):
            if not math.isfinite(value):
                raise NumericError(name, f"at t={t}")
        if s <= 0:
            raise ScheduleViolationError(f"s(t) <= 0 at t={t}")
        rho = sigma / s
        rhodot = (sigmadot * s - sigma * sdot) / (s * s)
        for name, value in (("rho", rho), ("rhodot", rhodot)):
            if not math.isfinite(value):
                raise NumericError(name, f"at t={t}")
        if rhodot <= 0:
            raise ScheduleViolationError(f"rhodot <= 0 at t={t}")
        return ScheduleValues(s, sdot, sigma, sigmadot, rho, rhodot)

    def sde_coefficients(self, t: float) -> SdeCoefficients:
        """Forward-SDE drift rate f = sdot/s and g^2 = 2 sigma (sigmadot - f sigma)."""
        vals = self.eval(t)
        f = vals.sdot / vals.s
        g_squared = 2.0 * vals.sigma * (vals.sigmadot - f * vals.sigma)
        if g_squared < -1e-12:
            raise ScheduleViolationError(
                f"g^2 = {g_squared} < 0 at t={t}; rho is not increasing"
            )
        return SdeCoefficients(f, max(g_squared, 0.0))

    def rho_range(self) -> tuple[float, float]:
        """Smallest and largest reachable rho, i.e. (rho(t_min), rho(t_max))."""
        return self._rho(self.t_min), self._rho(self.t_max)

    def _rho(self, t: float) -> float:
        return self._sigma(t) / self._s(t)

    def invert_rho(self, rho: float) -> float:
        """Time t with rho(t) = rho; closed form when available, else bisection."""
        rho = float(rho)
        lo, hi = self.rho_range()
        slack = 1e-12 * max(1.0, abs(rho))
        if not lo - slack <= rho <= hi + slack:
            raise DomainError(f"rho={rho} outside reachable range [{lo}, {hi}]")
        rho = min(max(rho, lo), hi)
        if self.kind == "rectified-flow":
            t = rho / (1.0 + rho)
        elif self.kind == "ve":
            t = rho
        else:
            t = self._bisect_rho(rho)
        return min(max(t, self.t_min), self.t_max)

    def _bisect_rho(self, rho: float) -> float:
        t_lo, t_hi = self.t_min, self.t_max
        for _ in range(_BISECT_MAX_ITER):
            if t_hi - t_lo <= _BISECT_TOL:
                break
            mid = 0.5 * (t_lo + t_hi)
            if mid <= t_lo or mid >= t_hi:
                break
            if self._rho(mid) < rho:
                t_lo = mid
            else:
                t_hi = mid
        return 0.5 * (t_lo + t_hi)


def vp_linear(
    beta0: float = 0.1,
    beta1: float = 20.0,
    t_min: float = 1e-3,
    t_max: float = 1.0,
) -> Schedule:
    """Variance-preserving schedule with linear beta(t) = beta0 + t (beta1 - beta0).

    s(t) = exp(-t^2 (beta1 - beta0)/4 - t beta0/2) and sigma = sqrt(1 - s^2).
    """
    dbeta = beta1 - beta0

    def log_s(t: float) -> float:
        return -0.25 * t * t * dbeta - 0.5 * t * beta0

    def s(t: float) -> float:
        return math.exp(log_s(t))

    def sdot(t: float) -> float:
        return -0.5 * (beta0 + t * dbeta) * s(t)

    def sigma(t: float) -> float:
        # 1 - s^2 = -expm1(2 log s), kept in expm1 form for small t accuracy
        return math.sqrt(-math.expm1(2.0 * log_s(t)))

    def sigmadot(t: float) -> float:
        return -s(t) * sdot(t) / sigma(t)

    return Schedule(
        kind="vp-linear",
        t_min=t_min,
        t_max=t_max,
        params=(("beta0", beta0), ("beta1", beta1)),
        _s=s,
        _sdot=sdot,
        _sigma=sigma,
        _sigmadot=sigmadot,
    )


def ve(t_min: float = 2e-3, t_max: float = 80.0) -> Schedule:
    """Variance-exploding schedule: s = 1, sigma = t, so rho is the time itself."""
    return Schedule(
        kind="ve",
        t_min=t_min,
        t_max=t_max,
        params=(),
        _s=lambda t: 1.0,
        _sdot=lambda t: 0.0,
        _sigma=lambda t: t,
        _sigmadot=lambda t: 1.0,
    )


def rectified_flow(t_min: float = 1e-3, t_max: float = 1.0 - 1e-3) -> Schedule:
    """Straight-path schedule s = 1 - t, sigma = t, with rho = t/(1 - t)."""
    return Schedule(
        kind="rectified-flow",
        t_min=t_min,
        t_max=t_max,
        params=(),
        _s=lambda t: 1.0 - t,
        _sdot=lambda t: -1.0,
        _sigma=lambda t: t,
        _sigmadot=lambda t: 1.0,
    )


def custom_schedule(
    s: ScalarFn,
    sdot: ScalarFn,
    sigma: ScalarFn,
    sigmadot: ScalarFn,
    t_min: float,
    t_max: float,
    params: dict[str, float] | None = None,
) -> Schedule:
    """Wrap user-supplied evaluators; validated on the construction probe grid."""
    return Schedule(
        kind="custom",
        t_min=t_min,
        t_max=t_max,
        params=tuple(sorted((params or {}).items())),
        _s=s,
        _sdot=sdot,
        _sigma=sigma,
        _sigmadot=sigmadot,
    )


_FACTORIES = {
    "vp-linear": vp_linear,
    "vp": vp_linear,
    "ve": ve,
    "rectified-flow": rectified_flow,
    "rf": rectified_flow,
}


def make_schedule(kind: str, **params: float) -> Schedule:
    """Build a built-in schedule from its kind string and a flat parameter map."""
    try:
        factory = _FACTORIES[kind]
    except KeyError:
        raise DomainError(
            f"unknown schedule kind {kind!r}; expected one of {sorted(set(_FACTORIES))}"
        ) from None
    return factory(**params)
