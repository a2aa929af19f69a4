"""High-accuracy adaptive reference integrator.

An embedded Dormand-Prince 5(4) pair with PI step-size control and the FSAL
optimization.  Output points are reached by integrating exactly to them (the
step is clipped), so reported states carry no interpolation error beyond the
step control itself.  Used to generate ground-truth trajectories against which
the multistep samplers are measured; it shares no code with them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, StepUnderflowError, StiffnessError

#: Classical order of the propagating solution of the embedded pair.
DESIGN_ORDER = 5

# Dormand-Prince 5(4) tableau.  The last row of _A equals _B, giving the
# first-same-as-last property: the seventh stage is the derivative at the
# accepted point and seeds the next step.
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = (
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
)
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
# b - b_hat: weights of the embedded error estimate.
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 10.0
_BETA = 0.04  # PI stabilization exponent
_ALPHA = 0.2 - 0.75 * _BETA

Rhs = Callable[[np.ndarray, float], np.ndarray]


@dataclass(frozen=True)
class OracleConfig:
    """Error-control settings for the reference integrator."""

    rtol: float = 1e-9
    atol: float = 1e-12
    max_steps: int = 1_000_000
    initial_step: float | None = None

    def __post_init__(self):
        if self.rtol < 1e-14:
            raise DomainError(f"rtol={self.rtol} below the supported 1e-14 floor")
        if self.atol < 1e-16:
            raise DomainError(f"atol={self.atol} below the supported 1e-16 floor")
        if self.max_steps < 1:
            raise DomainError("max_steps must be at least 1")
        if self.initial_step is not None and self.initial_step <= 0:
            raise DomainError("initial_step must be positive when given")


#: Settings used to generate frozen reference values.
GOLDEN_CONFIG = OracleConfig(rtol=1e-11, atol=1e-13)


def _stages(rhs: Rhs, tau: float, y: np.ndarray, h: float, k1: np.ndarray):
    k = np.empty((7, y.size))
    k[0] = k1
    for i in range(1, 6):
        yi = y + h * (_A[i - 1] @ k[:i])
        k[i] = rhs(yi, tau + _C[i] * h)
    y_new = y + h * (_A[5] @ k[:6])
    k[6] = rhs(y_new, tau + h)
    err = h * (_E @ k)
    return y_new, k[6], err


def integrate(
    rhs: Rhs,
    span: tuple[float, float],
    y0: np.ndarray,
    cfg: OracleConfig = OracleConfig(),
    output_points: Sequence[float] | None = None,
) -> np.ndarray:
    """Integrate dy/dtau = rhs(y, tau) over span, reporting at output_points.

    The span may run in either direction; output points must lie within it,
    ordered in the direction of travel.  Returns an array of shape
    (len(output_points), dim).  Raises StiffnessError when the accepted-step
    budget is exhausted and StepUnderflowError when the controller drives the
    step below 100 machine epsilons of the span width.
    """
    tau0, tau1 = float(span[0]), float(span[1])
    if tau0 == tau1:
        raise DomainError("integration span is degenerate")
    direction = 1.0 if tau1 > tau0 else -1.0
    width = abs(tau1 - tau0)
    if output_points is None:
        output_points = (tau1,)
    targets = [float(p) for p in output_points]
    if not targets:
        raise DomainError("no output points requested")
    slack = 1e-12 * max(1.0, width)
    prev = tau0
    for p in targets:
        if (p - prev) * direction < -slack:
            raise DomainError("output points must be ordered in the travel direction")
        if (p - tau0) * direction < -slack or (p - tau1) * direction > slack:
            raise DomainError(f"output point {p} outside span {span}")
        prev = p

    y = np.array(y0, dtype=float)
    if y.ndim != 1:
        raise DomainError("y0 must be a one-dimensional state vector")
    tau = tau0
    k1 = np.asarray(rhs(y, tau), dtype=float)
    h_abs = cfg.initial_step if cfg.initial_step is not None else width / 100.0
    h_min = 100.0 * np.finfo(float).eps * width
    err_prev = 1e-4
    accepted = 0
    out = np.empty((len(targets), y.size))

    for idx, target in enumerate(targets):
        while (target - tau) * direction > 0.0:
            h_abs = min(h_abs, abs(target - tau))
            if h_abs < h_min:
                raise StepUnderflowError(
                    f"step {h_abs} under {h_min} near tau={tau}"
                )
            h = direction * h_abs
            hit = abs(target - tau) <= h_abs * (1.0 + 1e-12)
            y_new, k_last, err_vec = _stages(rhs, tau, y, h, k1)
            scale = cfg.atol + cfg.rtol * np.maximum(np.abs(y), np.abs(y_new))
            err = float(np.sqrt(np.mean((err_vec / scale) ** 2)))
            if err <= 1.0:
                tau = target if hit else tau + h
                y = y_new
                k1 = k_last
                accepted += 1
                if accepted > cfg.max_steps:
                    raise StiffnessError(
                        f"exceeded {cfg.max_steps} accepted steps at tau={tau}"
                    )
                factor = _SAFETY * err ** (-_ALPHA) * err_prev**_BETA if err > 0 else _MAX_FACTOR
                err_prev = max(err, 1e-4)
            else:
                factor = _SAFETY * err ** (-_ALPHA)
            h_abs *= min(_MAX_FACTOR, max(_MIN_FACTOR, factor))
        out[idx] = y
    return out


def integrate_fixed(rhs: Rhs, span: tuple[float, float], y0: np.ndarray, n_steps: int) -> np.ndarray:
    """Propagate the fifth-order solution with n_steps uniform steps, no control.

    Exists to expose the design order of the pair for verification; the
    embedded error estimate is ignored.
    """
    if n_steps < 1:
        raise DomainError("n_steps must be at least 1")
    tau0, tau1 = float(span[0]), float(span[1])
    h = (tau1 - tau0) / n_steps
    y = np.array(y0, dtype=float)
    tau = tau0
    k1 = np.asarray(rhs(y, tau), dtype=float)
    for _ in range(n_steps):
        y, k1, _err = _stages(rhs, tau, y, h, k1)
        tau += h
    return y
