"""Variable-step AB2/AB3 weights, the extrapolation-defect correction, and updates.

All arithmetic is expressed in the signed current step h and the positive
step ratios r = h_cur/h_prev and r_prev = h_prev/h_prev2.  The corrected
update is

    y_next = predictor(order) + gamma * h * (eps_cur - eps_ext)

where eps_ext is the linear extrapolation of the two previous field values to
the current node.  The defect vanishes identically on fields that vary
linearly between nodes, so the correction only acts where the field bends.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from math import isfinite
from typing import Sequence

import numpy as np

from .errors import DomainError, GeometryError, HistoryError

#: Step-ratio range outside which accuracy constants degrade; warn, don't fail.
RATIO_WARN_RANGE = (0.01, 100.0)

#: Constant corrector weights beyond this are rejected as configuration errors.
MAX_CONSTANT_GAMMA = 10.0


class ExtremeStepRatioWarning(UserWarning):
    """Step ratio far from 1; truncation constants may be large."""


@dataclass(frozen=True)
class StepGeometry:
    """Signed steps h_cur, h_prev (and optionally h_prev2) of a multistep update.

    All steps must share one sign: the traversal of rho is strictly monotone.
    """

    h_cur: float
    h_prev: float
    h_prev2: float | None = None

    def __post_init__(self):
        steps = [self.h_cur, self.h_prev]
        if self.h_prev2 is not None:
            steps.append(self.h_prev2)
        for h in steps:
            if not isfinite(h) or h == 0.0:
                raise GeometryError(f"steps must be finite and nonzero, got {steps}")
        if len({h > 0 for h in steps}) != 1:
            raise GeometryError(f"steps must share one sign, got {steps}")
        for r in (self.r,) + ((self.r_prev,) if self.h_prev2 is not None else ()):
            if not isfinite(r) or r <= 0:
                raise GeometryError(f"step ratio {r} must be positive and finite")
            if not RATIO_WARN_RANGE[0] <= r <= RATIO_WARN_RANGE[1]:
                warnings.warn(
                    f"step ratio {r} outside {RATIO_WARN_RANGE}",
                    ExtremeStepRatioWarning,
                    stacklevel=3,
                )

    @property
    def r(self) -> float:
        """Ratio of the current step to the previous one."""
        return self.h_cur / self.h_prev

    @property
    def r_prev(self) -> float:
        """Ratio of the previous step to the one before it."""
        if self.h_prev2 is None:
            raise GeometryError("geometry holds no second previous step")
        return self.h_prev / self.h_prev2


@dataclass(frozen=True)
class GammaPolicy:
    """Corrector-weight rule: a constant gamma, or gamma_i = value * |h_i|."""

    mode: str = "constant"
    value: float = 0.0

    def __post_init__(self):
        if self.mode not in ("constant", "step-scaled"):
            raise DomainError(f"unknown gamma mode {self.mode!r}")
        if not isfinite(self.value) or self.value < 0:
            raise DomainError(f"gamma value must be finite and >= 0, got {self.value}")
        if self.mode == "constant" and self.value >= MAX_CONSTANT_GAMMA:
            raise DomainError(
                f"constant gamma {self.value} is outside the sane range "
                f"[0, {MAX_CONSTANT_GAMMA})"
            )

    def gamma_for(self, h: float) -> float:
        """Corrector weight to use on a step of signed size h."""
        if self.mode == "constant":
            return self.value
        return self.value * abs(h)


@dataclass(frozen=True)
class CombinedCoefficients:
    """Weights (a0, a1, a2) of the single-sum form y + h (a0 e0 + a1 e1 + a2 e2)."""

    a0: float
    a1: float
    a2: float

    def __post_init__(self):
        total = self.a0 + self.a1 + self.a2
        if abs(total - 1.0) > 1e-12 * max(1.0, abs(self.a0), abs(self.a1), abs(self.a2)):
            raise GeometryError(f"combined coefficients sum to {total}, not 1")


def ab2_weights(geom: StepGeometry) -> tuple[float, float]:
    """Two-step Adams-Bashforth weights (1 + r/2, -r/2) on the current geometry."""
    r = geom.r
    return 1.0 + 0.5 * r, -0.5 * r


def ab3_weights(geom: StepGeometry) -> tuple[float, float, float]:
    """Three-step Adams-Bashforth weights in ratio form.

    b0 = 1 + r(2 r_prev + 1)/(2(r_prev + 1)) + r_prev r^2/(3(r_prev + 1))
    b1 = -(r/6)(2 r_prev r + 3 r_prev + 3)
    b2 = r_prev^2 r (2r + 3)/(6(r_prev + 1))
    """
    r = geom.r
    rp = geom.r_prev
    b0 = 1.0 + r * (2.0 * rp + 1.0) / (2.0 * (rp + 1.0)) + rp * r * r / (3.0 * (rp + 1.0))
    b1 = -(r / 6.0) * (2.0 * rp * r + 3.0 * rp + 3.0)
    b2 = rp * rp * r * (2.0 * r + 3.0) / (6.0 * (rp + 1.0))
    return b0, b1, b2


def extrapolation_defect_weights(geom: StepGeometry) -> tuple[float, float]:
    """Weights (1 + r_prev, -r_prev) extrapolating the two past values forward."""
    rp = geom.r_prev
    return 1.0 + rp, -rp


def combined_coefficients(
    order: int, geom: StepGeometry, gamma: float
) -> CombinedCoefficients:
    """Fold predictor and correction into one weight triple.

    Order 2: (1 + r/2 + g, -(r/2 + (1 + r_prev) g), r_prev g).
    Order 3: (b0 + g, b1 - (1 + r_prev) g, b2 + r_prev g).
    """
    if order == 2:
        r = geom.r
        rp = geom.r_prev
        return CombinedCoefficients(
            1.0 + 0.5 * r + gamma,
            -(0.5 * r + (1.0 + rp) * gamma),
            rp * gamma,
        )
    if order == 3:
        b0, b1, b2 = ab3_weights(geom)
        rp = geom.r_prev
        return CombinedCoefficients(
            b0 + gamma, b1 - (1.0 + rp) * gamma, b2 + rp * gamma
        )
    raise DomainError(f"unsupported order {order}; expected 2 or 3")


def leading_truncation_kappa(geom: StepGeometry) -> float:
    """Coefficient -(1 + r_prev)/(2 r^2 r_prev) of the corrected order-3 residual.

    The local truncation error of the corrected three-step update is
    gamma * h^3 * kappa * y''' + O(h^4), so constant gamma costs one order
    while gamma = O(h) preserves third order.
    """
    r = geom.r
    rp = geom.r_prev
    return -(1.0 + rp) / (2.0 * r * r * rp)


def cab_update(
    order: int,
    y: np.ndarray,
    eps_history: Sequence[np.ndarray],
    geom: StepGeometry,
    gamma: float,
) -> np.ndarray:
    """One corrected Adams-Bashforth step from y over geom.h_cur.

    ``eps_history`` lists field evaluations newest first: (eps_cur, eps_prev,
    eps_prev2).  Order 2 with gamma = 0 needs only the first two entries; the
    defect term and order 3 need all three.  The predictor is evaluated first
    and the weighted defect added afterwards; with gamma = 0 the result is
    bitwise the plain Adams-Bashforth update.
    """
    if order not in (2, 3):
        raise DomainError(f"unsupported order {order}; expected 2 or 3")
    needed = 3 if (order == 3 or gamma != 0.0) else 2
    if len(eps_history) < needed:
        raise HistoryError(
            f"order-{order} update with gamma={gamma} needs {needed} stored "
            f"evaluations, got {len(eps_history)}"
        )
    h = geom.h_cur
    e0 = np.asarray(eps_history[0], dtype=float)
    e1 = np.asarray(eps_history[1], dtype=float)
    if order == 2:
        w0, w1 = ab2_weights(geom)
        y_next = y + h * (w0 * e0 + w1 * e1)
    else:
        b0, b1, b2 = ab3_weights(geom)
        e2 = np.asarray(eps_history[2], dtype=float)
        y_next = y + h * (b0 * e0 + b1 * e1 + b2 * e2)
    if gamma != 0.0:
        e2 = np.asarray(eps_history[2], dtype=float)
        c1, c2 = extrapolation_defect_weights(geom)
        eps_ext = c1 * e1 + c2 * e2
        y_next = y_next + gamma * h * (e0 - eps_ext)
    return y_next
