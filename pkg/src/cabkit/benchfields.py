"""Benchmark right-hand sides for verification runs.

Two nonlinear planar fields exercise the solvers (a damped polynomial system
with sinusoidal forcing and a cubic-damped rotator with modulated frequency),
plus a family of analytic fields whose exact solutions close in elementary
functions for regression use.  All share the signature field(y, rho) -> dy/drho.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable, Mapping

import numpy as np

from .errors import DomainError

FIELD_NAMES = (
    "v1",
    "v2",
    "constant",
    "linear-in-rho",
    "quadratic-in-rho",
    "exp-decay",
)

_ANALYTIC = ("constant", "linear-in-rho", "quadratic-in-rho", "exp-decay")


def eval_v1(y: np.ndarray, rho: float) -> np.ndarray:
    """First nonlinear verification field (2-D, quadratic terms, forced)."""
    y1, y2 = y[0], y[1]
    return np.array([
        -1.5 * y1 + 0.9 * y2 + 0.2 * y1 * y2 + 0.15 * np.sin(3.0 * rho),
        -1.0 * y2 - 0.7 * y1 + 0.1 * y1 * y1 - 0.08 * y2 * y2 + 0.1 * np.cos(2.0 * rho),
    ])


def eval_v2(y: np.ndarray, rho: float) -> np.ndarray:
    """Second nonlinear verification field (cubic-damped modulated rotator)."""
    y1, y2 = y[0], y[1]
    a = 0.3 + 0.4 * (y1 * y1 + y2 * y2)
    w = 3.0 + 0.2 * np.sin(rho)
    return np.array([-a * y1 - w * y2, w * y1 - a * y2])


@dataclass(frozen=True, eq=False)
class BenchField:
    """Named right-hand side with a fixed dimension and scalar parameters."""

    name: str
    dimension: int
    params: Mapping[str, float]
    _fn: Callable[[np.ndarray, float], np.ndarray] = dc_field(repr=False, default=None)

    def __call__(self, y: np.ndarray, rho: float) -> np.ndarray:
        return self._fn(np.asarray(y, dtype=float), float(rho))


def v1_field() -> BenchField:
    return BenchField("v1", 2, {}, eval_v1)


def v2_field() -> BenchField:
    return BenchField("v2", 2, {}, eval_v2)


def constant_field(dimension: int = 1, value: float = 1.0) -> BenchField:
    value = float(value)

    def fn(y, rho):
        return np.full(dimension, value)

    return BenchField("constant", dimension, {"value": value}, fn)


def linear_field(dimension: int = 1, a: float = 1.0, b: float = 1.0) -> BenchField:
    """Field a + b rho, constant across components."""
    a, b = float(a), float(b)

    def fn(y, rho):
        return np.full(dimension, a + b * rho)

    return BenchField("linear-in-rho", dimension, {"a": a, "b": b}, fn)


def quadratic_field(dimension: int = 1) -> BenchField:
    def fn(y, rho):
        return np.full(dimension, rho * rho)

    return BenchField("quadratic-in-rho", dimension, {}, fn)


def exp_decay_field(dimension: int = 1, rate: float = 1.0) -> BenchField:
    """Field -rate * y, decaying along increasing rho."""
    rate = float(rate)

    def fn(y, rho):
        return -rate * y

    return BenchField("exp-decay", dimension, {"rate": rate}, fn)


_FACTORIES: dict[str, Callable[..., BenchField]] = {
    "v1": v1_field,
    "v2": v2_field,
    "constant": constant_field,
    "linear-in-rho": linear_field,
    "quadratic-in-rho": quadratic_field,
    "exp-decay": exp_decay_field,
}


def make_field(name: str, dimension: int | None = None, **params: float) -> BenchField:
    """Build a field from its name; dimension applies to the analytic kinds."""
    if name not in _FACTORIES:
        raise DomainError(f"unknown field {name!r}; expected one of {FIELD_NAMES}")
    if name in ("v1", "v2"):
        if dimension not in (None, 2):
            raise DomainError(f"field {name!r} is two-dimensional")
        if params:
            raise DomainError(f"field {name!r} takes no parameters")
        return _FACTORIES[name]()
    kwargs = dict(params)
    if dimension is not None:
        kwargs["dimension"] = int(dimension)
    return _FACTORIES[name](**kwargs)


def exact_solution(field: BenchField, y0: np.ndarray, rho_span: tuple[float, float]) -> np.ndarray:
    """Closed-form endpoint state for the analytic field kinds."""
    if field.name not in _ANALYTIC:
        raise DomainError(f"no closed-form solution for field {field.name!r}")
    y0 = np.asarray(y0, dtype=float)
    r0, r1 = float(rho_span[0]), float(rho_span[1])
    if field.name == "constant":
        return y0 + field.params["value"] * (r1 - r0)
    if field.name == "linear-in-rho":
        a, b = field.params["a"], field.params["b"]
        return y0 + a * (r1 - r0) + 0.5 * b * (r1 * r1 - r0 * r0)
    if field.name == "quadratic-in-rho":
        return y0 + (r1**3 - r0**3) / 3.0
    return y0 * np.exp(-field.params["rate"] * (r1 - r0))
