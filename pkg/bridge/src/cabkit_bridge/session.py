"""Externally-stepped sampling sessions.

Inversion of control for pipelines that own their model execution: the host
asks the session which state and timestep to evaluate its network at, submits
the raw network output (in any of the three parameterizations), and receives
the next state.  The bridge performs exactly the arithmetic of the in-process
sampling loop, so replaying a recorded sequence of noise evaluations
reproduces the in-process trajectory.

Submissions must arrive in grid order; replays, skips, and premature result
requests raise ProtocolError without corrupting the session.  Vectors cross
the boundary as contiguous float64 buffers of explicit length.
"""

from __future__ import annotations

from typing import Mapping

import numpy as np

from cabkit import (
    CabKitError,
    DivergenceError,
    DomainError,
    GammaPolicy,
    SamplerConfig,
    Schedule,
    SamplingGrid,
    StepGeometry,
    build_grid,
    cab_update,
    make_schedule,
)

PARAMETERIZATIONS = ("noise", "data", "velocity")

#: Matches the division guard of the in-process data-prediction adapter.
RHO_DIVISION_GUARD = 1e-12


class ProtocolError(CabKitError):
    """Out-of-order, repeated, or premature interaction with a session."""


def _as_buffer(vector, dim: int) -> np.ndarray:
    out = np.ascontiguousarray(vector, dtype=np.float64)
    if out.shape != (dim,):
        raise ValueError(f"expected a length-{dim} vector, got shape {out.shape}")
    return out


def _resolve_schedule(schedule_spec) -> Schedule:
    if isinstance(schedule_spec, Schedule):
        return schedule_spec
    if isinstance(schedule_spec, Mapping):
        spec = dict(schedule_spec)
        kind = spec.pop("kind", None)
        if kind is None:
            raise DomainError("schedule spec needs a 'kind' entry")
        return make_schedule(kind, **spec)
    raise DomainError("schedule spec must be a Schedule or a {'kind': ..., ...} map")


def _resolve_config(sampler_config) -> SamplerConfig:
    if isinstance(sampler_config, SamplerConfig):
        return sampler_config
    if isinstance(sampler_config, Mapping):
        spec = dict(sampler_config)
        if "gamma" in spec and not isinstance(spec["gamma"], GammaPolicy):
            spec["gamma"] = GammaPolicy(
                spec.pop("gamma_mode", "constant"), float(spec["gamma"])
            )
        return SamplerConfig(**spec)
    raise DomainError("sampler config must be a SamplerConfig or a mapping")


class BridgeSession:
    """One externally-stepped sampling run over a fixed grid.

    Single-owner and strictly sequential; create independent sessions for
    concurrent trajectories.
    """

    def __init__(
        self,
        schedule: Schedule,
        config: SamplerConfig,
        x_init,
        t_start: float | None = None,
        t_end: float | None = None,
    ):
        self._schedule = schedule
        self._config = config
        self._grid: SamplingGrid = build_grid(
            schedule, config.grid_kind, config.n_steps, config.terminal_merge,
            t_start=t_start, t_end=t_end,
        )
        self._svals = [schedule.eval(t) for t in self._grid.t_nodes]
        self._dim = None
        x0 = np.ascontiguousarray(x_init, dtype=np.float64)
        if x0.ndim != 1 or x0.size < 1:
            raise DomainError("x_init must be a one-dimensional vector")
        if not np.all(np.isfinite(x0)):
            raise DomainError("x_init must be finite")
        self._dim = x0.size
        self._ys = [x0 / self._svals[0].s]
        self._eps: list[np.ndarray] = []
        self._cursor = 0

    # -- introspection ------------------------------------------------------

    @property
    def grid(self) -> SamplingGrid:
        return self._grid

    @property
    def t_grid(self) -> np.ndarray:
        return self._grid.t_nodes.copy()

    @property
    def rho_grid(self) -> np.ndarray:
        return self._grid.rho_nodes.copy()

    @property
    def evaluation_times(self) -> np.ndarray:
        """Timesteps at which the host must evaluate its network, in order."""
        return self._grid.t_nodes[:-1].copy()

    @property
    def cursor(self) -> int:
        """Index of the next expected submission."""
        return self._cursor

    @property
    def done(self) -> bool:
        return self._cursor >= self._grid.n_nodes - 1

    @property
    def dimension(self) -> int:
        return self._dim

    @property
    def current_t(self) -> float:
        self._require_active()
        return float(self._grid.t_nodes[self._cursor])

    @property
    def current_x(self) -> np.ndarray:
        """State the host should feed its network at the cursor timestep."""
        self._require_active()
        return np.ascontiguousarray(self._svals[self._cursor].s * self._ys[self._cursor])

    # -- stepping -----------------------------------------------------------

    def step(self, step_index: int, model_output, parameterization: str = "noise"):
        """Submit the model output for one grid node; returns (next_x, done).

        ``step_index`` must equal the session cursor: smaller indices are
        replays, larger ones skips, and both are protocol errors.  The output
        is converted to the rectified noise field according to the declared
        parameterization, then one update of the sampling ladder is applied.
        """
        if self.done:
            raise ProtocolError("session is finished; no further steps accepted")
        if step_index != self._cursor:
            kind = "replayed" if step_index < self._cursor else "skipped"
            raise ProtocolError(
                f"{kind} submission: got step {step_index}, expected {self._cursor}"
            )
        if parameterization not in PARAMETERIZATIONS:
            raise DomainError(
                f"unknown parameterization {parameterization!r}; "
                f"expected one of {PARAMETERIZATIONS}"
            )
        out = _as_buffer(model_output, self._dim)
        if not np.all(np.isfinite(out)):
            raise DivergenceError(self._cursor, "non-finite model output")

        i = self._cursor
        vals = self._svals[i]
        y_i = self._ys[i]
        eps_i = self._convert(out, y_i, vals, parameterization)
        rho = self._grid.rho_nodes
        h_i = rho[i + 1] - rho[i]
        if i == 0 or self._config.order == 1:
            y_next = y_i + h_i * eps_i
        elif i == 1:
            r = h_i / (rho[1] - rho[0])
            y_next = y_i + h_i * ((1.0 + 0.5 * r) * eps_i - 0.5 * r * self._eps[i - 1])
        else:
            geom = StepGeometry(h_i, rho[i] - rho[i - 1], rho[i - 1] - rho[i - 2])
            gamma_i = self._config.gamma.gamma_for(h_i)
            y_next = cab_update(
                self._config.order,
                y_i,
                (eps_i, self._eps[i - 1], self._eps[i - 2]),
                geom,
                gamma_i,
            )
        if not np.all(np.isfinite(y_next)):
            raise DivergenceError(i)
        self._eps.append(eps_i)
        self._ys.append(y_next)
        self._cursor += 1
        next_x = np.ascontiguousarray(self._svals[self._cursor].s * y_next)
        return next_x, self.done

    def result(self) -> np.ndarray:
        """Final state; raises ProtocolError while steps are outstanding."""
        if not self.done:
            raise ProtocolError(
                f"result requested at step {self._cursor} of {self._grid.n_nodes - 1}"
            )
        return np.ascontiguousarray(self._svals[-1].s * self._ys[-1])

    # -- internals ----------------------------------------------------------

    def _require_active(self):
        if self.done:
            raise ProtocolError("session is finished")

    def _convert(self, out, y, vals, parameterization):
        if parameterization == "noise":
            return out
        if parameterization == "data":
            if vals.rho < RHO_DIVISION_GUARD:
                raise DomainError(
                    f"rho={vals.rho} below division guard for data conversion"
                )
            return (y - out) / vals.rho
        return (out - vals.sdot * y) / (vals.s * vals.rhodot)


def create_session(
    schedule_spec,
    sampler_config,
    x_init,
    t_start: float | None = None,
    t_end: float | None = None,
) -> BridgeSession:
    """Open a session from a schedule spec, a sampler config, and a start state.

    ``schedule_spec`` is a Schedule or a flat map with a 'kind' key;
    ``sampler_config`` is a SamplerConfig or a map of its fields (a bare
    'gamma' number is promoted to a constant corrector weight).
    """
    schedule = _resolve_schedule(schedule_spec)
    config = _resolve_config(sampler_config)
    return BridgeSession(schedule, config, x_init, t_start=t_start, t_end=t_end)
