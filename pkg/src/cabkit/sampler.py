"""Grid construction and the corrected multistep sampling loop.

The loop follows the startup ladder of the corrected Adams-Bashforth method:
one Euler step, one plain two-step step, then corrected steps of the
configured order, all on the descending rho grid induced by a descending time
grid.  One model evaluation is spent per node except the final one.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    DivergenceError,
    DomainError,
    NumericError,
    ScheduleViolationError,
)
from .multistep import GammaPolicy, StepGeometry, cab_update
from .oracle import OracleConfig, integrate
from .rectify import ModelField, RectifiedField, reverse_ode_rhs
from .schedule import Schedule

GRID_KINDS = ("uniform-t", "uniform-rho", "log-uniform-rho")

#: Fewest grid nodes a multistep run can start from.
MIN_NODES = 3


@dataclass(frozen=True, eq=False)
class SamplingGrid:
    """Strictly decreasing time nodes with their induced rho nodes."""

    t_nodes: np.ndarray
    rho_nodes: np.ndarray
    merged_terminal: bool = False

    def __post_init__(self):
        t = np.asarray(self.t_nodes, dtype=float)
        rho = np.asarray(self.rho_nodes, dtype=float)
        object.__setattr__(self, "t_nodes", t)
        object.__setattr__(self, "rho_nodes", rho)
        if t.ndim != 1 or t.shape != rho.shape:
            raise DomainError("t_nodes and rho_nodes must be matching 1-D arrays")
        if len(t) < MIN_NODES:
            raise DomainError(f"grid needs at least {MIN_NODES} nodes, got {len(t)}")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(rho))):
            raise DomainError("grid nodes must be finite")
        if not np.all(np.diff(t) < 0):
            raise DomainError("t_nodes must be strictly decreasing")
        if not np.all(np.diff(rho) < 0):
            raise ScheduleViolationError("induced rho nodes are not strictly decreasing")

    @property
    def h(self) -> np.ndarray:
        """Signed rho steps, one per interval; all negative."""
        return np.diff(self.rho_nodes)

    @property
    def n_nodes(self) -> int:
        return len(self.t_nodes)


@dataclass(frozen=True)
class SamplerConfig:
    """Solver order, corrector policy, and grid-shape settings.

    Order 1 is a plain Euler ladder (the corrector never engages); orders 2
    and 3 are the corrected two- and three-step methods.
    """

    order: int = 2
    gamma: GammaPolicy = GammaPolicy("constant", 0.0)
    grid_kind: str = "uniform-t"
    n_steps: int = 8
    terminal_merge: bool = True

    def __post_init__(self):
        if self.order not in (1, 2, 3):
            raise DomainError(f"order must be 1, 2 or 3, got {self.order}")
        if self.grid_kind not in GRID_KINDS:
            raise DomainError(f"grid kind must be one of {GRID_KINDS}")
        if self.n_steps < MIN_NODES:
            raise DomainError(
                f"n_steps={self.n_steps} below the multistep minimum of {MIN_NODES}"
            )


@dataclass(frozen=True, eq=False)
class TrajectoryNode:
    """One grid node of a finished run; eps is absent at the final node."""

    index: int
    t: float
    rho: float
    y: np.ndarray
    x: np.ndarray
    eps: np.ndarray | None


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Per-node states in both coordinate systems plus the evaluation count."""

    nodes: tuple[TrajectoryNode, ...]
    nfe_count: int

    @property
    def final_x(self) -> np.ndarray:
        return self.nodes[-1].x

    @property
    def final_y(self) -> np.ndarray:
        return self.nodes[-1].y

    def y_array(self) -> np.ndarray:
        return np.stack([node.y for node in self.nodes])

    def x_array(self) -> np.ndarray:
        return np.stack([node.x for node in self.nodes])

    def to_csv(self, header_comments: Sequence[str] = ()) -> str:
        """Serialize as CSV: step,t,rho,y_0..y_{d-1},x_0..x_{d-1}."""
        dim = len(self.nodes[0].y)
        lines = [f"# {comment}" for comment in header_comments]
        columns = ["step", "t", "rho"]
        columns += [f"y_{i}" for i in range(dim)]
        columns += [f"x_{i}" for i in range(dim)]
        lines.append(",".join(columns))
        for node in self.nodes:
            cells = [str(node.index), _fmt(node.t), _fmt(node.rho)]
            cells += [_fmt(v) for v in node.y]
            cells += [_fmt(v) for v in node.x]
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def build_grid(
    schedule: Schedule,
    grid_kind: str,
    n_steps: int,
    terminal_merge: bool = True,
    t_start: float | None = None,
    t_end: float | None = None,
) -> SamplingGrid:
    """Place n_steps+1 time nodes from t_start down to t_end, then merge.

    uniform-t spaces the time nodes evenly; uniform-rho and log-uniform-rho
    space rho (or log rho) evenly and map the interior nodes back through the
    inverse of rho.  When terminal_merge is on, the penultimate node is
    removed, fusing the last two rho intervals into one; the node count drops
    from n_steps+1 to n_steps.
    """
    if grid_kind not in GRID_KINDS:
        raise DomainError(f"grid kind must be one of {GRID_KINDS}")
    if n_steps < MIN_NODES:
        raise DomainError(f"n_steps={n_steps} below the multistep minimum of {MIN_NODES}")
    t_hi = schedule.t_max if t_start is None else float(t_start)
    t_lo = schedule.t_min if t_end is None else float(t_end)
    if not schedule.t_min <= t_lo < t_hi <= schedule.t_max:
        raise DomainError(
            f"grid span [{t_lo}, {t_hi}] invalid for schedule domain "
            f"[{schedule.t_min}, {schedule.t_max}]"
        )
    if grid_kind == "uniform-t":
        t_nodes = np.linspace(t_hi, t_lo, n_steps + 1)
    else:
        rho_hi = schedule.eval(t_hi).rho
        rho_lo = schedule.eval(t_lo).rho
        if grid_kind == "uniform-rho":
            rho_targets = np.linspace(rho_hi, rho_lo, n_steps + 1)
        else:
            rho_targets = np.geomspace(rho_hi, rho_lo, n_steps + 1)
        t_nodes = np.array([schedule.invert_rho(r) for r in rho_targets])
        t_nodes[0], t_nodes[-1] = t_hi, t_lo
    rho_nodes = np.array([schedule.eval(t).rho for t in t_nodes])
    if terminal_merge:
        t_nodes = np.delete(t_nodes, -2)
        rho_nodes = np.delete(rho_nodes, -2)
    return SamplingGrid(t_nodes, rho_nodes, merged_terminal=terminal_merge)


def sample(
    field: RectifiedField,
    config: SamplerConfig,
    grid: SamplingGrid,
    x_init: np.ndarray,
    startup_states: Sequence[np.ndarray] | None = None,
) -> Trajectory:
    """Integrate the rectified field over the grid starting from x_init.

    ``startup_states`` optionally supplies exact rescaled states for nodes 1
    and 2, replacing the algorithmic startup; field evaluations still happen
    at every node but the last, so the evaluation count is unchanged.
    """
    dim = field.model.dimension
    x0 = np.asarray(x_init, dtype=float)
    if x0.shape != (dim,):
        raise DomainError(f"x_init has shape {x0.shape}, expected ({dim},)")
    if not np.all(np.isfinite(x0)):
        raise DomainError("x_init must be finite")
    seeds = [
        np.asarray(s, dtype=float)
        for s in (() if startup_states is None else startup_states)
    ]
    if len(seeds) > 2:
        raise DomainError("at most the first two nodes can be seeded")
    for s in seeds:
        if s.shape != (dim,):
            raise DomainError("seeded states must match the model dimension")

    t = grid.t_nodes
    rho = grid.rho_nodes
    n = grid.n_nodes
    svals = [field.schedule.eval(tk) for tk in t]
    ys = [x0 / svals[0].s]
    eps: list[np.ndarray] = []
    for i in range(n - 1):
        try:
            eps_i = field.eval_with_values(ys[i], svals[i], t[i])
        except NumericError as exc:
            raise DivergenceError(i, str(exc)) from exc
        eps.append(eps_i)
        h_i = rho[i + 1] - rho[i]
        if i < len(seeds):
            y_next = seeds[i]
        elif i == 0 or config.order == 1:
            y_next = ys[i] + h_i * eps_i
        elif i == 1:
            r = h_i / (rho[1] - rho[0])
            y_next = ys[i] + h_i * ((1.0 + 0.5 * r) * eps_i - 0.5 * r * eps[i - 1])
        else:
            geom = StepGeometry(h_i, rho[i] - rho[i - 1], rho[i - 1] - rho[i - 2])
            gamma_i = config.gamma.gamma_for(h_i)
            y_next = cab_update(
                config.order, ys[i], (eps_i, eps[i - 1], eps[i - 2]), geom, gamma_i
            )
        if not np.all(np.isfinite(y_next)):
            raise DivergenceError(i)
        ys.append(y_next)

    nodes = tuple(
        TrajectoryNode(
            index=i,
            t=float(t[i]),
            rho=float(rho[i]),
            y=ys[i],
            x=svals[i].s * ys[i],
            eps=eps[i] if i < n - 1 else None,
        )
        for i in range(n)
    )
    return Trajectory(nodes=nodes, nfe_count=n - 1)


def sample_reverse_ode(
    model: ModelField,
    schedule: Schedule,
    grid: SamplingGrid,
    x_init: np.ndarray,
    tol: float = 1e-9,
) -> Trajectory:
    """Reference integration of the un-rectified reverse ODE in (x, t).

    Drives the adaptive oracle through every grid node at relative tolerance
    ``tol``; used to validate the coordinate change against direct
    integration.  The evaluation count reflects actual model calls.
    """
    x0 = np.asarray(x_init, dtype=float)
    if x0.shape != (model.dimension,):
        raise DomainError(f"x_init has shape {x0.shape}, expected ({model.dimension},)")
    calls = 0

    def rhs(x: np.ndarray, t: float) -> np.ndarray:
        nonlocal calls
        calls += 1
        return reverse_ode_rhs(model, schedule, x, t)

    cfg = OracleConfig(rtol=tol, atol=max(tol * 1e-3, 1e-16))
    t = grid.t_nodes
    xs = integrate(rhs, (t[0], t[-1]), x0, cfg, output_points=t[1:])
    states = np.vstack([x0[None, :], xs])
    nodes = []
    for i in range(grid.n_nodes):
        s_i = schedule.eval(t[i]).s
        nodes.append(
            TrajectoryNode(
                index=i,
                t=float(t[i]),
                rho=float(grid.rho_nodes[i]),
                y=states[i] / s_i,
                x=states[i],
                eps=None,
            )
        )
    return Trajectory(nodes=tuple(nodes), nfe_count=calls)
