"""Grid-refinement studies, order fits, low-budget comparisons, variation reports.

Studies integrate dy/drho = field(y, rho) directly in rho space: an identity
schedule (unit scale, rho equal to time) routes them through the production
sampling loop, while the adaptive oracle supplies the ground truth at every
node.  Reported errors are Euclidean per node; the fitted log-log slope of the
max-node error against the largest step is the headline quantity.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .benchfields import BenchField
from .errors import DivergenceError, DomainError, FitError
from .multistep import GammaPolicy
from .oracle import GOLDEN_CONFIG, OracleConfig, integrate
from .rectify import ModelField, RectifiedField, model_from_rho_field, reverse_ode_rhs
from .sampler import SamplerConfig, SamplingGrid, build_grid, sample
from .schedule import Schedule, ve

SOLVER_NAMES = ("euler", "ab2", "ab3", "cab2", "cab3")

_SOLVER_ORDER = {"euler": 1, "ab2": 2, "cab2": 2, "ab3": 3, "cab3": 3}

#: Corrector weights used by default in studies and comparisons.
DEFAULT_GAMMAS = {"cab2": 0.75, "cab3": 0.25, "cab3-step": 0.75}

DEFAULT_GRID_SIZES = (16, 32, 64, 128, 256, 512)

#: Per-field study conventions: (rho_span descending, y0).  Chosen so the
#: descending traversal stays bounded and the refinement range sits in the
#: asymptotic regime.
STUDY_CONVENTIONS = {
    "v1": ((2.0, 0.05), (0.4, -0.25)),
    "v2": ((1.2, 0.05), (0.5, 0.0)),
}

_DEFAULT_SPAN = (2.0, 0.05)


def study_convention(field: BenchField) -> tuple[tuple[float, float], np.ndarray]:
    """Default (rho_span, y0) for a field; analytic kinds start from ones."""
    if field.name in STUDY_CONVENTIONS:
        span, y0 = STUDY_CONVENTIONS[field.name]
        return span, np.array(y0, dtype=float)
    return _DEFAULT_SPAN, np.ones(field.dimension)


@dataclass(frozen=True)
class SolverSetting:
    """One study row: solver name, corrector policy, startup mode, CSV label."""

    solver: str
    gamma: GammaPolicy
    label: str
    seeded_startup: bool = False

    def __post_init__(self):
        if self.solver not in SOLVER_NAMES:
            raise DomainError(f"unknown solver {self.solver!r}; expected {SOLVER_NAMES}")

    @property
    def order(self) -> int:
        return _SOLVER_ORDER[self.solver]


def solver_setting(
    solver: str,
    gamma: float | None = None,
    gamma_mode: str = "constant",
    seeded_startup: bool = False,
    label: str | None = None,
) -> SolverSetting:
    """Build a SolverSetting with the conventional corrector defaults."""
    if solver not in SOLVER_NAMES:
        raise DomainError(f"unknown solver {solver!r}; expected {SOLVER_NAMES}")
    if solver in ("euler", "ab2", "ab3"):
        policy = GammaPolicy("constant", 0.0)
    else:
        key = solver if gamma_mode == "constant" else f"{solver}-step"
        value = DEFAULT_GAMMAS.get(key, 0.0) if gamma is None else float(gamma)
        policy = GammaPolicy(gamma_mode, value)
    if label is None:
        label = solver if policy.mode == "constant" else f"{solver}-step"
    return SolverSetting(solver, policy, label, seeded_startup)


@dataclass(frozen=True, eq=False)
class StudySpec:
    """A grid-refinement study: field, solver rows, grid sizes, span, start."""

    field: BenchField
    settings: tuple[SolverSetting, ...]
    grid_sizes: tuple[int, ...]
    rho_span: tuple[float, float]
    y0: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "settings", tuple(self.settings))
        object.__setattr__(self, "grid_sizes", tuple(int(n) for n in self.grid_sizes))
        object.__setattr__(self, "y0", np.asarray(self.y0, dtype=float))
        if not self.settings:
            raise DomainError("study needs at least one solver setting")
        if len({s.label for s in self.settings}) != len(self.settings):
            raise DomainError("solver setting labels must be unique")
        if list(self.grid_sizes) != sorted(self.grid_sizes) or min(self.grid_sizes) < 4:
            raise DomainError("grid sizes must be ascending and at least 4")
        hi, lo = self.rho_span
        if not hi > lo > 0:
            raise DomainError(
                f"rho span must be descending and positive, got {self.rho_span}"
            )
        if self.y0.shape != (self.field.dimension,):
            raise DomainError("y0 must match the field dimension")


def default_study(
    field: BenchField,
    settings: Sequence[SolverSetting] | None = None,
    grid_sizes: Sequence[int] = DEFAULT_GRID_SIZES,
    rho_span: tuple[float, float] | None = None,
    y0: np.ndarray | None = None,
) -> StudySpec:
    """StudySpec with the standard conventions for the given field."""
    span, start = study_convention(field)
    if settings is None:
        settings = tuple(solver_setting(name) for name in SOLVER_NAMES)
    return StudySpec(
        field=field,
        settings=tuple(settings),
        grid_sizes=tuple(grid_sizes),
        rho_span=span if rho_span is None else rho_span,
        y0=start if y0 is None else np.asarray(y0, dtype=float),
    )


@dataclass(frozen=True)
class StudyCell:
    """Errors of one (solver, grid size) pair."""

    label: str
    gamma_mode: str
    gamma: float
    n: int
    h_max: float
    max_err: float
    final_err: float


@dataclass(frozen=True, eq=False)
class ConvergenceReport:
    """All study cells plus per-solver fitted slopes."""

    cells: tuple[StudyCell, ...]
    slopes: Mapping[str, tuple[float, float]]

    def to_csv(self) -> str:
        lines = ["solver,gamma_mode,gamma,N,h_max,max_err,final_err"]
        for c in self.cells:
            lines.append(
                f"{c.label},{c.gamma_mode},{_fmt(c.gamma)},{c.n},"
                f"{_fmt(c.h_max)},{_fmt(c.max_err)},{_fmt(c.final_err)}"
            )
        for label, (slope, r2) in self.slopes.items():
            lines.append(f"# slope,{label},{_fmt(slope)},{_fmt(r2)}")
        return "\n".join(lines) + "\n"


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def _rho_schedule(rho_span: tuple[float, float]) -> Schedule:
    # Identity schedule: s = 1 and rho = t, so x = y and the grid lives in rho.
    return ve(t_min=rho_span[1], t_max=rho_span[0])


def _study_grid(schedule: Schedule, rho_span: tuple[float, float], n: int) -> SamplingGrid:
    return build_grid(
        schedule,
        "uniform-rho",
        n,
        terminal_merge=False,
        t_start=rho_span[0],
        t_end=rho_span[1],
    )


def _reference_states(
    field: BenchField,
    y0: np.ndarray,
    grid: SamplingGrid,
    oracle_cfg: OracleConfig,
) -> np.ndarray:
    span = (grid.rho_nodes[0], grid.rho_nodes[-1])
    tail = integrate(field, span, y0, oracle_cfg, output_points=grid.rho_nodes[1:])
    return np.vstack([np.asarray(y0, dtype=float)[None, :], tail])


def run_study(spec: StudySpec, oracle_cfg: OracleConfig = GOLDEN_CONFIG) -> ConvergenceReport:
    """Run every (solver, N) cell of the study and fit per-solver slopes.

    A diverging cell records infinite error and is excluded from its solver's
    fit rather than aborting the study.
    """
    schedule = _rho_schedule(spec.rho_span)
    rfield = RectifiedField(
        model_from_rho_field(spec.field, spec.field.dimension, schedule), schedule
    )
    prepared = {}
    for n in spec.grid_sizes:
        grid = _study_grid(schedule, spec.rho_span, n)
        prepared[n] = (grid, _reference_states(spec.field, spec.y0, grid, oracle_cfg))

    cells = []
    points: dict[str, list[tuple[float, float]]] = {s.label: [] for s in spec.settings}
    for setting in spec.settings:
        for n in spec.grid_sizes:
            grid, ref = prepared[n]
            config = SamplerConfig(
                order=setting.order,
                gamma=setting.gamma,
                grid_kind="uniform-rho",
                n_steps=n,
                terminal_merge=False,
            )
            seeds = ref[1:3] if setting.seeded_startup else None
            try:
                traj = sample(rfield, config, grid, spec.y0, startup_states=seeds)
                errs = np.linalg.norm(traj.y_array() - ref, axis=1)
                max_err = float(errs.max())
                final_err = float(errs[-1])
            except DivergenceError:
                max_err = final_err = float("inf")
            h_max = float(np.max(np.abs(grid.h)))
            cells.append(
                StudyCell(
                    label=setting.label,
                    gamma_mode=setting.gamma.mode,
                    gamma=setting.gamma.value,
                    n=n,
                    h_max=h_max,
                    max_err=max_err,
                    final_err=final_err,
                )
            )
            points[setting.label].append((h_max, max_err))

    slopes = {}
    for label, pts in points.items():
        try:
            slopes[label] = estimate_order(pts)
        except FitError:
            pass  # all-divergent solver: no slope line
    return ConvergenceReport(cells=tuple(cells), slopes=slopes)


def estimate_order(points: Sequence[tuple[float, float]]) -> tuple[float, float]:
    """Least-squares slope of log error against log step, with its r^2.

    Exact or diverged cells (nonpositive or non-finite error) are excluded;
    fewer than three usable points raise FitError.
    """
    usable = [
        (h, e)
        for h, e in points
        if h > 0 and e > 0 and np.isfinite(h) and np.isfinite(e)
    ]
    if len(usable) < 3:
        raise FitError(f"need at least 3 positive points, got {len(usable)}")
    log_h = np.log([h for h, _ in usable])
    log_e = np.log([e for _, e in usable])
    design = np.vstack([log_h, np.ones_like(log_h)]).T
    coef, *_ = np.linalg.lstsq(design, log_e, rcond=None)
    fitted = design @ coef
    ss_res = float(np.sum((log_e - fitted) ** 2))
    ss_tot = float(np.sum((log_e - np.mean(log_e)) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return float(coef[0]), r2


@dataclass(frozen=True, eq=False)
class ComparisonRow:
    """Per-node errors of one solver in a low-budget comparison."""

    label: str
    node_errors: np.ndarray
    final_error: float


@dataclass(frozen=True, eq=False)
class ComparisonReport:
    """Low-budget error tables plus the corrected-vs-plain verdicts."""

    field_name: str
    n_steps: int
    rho_nodes: np.ndarray
    rows: tuple[ComparisonRow, ...]
    verdicts: tuple[tuple[str, str, bool], ...]

    def to_csv(self) -> str:
        lines = [f"# comparison,{self.field_name},N,{self.n_steps}", "solver,node,rho,error"]
        for row in self.rows:
            for i, err in enumerate(row.node_errors):
                lines.append(f"{row.label},{i},{_fmt(self.rho_nodes[i])},{_fmt(err)}")
        for row in self.rows:
            lines.append(f"# final,{row.label},{_fmt(row.final_error)}")
        for base, corrected, lower in self.verdicts:
            lines.append(f"# corrected_lower,{base}:{corrected},{str(lower).lower()}")
        return "\n".join(lines) + "\n"


def default_comparison_pairs() -> tuple[tuple[SolverSetting, SolverSetting], ...]:
    return (
        (solver_setting("ab2"), solver_setting("cab2")),
        (solver_setting("ab3"), solver_setting("cab3")),
    )


def low_nfe_comparison(
    field: BenchField,
    pairs: Sequence[tuple[SolverSetting, SolverSetting]] | None = None,
    n_steps: int = 8,
    rho_span: tuple[float, float] | None = None,
    y0: np.ndarray | None = None,
    oracle_cfg: OracleConfig = GOLDEN_CONFIG,
) -> ComparisonReport:
    """Per-node error table at a small step budget, plain vs corrected."""
    span, start = study_convention(field)
    if rho_span is not None:
        span = rho_span
    if y0 is not None:
        start = np.asarray(y0, dtype=float)
    if pairs is None:
        pairs = default_comparison_pairs()
    schedule = _rho_schedule(span)
    rfield = RectifiedField(
        model_from_rho_field(field, field.dimension, schedule), schedule
    )
    grid = _study_grid(schedule, span, n_steps)
    ref = _reference_states(field, start, grid, oracle_cfg)

    rows = []
    finals = {}
    for setting in (s for pair in pairs for s in pair):
        config = SamplerConfig(
            order=setting.order,
            gamma=setting.gamma,
            grid_kind="uniform-rho",
            n_steps=n_steps,
            terminal_merge=False,
        )
        try:
            traj = sample(rfield, config, grid, start)
            errs = np.linalg.norm(traj.y_array() - ref, axis=1)
        except DivergenceError:
            errs = np.full(grid.n_nodes, np.inf)
        rows.append(ComparisonRow(setting.label, errs, float(errs[-1])))
        finals[setting.label] = float(errs[-1])
    verdicts = tuple(
        (base.label, corr.label, finals[corr.label] < finals[base.label])
        for base, corr in pairs
    )
    return ComparisonReport(
        field_name=field.name,
        n_steps=n_steps,
        rho_nodes=grid.rho_nodes,
        rows=tuple(rows),
        verdicts=verdicts,
    )


@dataclass(frozen=True)
class VariationRow:
    """Field change across one grid interval in both coordinate systems."""

    interval: int
    t_hi: float
    t_lo: float
    rho_hi: float
    rho_lo: float
    t_change: float
    t_change_per_unit: float
    rho_change: float
    rho_change_per_unit: float


@dataclass(frozen=True, eq=False)
class VariationReport:
    rows: tuple[VariationRow, ...]

    def to_csv(self) -> str:
        lines = [
            "interval,t_hi,t_lo,rho_hi,rho_lo,"
            "t_change,t_change_per_unit,rho_change,rho_change_per_unit"
        ]
        for r in self.rows:
            lines.append(
                f"{r.interval},{_fmt(r.t_hi)},{_fmt(r.t_lo)},{_fmt(r.rho_hi)},"
                f"{_fmt(r.rho_lo)},{_fmt(r.t_change)},{_fmt(r.t_change_per_unit)},"
                f"{_fmt(r.rho_change)},{_fmt(r.rho_change_per_unit)}"
            )
        return "\n".join(lines) + "\n"


def field_variation_report(
    model: ModelField | RectifiedField,
    schedule: Schedule,
    grid: SamplingGrid,
    x_init: np.ndarray,
    config: SamplerConfig | None = None,
) -> VariationReport:
    """Per-interval change of the dynamics before and after rectification.

    Samples one trajectory, then evaluates both right-hand sides at every
    node: the un-rectified reverse ODE on the time grid and the rectified
    noise field on the rho grid.  Each interval reports the consecutive change
    of each form and that change divided by the interval length.
    """
    if isinstance(model, RectifiedField):
        if model.schedule is not schedule:
            raise DomainError("rectified field was built over a different schedule")
        rfield = model
        model = rfield.model
    else:
        rfield = RectifiedField(model, schedule)
    if config is None:
        config = SamplerConfig(order=2, gamma=GammaPolicy("constant", 0.0))
    traj = sample(rfield, config, grid, x_init)
    rhs_t = [
        reverse_ode_rhs(model, schedule, node.x, node.t) for node in traj.nodes
    ]
    rhs_rho = [rfield.eval_at_time(node.y, node.t) for node in traj.nodes]
    rows = []
    for k in range(grid.n_nodes - 1):
        dt = abs(grid.t_nodes[k + 1] - grid.t_nodes[k])
        drho = abs(grid.rho_nodes[k + 1] - grid.rho_nodes[k])
        t_change = float(np.linalg.norm(rhs_t[k + 1] - rhs_t[k]))
        rho_change = float(np.linalg.norm(rhs_rho[k + 1] - rhs_rho[k]))
        rows.append(
            VariationRow(
                interval=k,
                t_hi=float(grid.t_nodes[k]),
                t_lo=float(grid.t_nodes[k + 1]),
                rho_hi=float(grid.rho_nodes[k]),
                rho_lo=float(grid.rho_nodes[k + 1]),
                t_change=t_change,
                t_change_per_unit=t_change / dt,
                rho_change=rho_change,
                rho_change_per_unit=rho_change / drho,
            )
        )
    return VariationReport(rows=tuple(rows))
