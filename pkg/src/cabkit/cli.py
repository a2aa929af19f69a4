"""Command-line front door: sampling runs, convergence studies, comparisons.

Four subcommands share a flat flag set mirroring the library configuration
objects; a JSON config file may supply any flag value, with explicit flags
winning.  All outputs are CSV, written to --out or stdout.  Exit codes:
0 success, 1 configuration or domain error, 2 numeric divergence.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Sequence

import numpy as np

from .benchfields import make_field
from .errors import (
    CabKitError,
    DivergenceError,
    DomainError,
    NumericError,
    StiffnessError,
)
from .harness import (
    DEFAULT_GAMMAS,
    default_study,
    field_variation_report,
    low_nfe_comparison,
    run_study,
    solver_setting,
)
from .multistep import GammaPolicy
from .oracle import OracleConfig
from .rectify import RectifiedField, model_from_rho_field
from .sampler import GRID_KINDS, SamplerConfig, build_grid, sample
from .schedule import make_schedule

#: Identity of the pseudo-random generator behind --seed, recorded in output.
PRNG_NAME = "numpy-pcg64"

_SOLVER_ORDER = {"euler": 1, "ab2": 2, "cab2": 2, "ab3": 3, "cab3": 3}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse hook
        raise _UsageError(message)


def _add_common(parser: _Parser):
    parser.add_argument("--config", default=None, help="JSON file with flag defaults")
    parser.add_argument("--out", default=None, help="output CSV path ('-' for stdout)")


def _add_model_flags(parser: _Parser):
    parser.add_argument("--schedule", choices=("vp", "ve", "rf"), default=None)
    parser.add_argument("--schedule-param", action="append", default=None, metavar="K=V")
    parser.add_argument("--solver", choices=sorted(_SOLVER_ORDER), default=None)
    parser.add_argument("--gamma", type=float, default=None)
    parser.add_argument("--gamma-mode", choices=("constant", "step-scaled"), default=None)
    parser.add_argument("--steps", type=int, default=None)
    parser.add_argument("--grid", choices=GRID_KINDS, default=None)
    parser.add_argument(
        "--no-terminal-merge", action="store_const", const=True, default=None
    )
    parser.add_argument("--field", default=None)
    parser.add_argument("--field-param", action="append", default=None, metavar="K=V")
    parser.add_argument("--dim", type=int, default=None)
    parser.add_argument("--seed", type=int, default=None)


def build_parser() -> _Parser:
    parser = _Parser(prog="cabkit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="sample one trajectory, write it as CSV")
    _add_model_flags(run)
    _add_common(run)

    conv = sub.add_parser("converge", help="grid-refinement study with fitted slopes")
    _add_model_flags(conv)
    conv.add_argument("--solvers", default=None, help="comma list, e.g. ab2,cab2")
    conv.add_argument("--grid-sizes", default=None, help="comma list, e.g. 16,32,64")
    conv.add_argument(
        "--startup", choices=("algorithmic", "oracle-seeded"), default=None
    )
    conv.add_argument("--rho-span", default=None, help="descending pair, e.g. 2.0,0.05")
    conv.add_argument("--y0", default=None, help="comma list of start components")
    conv.add_argument("--oracle-rtol", type=float, default=None)
    _add_common(conv)

    comp = sub.add_parser("compare", help="low-budget corrected-vs-plain error table")
    _add_model_flags(comp)
    comp.add_argument("--rho-span", default=None)
    comp.add_argument("--y0", default=None)
    comp.add_argument("--oracle-rtol", type=float, default=None)
    _add_common(comp)

    smooth = sub.add_parser(
        "smoothness", help="per-interval field variation before/after rectification"
    )
    _add_model_flags(smooth)
    _add_common(smooth)
    return parser


_DEFAULTS = {
    "schedule": "rf",
    "schedule_param": [],
    "solver": "cab2",
    "gamma": None,  # resolved per solver
    "gamma_mode": "constant",
    "steps": 8,
    "grid": "uniform-t",
    "no_terminal_merge": False,
    "field": "constant",
    "field_param": [],
    "dim": None,
    "seed": 0,
    "solvers": "euler,ab2,cab2,ab3,cab3",
    "grid_sizes": "16,32,64,128,256,512",
    "startup": "algorithmic",
    "rho_span": None,
    "y0": None,
    "oracle_rtol": 1e-11,
    "out": "-",
}


def _merge_options(args: argparse.Namespace) -> dict:
    provided = {k: v for k, v in vars(args).items() if v is not None}
    merged = dict(_DEFAULTS)
    config_path = provided.pop("config", None)
    if config_path:
        with open(config_path, "r", encoding="utf-8") as fh:
            loaded = json.load(fh)
        if not isinstance(loaded, dict):
            raise DomainError("config file must hold a flat JSON object")
        for key, value in loaded.items():
            merged[key.replace("-", "_")] = value
    merged.update(provided)
    return merged


def _parse_kv(items) -> dict[str, float]:
    if isinstance(items, dict):
        return {k: float(v) for k, v in items.items()}
    out = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise DomainError(f"expected K=V, got {item!r}")
        out[key] = float(value)
    return out


def _parse_float_list(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).split(",") if v != ""]


def _resolve_gamma(solver: str, gamma, gamma_mode: str) -> GammaPolicy:
    if solver in ("euler", "ab2", "ab3"):
        return GammaPolicy("constant", 0.0)
    if gamma is None:
        key = solver if gamma_mode == "constant" else f"{solver}-step"
        gamma = DEFAULT_GAMMAS.get(key, 0.0)
    return GammaPolicy(gamma_mode, float(gamma))


def _field_dimension(name: str, dim) -> int:
    if name in ("v1", "v2"):
        return 2
    return 1 if dim is None else int(dim)


def _write_output(path: str, text: str):
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _cmd_run(opts: dict) -> int:
    schedule = make_schedule(opts["schedule"], **_parse_kv(opts["schedule_param"]))
    dim = _field_dimension(opts["field"], opts["dim"])
    field = make_field(opts["field"], dim, **_parse_kv(opts["field_param"]))
    solver = opts["solver"]
    policy = _resolve_gamma(solver, opts["gamma"], opts["gamma_mode"])
    config = SamplerConfig(
        order=_SOLVER_ORDER[solver],
        gamma=policy,
        grid_kind=opts["grid"],
        n_steps=int(opts["steps"]),
        terminal_merge=not opts["no_terminal_merge"],
    )
    grid = build_grid(schedule, config.grid_kind, config.n_steps, config.terminal_merge)
    model = model_from_rho_field(field, dim, schedule)
    seed = int(opts["seed"])
    x_init = np.random.default_rng(seed).standard_normal(dim)
    traj = sample(RectifiedField(model, schedule), config, grid, x_init)
    comments = (
        f"prng,{PRNG_NAME},seed,{seed}",
        f"schedule,{opts['schedule']}",
        f"solver,{solver},gamma_mode,{policy.mode},gamma,{policy.value:.17g}",
        f"field,{opts['field']},dim,{dim}",
        f"nfe,{traj.nfe_count}",
    )
    _write_output(opts["out"], traj.to_csv(header_comments=comments))
    return 0


def _study_inputs(opts: dict):
    dim = _field_dimension(opts["field"], opts["dim"])
    field = make_field(opts["field"], dim, **_parse_kv(opts["field_param"]))
    span = opts["rho_span"]
    if span is not None:
        values = _parse_float_list(span)
        if len(values) != 2:
            raise DomainError("--rho-span expects exactly two values")
        span = (values[0], values[1])
    y0 = opts["y0"]
    if y0 is not None:
        y0 = np.array(_parse_float_list(y0), dtype=float)
    oracle_cfg = OracleConfig(
        rtol=float(opts["oracle_rtol"]), atol=max(float(opts["oracle_rtol"]) * 1e-2, 1e-16)
    )
    return field, span, y0, oracle_cfg


def _cmd_converge(opts: dict) -> int:
    field, span, y0, oracle_cfg = _study_inputs(opts)
    seeded = opts["startup"] == "oracle-seeded"
    settings = tuple(
        solver_setting(
            name.strip(),
            gamma=opts["gamma"] if name.strip().startswith("cab") else None,
            gamma_mode=opts["gamma_mode"],
            seeded_startup=seeded,
        )
        for name in str(opts["solvers"]).split(",")
        if name.strip()
    )
    grid_sizes = [int(v) for v in str(opts["grid_sizes"]).split(",") if v.strip()]
    spec = default_study(field, settings, grid_sizes, rho_span=span, y0=y0)
    report = run_study(spec, oracle_cfg)
    _write_output(opts["out"], report.to_csv())
    return 0


def _cmd_compare(opts: dict) -> int:
    field, span, y0, oracle_cfg = _study_inputs(opts)
    report = low_nfe_comparison(
        field,
        n_steps=int(opts["steps"]),
        rho_span=span,
        y0=y0,
        oracle_cfg=oracle_cfg,
    )
    _write_output(opts["out"], report.to_csv())
    return 0


def _cmd_smoothness(opts: dict) -> int:
    schedule = make_schedule(opts["schedule"], **_parse_kv(opts["schedule_param"]))
    dim = _field_dimension(opts["field"], opts["dim"])
    field = make_field(opts["field"], dim, **_parse_kv(opts["field_param"]))
    solver = opts["solver"]
    policy = _resolve_gamma(solver, opts["gamma"], opts["gamma_mode"])
    config = SamplerConfig(
        order=_SOLVER_ORDER[solver],
        gamma=policy,
        grid_kind=opts["grid"],
        n_steps=int(opts["steps"]),
        terminal_merge=not opts["no_terminal_merge"],
    )
    grid = build_grid(schedule, config.grid_kind, config.n_steps, config.terminal_merge)
    model = model_from_rho_field(field, dim, schedule)
    seed = int(opts["seed"])
    x_init = np.random.default_rng(seed).standard_normal(dim)
    report = field_variation_report(model, schedule, grid, x_init, config)
    _write_output(opts["out"], report.to_csv())
    return 0


_HANDLERS = {
    "run": _cmd_run,
    "converge": _cmd_converge,
    "compare": _cmd_compare,
    "smoothness": _cmd_smoothness,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        opts = _merge_options(args)
        return _HANDLERS[args.command](opts)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (DivergenceError, NumericError, StiffnessError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 2
    except (CabKitError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
