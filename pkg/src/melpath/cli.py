"""Command-line driver for the reproduction experiments.

Every subcommand writes CSV data files plus ``summary.json`` into the output
directory.  Configuration comes from built-in defaults, optionally
overridden by a TOML file and then by flags::

    melpath line --out runs/line
    melpath plane --config plane.toml --steps 6000
    melpath symplectic --grid 5

Exit status is 0 iff every requested solve converged, 1 on solver failure
and 2 on invalid configuration.
"""
from __future__ import annotations

import argparse
import copy
import logging
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import catenary as cat
from . import io
from .exceptions import InputError, MelpathError
from .functional import accumulation_profile, evaluate_objective
from .model import (
    InfoModel,
    KParameter,
    MemoryProblem,
    PointOfInterest,
    RiskModel,
)
from .oracle import discrete_objective, optimize_discrete
from .solver import (
    fixed_point_K,
    integrate,
    optimize_K,
    shoot,
    sweep_K,
)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

logger = logging.getLogger("melpath")

EXPERIMENTS = ("line", "plane", "catenary", "symplectic", "sweep", "brute")
REFERENCE_LINE_K = 0.3801

LINE_PROBLEM = {
    "mass": 0.1, "length_scale": 0.5, "rate": 1.0, "horizon": 1.0,
    "x0": [0.0], "xf": [2.0], "points": [[1.0]], "weights": [1.0],
    "transform": "saturating", "transform_sign": 1.0, "kernel": "gaussian", "stiffness": 1.0,
}
PLANE_PROBLEM = dict(
    LINE_PROBLEM, length_scale=1.0, horizon=3.0, x0=[0.0, 0.0], xf=[0.0, 2.0],
    points=[[1.0, 2.0], [2.0, 0.0], [2.0, 1.0]], weights=[1.0, 1.0, 1.0],
)
LINE_SOLVER = {
    "steps": 4000, "tol": 1e-10, "grid": 64, "refine_tol": 1e-6, "damping": 0.5,
    "oracle_steps": 100, "oracle_gtol": 1e-8, "oracle_max_iter": 200_000,
    "k_lo": None, "k_hi": None, "max_fev": None,
}
PLANE_SOLVER = dict(LINE_SOLVER, steps=3000, tol=1e-8, max_fev=3000)
CATENARY = {"m": 0.1, "k": 1.0, "bracket": [1.6, 2.6], "sweep_points": 101, "steps": 1000}
SYMPLECTIC = {"m": 0.1, "k": 1.0, "grid": 10, "lo": 0.25, "hi": 2.0, "h": 1e-3,
              "control_K": None, "frozen_diagnostic": False}

DEFAULTS = {
    "line": {"problem": LINE_PROBLEM, "solver": LINE_SOLVER},
    "plane": {"problem": PLANE_PROBLEM, "solver": PLANE_SOLVER},
    "sweep": {"problem": LINE_PROBLEM, "solver": LINE_SOLVER},
    "brute": {"problem": LINE_PROBLEM, "solver": LINE_SOLVER},
    "catenary": {"catenary": CATENARY},
    "symplectic": {"symplectic": SYMPLECTIC},
}


@dataclass
class ExperimentConfig:
    experiment: str
    sections: dict = field(default_factory=dict)
    output_dir: Path = Path("out")

    def __getitem__(self, section):
        return self.sections[section]

    def echo(self):
        return {"experiment": self.experiment, **copy.deepcopy(self.sections)}


def load_config(experiment, path=None, overrides=None, output_dir=None):
    """Merge defaults, the TOML file at ``path`` and flag ``overrides``.

    Unknown sections or keys raise :class:`InputError`, as does anything
    that fails problem validation.
    """
    if experiment not in EXPERIMENTS:
        raise InputError(f"unknown experiment {experiment!r}")
    sections = copy.deepcopy(DEFAULTS[experiment])
    if path is not None:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
        for name, values in data.items():
            if name not in sections:
                raise InputError(f"section [{name}] not valid for '{experiment}'")
            if not isinstance(values, dict):
                raise InputError(f"[{name}] must be a table")
            unknown = set(values) - set(sections[name])
            if unknown:
                raise InputError(f"unknown keys in [{name}]: {sorted(unknown)}")
            sections[name].update(values)
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        target = next((s for s in sections.values() if key in s), None)
        if target is None:
            raise InputError(f"--{key} does not apply to '{experiment}'")
        target[key] = value
    cfg = ExperimentConfig(experiment, sections, Path(output_dir or f"out/{experiment}"))
    _validate(cfg)
    return cfg


def _validate(cfg):
    if "problem" in cfg.sections:
        build_problem(cfg["problem"])
    s = cfg.sections.get("solver")
    if s is not None:
        if int(s["steps"]) < 2 or int(s["oracle_steps"]) < 4 or int(s["grid"]) < 3:
            raise InputError("steps >= 2, oracle_steps >= 4 and grid >= 3 are required")
        if not (float(s["tol"]) > 0 and float(s["refine_tol"]) > 0):
            raise InputError("tolerances must be positive")
    c = cfg.sections.get("catenary")
    if c is not None:
        cat.CatenaryConfig(c["m"], c["k"])
        lo, hi = c["bracket"]
        if not 0 < lo < hi:
            raise InputError("catenary bracket must satisfy 0 < lo < hi")
    y = cfg.sections.get("symplectic")
    if y is not None:
        cat.CatenaryConfig(y["m"], y["k"])
        if int(y["grid"]) < 1 or not y["h"] > 0 or not y["lo"] < y["hi"]:
            raise InputError("invalid symplectic grid")


def build_problem(p):
    points = np.atleast_2d(np.asarray(p["points"], dtype=float))
    weights = p["weights"] if p["weights"] is not None else [1.0] * len(points)
    if len(weights) != len(points):
        raise InputError("weights and points have different lengths")
    info = InfoModel(
        [PointOfInterest(y, w) for y, w in zip(points, weights)],
        length_scale=p["length_scale"], rate=p["rate"],
        transform_kind=p["transform"], transform_sign=p["transform_sign"],
        kernel_kind=p["kernel"], stiffness=p["stiffness"],
    )
    return MemoryProblem(info, RiskModel(p["mass"]), p["horizon"], p["x0"], p["xf"])


def _box(problem, s):
    box = problem.info.default_box()
    lo = s["k_lo"] if s["k_lo"] is not None else (box[0] if box else None)
    hi = s["k_hi"] if s["k_hi"] is not None else (box[1] if box else None)
    if lo is None or hi is None:
        raise InputError("set k_lo and k_hi for transforms without a natural box")
    return lo, hi


def _sample_at(traj, times):
    """Values of ``traj`` at ``times`` (nodes must coincide up to rounding)."""
    idx = np.rint(times / traj.dt).astype(int)
    if np.max(np.abs(traj.times[idx] - times)) > 1e-9:
        return np.column_stack([np.interp(times, traj.times, traj.positions[:, j])
                                for j in range(traj.dim)])
    return traj.positions[idx]


# -- subcommands --------------------------------------------------------------

def cmd_line(cfg):
    problem = build_problem(cfg["problem"])
    s = cfg["solver"]
    box = _box(problem, s)
    out = cfg.output_dir
    K, rec = optimize_K(problem, steps=s["steps"], grid=s["grid"], refine_tol=s["refine_tol"],
                        box=box, tol=s["tol"])
    shot = shoot(problem, K, s["steps"], s["tol"], v0_guess=rec.v0)
    K_fp = fixed_point_K(problem, K.with_values(np.full(len(K), 0.5 * (box[0] + box[1]))),
                         damping=s["damping"], steps=s["steps"], shoot_tol=s["tol"])
    grid = np.linspace(box[0], box[1], s["grid"])
    records = sweep_K(problem, grid, s["steps"], s["tol"], box=box)
    brute = optimize_discrete(problem, s["oracle_steps"], s["oracle_max_iter"], s["oracle_gtol"])
    brute_nodes = brute.nodes
    mel_at_nodes = _sample_at(shot.trajectory, np.linspace(0, problem.horizon, brute.N + 1))
    io.write_trajectory(out / "mel_trajectory.csv", shot.trajectory)
    io.write_trajectory(out / "brute_trajectory.csv", brute.to_trajectory())
    io.write_sweep(out / "k_sweep.csv", records)
    io.write_profile(out / "accumulation_profile.csv", accumulation_profile(problem, shot.trajectory))
    brute_obj = discrete_objective(problem, brute)
    summary = {
        "K_optimal": K.values, "K_fixed_point": K_fp.values,
        "residual": rec.residual, "objective_mel": rec.objective,
        "objective_brute": brute_obj,
        "objective_mel_discrete": discrete_objective(problem, brute.with_interior(mel_at_nodes[1:-1])),
        "objective_gap": abs(rec.objective - brute_obj),
        "sup_norm_gap": float(np.max(np.abs(mel_at_nodes - brute_nodes))),
        "endpoint_error": shot.endpoint_error,
        "reference_K": REFERENCE_LINE_K,
        "reference_note": (
            "reference value only: mass, length scale and grid of the original "
            "line example are unstated, so it is not reproducible exactly"),
        "sweep_failures": int(sum(not r.ok for r in records)),
    }
    return summary, summary["sweep_failures"] == 0


def cmd_plane(cfg):
    problem = build_problem(cfg["problem"])
    s = cfg["solver"]
    box = _box(problem, s)
    out = cfg.output_dir
    K, rec = optimize_K(problem, steps=s["steps"], refine_tol=s["refine_tol"], box=box,
                        tol=s["tol"], max_fev=s["max_fev"])
    shot = shoot(problem, K, s["steps"], s["tol"], v0_guess=rec.v0)
    traj = shot.trajectory
    baseline = integrate(problem, np.zeros(problem.info.n_points), (problem.xf - problem.x0) / problem.horizon, s["steps"])
    speed = np.linalg.norm(traj.velocities, axis=1)
    io.write_trajectory(out / "plane_trajectory.csv", traj)
    io.write_csv(out / "speed.csv", ["t", "speed"], np.column_stack([traj.times, speed]))
    io.write_sweep(out / "k_result.csv", [rec])
    io.write_profile(out / "accumulation_profile.csv", accumulation_profile(problem, traj))
    summary = {
        "K": K.values, "residual": rec.residual, "objective": rec.objective,
        "objective_straight_line": evaluate_objective(problem, baseline),
        "endpoint_error": shot.endpoint_error, "box": box,
    }
    ok = shot.endpoint_error <= s["tol"]
    return summary, ok


def cmd_catenary(cfg):
    c = cfg["catenary"]
    config = cat.CatenaryConfig(c["m"], c["k"])
    lo, hi = c["bracket"]
    ks = np.linspace(lo, hi, c["sweep_points"])
    rows = [(k, cat.reduced_objective(config, k), cat.fixed_point_map(config, k)) for k in ks]
    io.write_csv(cfg.output_dir / "catenary_sweep.csv", ["K", "J_of_K", "f_of_K"], rows)
    k_ext = cat.extremizer(config, (lo, hi))
    k_fix = cat.fixed_point(config)
    problem = config.problem()
    K = KParameter([k_fix], lo, hi)
    shot = shoot(problem, K, c["steps"], 1e-12)
    t = shot.trajectory.times
    sup_err = float(np.max(np.abs(shot.trajectory.positions[:, 0] - cat.closed_form(config, k_fix, t))))
    K_solver, rec = optimize_K(problem, steps=c["steps"], box=(lo, hi))
    io.write_trajectory(cfg.output_dir / "catenary_trajectory.csv", shot.trajectory)
    summary = {
        "extremizer": k_ext, "fixed_point": k_fix, "gap": abs(k_ext - k_fix),
        "solver_K": K_solver.values, "solver_residual": rec.residual,
        "rk4_sup_error": sup_err, "reference_K": 2.1566,
    }
    return summary, True


def cmd_symplectic(cfg):
    y = cfg["symplectic"]
    config = cat.CatenaryConfig(y["m"], y["k"])
    g = np.linspace(y["lo"], y["hi"], y["grid"])
    out = cfg.output_dir
    rows, missing = cat.jacobian_grid(config, g, g, y["h"])
    io.write_csv(out / "jacobian_grid.csv", ["x", "p", "Lambda", "J"], rows)
    control_K = y["control_K"] if y["control_K"] is not None else cat.fixed_point(config)
    ctrl, _ = cat.jacobian_grid(config, g, g, y["h"], K=control_K)
    io.write_csv(out / "jacobian_control.csv", ["x", "p", "Lambda", "J"], ctrl)
    discrepancy = max(
        (abs(r[2] - cat.lambda_printed(config, cat.PhasePoint(r[0], r[1]))) for r in rows),
        default=float("nan"))
    summary = {
        "cells": int(rows.shape[0]), "missing": missing,
        "max_abs_J_minus_1": float(np.max(np.abs(rows[:, 3] - 1))) if rows.size else None,
        "control_K": control_K,
        "control_max_abs_J_minus_1": float(np.max(np.abs(ctrl[:, 3] - 1))),
        "lambda_vs_printed_C_max_discrepancy": discrepancy,
    }
    if y["frozen_diagnostic"]:
        frozen, _ = cat.jacobian_grid(config, g, g, y["h"], mode="frozen")
        io.write_csv(out / "jacobian_frozen.csv", ["x", "p", "Lambda", "J"], frozen)
        summary["frozen_max_abs_J_minus_1"] = float(np.max(np.abs(frozen[:, 3] - 1)))
    return summary, True


def cmd_sweep(cfg):
    problem = build_problem(cfg["problem"])
    s = cfg["solver"]
    if problem.info.n_points != 1:
        raise InputError("sweep needs a problem with a single point of interest")
    box = _box(problem, s)
    grid = np.linspace(box[0], box[1], s["grid"])
    records = sweep_K(problem, grid, s["steps"], s["tol"], box=box)
    io.write_sweep(cfg.output_dir / "k_sweep.csv", records)
    obj = np.array([r.objective for r in records])
    failures = int(np.sum(~np.isfinite(obj)))
    best = int(np.nanargmax(obj)) if failures < len(records) else None
    summary = {"grid_best_K": grid[best] if best is not None else None,
               "grid_best_objective": obj[best] if best is not None else None,
               "failures": failures}
    return summary, failures == 0


def cmd_brute(cfg):
    problem = build_problem(cfg["problem"])
    s = cfg["solver"]
    path = optimize_discrete(problem, s["oracle_steps"], s["oracle_max_iter"], s["oracle_gtol"])
    io.write_trajectory(cfg.output_dir / "brute_trajectory.csv", path.to_trajectory())
    summary = {"objective": discrete_objective(problem, path), "N": path.N}
    return summary, True


COMMANDS = {
    "line": cmd_line, "plane": cmd_plane, "catenary": cmd_catenary,
    "symplectic": cmd_symplectic, "sweep": cmd_sweep, "brute": cmd_brute,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML file overriding the defaults")
    common.add_argument("--out", type=Path, help="output directory (default out/<experiment>)")
    common.add_argument("--steps", type=int, help="integration steps on [0, T]")
    common.add_argument("--tol", type=float, help="shooting tolerance")
    common.add_argument("--grid", type=int, help="K grid size, or phase grid size for symplectic")
    common.add_argument("-v", "--verbose", action="store_true")
    parser = argparse.ArgumentParser(prog="melpath", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        sub.add_parser(name, parents=[common], help=f"run the {name} experiment")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {"steps": args.steps, "tol": args.tol, "grid": args.grid}
    try:
        cfg = load_config(args.experiment, args.config, overrides, args.out)
    except (InputError, OSError, tomllib.TOMLDecodeError) as exc:
        print(f"melpath: invalid configuration: {exc}", file=sys.stderr)
        return 2
    start = time.perf_counter()
    try:
        summary, ok = COMMANDS[args.experiment](cfg)
    except MelpathError as exc:
        print(f"melpath {args.experiment}: {type(exc).__name__}: {exc}", file=sys.stderr)
        io.write_json(cfg.output_dir / "summary.json", {
            "config": cfg.echo(), "error": f"{type(exc).__name__}: {exc}",
            "wall_time_s": time.perf_counter() - start})
        return 1
    summary = {"config": cfg.echo(), **summary, "converged": ok,
               "wall_time_s": time.perf_counter() - start}
    io.write_json(cfg.output_dir / "summary.json", summary)
    print(f"melpath {args.experiment}: wrote {cfg.output_dir}/ ({'ok' if ok else 'FAILED'})")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
