"""Batch command-line front end.

Subcommands take a JSON config file and write machine-readable artifacts
(JSON/CSV) into the configured output directory.  Numeric choices live in
the config, never in flags; every output embeds the fully resolved config
so a run can be reproduced from any one of its artifacts.

Exit codes:
    0  success
    1  invalid config (field-level message on stderr)
    2  requested epsilon falls in a resonance window (window named)
    3  degenerate or missing planar orbit
    4  solver non-convergence (diagnostics written) or selftest failure
    5  sweep finished with too few converged rows for the fit laws
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .assembly import assemble_u, epsilon_sweep, pde_residual, tail_norm
from .closure import DegenerateOrbitError, OuterLoopError, solve_delta1
from .divisors import (
    CoverageError,
    DivisorTable,
    ResonanceError,
    ResonanceParams,
    hill_eigs,
)
from .nonlinearity import Nonlinearity
from .planar import NoPeriodicOrbitError, find_orbit, monodromy
from .properties import DEFAULT_SEED, run_all
from .solver import NearSingularError, NonConvergenceError, SolverConfig

EXIT_OK = 0
EXIT_BAD_CONFIG = 1
EXIT_RESONANT = 2
EXIT_NO_ORBIT = 3
EXIT_NO_CONVERGENCE = 4
EXIT_INSUFFICIENT_DATA = 5


class ConfigError(ValueError):
    """Invalid run configuration; the message names the offending field."""


# ----------------------------------------------------------------------
# config plumbing
# ----------------------------------------------------------------------

def _load_config(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as ex:
        raise ConfigError(f"cannot read config file {path!r}: {ex}") from ex
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as ex:
        raise ConfigError(f"config {path!r} is not valid JSON: {ex}") from ex
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path!r} must be a JSON object")
    return doc


def _reject_unknown(cfg: dict, allowed: set[str]) -> None:
    unknown = sorted(set(cfg) - allowed)
    if unknown:
        raise ConfigError(f"unknown config fields: {', '.join(unknown)}")


def _get_number(cfg: dict, key: str, default, lo=None, hi=None,
                integer: bool = False):
    value = cfg.get(key, default)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"field {key!r} must be a number")
    if integer:
        if float(value) != int(value):
            raise ConfigError(f"field {key!r} must be an integer")
        value = int(value)
    else:
        value = float(value)
    if lo is not None and value < lo:
        raise ConfigError(f"field {key!r} must be >= {lo}, got {value}")
    if hi is not None and value > hi:
        raise ConfigError(f"field {key!r} must be <= {hi}, got {value}")
    return value


def _model_from(cfg: dict) -> tuple[Nonlinearity, dict]:
    spec = cfg.get("model", {"model": "sine-gordon"})
    if isinstance(spec, str):
        spec = {"model": spec}
    if not isinstance(spec, dict):
        raise ConfigError("field 'model' must be a string or an object")
    try:
        return Nonlinearity.from_spec(spec), spec
    except (ValueError, TypeError) as ex:
        raise ConfigError(f"field 'model': {ex}") from ex


def _out_dir(cfg: dict) -> Path:
    out = cfg.get("out_dir", ".")
    if not isinstance(out, str):
        raise ConfigError("field 'out_dir' must be a string path")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _resonance_params(cfg: dict) -> tuple[ResonanceParams, dict]:
    sub = cfg.get("resonance", {})
    if not isinstance(sub, dict):
        raise ConfigError("field 'resonance' must be an object")
    _reject_unknown(sub, {"alpha", "l"})
    alpha = _get_number(sub, "alpha", 0.25)
    ell = _get_number(sub, "l", 2.5)
    try:
        params = ResonanceParams(alpha=alpha, l=ell)
    except ValueError as ex:
        raise ConfigError(f"field 'resonance': {ex}") from ex
    return params, {"alpha": params.alpha, "l": params.l}


def _solver_config(cfg: dict, params: ResonanceParams) -> tuple[SolverConfig, dict]:
    sub = cfg.get("solver", {})
    if not isinstance(sub, dict):
        raise ConfigError("field 'solver' must be an object")
    allowed = {"residual_tol", "N_cap", "N_tau", "N_tau_cap", "nf_steps",
               "max_stage_iters", "schedule"}
    _reject_unknown(sub, allowed)
    kwargs = {
        "resonance": params,
        "residual_tol": _get_number(sub, "residual_tol", 1e-10, lo=0.0),
        "N_cap": _get_number(sub, "N_cap", 64, lo=2, integer=True),
        "N_tau_cap": _get_number(sub, "N_tau_cap", 40, lo=4, integer=True),
        "nf_steps": _get_number(sub, "nf_steps", 2, lo=0, integer=True),
        "max_stage_iters": _get_number(sub, "max_stage_iters", 12, lo=1,
                                       integer=True),
    }
    n_tau = _get_number(sub, "N_tau", None, lo=4, integer=True)
    if n_tau is not None:
        kwargs["N_tau"] = n_tau
    schedule = sub.get("schedule")
    if schedule is not None:
        if (not isinstance(schedule, list)
                or not all(isinstance(n, int) for n in schedule)):
            raise ConfigError("field 'solver.schedule' must be a list of ints")
        kwargs["schedule"] = tuple(schedule)
    try:
        solver = SolverConfig(**kwargs)
    except ValueError as ex:
        raise ConfigError(f"field 'solver': {ex}") from ex
    resolved = {
        "residual_tol": solver.residual_tol,
        "N_cap": solver.N_cap,
        "N_tau": solver.N_tau,
        "N_tau_cap": solver.N_tau_cap,
        "nf_steps": solver.nf_steps,
        "max_stage_iters": solver.max_stage_iters,
        "schedule": None if solver.schedule is None else list(solver.schedule),
    }
    return solver, resolved


# ----------------------------------------------------------------------
# writers
# ----------------------------------------------------------------------

def _json_default(obj):
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, (np.integer, np.floating)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _write_json(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, sort_keys=True, indent=1, allow_nan=True,
                               default=_json_default) + "\n")


def _write_csv(path: Path, resolved_config: dict, header: str,
               rows: list[list[str]]) -> None:
    lines = ["# config: " + json.dumps(resolved_config, sort_keys=True), header]
    lines.extend(",".join(cells) for cells in rows)
    path.write_text("\n".join(lines) + "\n")


# ----------------------------------------------------------------------
# subcommands
# ----------------------------------------------------------------------

def cmd_limit_orbit(cfg: dict) -> int:
    _reject_unknown(cfg, {"model", "amplitude", "tol", "n_samples", "out_dir"})
    model, model_spec = _model_from(cfg)
    amplitude = _get_number(cfg, "amplitude", None, lo=None)
    if amplitude is None or amplitude <= 0.0:
        raise ConfigError("field 'amplitude' must be a positive number")
    tol = _get_number(cfg, "tol", 1e-12, lo=0.0)
    n_samples = _get_number(cfg, "n_samples", 512, lo=16, integer=True)
    out = _out_dir(cfg)
    resolved = {"command": "limit-orbit", "model": model_spec,
                "amplitude": amplitude, "tol": tol, "n_samples": n_samples,
                "out_dir": str(out)}

    try:
        orbit = find_orbit(model.f3, amplitude, tol=tol, n_samples=n_samples)
    except NoPeriodicOrbitError as ex:
        print(f"no periodic orbit: {ex}", file=sys.stderr)
        return EXIT_NO_ORBIT
    report = monodromy(orbit)
    doc = {"config": resolved, "orbit": orbit.to_json_dict(),
           "monodromy": report.to_json_dict()}
    _write_json(out / "orbit.json", doc)
    print(f"orbit: period {orbit.period!r}, energy {orbit.energy!r}, "
          f"nondegenerate {report.nondegenerate} -> {out / 'orbit.json'}")
    if not report.nondegenerate:
        print("orbit is degenerate (monodromy test failed)", file=sys.stderr)
        return EXIT_NO_ORBIT
    return EXIT_OK


def cmd_divisors(cfg: dict) -> int:
    _reject_unknown(cfg, {"k_max", "j_max", "period", "q_const", "resonance",
                          "out_dir"})
    k_max = _get_number(cfg, "k_max", None, integer=True)
    j_max = _get_number(cfg, "j_max", None, integer=True)
    if k_max is None or j_max is None:
        raise ConfigError("fields 'k_max' and 'j_max' are required")
    if k_max < 2:
        raise ConfigError("field 'k_max' must be >= 2 (Q-space starts at k = 2)")
    if j_max < 0:
        raise ConfigError("field 'j_max' must be >= 0")
    period = _get_number(cfg, "period", 2.0 * math.pi, lo=1e-6)
    q_const = _get_number(cfg, "q_const", 0.0)
    params, resolved_res = _resonance_params(cfg)
    out = _out_dir(cfg)
    resolved = {"command": "divisors", "k_max": k_max, "j_max": j_max,
                "period": period, "q_const": q_const,
                "resonance": resolved_res, "out_dir": str(out)}

    header = "k,j,eps_kj,window_lo,window_hi"
    rows: list[list[str]] = []
    if j_max >= 1:
        spectrum = hill_eigs(np.full(64, q_const), period, max(j_max, 16))
        table = DivisorTable.build(spectrum, K_max=k_max, J_max=j_max)
        ks, js, centers, halfw = table.windows(params)
        order = np.lexsort((js, ks))
        for i in order:
            rows.append([str(int(ks[i])), str(int(js[i])), repr(float(centers[i])),
                         repr(float(centers[i] - halfw[i])),
                         repr(float(centers[i] + halfw[i]))])
    _write_csv(out / "divisors.csv", resolved, header, rows)
    print(f"divisors: {len(rows)} tabulated resonances -> {out / 'divisors.csv'}")
    return EXIT_OK


def cmd_solve(cfg: dict) -> int:
    _reject_unknown(cfg, {"model", "amplitude", "eps", "resonance", "solver",
                          "out_dir"})
    model, model_spec = _model_from(cfg)
    amplitude = _get_number(cfg, "amplitude", 0.9)
    if amplitude is None or amplitude <= 0.0:
        raise ConfigError("field 'amplitude' must be a positive number")
    eps = _get_number(cfg, "eps", None, lo=None)
    if eps is None or eps <= 0.0:
        raise ConfigError("field 'eps' must be a positive number")
    params, resolved_res = _resonance_params(cfg)
    solver_cfg, resolved_solver = _solver_config(cfg, params)
    out = _out_dir(cfg)
    resolved = {"command": "solve", "model": model_spec, "amplitude": amplitude,
                "eps": eps, "resonance": resolved_res,
                "solver": resolved_solver, "out_dir": str(out)}

    try:
        orbit = find_orbit(model.f3, amplitude)
    except NoPeriodicOrbitError as ex:
        print(f"no periodic orbit: {ex}", file=sys.stderr)
        return EXIT_NO_ORBIT
    try:
        closure = solve_delta1(orbit, eps, model, solver=solver_cfg)
    except ResonanceError as ex:
        print(f"resonant epsilon: {ex}", file=sys.stderr)
        return EXIT_RESONANT
    except NearSingularError as ex:
        print(f"near-singular linearization: {ex}", file=sys.stderr)
        return EXIT_RESONANT
    except DegenerateOrbitError as ex:
        print(f"degenerate orbit: {ex}", file=sys.stderr)
        return EXIT_NO_ORBIT
    except (NonConvergenceError, OuterLoopError) as ex:
        diag = {"config": resolved, "error": f"{type(ex).__name__}: {ex}"}
        stages = getattr(ex, "stages", None)
        if stages:
            diag["stages"] = [s.to_json_dict() for s in stages]
        history = getattr(ex, "history", None)
        if history:
            diag["history"] = [list(h) for h in history]
        _write_json(out / "diagnostics.json", diag)
        print(f"solver did not converge: {ex} "
              f"(diagnostics -> {out / 'diagnostics.json'})", file=sys.stderr)
        return EXIT_NO_CONVERGENCE

    run = closure.run
    w = run.w_physical
    sol = assemble_u(closure, w, eps)
    residual = pde_residual(sol, (128, 128))
    xs = np.linspace(0.0, sol.x_period, 192, endpoint=False)
    ts = np.linspace(0.0, sol.t_period, 192, endpoint=False)
    max_u = float(np.abs(sol.u_values(xs, ts)).max())
    tail = tail_norm(sol, orbit)

    doc = {
        "config": resolved,
        "closure": closure.to_json_dict(),
        "solution": {
            "omega": sol.omega,
            "t_period": sol.t_period,
            "x_period": sol.x_period,
            "pde_residual_128": residual,
            "max_u": max_u,
            "max_u_over_eps": max_u / eps,
            "tail_sup": tail,
            "w_sup": w.sup_norm(),
            "symmetry_defects": sol.symmetry_defects(),
        },
    }
    _write_json(out / "solve.json", doc)
    _write_json(out / "w_field.json", {"config": resolved,
                                       "field": w.to_json_dict()})
    traj = closure.V_traj
    grid = traj.period * np.arange(traj.v_samples.shape[0]) / traj.v_samples.shape[0]
    _write_json(out / "v_traj.json", {
        "config": resolved,
        "delta1": closure.delta1,
        "trajectory": {
            "period": traj.period,
            "samples": [[float(t), float(v), float(vt)] for t, v, vt in
                        zip(grid, traj.v_samples, traj.v_tau_samples)],
        },
    })
    ok = bool(closure.closed and run.converged)
    print(f"solve: eps {eps!r} converged {run.converged} closed {closure.closed} "
          f"residual {residual!r} -> {out / 'solve.json'}")
    if not ok:
        print("pipeline finished without meeting the closure tolerances",
              file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    return EXIT_OK


def cmd_sweep(cfg: dict) -> int:
    _reject_unknown(cfg, {"model", "amplitude", "eps_list", "resonance",
                          "solver", "workers", "residual_grid", "out_dir"})
    model, model_spec = _model_from(cfg)
    amplitude = _get_number(cfg, "amplitude", 0.9)
    if amplitude is None or amplitude <= 0.0:
        raise ConfigError("field 'amplitude' must be a positive number")
    eps_list = cfg.get("eps_list")
    if (not isinstance(eps_list, list) or not eps_list
            or not all(isinstance(e, (int, float)) and not isinstance(e, bool)
                       and e > 0 for e in eps_list)):
        raise ConfigError("field 'eps_list' must be a non-empty list of "
                          "positive numbers")
    eps_list = [float(e) for e in eps_list]
    params, resolved_res = _resonance_params(cfg)
    solver_cfg, resolved_solver = _solver_config(cfg, params)
    workers = _get_number(cfg, "workers", None, lo=1, integer=True)
    grid_n = _get_number(cfg, "residual_grid", 96, lo=16, integer=True)
    out = _out_dir(cfg)
    resolved = {"command": "sweep", "model": model_spec, "amplitude": amplitude,
                "eps_list": sorted(eps_list), "resonance": resolved_res,
                "solver": resolved_solver, "workers": workers,
                "residual_grid": grid_n, "out_dir": str(out)}

    report = epsilon_sweep(model, amplitude, eps_list, solver_cfg=solver_cfg,
                           residual_grid=(grid_n, grid_n), workers=workers)
    header = "eps,resonant_skip,residual,max_u_over_eps,tail,delta1,converged"
    _write_csv(out / "sweep.csv", resolved, header,
               [row.csv_cells() for row in report.rows])
    summary = {"config": resolved, **report.summary_json()}
    if report.n_converged < 3:
        summary["note"] = "insufficient data: fits need >= 3 converged rows"
    _write_json(out / "summary.json", summary)
    print(f"sweep: {len(report.rows)} rows, {report.n_converged} converged "
          f"-> {out / 'sweep.csv'}, {out / 'summary.json'}")
    if report.n_converged < 3:
        print("too few converged rows for the fit laws", file=sys.stderr)
        return EXIT_INSUFFICIENT_DATA
    return EXIT_OK


def cmd_selftest(cfg: dict) -> int:
    _reject_unknown(cfg, {"seed", "n_fields", "out_dir"})
    seed = _get_number(cfg, "seed", DEFAULT_SEED, integer=True)
    n_fields = _get_number(cfg, "n_fields", 1000, lo=10, integer=True)
    results = run_all(seed=seed, n_fields=n_fields)
    for row in results:
        print(row.line())
    ok = all(row.ok for row in results)
    if "out_dir" in cfg:
        out = _out_dir(cfg)
        _write_json(out / "selftest.json", {
            "config": {"command": "selftest", "seed": seed,
                       "n_fields": n_fields, "out_dir": str(out)},
            "results": [{"name": r.name, "ok": r.ok, "detail": r.detail}
                        for r in results],
            "ok": ok,
        })
    print(f"selftest: {sum(r.ok for r in results)}/{len(results)} properties hold")
    return EXIT_OK if ok else EXIT_NO_CONVERGENCE


# ----------------------------------------------------------------------
# entry point
# ----------------------------------------------------------------------

_COMMANDS = {
    "limit-orbit": (cmd_limit_orbit, True),
    "divisors": (cmd_divisors, True),
    "solve": (cmd_solve, True),
    "sweep": (cmd_sweep, True),
    "selftest": (cmd_selftest, False),
}


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="kgperiodic",
        description="Periodic Klein-Gordon pipeline: planar limit orbit, "
                    "small divisors, Galerkin solve, sweep, selftest.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, needs_config) in _COMMANDS.items():
        p = sub.add_parser(name, help=f"run the {name} stage")
        if needs_config:
            p.add_argument("config", help="path to a JSON config file")
        else:
            p.add_argument("config", nargs="?", default=None,
                           help="optional path to a JSON config file")
    args = parser.parse_args(argv)

    handler, needs_config = _COMMANDS[args.command]
    try:
        cfg = _load_config(args.config) if args.config is not None else {}
        return handler(cfg)
    except (ConfigError, CoverageError) as ex:
        print(f"invalid config: {ex}", file=sys.stderr)
        return EXIT_BAD_CONFIG


if __name__ == "__main__":
    sys.exit(main())
