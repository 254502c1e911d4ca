"""Command-line front end.

One structured JSON config file drives every run; the subcommand picks
what gets computed from it:

    exitpde mc        --config cfg.json   Monte Carlo exit-time curve
    exitpde pde       --config cfg.json   periodic PDE solve
    exitpde compare   --config cfg.json   both routes side by side
    exitpde resonance --config cfg.json   sigma sweep and/or bisection
    exitpde survival  --config cfg.json   survival-probability durations

Configs are validated strictly (unknown keys are rejected) before any
computation starts, and artifacts are written only after the run
succeeds, so a failed invocation leaves the output directory untouched.
Numeric CSV fields carry 17 significant digits and every artifact echoes
the config hash; rerunning with the same config and seed reproduces the
output byte for byte.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .discretize import SpaceTimeGrid, default_time_steps, survival_duration
from .errors import ConfigError, ExitTimeError
from .model import SDE_FAMILIES, ExitDomain, PeriodicSDE1D, make_sde
from .periodic import (
    solve_banach,
    solve_direct,
    solve_gradient,
    to_expected_duration,
)
from .resonance import find_resonance, sweep_sigma
from .simulate import McConfig, estimate_expected_exit_curve

_MODES = ("mc", "pde", "compare", "resonance", "survival")

_TOP_KEYS = {"sde", "domain", "grid", "solver", "mc", "survival", "resonance", "sweep", "compare"}
_SDE_KEYS = {"family", "params"}
_DOMAIN_KEYS = {"left", "right", "truncation_left", "truncation_right"}
_GRID_KEYS = {"n_x", "n_t"}
_SOLVER_KEYS = {"method", "tol_F", "max_iter", "store_full"}
_MC_KEYS = {"dt", "n_paths", "seed", "max_duration", "block_size", "points", "s"}
_SURVIVAL_KEYS = {"points", "tail_tol", "max_periods", "s"}
_RESONANCE_KEYS = {"bracket", "target", "tol_sigma", "x_eval"}
_SWEEP_KEYS = {"sigmas", "start", "stop", "count", "x_eval"}
_COMPARE_KEYS = {"restrict"}

_METHODS = ("banach", "gradient", "direct")


def _check_keys(section: dict, allowed: set, where: str) -> None:
    if not isinstance(section, dict):
        raise ConfigError(f"{where}: expected an object")
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")


def _need(section: dict, key: str, where: str):
    if key not in section:
        raise ConfigError(f"{where}: missing required key {key!r}")
    return section[key]


def _as_number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    return float(value)


def _as_int(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where}: expected an integer, got {value!r}")
    return value


def load_config(path: str | Path) -> dict:
    try:
        raw = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        config = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(config, dict):
        raise ConfigError("config root must be a JSON object")
    _check_keys(config, _TOP_KEYS, "config")
    return config


def config_digest(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def _build_sde(config: dict) -> tuple[str, dict, PeriodicSDE1D]:
    section = _need(config, "sde", "config")
    _check_keys(section, _SDE_KEYS, "sde")
    family = _need(section, "family", "sde")
    if family not in SDE_FAMILIES:
        raise ConfigError(
            f"sde.family: unknown family {family!r}, expected one of {sorted(SDE_FAMILIES)}"
        )
    params = section.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("sde.params: expected an object")
    try:
        sde = make_sde(family, params)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"sde.params: {exc}") from exc
    return family, params, sde


def _build_domain(config: dict) -> ExitDomain:
    section = _need(config, "domain", "config")
    _check_keys(section, _DOMAIN_KEYS, "domain")
    kwargs = {}
    for key in ("truncation_left", "truncation_right"):
        if key in section:
            kwargs[key] = _as_number(section[key], f"domain.{key}")
    try:
        return ExitDomain(
            _as_number(_need(section, "left", "domain"), "domain.left"),
            _as_number(_need(section, "right", "domain"), "domain.right"),
            **kwargs,
        )
    except ValueError as exc:
        raise ConfigError(f"domain: {exc}") from exc


def _build_grid(config: dict, sde: PeriodicSDE1D, domain: ExitDomain) -> SpaceTimeGrid:
    section = _need(config, "grid", "config")
    _check_keys(section, _GRID_KEYS, "grid")
    n_x = _as_int(_need(section, "n_x", "grid"), "grid.n_x")
    n_t = section.get("n_t")
    if n_t is None:
        n_t = default_time_steps(sde.period)
    else:
        n_t = _as_int(n_t, "grid.n_t")
    try:
        a, b = domain.bounds()
        return SpaceTimeGrid(a, b, n_x, n_t, sde.period)
    except ValueError as exc:
        raise ConfigError(f"grid: {exc}") from exc


def _solver_settings(config: dict) -> dict:
    section = config.get("solver", {})
    _check_keys(section, _SOLVER_KEYS, "solver")
    method = section.get("method", "banach")
    if method not in _METHODS:
        raise ConfigError(f"solver.method: expected one of {_METHODS}, got {method!r}")
    settings = {
        "method": method,
        "tol_F": _as_number(section.get("tol_F", 1e-5), "solver.tol_F"),
        "max_iter": _as_int(section.get("max_iter", 200), "solver.max_iter"),
        "store_full": section.get("store_full", False),
    }
    if not isinstance(settings["store_full"], bool):
        raise ConfigError("solver.store_full: expected true or false")
    return settings


def _mc_settings(config: dict, grid_interval: tuple[float, float], seed_override=None) -> dict:
    section = _need(config, "mc", "config")
    _check_keys(section, _MC_KEYS, "mc")
    a, b = grid_interval
    points = section.get("points", 20)
    if isinstance(points, int) and not isinstance(points, bool):
        if points < 1:
            raise ConfigError("mc.points: need at least one point")
        xs = [a + (b - a) * i / (points + 1) for i in range(1, points + 1)]
    elif isinstance(points, list):
        xs = [_as_number(p, "mc.points") for p in points]
        for x in xs:
            if not a < x < b:
                raise ConfigError(f"mc.points: {x} outside open interval ({a}, {b})")
    else:
        raise ConfigError("mc.points: expected an integer count or a list of points")
    seed = _as_int(section.get("seed", 0), "mc.seed")
    if seed_override is not None:
        seed = seed_override
    kwargs = {}
    if "max_duration" in section:
        kwargs["max_duration"] = _as_number(section["max_duration"], "mc.max_duration")
    if "block_size" in section:
        kwargs["block_size"] = _as_int(section["block_size"], "mc.block_size")
    try:
        cfg = McConfig(
            dt=_as_number(_need(section, "dt", "mc"), "mc.dt"),
            n_paths=_as_int(_need(section, "n_paths", "mc"), "mc.n_paths"),
            seed=seed,
            **kwargs,
        )
    except ValueError as exc:
        raise ConfigError(f"mc: {exc}") from exc
    return {"cfg": cfg, "points": xs, "s": _as_number(section.get("s", 0.0), "mc.s")}


def _survival_settings(config: dict) -> dict:
    section = _need(config, "survival", "config")
    _check_keys(section, _SURVIVAL_KEYS, "survival")
    points = _need(section, "points", "survival")
    if not isinstance(points, list) or not points:
        raise ConfigError("survival.points: expected a non-empty list")
    return {
        "points": [_as_number(p, "survival.points") for p in points],
        "tail_tol": _as_number(section.get("tail_tol", 1e-6), "survival.tail_tol"),
        "max_periods": _as_int(section.get("max_periods", 50), "survival.max_periods"),
        "s": _as_number(section.get("s", 0.0), "survival.s"),
    }


def _resonance_settings(config: dict, period: float) -> dict | None:
    if "resonance" not in config:
        return None
    section = config["resonance"]
    _check_keys(section, _RESONANCE_KEYS, "resonance")
    bracket = _need(section, "bracket", "resonance")
    if not isinstance(bracket, list) or len(bracket) != 2:
        raise ConfigError("resonance.bracket: expected [low, high]")
    lo = _as_number(bracket[0], "resonance.bracket")
    hi = _as_number(bracket[1], "resonance.bracket")
    if not lo < hi:
        raise ConfigError(f"resonance.bracket: need low < high, got [{lo}, {hi}]")
    target = section.get("target", "half_period")
    if target == "half_period":
        target_value = period / 2.0
    else:
        target_value = _as_number(target, "resonance.target")
    return {
        "bracket": (lo, hi),
        "target": target_value,
        "tol_sigma": _as_number(section.get("tol_sigma", 5e-4), "resonance.tol_sigma"),
        "x_eval": _as_number(section.get("x_eval", 1.0), "resonance.x_eval"),
    }


def _sweep_settings(config: dict) -> dict | None:
    if "sweep" not in config:
        return None
    section = config["sweep"]
    _check_keys(section, _SWEEP_KEYS, "sweep")
    if "sigmas" in section:
        if {"start", "stop", "count"} & set(section):
            raise ConfigError("sweep: give either sigmas or start/stop/count, not both")
        raw = section["sigmas"]
        if not isinstance(raw, list):
            raise ConfigError("sweep.sigmas: expected a list")
        sigmas = [_as_number(s, "sweep.sigmas") for s in raw]
    else:
        start = _as_number(_need(section, "start", "sweep"), "sweep.start")
        stop = _as_number(_need(section, "stop", "sweep"), "sweep.stop")
        count = _as_int(_need(section, "count", "sweep"), "sweep.count")
        if count < 1:
            raise ConfigError("sweep.count: need at least one value")
        sigmas = list(np.linspace(start, stop, count))
    return {"sigmas": sigmas, "x_eval": _as_number(section.get("x_eval", 1.0), "sweep.x_eval")}


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    value = float(value)
    if math.isnan(value):
        return "nan"
    return format(value, ".17g")


def _csv(columns: list[str], rows: list[tuple], meta: dict) -> str:
    lines = [f"# {key}: {val}" for key, val in meta.items()]
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def _json_artifact(payload: dict) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _meta(mode: str, digest: str) -> dict:
    return {"exitpde": __version__, "mode": mode, "config-sha256": digest}


def _solve_report(settings: dict, sde: PeriodicSDE1D, grid: SpaceTimeGrid):
    method = settings["method"]
    if method == "banach":
        solution, report = solve_banach(
            1.0, sde, grid, tol_F=settings["tol_F"], max_iter=settings["max_iter"]
        )
    elif method == "gradient":
        solution, report = solve_gradient(
            1.0, sde, grid, tol_F=settings["tol_F"], max_iter=settings["max_iter"]
        )
    else:
        solution, report = solve_direct(1.0, sde, grid), None
    return to_expected_duration(solution), report


def _report_payload(settings: dict, tau, report, digest: str) -> dict:
    payload = {
        "config_sha256": digest,
        "solver": settings["method"],
        "iterations": tau.meta.iterations,
        "final_cost": tau.meta.final_cost,
        "periodicity_residual": tau.periodicity_residual(),
    }
    if report is not None:
        payload.update(
            {
                "converged": report.converged,
                "tolerance_used": report.tolerance_used,
                "cost_history": list(report.cost_history),
                "contraction_estimates": list(report.contraction_estimates),
                "guidance": report.guidance,
            }
        )
    return payload


def _run_mc(config: dict, threads: int, seed_override, digest: str) -> dict[str, str]:
    _, _, sde = _build_sde(config)
    domain = _build_domain(config)
    a, b = domain.bounds()
    mc = _mc_settings(config, (a, b), seed_override)
    stats = estimate_expected_exit_curve(
        sde, domain, mc["s"], mc["points"], mc["cfg"], threads=threads
    )
    rows = [(st.point, st.mean, st.std_error, st.n_samples, st.n_censored) for st in stats]
    return {
        "mc_curve.csv": _csv(
            ["x", "mean", "std_error", "n_samples", "n_censored"],
            rows,
            _meta("mc", digest),
        )
    }


def _run_pde(config: dict, digest: str) -> dict[str, str]:
    _, _, sde = _build_sde(config)
    domain = _build_domain(config)
    grid = _build_grid(config, sde, domain)
    settings = _solver_settings(config)
    tau, report = _solve_report(settings, sde, grid)
    files = {
        "pde_curve.csv": _csv(
            ["x", "tau"],
            list(zip(grid.nodes, tau.initial_values())),
            _meta("pde", digest),
        ),
        "pde_report.json": _json_artifact(_report_payload(settings, tau, report, digest)),
    }
    if settings["store_full"]:
        rows = []
        for k, field in enumerate(tau.slices):
            s = k * grid.dt
            rows.extend((s, x, v) for x, v in zip(grid.nodes, field.values))
        files["pde_spacetime.csv"] = _csv(["s", "x", "tau"], rows, _meta("pde", digest))
    return files


def _run_compare(config: dict, threads: int, seed_override, digest: str) -> dict[str, str]:
    _, _, sde = _build_sde(config)
    domain = _build_domain(config)
    grid = _build_grid(config, sde, domain)
    settings = _solver_settings(config)
    mc = _mc_settings(config, (grid.a, grid.b), seed_override)
    restrict = None
    if "compare" in config:
        section = config["compare"]
        _check_keys(section, _COMPARE_KEYS, "compare")
        if "restrict" in section:
            raw = section["restrict"]
            if not isinstance(raw, list) or len(raw) != 2:
                raise ConfigError("compare.restrict: expected [low, high]")
            restrict = (
                _as_number(raw[0], "compare.restrict"),
                _as_number(raw[1], "compare.restrict"),
            )

    tau, report = _solve_report(settings, sde, grid)
    k0 = grid.time_index(mc["s"])
    stats = estimate_expected_exit_curve(
        sde, domain, mc["s"], mc["points"], mc["cfg"], threads=threads
    )

    rows = []
    mc_vals, pde_vals, xs = [], [], []
    for st in stats:
        pde_val = tau.interp_space(k0, st.point)
        diff = st.mean - pde_val
        rel = diff / pde_val if pde_val != 0 else float("nan")
        rows.append(
            (st.point, st.mean, st.std_error, st.n_samples, st.n_censored, pde_val, diff, rel)
        )
        xs.append(st.point)
        mc_vals.append(st.mean)
        pde_vals.append(pde_val)

    xs = np.array(xs)
    mc_arr = np.array(mc_vals)
    pde_arr = np.array(pde_vals)
    valid = np.isfinite(mc_arr)

    def rel_l2(mask) -> float:
        mask = mask & valid
        if not mask.any() or not np.linalg.norm(pde_arr[mask]) > 0:
            return float("nan")
        return float(np.linalg.norm(mc_arr[mask] - pde_arr[mask]) / np.linalg.norm(pde_arr[mask]))

    summary = {
        "config_sha256": digest,
        "rel_err_full": rel_l2(np.ones_like(valid)),
        "max_abs_rel": float(np.nanmax(np.abs((mc_arr - pde_arr) / pde_arr))) if valid.any() else float("nan"),
        "n_points": len(xs),
        "solver": settings["method"],
        "iterations": tau.meta.iterations,
    }
    if restrict is not None:
        lo, hi = restrict
        summary["restrict"] = [lo, hi]
        summary["rel_err_right_well"] = rel_l2((xs >= lo) & (xs <= hi))
    if report is not None:
        summary["converged"] = report.converged
    return {
        "compare.csv": _csv(
            ["x", "mc_mean", "mc_std_error", "n_samples", "n_censored", "pde", "abs_diff", "rel_diff"],
            rows,
            _meta("compare", digest),
        ),
        "compare_summary.json": _json_artifact(summary),
    }


def _run_resonance(config: dict, threads: int, digest: str) -> dict[str, str]:
    family, params, sde0 = _build_sde(config)
    domain = _build_domain(config)
    grid = _build_grid(config, sde0, domain)
    settings = _solver_settings(config)
    sweep = _sweep_settings(config)
    resonance = _resonance_settings(config, sde0.period)
    if sweep is None and resonance is None:
        raise ConfigError("resonance mode needs a sweep and/or resonance section")

    def factory(sigma: float) -> PeriodicSDE1D:
        return make_sde(family, {**params, "sigma": sigma})

    files: dict[str, str] = {}
    if sweep is not None:
        result = sweep_sigma(
            sweep["sigmas"],
            factory,
            grid,
            x_eval=sweep["x_eval"],
            method=settings["method"],
            tol_F=settings["tol_F"],
            max_iter=settings["max_iter"],
            threads=threads,
        )
        rows = [(e.sigma, e.tau, e.converged, e.iterations) for e in result.entries]
        files["sweep.csv"] = _csv(
            ["sigma", "tau", "converged", "iterations"], rows, _meta("resonance", digest)
        )
    if resonance is not None:
        result = find_resonance(
            resonance["target"],
            resonance["bracket"],
            factory,
            grid,
            x_eval=resonance["x_eval"],
            method=settings["method"],
            tol_F=settings["tol_F"],
            max_iter=settings["max_iter"],
            tol_sigma=resonance["tol_sigma"],
        )
        files["resonance.json"] = _json_artifact(
            {
                "config_sha256": digest,
                "sigma_star": result.sigma_star,
                "bracket": [result.bracket_low, result.bracket_high],
                "target": result.target,
                "tol_sigma": resonance["tol_sigma"],
                "x_eval": resonance["x_eval"],
                "evaluations": [[s, t] for s, t in result.evaluations],
            }
        )
    return files


def _run_survival(config: dict, digest: str) -> dict[str, str]:
    _, _, sde = _build_sde(config)
    domain = _build_domain(config)
    grid = _build_grid(config, sde, domain)
    settings = _survival_settings(config)
    rows = []
    for x in settings["points"]:
        if not grid.a < x < grid.b:
            raise ConfigError(f"survival.points: {x} outside ({grid.a}, {grid.b})")
        index = int(np.argmin(np.abs(grid.nodes - x)))
        duration = survival_duration(
            sde,
            grid,
            settings["s"],
            index,
            tail_tol=settings["tail_tol"],
            max_periods=settings["max_periods"],
        )
        rows.append((x, grid.nodes[index], duration))
    return {
        "survival.csv": _csv(
            ["x_request", "x_node", "duration"], rows, _meta("survival", digest)
        )
    }


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="exitpde",
        description="Expected exit times of periodically forced diffusions.",
    )
    sub = parser.add_subparsers(dest="mode", required=True)
    for mode in _MODES:
        p = sub.add_parser(mode)
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--out", default=".", help="output directory (default: cwd)")
        p.add_argument("--seed", type=int, default=None, help="override mc.seed")
        p.add_argument(
            "--threads",
            type=int,
            default=None,
            help="worker threads (default: EXITPDE_THREADS or 1)",
        )
    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    threads = args.threads
    if threads is None:
        threads = int(os.environ.get("EXITPDE_THREADS", "1"))
    if threads < 1:
        print(
            json.dumps({"error": {"operation": "config", "message": "threads must be >= 1"}}),
            file=sys.stderr,
        )
        return 2

    operation = "config"
    try:
        config = load_config(args.config)
        digest = config_digest(config)
        operation = args.mode
        if args.mode == "mc":
            files = _run_mc(config, threads, args.seed, digest)
        elif args.mode == "pde":
            files = _run_pde(config, digest)
        elif args.mode == "compare":
            files = _run_compare(config, threads, args.seed, digest)
        elif args.mode == "resonance":
            files = _run_resonance(config, threads, digest)
        else:
            files = _run_survival(config, digest)
        operation = "write"
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for name, content in files.items():
            (out / name).write_text(content)
    except (ConfigError, ExitTimeError) as exc:
        print(
            json.dumps(
                {
                    "error": {
                        "operation": operation,
                        "type": type(exc).__name__,
                        "message": str(exc),
                    }
                }
            ),
            file=sys.stderr,
        )
        return 2

    for name in sorted(files):
        print(f"wrote {Path(args.out) / name}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
