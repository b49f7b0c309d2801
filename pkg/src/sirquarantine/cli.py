"""Command line front end.

Five subcommands, all driven by a JSON config file:

    simulate   integrate one window, dump trajectory.csv + summary.json
    plan       run the case-analysis planner, dump plan.json
    sweep      plan across a budget grid, dump sweep.csv + boundaries.json
               + plot_tstar_vs_tau.csv
    verify     cross-check a plan (or an explicit window) against the
               brute-force search, the maximum-principle conditions and
               the conservation residual, dump report.json
    oracle     exhaustive grid search, dump oracle.json + grid.csv

Exit codes: 0 success, 1 verification failure, 2 config error (the message
names the offending field), 3 numerical failure.  Outputs are
deterministic: the same config bytes produce the same output bytes, floats
are written with 17 significant digits, JSON keys are sorted and no
timestamps are recorded.
"""

from __future__ import annotations

import functools
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import click
import numpy as np

from . import _kernels
from .errors import DomainError, IntegrationError
from .oracle import grid_search, refine
from .planner import plan, regime_boundaries
from .pmp import verify_necessary_conditions
from .sir import (
    EpidemicState,
    ModelParams,
    Schedule,
    conserved_residual,
    integrate,
    objective,
)

# Gates for the planner-vs-oracle cross check in `verify`.
OBJECTIVE_GAP_TOL = 1e-8
SCHEDULE_GAP_TOL = 0.05

_SCALAR_KEYS = ("gamma", "sigma0", "sigma1", "sigma2", "T", "tau", "kappa", "x0", "y0")
_OPTIONAL_KEYS = ("integrator", "oracle", "t1", "eta")


@dataclass(frozen=True)
class RunConfig:
    params: ModelParams
    initial: EpidemicState
    step: float | None
    tolerance: float
    n_t1: int
    n_eta: int
    t1: float | None
    eta: float | None


def _number(value, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise DomainError(f"{name}: expected a number, got {type(value).__name__}")
    if not math.isfinite(value):
        raise DomainError(f"{name}: must be finite, got {value}")
    return float(value)


def _block(raw: dict, name: str, allowed: tuple[str, ...]) -> dict:
    block = raw.get(name, {})
    if not isinstance(block, dict):
        raise DomainError(f"{name}: expected an object, got {type(block).__name__}")
    for key in block:
        if key not in allowed:
            raise DomainError(f"{name}.{key}: unknown field")
    return block


def load_config(path: str) -> RunConfig:
    """Parse and validate a config file; DomainError messages name the
    offending field."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DomainError(f"config: {exc}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DomainError(f"config: not valid JSON ({exc})") from None
    if not isinstance(raw, dict):
        raise DomainError("config: top level must be a JSON object")
    for key in raw:
        if key not in _SCALAR_KEYS and key not in _OPTIONAL_KEYS:
            raise DomainError(f"{key}: unknown field")
    missing = [k for k in _SCALAR_KEYS if k not in raw]
    if missing:
        raise DomainError(f"{missing[0]}: required")
    vals = {k: _number(raw[k], k) for k in _SCALAR_KEYS}

    params = ModelParams(
        gamma=vals["gamma"], sigma0=vals["sigma0"], sigma1=vals["sigma1"],
        sigma2=vals["sigma2"], T=vals["T"], tau=vals["tau"], kappa=vals["kappa"],
    )
    initial = EpidemicState(vals["x0"], vals["y0"])

    integ = _block(raw, "integrator", ("step", "tolerance"))
    step = None
    if "step" in integ:
        step = _number(integ["step"], "integrator.step")
        if step <= 0.0:
            raise DomainError(f"integrator.step: must be positive, got {step}")
    tolerance = 1e-9
    if "tolerance" in integ:
        tolerance = _number(integ["tolerance"], "integrator.tolerance")
        if tolerance <= 0.0:
            raise DomainError(f"integrator.tolerance: must be positive, got {tolerance}")

    orc = _block(raw, "oracle", ("n_t1", "n_eta"))
    counts = {"n_t1": 400, "n_eta": 100}
    for key in counts:
        if key in orc:
            v = orc[key]
            if isinstance(v, bool) or not isinstance(v, int):
                raise DomainError(f"oracle.{key}: expected an integer, got {type(v).__name__}")
            if v < 2:
                raise DomainError(f"oracle.{key}: must be at least 2, got {v}")
            counts[key] = v

    t1 = _number(raw["t1"], "t1") if "t1" in raw else None
    eta = _number(raw["eta"], "eta") if "eta" in raw else None
    return RunConfig(params, initial, step, tolerance,
                     counts["n_t1"], counts["n_eta"], t1, eta)


def _parse_schedule(text: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise DomainError(f"--schedule-override: expected 't1,eta', got {text!r}")
    try:
        return float(parts[0]), float(parts[1])
    except ValueError:
        raise DomainError(f"--schedule-override: expected two numbers, got {text!r}") from None


def _parse_grid(text: str) -> list[float]:
    parts = text.split(":")
    if len(parts) != 3:
        raise DomainError(f"--grid: expected 'start:stop:count', got {text!r}")
    try:
        start, stop = float(parts[0]), float(parts[1])
        count = int(parts[2])
    except ValueError:
        raise DomainError(f"--grid: expected start:stop:count numbers, got {text!r}") from None
    if count < 1:
        raise DomainError(f"--grid: count must be at least 1, got {count}")
    if count == 1 and start != stop:
        raise DomainError("--grid: a single-point grid needs start == stop")
    return [float(v) for v in np.linspace(start, stop, count)]


def _resolve_schedule(cfg: RunConfig, override: str | None) -> Schedule:
    if override is not None:
        t1, eta = _parse_schedule(override)
    elif cfg.t1 is not None and cfg.eta is not None:
        t1, eta = cfg.t1, cfg.eta
    elif cfg.t1 is not None or cfg.eta is not None:
        missing = "eta" if cfg.eta is None else "t1"
        raise DomainError(f"{missing}: required when the other schedule field is set")
    else:
        raise DomainError(
            "t1: required (set t1 and eta in the config or pass --schedule-override)"
        )
    return Schedule(t1, eta).validate(cfg.params)


def _apply_threads(threads: int | None) -> None:
    if threads is None:
        return
    if threads < 1:
        raise DomainError(f"--threads: must be at least 1, got {threads}")
    import numba

    numba.set_num_threads(min(threads, numba.config.NUMBA_NUM_THREADS))


def _g17(v: float) -> str:
    return format(float(v), ".17g")


def _write_csv(path: Path, header: tuple[str, ...], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(c if isinstance(c, str) else _g17(c) for c in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _write_json(path: Path, obj) -> None:
    path.write_text(
        json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n",
        encoding="utf-8",
    )


def _outdir(out: str) -> Path:
    d = Path(out)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _common_options(fn):
    fn = click.option("--threads", type=int, default=None,
                      help="cap the numba thread count")(fn)
    fn = click.option("--out", default="./out", show_default=True, metavar="DIR",
                      help="output directory")(fn)
    fn = click.option("--config", "config_path", required=True, metavar="PATH",
                      help="JSON config file")(fn)
    return fn


def _handled(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except DomainError as exc:
            click.echo(f"config error: {exc}", err=True)
            sys.exit(2)
        except IntegrationError as exc:
            click.echo(f"numerical failure: {exc}", err=True)
            sys.exit(3)

    return wrapper


@click.group()
def main():
    """Optimal placement of a strict-quarantine window."""


@main.command()
@_common_options
@click.option("--schedule-override", default=None, metavar="T1,ETA",
              help="window to simulate, overriding t1/eta from the config")
@_handled
def simulate(config_path, out, threads, schedule_override):
    """Integrate one window; write trajectory.csv and summary.json."""
    cfg = load_config(config_path)
    _apply_threads(threads)
    sched = _resolve_schedule(cfg, schedule_override)
    traj = integrate(cfg.params, cfg.initial, sched, step_hint=cfg.step)
    d = _outdir(out)
    _write_csv(d / "trajectory.csv", ("t", "x", "y", "sigma"),
               zip(traj.times, traj.x, traj.y, traj.sigma))
    xT, yT = float(traj.x[-1]), float(traj.y[-1])
    xinf = float(_kernels.xinf_root(xT, yT, cfg.params.sigma0))
    if not math.isfinite(xinf):
        raise IntegrationError("final-size bracketing failed at the horizon state")
    _write_json(d / "summary.json", {
        "x_T": xT,
        "y_T": yT,
        "x_infinity": xinf,
        "J": objective(cfg.params, cfg.initial, sched, step_hint=cfg.step),
        "schedule": {"t1": sched.t1, "eta": sched.eta},
    })
    click.echo(f"wrote {d / 'trajectory.csv'} and {d / 'summary.json'}")


@main.command(name="plan")
@_common_options
@_handled
def plan_cmd(config_path, out, threads):
    """Pick the best window; write plan.json."""
    cfg = load_config(config_path)
    _apply_threads(threads)
    res = plan(cfg.params, cfg.initial, n_t1=cfg.n_t1, n_eta=cfg.n_eta,
               step_hint=cfg.step)
    d = _outdir(out)
    _write_json(d / "plan.json", {
        "schedule": {"t1": res.schedule.t1, "eta": res.schedule.eta},
        "objective": res.objective,
        "case_id": res.case_id,
        "method": res.method,
        "classification": res.classification.value,
        "diagnostics": res.diagnostics,
    })
    click.echo(f"wrote {d / 'plan.json'}")


@main.command()
@_common_options
@click.option("--grid", "grid_spec", required=True, metavar="START:STOP:COUNT",
              help="budget grid to sweep")
@_handled
def sweep(config_path, out, threads, grid_spec):
    """Plan across a budget grid; write sweep.csv, boundaries.json and
    plot_tstar_vs_tau.csv."""
    cfg = load_config(config_path)
    _apply_threads(threads)
    taus = _parse_grid(grid_spec)
    table = regime_boundaries(cfg.params, cfg.initial, taus, step_hint=cfg.step)
    d = _outdir(out)
    _write_csv(d / "sweep.csv", ("tau", "t_star", "eta_star", "case_id", "J_star"),
               ((r.tau, r.t_start, r.eta, "" if r.case_id is None else str(r.case_id),
                 r.objective) for r in table.rows))
    _write_json(d / "boundaries.json",
                {"tau_bar": table.tau_bar, "tau_tilde": table.tau_tilde})
    _write_csv(d / "plot_tstar_vs_tau.csv", ("tau", "t_star"),
               ((r.tau, r.t_start) for r in table.rows))
    click.echo(f"wrote {d / 'sweep.csv'}, {d / 'boundaries.json'} "
               f"and {d / 'plot_tstar_vs_tau.csv'}")


@main.command()
@_common_options
@click.option("--schedule-override", default=None, metavar="T1,ETA",
              help="check this window instead of the planner's")
@_handled
def verify(config_path, out, threads, schedule_override):
    """Cross-check a window; write report.json; exit 1 on any failure."""
    cfg = load_config(config_path)
    _apply_threads(threads)
    d = _outdir(out)
    report: dict = {}

    if schedule_override is not None:
        sched = _resolve_schedule(cfg, schedule_override)
        gaps_ok = True
    else:
        res = plan(cfg.params, cfg.initial, n_t1=cfg.n_t1, n_eta=cfg.n_eta,
                   step_hint=cfg.step)
        sched = res.schedule
        coarse = grid_search(cfg.params, cfg.initial, n_t1=cfg.n_t1,
                             n_eta=cfg.n_eta, step_hint=cfg.step)
        spacing = max(cfg.params.T / (cfg.n_t1 - 1), cfg.params.tau / (cfg.n_eta - 1))
        osched = refine(cfg.params, cfg.initial, coarse.schedule, spacing,
                        step_floor=1e-6, step_hint=cfg.step)
        oJ = objective(cfg.params, cfg.initial, osched, step_hint=cfg.step)
        gap_J = abs(res.objective - oJ)
        gap_t1 = abs(sched.t1 - osched.t1)
        gap_eta = abs(sched.eta - osched.eta)
        # an empty window leaves the start time unidentified (J does not
        # depend on t1 when eta = 0), so its gap cannot gate the check
        t1_identified = max(sched.eta, osched.eta) > 0.0
        gaps_ok = (gap_J <= OBJECTIVE_GAP_TOL
                   and (gap_t1 <= SCHEDULE_GAP_TOL or not t1_identified)
                   and gap_eta <= SCHEDULE_GAP_TOL)
        report["planner"] = {"case_id": res.case_id, "method": res.method,
                             "classification": res.classification.value}
        report["oracle"] = {"t1": osched.t1, "eta": osched.eta, "objective": oJ}
        report["gaps"] = {"objective": gap_J, "t1": gap_t1, "eta": gap_eta,
                          "passed": gaps_ok}

    pmp = verify_necessary_conditions(cfg.params, cfg.initial, sched,
                                      step_hint=cfg.step)
    traj = integrate(cfg.params, cfg.initial, sched, step_hint=cfg.step)
    residuals = [conserved_residual(traj, k) for k in range(len(traj.segments))]
    cons_ok = max(residuals) <= cfg.tolerance

    passed = bool(gaps_ok and pmp.passed and cons_ok)
    report.update({
        "schedule": {"t1": sched.t1, "eta": sched.eta},
        "objective": objective(cfg.params, cfg.initial, sched, step_hint=cfg.step),
        "pmp": {
            "passed": pmp.passed,
            "contradictions": pmp.contradictions,
            "contradiction_fraction": pmp.contradiction_fraction,
            "sign_changes": pmp.sign_changes,
            "interior_switches": pmp.interior_switches,
            "hamiltonian_deviation": pmp.hamiltonian_deviation,
            "complementarity_residual": pmp.complementarity_residual,
            "singular_cells": pmp.singular_cells,
            "degenerate_segments": list(pmp.degenerate_segments),
            "multiplier_sensitive": pmp.multiplier_sensitive,
            "lambda3": pmp.lambda3,
        },
        "conservation": {"residuals": residuals, "tolerance": cfg.tolerance,
                         "passed": cons_ok},
        "passed": passed,
    })
    _write_json(d / "report.json", report)
    click.echo(f"wrote {d / 'report.json'} (passed={passed})")
    if not passed:
        sys.exit(1)


@main.command()
@_common_options
@_handled
def oracle(config_path, out, threads):
    """Exhaustive grid search; write oracle.json and grid.csv."""
    cfg = load_config(config_path)
    _apply_threads(threads)
    res = grid_search(cfg.params, cfg.initial, n_t1=cfg.n_t1, n_eta=cfg.n_eta,
                      step_hint=cfg.step)
    d = _outdir(out)
    _write_json(d / "oracle.json", {
        "schedule": {"t1": res.schedule.t1, "eta": res.schedule.eta},
        "objective": res.objective,
        "n_t1": res.grid.n_t1,
        "n_eta": res.grid.n_eta,
    })
    _write_csv(d / "grid.csv", ("t1", "eta", "J"),
               zip(res.grid.t1, res.grid.eta, res.grid.J))
    click.echo(f"wrote {d / 'oracle.json'} and {d / 'grid.csv'}")
