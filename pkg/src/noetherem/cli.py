"""Command-line front end.

    noetherem verify    --scenario FILE [--threads N] [--out DIR]
    noetherem simulate  --scenario FILE [--threads N] [--out DIR]
    noetherem transform --scenario FILE X Y T

Exit codes: 0 all checks pass, 1 checks ran and failed, 2 input error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import exprlang as el
from .dynamics import IntegrationError, integrate_many
from .fields import FieldError
from .quadrature import QuadratureError
from .scenario import Scenario, ScenarioError, load_scenario
from .symmetry import SymmetryError, generator_components, to_canonical
from .verify import (
    faraday_residual,
    gauge_independence_check,
    make_grid,
    noether_residuals,
    potential_field_residuals,
    vector_potential_residual,
)

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2
INPUT_ERRORS = (ScenarioError, el.ExprError, SymmetryError, FieldError, QuadratureError)


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _out_dir(args, scenario: Scenario) -> Path:
    return Path(args.out) if args.out else Path(scenario.outputs.dir)


def run_verify(scenario: Scenario, out: Path, threads: int = 1, log=print) -> int:
    field = scenario.field()
    g = scenario.grid
    grid = make_grid(field, g.nx, g.ny, g.nt)
    tol = scenario.tolerances.residual
    reports = noether_residuals(field, grid=grid, tol=tol, threads=threads)
    reports.append(faraday_residual(field, grid=grid, tol=tol, threads=threads))
    if field.case == "A" and scenario.field_profile.Abar1 is not None:
        reports.append(vector_potential_residual(field, grid))
    potentials = scenario.potentials()
    if potentials is not None:
        reports.extend(potential_field_residuals(potentials, field, grid))
    passed = all(r.passed for r in reports)
    payload = {
        "scenario": scenario.name,
        "case": scenario.case,
        "field": field.label,
        "threads": threads,
        "all_passed": passed,
        "reports": [r.to_dict() for r in reports],
    }
    path = out / scenario.outputs.report
    _write_json(path, payload)
    for r in reports:
        log(r.line())
    log(f"report written to {path}")
    return EXIT_OK if passed else EXIT_FAIL


def run_simulate(scenario: Scenario, out: Path, threads: int = 1, log=print) -> int:
    if not scenario.initial_conditions:
        raise ScenarioError("initial_conditions", "simulate needs at least one initial condition")
    field = scenario.field()
    tol = scenario.tolerances
    trajectories = integrate_many(
        field, scenario.initial_conditions, scenario.simulation_end, threads=threads,
        tol=tol.integrator, output_dt=scenario.simulation_dt,
    )
    potentials_ok = scenario.case != "A" or scenario.field_profile.Abar1 is not None
    rows = []
    passed = True
    for i, tr in enumerate(trajectories):
        csv_path = out / f"{scenario.outputs.trajectory_prefix}_{i}.csv"
        tr.to_csv(csv_path)
        row = {
            "index": i,
            "csv": csv_path.name,
            "samples": len(tr),
            "I0": float(tr.I[0]),
            "max_relative_drift": tr.max_drift,
            "drift_tol": tol.drift,
            "drift_passed": tr.max_drift <= tol.drift,
            "solver": tr.stats.to_dict(),
        }
        ok = row["drift_passed"]
        if potentials_ok:
            gauge = gauge_independence_check(
                scenario.spec, scenario.field_profile, tr, seed=scenario.seed + i,
                tol=tol.gauge, r_min=tol.r_min,
            )
            row["gauge_independence"] = gauge.to_dict()
            ok = ok and gauge.passed
        passed = passed and ok
        rows.append(row)
        log(
            f"{'PASS' if ok else 'FAIL'} trajectory {i}: max relative drift {tr.max_drift:.3e} "
            f"(tol {tol.drift:g}), {tr.stats.steps} steps -> {csv_path}"
        )
    payload = {
        "scenario": scenario.name,
        "case": scenario.case,
        "field": field.label,
        "t_end": scenario.simulation_end,
        "output_dt": scenario.simulation_dt,
        "threads": threads,
        "all_passed": passed,
        "trajectories": rows,
    }
    _write_json(out / scenario.outputs.summary, payload)
    return EXIT_OK if passed else EXIT_FAIL


def run_transform(scenario: Scenario, x: float, y: float, t: float, log=print) -> int:
    spec = scenario.spec
    c = to_canonical(spec, x, y, t)
    tau, eta1, eta2 = generator_components(spec, x, y, t)
    payload = {
        "x": x, "y": y, "t": t,
        "xbar": c.xbar, "ybar": c.ybar, "tbar": c.tbar,
        "tau": tau, "eta1": eta1, "eta2": eta2,
    }
    log(json.dumps({k: float(v) for k, v in payload.items()}))
    return EXIT_OK


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="noetherem", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("verify", "grid residuals of the symmetry conditions and Faraday's law"),
        ("simulate", "integrate trajectories and report invariant drift"),
        ("transform", "canonical coordinates and generator at a point"),
    ):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--scenario", required=True, help="scenario JSON file")
        if name == "transform":
            for coord in ("x", "y", "t"):
                sp.add_argument(coord, type=float)
        else:
            sp.add_argument("--threads", type=int, default=1, help="worker threads (default 1)")
            sp.add_argument("--out", default=None, help="output directory (default from scenario)")
    return p


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        scenario = load_scenario(args.scenario)
        if args.command == "transform":
            return run_transform(scenario, args.x, args.y, args.t)
        if args.threads < 1:
            raise ScenarioError("--threads", "must be at least 1")
        out = _out_dir(args, scenario)
        if args.command == "verify":
            return run_verify(scenario, out, args.threads)
        return run_simulate(scenario, out, args.threads)
    except INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except IntegrationError as exc:
        print(f"integration failed: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
