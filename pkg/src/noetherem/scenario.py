"""Scenario files: one JSON document per experiment, plus a random scenario generator."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import exprlang as el
from .dynamics import State
from .fields import FieldError, FieldModel, FieldProfile, PotentialSet, build_field, build_potentials
from .symmetry import REQUIRED, SymmetryError, SymmetrySpec

TOP_LEVEL = {
    "name", "description", "case", "symmetry", "profile", "windows", "tolerances", "grid",
    "initial_conditions", "seed", "outputs", "simulation", "perturbation",
}
REQUIRED_TOP = ("case", "symmetry", "profile", "windows")


class ScenarioError(ValueError):
    """Invalid scenario; ``where`` names the offending field."""

    def __init__(self, where: str, message: str):
        super().__init__(f"{where}: {message}")
        self.where = where


@dataclass(frozen=True)
class Tolerances:
    integrator: float = 1e-10
    drift: float = 1e-7
    residual: float | None = None  # None: pick by derivative method
    gauge: float = 1e-8
    quadrature: float = 1e-10
    r_min: float = 1e-6


@dataclass(frozen=True)
class GridConfig:
    nx: int = 20
    ny: int = 20
    nt: int = 10


@dataclass(frozen=True)
class Perturbation:
    component: str
    expr: str
    epsilon: float


@dataclass(frozen=True)
class Outputs:
    dir: str = "out"
    report: str = "report.json"
    trajectory_prefix: str = "trajectory"
    summary: str = "simulation.json"


@dataclass
class Scenario:
    name: str
    case: str
    symmetry: dict[str, str]
    profile: dict[str, str]
    t_window: tuple[float, float]
    x_window: tuple[float, float]
    y_window: tuple[float, float]
    tolerances: Tolerances = field(default_factory=Tolerances)
    grid: GridConfig = field(default_factory=GridConfig)
    initial_conditions: list[State] = field(default_factory=list)
    seed: int = 0
    outputs: Outputs = field(default_factory=Outputs)
    t_end: float | None = None
    output_dt: float | None = None
    perturbation: Perturbation | None = None
    description: str = ""

    # -- derived objects ------------------------------------------------------

    @property
    def spec(self) -> SymmetrySpec:
        if not hasattr(self, "_spec"):
            self._spec = SymmetrySpec(
                self.case, dict(self.symmetry), self.t_window, quad_tol=self.tolerances.quadrature
            )
        return self._spec

    @property
    def field_profile(self) -> FieldProfile:
        if not hasattr(self, "_profile"):
            self._profile = FieldProfile.from_mapping(self.profile)
        return self._profile

    def field(self, perturbed: bool = True) -> FieldModel:
        model = build_field(
            self.spec, self.field_profile, r_min=self.tolerances.r_min,
            x_window=self.x_window, y_window=self.y_window,
        )
        model.label = self.name
        if perturbed and self.perturbation is not None:
            p = self.perturbation
            model = model.perturbed(p.component, p.expr, p.epsilon)
        return model

    def potentials(self) -> PotentialSet | None:
        """Potentials when the profile allows them (case A needs ``Abar``)."""
        if self.case == "A" and self.field_profile.Abar1 is None:
            return None
        return build_potentials(
            self.spec, self.field_profile, r_min=self.tolerances.r_min,
            x_window=self.x_window, y_window=self.y_window,
        )

    @property
    def simulation_end(self) -> float:
        return self.t_window[1] if self.t_end is None else self.t_end

    @property
    def simulation_dt(self) -> float:
        if self.output_dt is not None:
            return self.output_dt
        return (self.simulation_end - self.t_window[0]) / 100

    def to_dict(self) -> dict:
        d: dict[str, Any] = {
            "name": self.name,
            "case": self.case,
            "symmetry": dict(self.symmetry),
            "profile": dict(self.profile),
            "windows": {"t": list(self.t_window), "x": list(self.x_window), "y": list(self.y_window)},
            "tolerances": {k: getattr(self.tolerances, k) for k in Tolerances.__dataclass_fields__},
            "grid": {"nx": self.grid.nx, "ny": self.grid.ny, "nt": self.grid.nt},
            "initial_conditions": [
                {"t": s.t, "x": s.x, "y": s.y, "vx": s.vx, "vy": s.vy} for s in self.initial_conditions
            ],
            "seed": self.seed,
            "outputs": {k: getattr(self.outputs, k) for k in Outputs.__dataclass_fields__},
        }
        if self.description:
            d["description"] = self.description
        sim = {}
        if self.t_end is not None:
            sim["t_end"] = self.t_end
        if self.output_dt is not None:
            sim["output_dt"] = self.output_dt
        if sim:
            d["simulation"] = sim
        if self.perturbation is not None:
            p = self.perturbation
            d["perturbation"] = {"component": p.component, "expr": p.expr, "epsilon": p.epsilon}
        return d

    def dump(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2) + "\n")
        return path


# ---------------------------------------------------------------------------
# Parsing and validation
# ---------------------------------------------------------------------------


def _number(value, where: str) -> float:
    """A finite number, given as JSON number or constant expression text like ``2*pi``."""
    if isinstance(value, bool):
        raise ScenarioError(where, "expected a number")
    if isinstance(value, (int, float)):
        out = float(value)
    elif isinstance(value, str):
        try:
            expr = el.parse(value)
            if el.free_variables(expr):
                raise ScenarioError(where, f"constant expected, found variables {sorted(el.free_variables(expr))}")
            out = el.evaluate(expr, {})
        except el.ExprError as exc:
            raise ScenarioError(where, str(exc)) from None
    else:
        raise ScenarioError(where, f"expected a number, got {type(value).__name__}")
    if not math.isfinite(out):
        raise ScenarioError(where, "value is not finite")
    return out


def _positive(value, where: str) -> float:
    out = _number(value, where)
    if not out > 0:
        raise ScenarioError(where, "must be positive")
    return out


def _window(data, key: str, default=None) -> tuple[float, float]:
    where = f"windows.{key}"
    if key not in data:
        if default is None:
            raise ScenarioError(where, "missing")
        return default
    value = data[key]
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ScenarioError(where, "expected [lo, hi]")
    lo, hi = _number(value[0], where + "[0]"), _number(value[1], where + "[1]")
    if not hi > lo:
        raise ScenarioError(where, f"degenerate window [{lo}, {hi}]")
    return lo, hi


def _check_expr(text, where: str, allowed: set[str]) -> str:
    if isinstance(text, (int, float)) and not isinstance(text, bool):
        text = repr(float(text))
    if not isinstance(text, str):
        raise ScenarioError(where, "expected expression text")
    try:
        expr = el.parse(text)
    except el.ExprError as exc:
        raise ScenarioError(where, str(exc)) from None
    extra = el.free_variables(expr) - allowed
    if extra:
        raise ScenarioError(where, f"unexpected variables {sorted(extra)}; allowed {sorted(allowed)}")
    return text


def _mapping(data, key: str) -> dict:
    value = data.get(key, {})
    if not isinstance(value, dict):
        raise ScenarioError(key, "expected an object")
    return value


def scenario_from_dict(data: dict, name: str = "scenario") -> Scenario:
    if not isinstance(data, dict):
        raise ScenarioError("<root>", "expected a JSON object")
    unknown = set(data) - TOP_LEVEL
    if unknown:
        raise ScenarioError(sorted(unknown)[0], "unknown top-level key")
    for key in REQUIRED_TOP:
        if key not in data:
            raise ScenarioError(key, "missing required key")
    case = data["case"]
    if case not in REQUIRED:
        raise ScenarioError("case", f"expected one of {sorted(REQUIRED)}, got {case!r}")

    sym_in = _mapping(data, "symmetry")
    symmetry = {}
    for k, v in sym_in.items():
        if k not in REQUIRED[case]:
            raise ScenarioError(f"symmetry.{k}", f"not a case {case} function; expected {list(REQUIRED[case])}")
        symmetry[k] = _check_expr(v, f"symmetry.{k}", {"t"})
    for k in REQUIRED[case]:
        if k not in symmetry:
            raise ScenarioError(f"symmetry.{k}", f"required for case {case}")

    prof_in = _mapping(data, "profile")
    profile = {}
    for k, v in prof_in.items():
        allowed = {"x", "y", "t"} if k == "lambda" else {"xbar", "ybar"}
        if k not in {"Bbar", "Vbar", "psi", "Abar1", "Abar2", "lambda"}:
            raise ScenarioError(f"profile.{k}", "unknown profile function")
        profile[k] = _check_expr(v, f"profile.{k}", allowed)

    windows = _mapping(data, "windows")
    t_window = _window(windows, "t")
    x_window = _window(windows, "x", (-1.0, 1.0))
    y_window = _window(windows, "y", (-1.0, 1.0))

    tol_in = _mapping(data, "tolerances")
    tol_kw = {}
    for k, v in tol_in.items():
        if k not in Tolerances.__dataclass_fields__:
            raise ScenarioError(f"tolerances.{k}", "unknown tolerance")
        tol_kw[k] = None if (k == "residual" and v is None) else _positive(v, f"tolerances.{k}")
    tolerances = Tolerances(**tol_kw)

    grid_in = _mapping(data, "grid")
    grid_kw = {}
    for k, v in grid_in.items():
        if k not in ("nx", "ny", "nt"):
            raise ScenarioError(f"grid.{k}", "unknown grid key")
        if not isinstance(v, int) or isinstance(v, bool) or v < 2:
            raise ScenarioError(f"grid.{k}", "expected an integer >= 2")
        grid_kw[k] = v
    grid = GridConfig(**grid_kw)

    ics = data.get("initial_conditions", [])
    if not isinstance(ics, list):
        raise ScenarioError("initial_conditions", "expected a list")
    states = []
    for i, ic in enumerate(ics):
        where = f"initial_conditions[{i}]"
        if not isinstance(ic, dict):
            raise ScenarioError(where, "expected an object with x, y, vx, vy")
        extra = set(ic) - {"t", "x", "y", "vx", "vy"}
        if extra:
            raise ScenarioError(f"{where}.{sorted(extra)[0]}", "unknown key")
        vals = {}
        for k in ("x", "y", "vx", "vy"):
            if k not in ic:
                raise ScenarioError(f"{where}.{k}", "missing")
            vals[k] = _number(ic[k], f"{where}.{k}")
        vals["t"] = _number(ic.get("t", t_window[0]), f"{where}.t")
        if not t_window[0] <= vals["t"] < t_window[1]:
            raise ScenarioError(f"{where}.t", "outside the time window")
        if not (x_window[0] <= vals["x"] <= x_window[1] and y_window[0] <= vals["y"] <= y_window[1]):
            raise ScenarioError(where, "position outside the spatial window")
        states.append(State(**vals))

    seed = data.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ScenarioError("seed", "expected a non-negative integer")

    out_in = _mapping(data, "outputs")
    for k, v in out_in.items():
        if k not in Outputs.__dataclass_fields__:
            raise ScenarioError(f"outputs.{k}", "unknown output key")
        if not isinstance(v, str) or not v:
            raise ScenarioError(f"outputs.{k}", "expected a non-empty string")
    outputs = Outputs(**out_in)

    sim = _mapping(data, "simulation")
    for k in sim:
        if k not in ("t_end", "output_dt"):
            raise ScenarioError(f"simulation.{k}", "unknown key")
    t_end = _number(sim["t_end"], "simulation.t_end") if "t_end" in sim else None
    if t_end is not None and not t_window[0] < t_end <= t_window[1]:
        raise ScenarioError("simulation.t_end", "must lie inside the time window")
    output_dt = _positive(sim["output_dt"], "simulation.output_dt") if "output_dt" in sim else None

    perturbation = None
    if data.get("perturbation") is not None:
        p = _mapping(data, "perturbation")
        comp = p.get("component")
        if comp not in ("E1", "E2", "B"):
            raise ScenarioError("perturbation.component", "expected E1, E2 or B")
        expr = _check_expr(p.get("expr", "1"), "perturbation.expr", {"x", "y", "t"})
        eps = _number(p.get("epsilon", 1e-2), "perturbation.epsilon")
        perturbation = Perturbation(comp, expr, eps)

    scenario = Scenario(
        name=str(data.get("name", name)), case=case, symmetry=symmetry, profile=profile,
        t_window=t_window, x_window=x_window, y_window=y_window, tolerances=tolerances,
        grid=grid, initial_conditions=states, seed=seed, outputs=outputs, t_end=t_end,
        output_dt=output_dt, perturbation=perturbation, description=str(data.get("description", "")),
    )
    # construct once so case-level problems (bad rho, missing profile functions) surface here
    try:
        scenario.spec
        scenario.field_profile.require(case)
    except (SymmetryError, FieldError) as exc:
        where = "symmetry" if isinstance(exc, SymmetryError) else "profile"
        raise ScenarioError(where, str(exc)) from None
    return scenario


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(str(path), f"cannot read: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path.name}:{exc.lineno}:{exc.colno}", f"invalid JSON: {exc.msg}") from None
    return scenario_from_dict(data, name=path.stem)


# ---------------------------------------------------------------------------
# Random scenarios
# ---------------------------------------------------------------------------


def _fmt(v: float) -> str:
    return repr(round(float(v), 6))


def _u(rng, lo, hi) -> str:
    return _fmt(rng.uniform(lo, hi))


def _time_fn(rng, amp: float) -> str:
    """A random low-degree polynomial or trigonometric function of t."""
    kind = rng.integers(3)
    if kind == 0:
        return f"{_u(rng, -amp, amp)}*t + {_u(rng, -amp, amp)}*t^2"
    if kind == 1:
        return f"{_u(rng, -amp, amp)}*sin({_u(rng, 0.5, 2.0)}*t)"
    return f"{_u(rng, -amp, amp)} + {_u(rng, -amp, amp)}*cos(t)"


def random_scenario(case: str, seed: int, n_initial: int = 3) -> Scenario:
    """A well-posed random scenario of the given case.

    Symmetry functions are small polynomial/trig expressions with ``rho`` and
    ``a2`` bounded away from zero; the potentials are confining so that
    trajectories stay inside the spatial window over the time window.
    """
    rng = np.random.default_rng([seed, ord(case)])
    length = float(rng.uniform(1.0, 2.0))
    t_window = (0.0, round(length, 6))
    if case == "A":
        rho_kind = rng.integers(3)
        if rho_kind == 0:
            rho = f"1 + {_u(rng, 0, 0.3)}*t + {_u(rng, 0, 0.2)}*t^2"
        elif rho_kind == 1:
            rho = f"sqrt(1 + {_u(rng, 0, 0.5)}*t^2)"
        else:
            rho = f"1 + {_u(rng, 0, 0.3)}*sin(t)^2"
        symmetry = {
            "rho": rho,
            "omega": f"{_u(rng, -0.5, 0.5)} + {_u(rng, -0.3, 0.3)}*t",
            "alpha1": _time_fn(rng, 0.2),
            "alpha2": _time_fn(rng, 0.2),
        }
        # even coefficients so that the halves in Abar are exact decimals
        b0, b1, b2 = (2 * round(v / 2, 6) for v in (rng.uniform(-1, 1), rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2)))
        k, c = rng.uniform(0.5, 2.0), rng.uniform(-0.2, 0.2)
        profile = {
            "Bbar": f"{_fmt(b0)} + {_fmt(b1)}*xbar + {_fmt(b2)}*ybar",
            "Vbar": f"{_fmt(k / 2)}*(xbar^2 + ybar^2) + {_fmt(c)}*xbar*ybar",
            "Abar1": f"{_fmt(-b0 / 2)}*ybar - {_fmt(b2 / 2)}*ybar^2",
            "Abar2": f"{_fmt(b0 / 2)}*xbar + {_fmt(b1 / 2)}*xbar^2",
        }
        window = (-4.0, 4.0)
    elif case == "B":
        symmetry = {"beta1": _time_fn(rng, 0.2), "beta2": _time_fn(rng, 0.2)}
        b0, c = rng.uniform(-1.5, 1.5), rng.uniform(-0.2, 0.2)
        k, d = rng.uniform(0.5, 2.0), rng.uniform(-0.2, 0.2)
        profile = {
            "psi": f"{_fmt(-b0 / 2)}*xbar^2 + {_fmt(c)}*xbar^3*sin(ybar)",
            "Vbar": f"{_fmt(k / 2)}*xbar^2 + {_fmt(d)}*xbar^2*cos(ybar)",
        }
        window = (-4.0, 4.0)
    elif case == "C":
        symmetry = {"a1": _time_fn(rng, 0.5), "a2": f"1.5 + {_u(rng, -0.5, 0.5)}*sin({_u(rng, 0.5, 2.0)}*t)"}
        b0, c = rng.uniform(-1.5, 1.5), rng.uniform(-0.2, 0.2)
        k, d = rng.uniform(0.5, 2.0), rng.uniform(-0.2, 0.2)
        profile = {
            "psi": f"{_fmt(b0)}*xbar + {_fmt(c)}*xbar^2*ybar",
            "Vbar": f"{_fmt(k / 2)}*xbar^2 + {_fmt(d)}*xbar*ybar",
        }
        window = (-6.0, 6.0)
    else:
        raise ScenarioError("case", f"unknown case {case!r}")

    states = []
    for _ in range(n_initial):
        if case == "B":
            r = rng.uniform(0.4, 1.0)
            th = rng.uniform(0, 2 * math.pi)
            c1 = el.evaluate(el.parse(symmetry["beta1"]), {"t": 0.0})
            c2 = el.evaluate(el.parse(symmetry["beta2"]), {"t": 0.0})
            x, y = c1 + r * math.cos(th), c2 + r * math.sin(th)
            # mostly tangential velocity keeps the orbit away from the centre
            vt, vr = rng.uniform(0.3, 0.8) * rng.choice([-1, 1]), rng.uniform(-0.1, 0.1)
            vx = vr * math.cos(th) - vt * math.sin(th)
            vy = vr * math.sin(th) + vt * math.cos(th)
        else:
            x, y = rng.uniform(-0.5, 0.5, size=2)
            vx, vy = rng.uniform(-0.5, 0.5, size=2)
        states.append(State(0.0, float(x), float(y), float(vx), float(vy)))

    return Scenario(
        name=f"random_{case}_{seed}", case=case, symmetry=symmetry, profile=profile,
        t_window=t_window, x_window=window, y_window=window, initial_conditions=states, seed=seed,
    )


__all__ = [
    "Scenario", "ScenarioError", "Tolerances", "GridConfig", "Perturbation", "Outputs",
    "load_scenario", "scenario_from_dict", "random_scenario",
]
