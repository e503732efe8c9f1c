"""Grid residual checks of the identities a symmetric field must satisfy."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import exprlang as el
from .fields import FieldModel, FieldProfile, PotentialSet, build_potentials, check_vector_potential, field_scale
from .symmetry import SymmetrySpec, generator_directional_derivative

TOL_SYMBOLIC = 1e-6
TOL_FINITE_DIFF = 1e-5

NOETHER_NAMES = ("noether_magnetic", "noether_electric_x", "noether_electric_y")


@dataclass
class Grid:
    x: np.ndarray
    y: np.ndarray
    t: np.ndarray
    shape: tuple[int, int, int]
    excluded: int = 0

    @property
    def size(self) -> int:
        return int(self.x.size)

    def describe(self) -> dict:
        return {
            "nx": self.shape[0], "ny": self.shape[1], "nt": self.shape[2],
            "points": self.size, "excluded": self.excluded,
            "x": [float(self.x.min()), float(self.x.max())] if self.size else [],
            "y": [float(self.y.min()), float(self.y.max())] if self.size else [],
            "t": [float(self.t.min()), float(self.t.max())] if self.size else [],
        }

    def split(self, parts: int) -> list["Grid"]:
        """Contiguous chunks; reductions over them are order independent."""
        idx = np.array_split(np.arange(self.size), max(1, parts))
        return [Grid(self.x[i], self.y[i], self.t[i], self.shape) for i in idx if i.size]


def make_grid(field: FieldModel, nx: int = 20, ny: int = 20, nt: int = 10) -> Grid:
    """Uniform grid over the field's declared windows.

    For case B, points closer than the excluded radius (plus a margin for
    the difference stencils) to the rotation centre are dropped.
    """
    xs = np.linspace(*field.x_window, nx)
    ys = np.linspace(*field.y_window, ny)
    ts = np.linspace(*field.spec.window, nt)
    X, Y, T = (a.ravel() for a in np.meshgrid(xs, ys, ts, indexing="ij"))
    excluded = 0
    if field.case == "B":
        tf = field.spec.tf
        r = np.hypot(X - tf["beta1"](T), Y - tf["beta2"](T))
        r_min = field.r_min or 0.0
        keep = r >= max(2.0 * r_min, r_min + 1e-4)
        excluded = int((~keep).sum())
        X, Y, T = X[keep], Y[keep], T[keep]
    return Grid(X, Y, T, (nx, ny, nt), excluded)


@dataclass
class ResidualReport:
    identity: str
    grid: dict
    max_abs: float
    mean_abs: float
    argmax: tuple[float, float, float]
    scale: float
    tol: float
    passed: bool
    method: str = ""
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_values(cls, identity, residual, x, y, t, scale, tol, grid_desc, method="", **extra):
        residual = np.abs(np.asarray(residual, dtype=float))
        if residual.size == 0:
            raise ValueError(f"{identity}: empty residual set")
        if not np.all(np.isfinite(residual)):
            k = int(np.argmax(~np.isfinite(residual)))
            max_abs = float("inf")
            mean_abs = float("inf")
        else:
            k = int(np.argmax(residual))
            max_abs = float(residual[k])
            mean_abs = float(np.mean(residual))
        loc = (float(np.asarray(x).ravel()[k]), float(np.asarray(y).ravel()[k]), float(np.asarray(t).ravel()[k]))
        return cls(
            identity=identity, grid=grid_desc, max_abs=max_abs, mean_abs=mean_abs,
            argmax=loc, scale=float(scale), tol=float(tol),
            passed=bool(max_abs <= tol * scale), method=method, extra=dict(extra),
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["argmax"] = {"x": self.argmax[0], "y": self.argmax[1], "t": self.argmax[2]}
        return d

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (
            f"{status} {self.identity:<24} max={self.max_abs:.3e} mean={self.mean_abs:.3e} "
            f"tol*scale={self.tol * self.scale:.3e} at (x,y,t)=({self.argmax[0]:.4g}, "
            f"{self.argmax[1]:.4g}, {self.argmax[2]:.4g})"
        )


def default_tol(field: FieldModel) -> float:
    return TOL_FINITE_DIFF if field.time_derivative_method == "finite-difference" else TOL_SYMBOLIC


def _map_chunks(fn, grid: Grid, threads: int):
    chunks = grid.split(threads) if threads > 1 else [grid]
    if len(chunks) == 1:
        return [fn(chunks[0])]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, chunks))


def _stack(parts):
    return tuple(np.concatenate(p) for p in zip(*parts))


def noether_residuals(
    field: FieldModel,
    spec: SymmetrySpec | None = None,
    grid: Grid | None = None,
    tol: float | None = None,
    threads: int = 1,
) -> list[ResidualReport]:
    """Residuals of the three symmetry conditions on ``E1, E2, B``.

    ``G`` is applied by central differences; all time derivatives of the
    symmetry functions (up to third order of ``rho``) are symbolic.
    """
    spec = spec or field.spec
    grid = grid or make_grid(field)
    tol = default_tol(field) if tol is None else tol
    tf = spec.tf

    def fields_stacked(x, y, t):
        return np.stack(field.evaluate(x, y, t))

    def chunk(g: Grid):
        x, y, t = g.x, g.y, g.t
        E1, E2, B = field.evaluate(x, y, t)
        GE1, GE2, GB = generator_directional_derivative(spec, fields_stacked, x, y, t)
        rho, rd = tf["rho"](t), tf["rho"].deriv(1)(t)
        rdd, rddd = tf["rho"].deriv(2)(t), tf["rho"].deriv(3)(t)
        om = tf["omega"]
        o, od, odd = om(t), om.deriv(1)(t), om.deriv(2)(t)
        a1d, a1dd = tf["a1"].deriv(1)(t), tf["a1"].deriv(2)(t)
        a2d, a2dd = tf["a2"].deriv(1)(t), tf["a2"].deriv(2)(t)
        rr = rho * rd
        c = rho * rdd + rd * rd
        cubic = rho * rddd + 3 * rd * rdd
        r27 = GB + 2 * rr * B + 2 * od
        r28 = GE1 - (-3 * rr * E1 - o * E2 - (c * y + od * x + a2d) * B + cubic * x - odd * y + a1dd)
        r29 = GE2 - (-3 * rr * E2 + o * E1 + (c * x - od * y + a1d) * B + cubic * y + odd * x + a2dd)
        return r27, r28, r29, E1, E2, B

    r27, r28, r29, E1, E2, B = _stack(_map_chunks(lambda g: chunk(g), grid, threads))
    scale = field_scale((E1, E2, B))
    desc = grid.describe()
    method = f"G by central differences; field t-derivatives {field.time_derivative_method}"
    return [
        ResidualReport.from_values(name, r, grid.x, grid.y, grid.t, scale, tol, desc, method)
        for name, r in zip(NOETHER_NAMES, (r27, r28, r29))
    ]


def faraday_residual(
    field: FieldModel, grid: Grid | None = None, tol: float | None = None, threads: int = 1
) -> ResidualReport:
    """``E2_x - E1_y + B_t`` over the grid."""
    grid = grid or make_grid(field)
    tol = default_tol(field) if tol is None else tol

    def chunk(g: Grid):
        p = field.partials(g.x, g.y, g.t)
        E1, E2, B = field.evaluate(g.x, g.y, g.t)
        return p["E2_x"] - p["E1_y"] + p["B_t"], E1, E2, B

    r, E1, E2, B = _stack(_map_chunks(chunk, grid, threads))
    return ResidualReport.from_values(
        "faraday", r, grid.x, grid.y, grid.t, field_scale((E1, E2, B)), tol, grid.describe(),
        f"spatial partials symbolic; t-derivative {field.time_derivative_method}",
    )


def vector_potential_residual(field: FieldModel, grid: Grid | None = None, tol: float = TOL_SYMBOLIC) -> ResidualReport:
    """Curl of ``Abar`` against ``Bbar`` at the canonical images of the grid (case A)."""
    grid = grid or make_grid(field)
    profile = field.profile
    from .symmetry import to_canonical

    c = to_canonical(field.spec, grid.x, grid.y, grid.t)
    resid = el.simplify(
        el.differentiate(profile.Abar2, "xbar") - el.differentiate(profile.Abar1, "ybar") - profile.Bbar
    )
    r = np.broadcast_to(el.lambdify(resid, ["xbar", "ybar"])(c.xbar, c.ybar), grid.x.shape)
    Bb = np.broadcast_to(el.lambdify(profile.Bbar, ["xbar", "ybar"])(c.xbar, c.ybar), grid.x.shape)
    return ResidualReport.from_values(
        "vector_potential_curl", r, grid.x, grid.y, grid.t, field_scale((Bb,)), tol, grid.describe(),
        "symbolic",
    )


def potential_field_residuals(
    potentials: PotentialSet, field: FieldModel, grid: Grid | None = None, tol: float = TOL_FINITE_DIFF
) -> list[ResidualReport]:
    """Fields re-derived from ``A, V`` by central differences against the field model."""
    grid = grid or make_grid(field)
    dE1, dE2, dB = potentials.derived_fields(grid.x, grid.y, grid.t)
    E1, E2, B = field.evaluate(grid.x, grid.y, grid.t)
    scale = field_scale((E1, E2, B))
    desc = grid.describe()
    return [
        ResidualReport.from_values(name, a - b, grid.x, grid.y, grid.t, scale, tol, desc, "central differences")
        for name, a, b in (("potential_E1", dE1, E1), ("potential_E2", dE2, E2), ("potential_B", dB, B))
    ]


def random_gauge(rng: np.random.Generator) -> el.Expr:
    """A smooth random gauge function of x, y, t."""
    c = [float(v) for v in rng.uniform(-1.0, 1.0, size=6)]
    text = (
        f"{c[0]!r}*x^2*y + {c[1]!r}*sin(t) + {c[2]!r}*x*y*t + {c[3]!r}*cos(x - t) "
        f"+ {c[4]!r}*y^3 + {c[5]!r}*exp(0.1*x)*t^2"
    )
    return el.parse(text)


def gauge_independence_check(
    spec: SymmetrySpec,
    profile: FieldProfile,
    trajectory,
    gauges=None,
    seed: int = 0,
    tol: float = 1e-8,
    r_min: float = 1e-6,
) -> ResidualReport:
    """Noether invariant via potentials and ``F`` under several gauges vs the direct formula.

    ``gauges`` defaults to two random smooth gauge functions drawn from
    ``seed``.  The report's residual at each trajectory sample is the largest
    pairwise difference among all evaluations.
    """
    from .dynamics import invariant_evaluator

    if gauges is None:
        rng = np.random.default_rng(seed)
        gauges = [random_gauge(rng), random_gauge(rng)]
    gauges = [el.parse(g) if isinstance(g, str) else el.as_expr(g) for g in gauges]
    x, y, vx, vy, t = (np.asarray(getattr(trajectory, k)) for k in ("x", "y", "vx", "vy", "t"))
    direct = invariant_evaluator(spec, profile)(x, y, vx, vy, t)
    values = [direct]
    for lam in gauges:
        pots = build_potentials(spec, profile.with_gauge(lam), r_min=r_min)
        values.append(pots.invariant(x, y, vx, vy, t))
    values = np.stack(values)
    spread = values.max(axis=0) - values.min(axis=0)
    scale = 1.0 + float(np.max(np.abs(direct)))
    return ResidualReport.from_values(
        "gauge_independence", spread, x, y, t, scale, tol,
        {"trajectory_samples": int(x.size), "gauges": [el.to_text(g) for g in gauges]},
        "direct invariant vs potentials+F",
    )


def verify_all(
    field: FieldModel,
    grid: Grid | None = None,
    threads: int = 1,
    potentials: PotentialSet | None = None,
) -> list[ResidualReport]:
    """Every grid identity that applies to ``field``."""
    grid = grid or make_grid(field)
    reports = noether_residuals(field, grid=grid, threads=threads)
    reports.append(faraday_residual(field, grid=grid, threads=threads))
    if field.case == "A" and field.profile.Abar1 is not None:
        reports.append(vector_potential_residual(field, grid))
    if potentials is not None:
        reports.extend(potential_field_residuals(potentials, field, grid))
    return reports


__all__ = [
    "Grid", "ResidualReport", "make_grid", "noether_residuals", "faraday_residual",
    "vector_potential_residual", "potential_field_residuals", "gauge_independence_check",
    "verify_all", "random_gauge", "check_vector_potential",
]
