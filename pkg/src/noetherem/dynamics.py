"""Charged-particle motion, Noether invariants and canonical-coordinate cross-checks."""

from __future__ import annotations

import csv
import math
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import exprlang as el
from .fields import FRAME_VARS, XB, YB, FieldModel, FieldProfile, Ingredients
from .symmetry import SymmetryError, SymmetrySpec, generator_components, to_canonical, from_canonical

# ---------------------------------------------------------------------------
# Dormand-Prince 5(4) with the standard 4th-order continuous extension
# ---------------------------------------------------------------------------

_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array(_A[6] + [0.0])
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])
_D = np.array([
    -12715105075 / 11282082432, 0.0, 87487479700 / 32700410799, -10690763975 / 1880347072,
    701980252875 / 199316789632, -1453857185 / 822651844, 69997945 / 29380423,
])


class IntegrationError(RuntimeError):
    """The integrator could not continue; ``t`` and ``state`` locate the failure."""

    def __init__(self, message: str, t: float | None = None, state=None):
        super().__init__(message)
        self.t = t
        self.state = None if state is None else np.array(state, dtype=float)


class StepSizeUnderflow(IntegrationError):
    pass


class WindowExitError(IntegrationError):
    pass


@dataclass
class SolverStats:
    steps: int = 0
    rejected: int = 0
    nfev: int = 0
    tol: float = 0.0
    h_min: float = math.inf
    h_max: float = 0.0
    fixed_step: float | None = None

    def to_dict(self) -> dict:
        return {
            "steps": self.steps, "rejected": self.rejected, "nfev": self.nfev, "tol": self.tol,
            "h_min": float(self.h_min), "h_max": float(self.h_max), "fixed_step": self.fixed_step,
        }


def _stages(fun, t, y, h, k1):
    k = [k1]
    for i in range(1, 6):
        yi = y + h * sum(a * kj for a, kj in zip(_A[i], k) if a)
        k.append(fun(t + _C[i] * h, yi))
    return k


def _initial_step(fun, t0, y0, f0, direction, tol, order=5):
    scale = tol + tol * np.abs(y0)
    d0 = np.sqrt(np.mean((y0 / scale) ** 2))
    d1 = np.sqrt(np.mean((f0 / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    y1 = y0 + direction * h0 * f0
    f1 = fun(t0 + direction * h0, y1)
    d2 = np.sqrt(np.mean(((f1 - f0) / scale) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1.0 / order)
    return min(100 * h0, h1)


def _located_check(check, dense, t0, t1, y1, iters=60):
    """Run ``check`` at the step end; on failure bisect the dense output for the first failing time."""
    try:
        check(t1, y1)
        return
    except IntegrationError as exc:
        err = exc
    lo, hi = t0, t1
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        try:
            check(mid, dense(mid))
            lo = mid
        except IntegrationError as exc:
            hi, err = mid, exc
    raise err


def dopri5(
    fun: Callable[[float, np.ndarray], np.ndarray],
    t0: float,
    y0,
    t_end: float,
    tol: float = 1e-10,
    t_eval: Sequence[float] | None = None,
    fixed_step: float | None = None,
    max_steps: int = 1_000_000,
    check: Callable[[float, np.ndarray], None] | None = None,
):
    """Integrate ``y' = fun(t, y)`` from ``t0`` to ``t_end`` (``t_end > t0``).

    Adaptive mode controls the mixed error ``|err_i| <= tol * (1 + |y_i|)``
    per step.  With ``fixed_step`` the step is constant (last step clipped)
    and no error control is applied.  Returns ``(t_eval, Y, stats)`` with
    ``Y[k]`` the dense-output state at ``t_eval[k]``.  ``check(t, y)`` is
    called on every accepted step and may raise to abort.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    t0, t_end = float(t0), float(t_end)
    if not t_end > t0:
        raise ValueError("t_end must exceed t0")
    y = np.array(y0, dtype=float)
    if t_eval is None:
        t_eval = np.array([t0, t_end])
    t_eval = np.asarray(t_eval, dtype=float)
    if np.any(np.diff(t_eval) <= 0) or t_eval[0] < t0 or t_eval[-1] > t_end:
        raise ValueError("t_eval must be strictly increasing inside [t0, t_end]")
    out = np.empty((t_eval.size, y.size))
    stats = SolverStats(tol=float(tol), fixed_step=fixed_step)

    def f(t, yy):
        stats.nfev += 1
        r = fun(t, yy)
        if not np.all(np.isfinite(r)):
            raise IntegrationError(f"non-finite right-hand side at t={t!r}", t, yy)
        return r

    j = 0
    while j < t_eval.size and t_eval[j] == t0:
        out[j] = y
        j += 1
    t = t0
    k1 = f(t, y)
    if fixed_step is not None:
        if not fixed_step > 0:
            raise ValueError("fixed_step must be positive")
        h = float(fixed_step)
    else:
        h = _initial_step(f, t, y, k1, 1.0, tol)
    eps = np.finfo(float).eps
    while t < t_end:
        if stats.steps + stats.rejected >= max_steps:
            raise IntegrationError(f"maximum number of steps {max_steps} reached", t, y)
        h_min = 16 * eps * max(1.0, abs(t))
        if h < h_min:
            raise StepSizeUnderflow(f"step size underflow (h={h:.3g}) at t={t!r}", t, y)
        last = t + h >= t_end or t_end - (t + h) < h_min
        step = t_end - t if last else h
        k = _stages(f, t, y, step, k1)
        y_new = y + step * (_B[0] * k[0] + _B[2] * k[2] + _B[3] * k[3] + _B[4] * k[4] + _B[5] * k[5])
        k.append(f(t + step, y_new))  # first stage of the next step
        if fixed_step is None:
            err_vec = step * sum(e * kk for e, kk in zip(_E, k) if e)
            scale = tol + tol * np.maximum(np.abs(y), np.abs(y_new))
            err = float(np.sqrt(np.mean((err_vec / scale) ** 2)))
            if not np.isfinite(err):
                err = np.inf
            if err > 1.0:
                stats.rejected += 1
                h = step * max(0.2, 0.9 * err ** -0.2)
                continue
            fac = 5.0 if err == 0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
        else:
            fac = 1.0
        t_new = t_end if last else t + step
        r2 = y_new - y
        r3 = step * k[0] - r2
        r4 = r2 - step * k[6] - r3
        r5 = step * sum(d * kk for d, kk in zip(_D, k) if d)

        def dense(tt):
            th = (tt - t) / step
            th1 = 1.0 - th
            return y + th * (r2 + th1 * (r3 + th * (r4 + th1 * r5)))

        if check is not None:
            _located_check(check, dense, t, t_new, y_new)
        while j < t_eval.size and t_eval[j] <= t_new:
            out[j] = y_new if t_eval[j] == t_new else dense(t_eval[j])
            j += 1
        stats.steps += 1
        stats.h_min = min(stats.h_min, step)
        stats.h_max = max(stats.h_max, step)
        t, y, k1 = t_new, y_new, k[6]
        if fixed_step is None:
            h = step * fac
    return t_eval, out, stats


# ---------------------------------------------------------------------------
# States and trajectories
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class State:
    t: float
    x: float
    y: float
    vx: float
    vy: float

    def __post_init__(self):
        for name in ("t", "x", "y", "vx", "vy"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ValueError(f"state component {name} is not finite")
            object.__setattr__(self, name, v)

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.x, self.y, self.vx, self.vy])


@dataclass(frozen=True)
class CanonicalState:
    """Barred state with ``tbar`` as independent variable and ``q' = dq/dtbar``."""

    tbar: float
    xbar: float
    ybar: float
    vxbar: float
    vybar: float


@dataclass
class Trajectory:
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    vx: np.ndarray
    vy: np.ndarray
    I: np.ndarray
    stats: SolverStats = field(default_factory=SolverStats)
    label: str = ""
    canonical: bool = False

    def __len__(self) -> int:
        return int(self.t.size)

    def state(self, k: int) -> State:
        return State(self.t[k], self.x[k], self.y[k], self.vx[k], self.vy[k])

    @property
    def drift(self) -> np.ndarray:
        """``|I - I(0)| / (1 + |I(0)|)`` per sample."""
        return np.abs(self.I - self.I[0]) / (1.0 + abs(self.I[0]))

    @property
    def max_drift(self) -> float:
        return float(np.max(self.drift))

    def to_csv(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "x", "y", "vx", "vy", "I"])
            for row in zip(self.t, self.x, self.y, self.vx, self.vy, self.I):
                w.writerow(["%.17g" % v for v in row])
        return path

    @classmethod
    def from_csv(cls, path) -> "Trajectory":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(*(data[:, i].copy() for i in range(6)))


def output_times(t0: float, t_end: float, output_dt: float) -> np.ndarray:
    """``t0, t0 + dt, ...`` up to ``t_end``, which is always the last sample."""
    if not output_dt > 0:
        raise ValueError("output_dt must be positive")
    n = int(math.floor((t_end - t0) / output_dt * (1 + 1e-12)))
    ts = t0 + output_dt * np.arange(n + 1)
    ts = ts[ts < t_end - 1e-12 * max(1.0, abs(t_end))]
    return np.append(ts, t_end)


# ---------------------------------------------------------------------------
# Equations of motion
# ---------------------------------------------------------------------------


def lorentz_rhs(field_model: FieldModel, s: State) -> tuple[float, float, float, float]:
    """``(vx, vy, ax, ay)`` with ``a = E + v x B`` for unit charge and mass."""
    E1, E2, B = field_model.scalar(s.x, s.y, s.t)
    return s.vx, s.vy, E1 + s.vy * B, E2 - s.vx * B


def _window_check(field_model: FieldModel):
    (x0, x1), (y0, y1) = field_model.x_window, field_model.y_window

    def check(t, y):
        if not (x0 <= y[0] <= x1 and y0 <= y[1] <= y1):
            raise WindowExitError(
                f"trajectory left the spatial window at t={t!r}, (x, y)=({y[0]!r}, {y[1]!r})", t, y
            )

    return check


def integrate(
    field_model: FieldModel,
    initial: State,
    t_end: float,
    tol: float = 1e-10,
    output_dt: float | None = None,
    fixed_step: float | None = None,
    enforce_window: bool = True,
    invariant: bool = True,
) -> Trajectory:
    """Lorentz motion from ``initial`` to ``t_end``, sampled every ``output_dt``.

    ``I`` holds the Noether invariant of the field's symmetry at every
    sample (NaN when ``invariant`` is false).
    """
    spec = field_model.spec
    spec.check_time([initial.t, t_end])
    if not t_end > initial.t:
        raise ValueError("t_end must be later than the initial time")
    if output_dt is None:
        output_dt = (t_end - initial.t) / 100
    ts = output_times(initial.t, t_end, output_dt)
    scalar = field_model.scalar

    def rhs(t, u):
        E1, E2, B = scalar(u[0], u[1], t)
        return np.array([u[2], u[3], E1 + u[3] * B, E2 - u[2] * B])

    check = _window_check(field_model) if enforce_window else None
    if check is not None:
        check(initial.t, initial.vector)
    ts, Y, stats = dopri5(rhs, initial.t, initial.vector, t_end, tol, ts, fixed_step, check=check)
    x, y, vx, vy = Y.T.copy()
    if invariant:
        I = invariant_evaluator(spec, field_model.profile)(x, y, vx, vy, ts)
    else:
        I = np.full(ts.shape, np.nan)
    return Trajectory(ts, x, y, vx, vy, np.asarray(I, dtype=float), stats, field_model.label)


def integrate_many(field_model: FieldModel, initials: Sequence[State], t_end: float, threads: int = 1, **kw):
    """Independent trajectories, optionally in a thread pool; order follows ``initials``."""
    if threads <= 1:
        return [integrate(field_model, s, t_end, **kw) for s in initials]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda s: integrate(field_model, s, t_end, **kw), initials))


# ---------------------------------------------------------------------------
# Noether invariants
# ---------------------------------------------------------------------------

VX, VY = el.Var("vx"), el.Var("vy")
X, Y, T_ = el.Var("x"), el.Var("y"), el.Var("t")
INV_ARGS = ("x", "y", "vx", "vy", "t")


def invariant_expr(spec: SymmetrySpec, profile: FieldProfile) -> el.Expr:
    """The Noether invariant as an expression in ``x, y, vx, vy, t`` (and frame values in case A)."""
    profile.require(spec.case)
    ing = Ingredients(spec)
    f = ing.f
    if spec.case == "A":
        rho, rd, om = f("rho"), f("rho", 1), f("omega")
        u1 = rho * (VX - f("alpha1", 1)) - rd * (X - f("alpha1")) + om * Y / rho
        u2 = rho * (VY - f("alpha2", 1)) - rd * (Y - f("alpha2")) - om * X / rho
        expr = (u1 * u1 + u2 * u2) / 2 + ing.bar(profile.Vbar)
    elif spec.case == "B":
        b1, b2 = f("beta1"), f("beta2")
        expr = (Y - b2) * (VX - f("beta1", 1)) - (X - b1) * (VY - f("beta2", 1)) + ing.bar(profile.psi)
    else:
        a1, a2 = f("a1"), f("a2")
        if spec.swapped:
            a1, a2 = a2, a1
        a1d, a2d = el.differentiate(a1, "t"), el.differentiate(a2, "t")
        expr = el.Neg(a1 * VX + a2 * VY - a1d * X - a2d * Y + a2 * ing.bar(profile.psi))
        if spec.swapped:
            expr = el.substitute(expr, {"x": Y, "y": X, "vx": VY, "vy": VX})
    return el.simplify(expr)


class InvariantEvaluator:
    """Compiled Noether invariant, vectorised over samples."""

    def __init__(self, spec: SymmetrySpec, profile: FieldProfile):
        self.spec = spec
        self.profile = profile
        self.expr = invariant_expr(spec, profile)
        self.args = INV_ARGS + (FRAME_VARS if spec.case == "A" else ())
        self._np = el.compile_exprs([self.expr], self.args, "numpy")
        self._math = el.compile_exprs([self.expr], self.args, "math")

    def _frame(self, t):
        if self.spec.case != "A":
            return ()
        if self.spec.rotation_free:
            z = 0.0 if np.ndim(t) == 0 else np.zeros(np.shape(t))
            return (z, z, z)
        return self.spec.frame.values(t)[1:]

    def _check(self, x, y, t):
        self.spec.check_time(t)
        if self.spec.case == "B":
            tf = self.spec.tf
            if np.any(np.hypot(x - tf["beta1"](t), y - tf["beta2"](t)) == 0.0):
                raise SymmetryError("case B invariant undefined at the rotation centre")

    def __call__(self, x, y, vx, vy, t):
        arrs = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x, y, vx, vy, t)))
        self._check(arrs[0], arrs[1], arrs[4])
        (val,) = self._np(*arrs, *self._frame(arrs[4]))
        return np.broadcast_to(val, arrs[0].shape).astype(float)

    def scalar(self, s: State) -> float:
        self._check(s.x, s.y, s.t)
        (val,) = self._math(s.x, s.y, s.vx, s.vy, s.t, *self._frame(s.t))
        return float(val)


_EVALUATORS: dict[tuple[int, FieldProfile], tuple[SymmetrySpec, InvariantEvaluator]] = {}
_EVAL_LOCK = threading.Lock()


def invariant_evaluator(spec: SymmetrySpec, profile: FieldProfile) -> InvariantEvaluator:
    key = (id(spec), profile)
    with _EVAL_LOCK:
        hit = _EVALUATORS.get(key)
        if hit is not None and hit[0] is spec:
            return hit[1]
    ev = InvariantEvaluator(spec, profile)
    with _EVAL_LOCK:
        if len(_EVALUATORS) > 256:
            _EVALUATORS.clear()
        _EVALUATORS[key] = (spec, ev)
    return ev


def _invariant_for(case: str, spec: SymmetrySpec, profile: FieldProfile, s: State) -> float:
    if spec.case != case:
        raise SymmetryError(f"invariant_{case} needs a case {case} symmetry, got case {spec.case}")
    return invariant_evaluator(spec, profile).scalar(s)


def invariant_A(spec: SymmetrySpec, profile: FieldProfile, s: State) -> float:
    return _invariant_for("A", spec, profile, s)


def invariant_B(spec: SymmetrySpec, profile: FieldProfile, s: State) -> float:
    return _invariant_for("B", spec, profile, s)


def invariant_C(spec: SymmetrySpec, profile: FieldProfile, s: State) -> float:
    return _invariant_for("C", spec, profile, s)


def invariant(spec: SymmetrySpec, profile: FieldProfile, s: State) -> float:
    return invariant_evaluator(spec, profile).scalar(s)


# ---------------------------------------------------------------------------
# Cyclic momenta (cases B and C)
# ---------------------------------------------------------------------------


def canonical_rates(spec: SymmetrySpec, s: State) -> tuple[float, float, float, float, float, float]:
    """``(xbar, ybar, tbar)`` and their time derivatives along the motion through ``s``.

    The first derivative depends only on the velocity, so a straight-line
    path is differentiated with a five-point central stencil.
    """
    lo, hi = spec.padded_window
    h = min(2e-4, 0.2 * min(s.t - lo, hi - s.t))
    if not h > 0:
        raise SymmetryError("state lies on the edge of the padded time window")
    offsets = np.array([-2.0, -1.0, 0.0, 1.0, 2.0]) * h
    c = to_canonical(spec, s.x + s.vx * offsets, s.y + s.vy * offsets, s.t + offsets)
    xb, yb, tb = (np.asarray(v, dtype=float) for v in c.as_tuple())
    if spec.case == "B":
        tb = np.unwrap(tb)
    w = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / (12 * h)
    return float(xb[2]), float(yb[2]), float(tb[2]), float(w @ xb), float(w @ yb), float(w @ tb)


def cyclic_momentum(spec: SymmetrySpec, profile: FieldProfile, s: State) -> float:
    """Momentum conjugate to the cyclic coordinate ``tbar`` (cases B and C)."""
    xb, yb, tb, dxb, _, dtb = canonical_rates(spec, s)
    psi = el.evaluate(profile.psi, {XB: xb, YB: yb})
    if spec.case == "B":
        return xb * xb * dtb - psi
    if spec.case == "C":
        tf = spec.tf
        a1, a2 = tf["a1"], tf["a2"]
        if spec.swapped:
            a1, a2 = a2, a1
        A1, A2, A1d = a1(s.t), a2(s.t), a1.deriv(1)(s.t)
        return (A1 * A1 + A2 * A2) * dtb + A1 * dxb - A1d * xb + A2 * psi
    raise SymmetryError("cyclic momentum is defined for cases B and C")


# ---------------------------------------------------------------------------
# Case A: canonical frame dynamics
# ---------------------------------------------------------------------------


def _rot_inverse(T, w1, w2):
    c, s = math.cos(T), math.sin(T)
    return c * w1 + s * w2, -s * w1 + c * w2


def state_to_canonical(spec: SymmetrySpec, s: State) -> CanonicalState:
    """Map a physical state to barred coordinates with ``q' = dq/dtbar``."""
    if spec.case != "A":
        raise SymmetryError("canonical time-rescaled states exist for case A only")
    c = to_canonical(spec, s.x, s.y, s.t)
    T = spec.frame.values(s.t)[1] if not spec.rotation_free else 0.0
    tau, e1, e2 = generator_components(spec, s.x, s.y, s.t)
    rho = spec.tf["rho"](s.t)
    w1, w2 = s.vx - e1 / tau, s.vy - e2 / tau
    u1, u2 = _rot_inverse(T, w1, w2)
    return CanonicalState(c.tbar, c.xbar, c.ybar, rho * u1, rho * u2)


def canonical_to_state(spec: SymmetrySpec, cs: CanonicalState) -> State:
    if spec.case != "A":
        raise SymmetryError("canonical time-rescaled states exist for case A only")
    from .symmetry import CanonicalCoords

    t = spec.frame.time_of(cs.tbar)
    x, y = from_canonical(spec, CanonicalCoords(cs.xbar, cs.ybar, cs.tbar), t)
    T = spec.frame.values(t)[1] if not spec.rotation_free else 0.0
    tau, e1, e2 = generator_components(spec, x, y, t)
    rho = spec.tf["rho"](t)
    c, s = math.cos(T), math.sin(T)
    r1 = (c * cs.vxbar - s * cs.vybar) / rho
    r2 = (s * cs.vxbar + c * cs.vybar) / rho
    return State(t, x, y, e1 / tau + r1, e2 / tau + r2)


class CanonicalSystemA:
    """Autonomous barred equations ``q'' = -grad Vbar + q' x Bbar`` and their energy."""

    def __init__(self, profile: FieldProfile):
        profile.require("A")
        self.profile = profile
        exprs = [
            profile.Bbar,
            el.differentiate(profile.Vbar, XB),
            el.differentiate(profile.Vbar, YB),
        ]
        self._rhs = el.compile_exprs([el.simplify(e) for e in exprs], [XB, YB], "math")
        self._energy = el.compile_exprs(
            [el.simplify((el.Var("u") ** 2 + el.Var("v") ** 2) / 2 + profile.Vbar)],
            [XB, YB, "u", "v"], "numpy",
        )

    def rhs(self, _tbar, z):
        Bb, Vx, Vy = self._rhs(z[0], z[1])
        return np.array([z[2], z[3], -Vx + z[3] * Bb, -Vy - z[2] * Bb])

    def energy(self, xb, yb, u, v):
        (val,) = self._energy(*np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (xb, yb, u, v))))
        return np.broadcast_to(val, np.shape(xb)).astype(float)


def canonical_energy(spec: SymmetrySpec, profile: FieldProfile, s: State) -> float:
    """``|q'|^2 / 2 + Vbar`` from the physical state via the velocity map."""
    cs = state_to_canonical(spec, s)
    return float(CanonicalSystemA(profile).energy(cs.xbar, cs.ybar, cs.vxbar, cs.vybar))


def canonical_dynamics_A(
    spec: SymmetrySpec,
    profile: FieldProfile,
    initial: CanonicalState,
    tbar_end: float,
    tol: float = 1e-10,
    tbar_eval: Sequence[float] | None = None,
    output_dt: float | None = None,
) -> Trajectory:
    """Integrate the barred equations in ``tbar``; fields of the result are barred."""
    if spec.case != "A":
        raise SymmetryError("canonical dynamics are defined for case A")
    system = CanonicalSystemA(profile)
    if tbar_eval is None:
        dt = output_dt if output_dt is not None else (tbar_end - initial.tbar) / 100
        tbar_eval = output_times(initial.tbar, tbar_end, dt)
    z0 = [initial.xbar, initial.ybar, initial.vxbar, initial.vybar]
    ts, Z, stats = dopri5(system.rhs, initial.tbar, z0, tbar_end, tol, tbar_eval)
    xb, yb, u, v = Z.T.copy()
    return Trajectory(ts, xb, yb, u, v, system.energy(xb, yb, u, v), stats, "canonical", canonical=True)


__all__ = [
    "State", "CanonicalState", "Trajectory", "SolverStats", "IntegrationError", "StepSizeUnderflow",
    "WindowExitError", "dopri5", "lorentz_rhs", "integrate", "integrate_many", "output_times",
    "invariant_expr", "invariant_evaluator", "InvariantEvaluator", "invariant", "invariant_A",
    "invariant_B", "invariant_C", "canonical_rates", "cyclic_momentum", "state_to_canonical",
    "canonical_to_state", "canonical_energy", "canonical_dynamics_A", "CanonicalSystemA",
]
