"""Noether point-symmetry data, generator components and canonical group coordinates.

The generator is ``G = tau d/dt + eta1 d/dx + eta2 d/dy`` with

    tau  = rho^2
    eta1 = rho rho' x - Omega y + a1
    eta2 = rho rho' y + Omega x + a2

and three families of canonical coordinates (``G xbar = G ybar = 0``,
``G tbar = 1``) depending on whether ``rho`` vanishes and, if so, whether
``Omega`` does.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Mapping

import numpy as np
from numpy.polynomial import chebyshev as C

from . import exprlang as el
from .quadrature import DEFAULT_TOL, CumulativeIntegral, QuadratureError

CASES = ("A", "B", "C")
REQUIRED = {
    "A": ("rho", "omega", "alpha1", "alpha2"),
    "B": ("beta1", "beta2"),
    "C": ("a1", "a2"),
}
FD_STEP = np.cbrt(np.finfo(float).eps)


class SymmetryError(ValueError):
    pass


class WindowError(SymmetryError):
    pass


def as_time_expr(value, name: str = "function") -> el.Expr:
    expr = el.parse(value) if isinstance(value, str) else el.as_expr(value)
    extra = el.free_variables(expr) - {"t"}
    if extra:
        raise SymmetryError(f"{name} may only depend on t, found {sorted(extra)}")
    return expr


class TimeFunction:
    """A function of ``t`` given as an Expr, with cached symbolic derivatives."""

    def __init__(self, expr: el.Expr):
        self.expr = el.simplify(expr)
        self._derivs: dict[int, TimeFunction] = {0: self}
        self._np = el.lambdify(self.expr, ["t"], "numpy")
        self._math = el.lambdify(self.expr, ["t"], "math")

    @property
    def is_zero(self) -> bool:
        return isinstance(self.expr, el.Num) and self.expr.value == 0.0

    def deriv(self, order: int = 1) -> "TimeFunction":
        if order not in self._derivs:
            prev = self.deriv(order - 1)
            self._derivs[order] = TimeFunction(el.differentiate(prev.expr, "t"))
        return self._derivs[order]

    def __call__(self, t):
        if np.ndim(t) == 0:
            return self._math(float(t))
        out = self._np(np.asarray(t, dtype=float))
        return np.broadcast_to(out, np.shape(t)).astype(float)


def alpha_to_a(rho: el.Expr, alpha: el.Expr) -> el.Expr:
    """Translation amplitude ``a = rho (rho alpha' - rho' alpha)`` for Case A inputs."""
    return el.simplify(rho * (rho * el.differentiate(alpha, "t") - el.differentiate(rho, "t") * alpha))


@dataclass(frozen=True)
class CanonicalCoords:
    xbar: float
    ybar: float
    tbar: float

    def as_tuple(self):
        return (self.xbar, self.ybar, self.tbar)


@dataclass(frozen=True, eq=False)
class SymmetrySpec:
    """Case tag plus the arbitrary time functions defining the symmetry.

    Case A: ``rho, omega, alpha1, alpha2``; Case B: ``beta1, beta2`` (rotation
    rate fixed to 1); Case C: ``a1, a2``.  Values may be expression text or
    :class:`~noetherem.exprlang.Expr` in the single variable ``t``.
    """

    case: str
    functions: Mapping[str, el.Expr]
    window: tuple[float, float]
    t_ref: float = 0.0
    rho_min: float = 1e-6
    a_min: float = 1e-6
    quad_tol: float = DEFAULT_TOL
    window_pad: float = field(default=1e-3)

    def __post_init__(self):
        if self.case not in CASES:
            raise SymmetryError(f"unknown case {self.case!r}; expected one of {CASES}")
        t0, t1 = (float(v) for v in self.window)
        if not t1 > t0:
            raise SymmetryError(f"degenerate time window {self.window!r}")
        object.__setattr__(self, "window", (t0, t1))
        funcs = {}
        for name in REQUIRED[self.case]:
            if name not in self.functions:
                raise SymmetryError(f"case {self.case} requires function {name!r}")
            funcs[name] = as_time_expr(self.functions[name], name)
        unknown = set(self.functions) - set(REQUIRED[self.case])
        if unknown:
            raise SymmetryError(f"case {self.case} does not use {sorted(unknown)}")
        object.__setattr__(self, "functions", funcs)
        self._validate_bounds()

    # -- construction helpers -------------------------------------------------

    @classmethod
    def case_a(cls, rho="1", omega="0", alpha1="0", alpha2="0", window=(0.0, 1.0), **kw):
        return cls("A", dict(rho=rho, omega=omega, alpha1=alpha1, alpha2=alpha2), window, **kw)

    @classmethod
    def case_b(cls, beta1="0", beta2="0", window=(0.0, 1.0), **kw):
        return cls("B", dict(beta1=beta1, beta2=beta2), window, **kw)

    @classmethod
    def case_c(cls, a1="0", a2="1", window=(0.0, 1.0), **kw):
        return cls("C", dict(a1=a1, a2=a2), window, **kw)

    # -- time functions ---------------------------------------------------------

    @cached_property
    def tf(self) -> dict[str, TimeFunction]:
        """Named time functions, including the generic ``rho omega a1 a2``."""
        f = dict(self.functions)
        if self.case == "A":
            generic = {
                "a1": alpha_to_a(f["rho"], f["alpha1"]),
                "a2": alpha_to_a(f["rho"], f["alpha2"]),
            }
        elif self.case == "B":
            generic = {
                "rho": el.ZERO,
                "omega": el.ONE,
                "a1": f["beta2"],
                "a2": el.Neg(f["beta1"]),
            }
        else:
            generic = {"rho": el.ZERO, "omega": el.ZERO}
        f.update(generic)
        return {name: TimeFunction(expr) for name, expr in f.items()}

    @property
    def padded_window(self) -> tuple[float, float]:
        t0, t1 = self.window
        pad = self.window_pad * (t1 - t0) + 1e-6
        return (t0 - pad, t1 + pad)

    def check_time(self, t) -> None:
        lo, hi = self.padded_window
        tmin, tmax = float(np.min(t)), float(np.max(t))
        if tmin < lo or tmax > hi:
            bad = tmin if tmin < lo else tmax
            raise WindowError(f"t={bad!r} outside time window {self.window!r}")

    def _samples(self, n: int = 2001) -> np.ndarray:
        return np.linspace(*self.padded_window, n)

    def _validate_bounds(self) -> None:
        ts = self._samples()
        try:
            if self.case == "A":
                rho = np.abs(self.tf["rho"](ts))
                if rho.min() < self.rho_min:
                    i = int(np.argmin(rho))
                    raise SymmetryError(
                        f"|rho(t)| = {rho[i]:.3g} < rho_min = {self.rho_min:g} at t = {ts[i]:.6g}"
                    )
            for name, func in self.tf.items():
                func(ts)
        except el.ExprDomainError as exc:
            raise SymmetryError(f"time function not defined on the window: {exc}") from None
        if self.case == "C" and not self.swapped:
            a2 = np.abs(self.tf["a2"](ts))
            if a2.min() < self.a_min:
                i = int(np.argmin(a2))
                raise SymmetryError(
                    f"|a2(t)| = {a2[i]:.3g} < a_min = {self.a_min:g} at t = {ts[i]:.6g}"
                )

    @cached_property
    def swapped(self) -> bool:
        """Case C with ``a2 == 0``: handled by exchanging the x and y axes."""
        if self.case != "C":
            return False
        if not self.tf["a2"].is_zero:
            return False
        ts = self._samples()
        a1 = np.abs(self.tf["a1"](ts))
        if a1.min() < self.a_min:
            i = int(np.argmin(a1))
            raise SymmetryError(
                f"a2 == 0 and |a1(t)| = {a1[i]:.3g} < a_min = {self.a_min:g} at t = {ts[i]:.6g}"
            )
        return True

    @cached_property
    def frame(self) -> "RotatingFrame":
        if self.case != "A":
            raise SymmetryError("only case A has a quadrature frame")
        return RotatingFrame(self)

    @property
    def rotation_free(self) -> bool:
        return self.case == "A" and self.tf["omega"].is_zero


class RotatingFrame:
    """Case A time integrals ``tbar, T, delta1, delta2`` on the padded window.

    Values come from :class:`CumulativeIntegral` quadratures anchored at
    ``t_ref``.  For repeated evaluation (grids, trajectories) they are served
    from a Chebyshev table fitted to those quadratures; the table is checked
    against fresh quadrature values before use.
    """

    NAMES = ("tbar", "T", "delta1", "delta2")

    def __init__(self, spec: SymmetrySpec, max_degree: int = 1024):
        self.spec = spec
        tf = spec.tf
        rho, omega = tf["rho"], tf["omega"]
        al1, al2 = tf["alpha1"], tf["alpha2"]
        tol = spec.quad_tol
        self.rotation_free = omega.is_zero

        self.tbar = CumulativeIntegral(lambda m: 1.0 / rho(m) ** 2, spec.t_ref, tol)
        self.T = CumulativeIntegral(lambda m: omega(m) / rho(m) ** 2, spec.t_ref, tol)

        def T_at(m):
            m = np.atleast_1d(np.asarray(m, dtype=float))
            return np.array([self.T.value(float(v), store=False) for v in m])

        def d1_integrand(m):
            m = np.asarray(m, dtype=float)
            Tm = T_at(m).reshape(m.shape)
            return omega(m) / rho(m) ** 3 * (al2(m) * np.cos(Tm) - al1(m) * np.sin(Tm))

        def d2_integrand(m):
            m = np.asarray(m, dtype=float)
            Tm = T_at(m).reshape(m.shape)
            return -omega(m) / rho(m) ** 3 * (al1(m) * np.cos(Tm) + al2(m) * np.sin(Tm))

        self.delta1 = CumulativeIntegral(d1_integrand, spec.t_ref, tol)
        self.delta2 = CumulativeIntegral(d2_integrand, spec.t_ref, tol)
        self._max_degree = max_degree
        self._coef: np.ndarray | None = None
        self.domain = spec.padded_window

    def _integrals(self):
        if self.rotation_free:
            return (self.tbar,)
        return (self.tbar, self.T, self.delta1, self.delta2)

    def exact(self, t) -> np.ndarray:
        """Quadrature values, shape ``(4,) + shape(t)``."""
        self.spec.check_time(t)
        ts = np.asarray(t, dtype=float)
        flat = np.atleast_1d(ts).ravel()
        out = np.zeros((4, flat.size))
        order = np.argsort(flat)
        for k, integral in enumerate(self._integrals()):
            for i in order:
                out[k, i] = integral.value(float(flat[i]))
        return out.reshape((4,) + ts.shape)

    def _fit(self) -> np.ndarray:
        lo, hi = self.domain
        tol = self.spec.quad_tol
        deg = 32
        while True:
            nodes = C.chebpts1(deg + 1)
            ts = 0.5 * (lo + hi) + 0.5 * (hi - lo) * nodes
            vals = self.exact(ts)
            coef = np.stack([C.chebfit(nodes, v, deg) for v in vals], axis=-1)
            tail = np.max(np.abs(coef[-4:]), axis=0)
            scale = np.maximum(1.0, np.max(np.abs(vals), axis=1))
            if np.all(tail <= 0.1 * tol * scale):
                break
            if deg >= self._max_degree:
                raise QuadratureError(
                    f"time integrals not resolved by degree {deg} on {self.domain!r}"
                )
            deg *= 2
        # Independent spot check against quadrature at off-node points.
        probe = lo + (hi - lo) * (np.arange(1, 24) / 24.0 + 0.013)
        probe = probe[probe < hi]
        want = self.exact(probe)
        got = C.chebval(2 * (probe - lo) / (hi - lo) - 1, coef)
        err = np.max(np.abs(got - want), axis=1)
        scale = np.maximum(1.0, np.max(np.abs(want), axis=1))
        if np.any(err > 10 * tol * scale):
            raise QuadratureError(f"Chebyshev table disagrees with quadrature by {err.max():.3g}")
        return coef

    @property
    def coefficients(self) -> np.ndarray:
        if self._coef is None:
            self._coef = self._fit()
        return self._coef

    def values(self, t):
        """``(tbar, T, delta1, delta2)`` at ``t`` (scalar or array)."""
        self.spec.check_time(t)
        lo, hi = self.domain
        s = 2.0 * (np.asarray(t, dtype=float) - lo) / (hi - lo) - 1.0
        coef = self.coefficients
        v = C.chebval(s, coef)
        if np.ndim(s) == 0:
            return float(v[0]), float(v[1]), float(v[2]), float(v[3])
        return v[0], v[1], v[2], v[3]

    def time_of(self, tbar: float) -> float:
        """Invert the monotone map ``t -> tbar`` (Newton with bisection safeguard)."""
        lo, hi = self.domain
        f_lo = self.values(lo)[0] - tbar
        f_hi = self.values(hi)[0] - tbar
        if f_lo * f_hi > 0:
            raise WindowError(f"tbar={tbar!r} outside the image of the time window")
        rho = self.spec.tf["rho"]
        t = lo + (hi - lo) * (-f_lo) / (f_hi - f_lo)
        for _ in range(100):
            g = self.values(t)[0] - tbar
            if g == 0.0:
                return t
            if (g > 0) == (f_hi > 0):
                hi, f_hi = t, g
            else:
                lo, f_lo = t, g
            step = g * rho(t) ** 2
            t_new = t - step
            if not lo < t_new < hi:
                t_new = 0.5 * (lo + hi)
            if abs(t_new - t) <= 4 * np.finfo(float).eps * max(1.0, abs(t)):
                return t_new
            t = t_new
        return t


# ---------------------------------------------------------------------------
# Generator and canonical maps
# ---------------------------------------------------------------------------


def generator_components(spec: SymmetrySpec, x, y, t):
    """``(tau, eta1, eta2)`` of the symmetry generator at ``(x, y, t)``."""
    spec.check_time(t)
    tf = spec.tf
    rho, omega, a1, a2 = tf["rho"](t), tf["omega"](t), tf["a1"](t), tf["a2"](t)
    rd = tf["rho"].deriv(1)(t)
    tau = rho * rho + 0.0 * np.asarray(x, dtype=float)
    eta1 = rho * rd * x - omega * y + a1
    eta2 = rho * rd * y + omega * x + a2
    if np.ndim(tau) == 0:
        return float(tau), float(eta1), float(eta2)
    return tau, eta1, eta2


def _frame_values(spec: SymmetrySpec, t):
    if spec.rotation_free:
        tbar = spec.frame.values(t)[0]
        zero = 0.0 * np.asarray(t, dtype=float) if np.ndim(t) else 0.0
        return tbar, zero, zero, zero
    return spec.frame.values(t)


def to_canonical(spec: SymmetrySpec, x, y, t) -> CanonicalCoords:
    """Canonical group coordinates ``(xbar, ybar, tbar)`` of the point ``(x, y, t)``."""
    spec.check_time(t)
    tf = spec.tf
    if spec.case == "A":
        tbar, T, d1, d2 = _frame_values(spec, t)
        rho = tf["rho"](t)
        u = (x - tf["alpha1"](t)) / rho
        v = (y - tf["alpha2"](t)) / rho
        c, s = np.cos(T), np.sin(T)
        xbar = u * c + v * s + d1
        ybar = v * c - u * s + d2
    elif spec.case == "B":
        dx = x - tf["beta1"](t)
        dy = y - tf["beta2"](t)
        xbar = np.hypot(dx, dy)
        if np.any(xbar == 0.0):
            raise SymmetryError("case B canonical coordinates undefined at the rotation centre")
        ybar = t + 0.0 * xbar
        tbar = np.arctan2(dy, dx)  # rotation rate fixed to 1
    else:
        a1, a2 = tf["a1"](t), tf["a2"](t)
        if spec.swapped:
            x, y, a1, a2 = y, x, a2, a1
        xbar = x - a1 * y / a2
        ybar = t + 0.0 * xbar
        tbar = y / a2
    return CanonicalCoords(*_maybe_float(xbar, ybar, tbar))


def from_canonical(spec: SymmetrySpec, c: CanonicalCoords, t):
    """Physical ``(x, y)`` at time ``t`` for canonical coordinates ``c``.

    The coordinate that is a pure function of time (``tbar`` in case A,
    ``ybar = t`` in cases B and C) is taken from ``t`` and ignored in ``c``.
    """
    spec.check_time(t)
    tf = spec.tf
    if spec.case == "A":
        _, T, d1, d2 = _frame_values(spec, t)
        rho = tf["rho"](t)
        u, v = c.xbar - d1, c.ybar - d2
        cs, sn = np.cos(T), np.sin(T)
        x = tf["alpha1"](t) + rho * (u * cs - v * sn)
        y = tf["alpha2"](t) + rho * (u * sn + v * cs)
    elif spec.case == "B":
        if np.any(np.asarray(c.xbar) <= 0.0):
            raise SymmetryError("case B radial coordinate must be positive")
        x = tf["beta1"](t) + c.xbar * np.cos(c.tbar)
        y = tf["beta2"](t) + c.xbar * np.sin(c.tbar)
    else:
        a1, a2 = tf["a1"](t), tf["a2"](t)
        if spec.swapped:
            a1, a2 = a2, a1
        x = c.xbar + a1 * c.tbar
        y = a2 * c.tbar
        if spec.swapped:
            x, y = y, x
    return _maybe_float(x, y)


def _maybe_float(*vals):
    if all(np.ndim(v) == 0 for v in vals):
        return tuple(float(v) for v in vals)
    return tuple(np.asarray(v, dtype=float) for v in vals)


def fd_step(value) -> np.ndarray | float:
    return FD_STEP * np.maximum(1.0, np.abs(value))


def generator_directional_derivative(spec: SymmetrySpec, f: Callable, x, y, t):
    """``G f = tau f_t + eta1 f_x + eta2 f_y`` by central differences.

    ``f`` is called as ``f(x, y, t)`` and may be vectorised.
    """
    tau, eta1, eta2 = generator_components(spec, x, y, t)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    t = np.asarray(t, dtype=float)
    hx, hy = fd_step(x), fd_step(y)
    fx = (f(x + hx, y, t) - f(x - hx, y, t)) / (2 * hx)
    fy = (f(x, y + hy, t) - f(x, y - hy, t)) / (2 * hy)
    total = eta1 * fx + eta2 * fy
    if np.any(np.asarray(tau) != 0.0):
        ht = fd_step(t)
        ft = (f(x, y, t + ht) - f(x, y, t - ht)) / (2 * ht)
        total = total + tau * ft
    if np.ndim(total) == 0:
        return float(total)
    return total
