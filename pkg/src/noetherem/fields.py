"""Electromagnetic fields admitting Noether point symmetries, and their potentials.

Each field class is assembled as expression trees in the physical variables
``x, y, t`` (plus, for case A, the frame quantities ``T, delta1, delta2``
which are fed in numerically from the quadrature frame).  Spatial partial
derivatives are therefore exact; time derivatives are exact in cases B and
C and central differences in case A.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property
from typing import Mapping

import numpy as np

from . import exprlang as el
from .symmetry import SymmetryError, SymmetrySpec, fd_step

X, Y, T_ = el.Var("x"), el.Var("y"), el.Var("t")
XB, YB = "xbar", "ybar"
# Frame placeholders; the '@' keeps them out of the user grammar.
FRAME_VARS = ("@T", "@d1", "@d2")
ROT, D1, D2 = (el.Var(n) for n in FRAME_VARS)
PHYS_ARGS = ("x", "y", "t")
CASE_A_ARGS = PHYS_ARGS + FRAME_VARS

PROFILE_KEYS = ("Bbar", "Vbar", "psi", "Abar1", "Abar2", "lam")
PROFILE_REQUIRED = {"A": ("Bbar", "Vbar"), "B": ("psi", "Vbar"), "C": ("psi", "Vbar")}
COMPONENTS = ("E1", "E2", "B")


class FieldError(ValueError):
    pass


class ExcludedRegionError(FieldError):
    pass


def _profile_expr(value, name: str, allowed: set[str]) -> el.Expr | None:
    if value is None:
        return None
    expr = el.parse(value) if isinstance(value, str) else el.as_expr(value)
    extra = el.free_variables(expr) - allowed
    if extra:
        raise FieldError(f"{name} may only depend on {sorted(allowed)}, found {sorted(extra)}")
    return expr


@dataclass(frozen=True)
class FieldProfile:
    """Arbitrary functions of the canonical variables ``xbar, ybar``.

    ``lam`` is the optional gauge function of ``x, y, t``.
    """

    Bbar: el.Expr | None = None
    Vbar: el.Expr | None = None
    psi: el.Expr | None = None
    Abar1: el.Expr | None = None
    Abar2: el.Expr | None = None
    lam: el.Expr | None = None

    def __post_init__(self):
        for name in PROFILE_KEYS:
            allowed = {"x", "y", "t"} if name == "lam" else {XB, YB}
            object.__setattr__(self, name, _profile_expr(getattr(self, name), name, allowed))
        if (self.Abar1 is None) != (self.Abar2 is None):
            raise FieldError("Abar1 and Abar2 must be given together")

    @classmethod
    def from_mapping(cls, data: Mapping[str, str]) -> "FieldProfile":
        data = dict(data)
        if "lambda" in data:
            data["lam"] = data.pop("lambda")
        unknown = set(data) - set(PROFILE_KEYS)
        if unknown:
            raise FieldError(f"unknown profile functions {sorted(unknown)}")
        return cls(**data)

    def require(self, case: str) -> None:
        missing = [k for k in PROFILE_REQUIRED[case] if getattr(self, k) is None]
        if missing:
            raise FieldError(f"case {case} profile requires {missing}")
        if case == "A" and self.psi is not None:
            raise FieldError("case A profile takes Bbar, not psi")
        if case in "BC" and self.Bbar is not None:
            raise FieldError(f"case {case} derives Bbar from psi; do not give Bbar")

    @property
    def gauge(self) -> el.Expr:
        return self.lam if self.lam is not None else el.ZERO

    def with_gauge(self, lam) -> "FieldProfile":
        return replace(self, lam=lam)


# ---------------------------------------------------------------------------
# Symbolic ingredients shared by fields, potentials and invariants
# ---------------------------------------------------------------------------


class Ingredients:
    """Time functions as Exprs and the canonical coordinates as Exprs in x, y, t."""

    def __init__(self, spec: SymmetrySpec):
        self.spec = spec
        self._cache: dict[tuple[str, int], el.Expr] = {}

    def f(self, name: str, order: int = 0) -> el.Expr:
        key = (name, order)
        if key not in self._cache:
            self._cache[key] = self.spec.tf[name].deriv(order).expr
        return self._cache[key]

    @cached_property
    def canonical(self) -> tuple[el.Expr, el.Expr]:
        """(xbar, ybar) as expressions, in the (possibly swapped) working frame."""
        s = self.spec
        if s.case == "A":
            rho = self.f("rho")
            u = (X - self.f("alpha1")) / rho
            v = (Y - self.f("alpha2")) / rho
            if s.rotation_free:
                return el.simplify(u), el.simplify(v)
            c, sn = el.cos(ROT), el.sin(ROT)
            return u * c + v * sn + D1, v * c - u * sn + D2
        if s.case == "B":
            dx = X - self.f("beta1")
            dy = Y - self.f("beta2")
            return el.sqrt(dx * dx + dy * dy), T_
        a1, a2 = self.f("a1"), self.f("a2")
        if s.swapped:
            a1, a2 = a2, a1
        return X - a1 * Y / a2, T_

    def bar(self, expr: el.Expr) -> el.Expr:
        """Substitute the canonical coordinates into a function of (xbar, ybar)."""
        xb, yb = self.canonical
        return el.substitute(expr, {XB: xb, YB: yb})

    @cached_property
    def rotation(self):
        if self.spec.rotation_free:
            return el.ONE, el.ZERO
        return el.cos(ROT), el.sin(ROT)

    @cached_property
    def eta(self) -> tuple[el.Expr, el.Expr]:
        f = self.f
        rr = f("rho") * f("rho", 1)
        return (
            rr * X - f("omega") * Y + f("a1"),
            rr * Y + f("omega") * X + f("a2"),
        )

    @cached_property
    def tau(self) -> el.Expr:
        return self.f("rho") * self.f("rho")

    def generator(self, expr: el.Expr) -> el.Expr:
        """Exact ``G expr`` for an expression in x, y, t only."""
        e1, e2 = self.eta
        out = e1 * el.differentiate(expr, "x") + e2 * el.differentiate(expr, "y")
        if self.spec.case == "A":
            out = self.tau * el.differentiate(expr, "t") + out
        return el.simplify(out)

    @property
    def args(self) -> tuple[str, ...]:
        return CASE_A_ARGS if self.spec.case == "A" else PHYS_ARGS


def swap_axes(exprs: Mapping[str, el.Expr]) -> dict[str, el.Expr]:
    return {k: el.substitute(v, {"x": Y, "y": X}) for k, v in exprs.items()}


# ---------------------------------------------------------------------------
# Numeric evaluation of expression bundles
# ---------------------------------------------------------------------------


class ExprBundle:
    """Named expressions over the case's argument list, compiled twice.

    The numpy build broadcasts over arrays, the math build serves scalar
    calls from the ODE right-hand side.  Read-only after construction.
    """

    def __init__(self, spec: SymmetrySpec, exprs: Mapping[str, el.Expr], r_min: float | None = None):
        self.spec = spec
        self.names = tuple(exprs)
        self.exprs = {k: el.simplify(v) for k, v in exprs.items()}
        self.args = CASE_A_ARGS if spec.case == "A" else PHYS_ARGS
        ordered = [self.exprs[k] for k in self.names]
        self._np = el.compile_exprs(ordered, self.args, "numpy")
        self._math = el.compile_exprs(ordered, self.args, "math")
        self.r_min = r_min

    def _check(self, x, y, t) -> None:
        self.spec.check_time(t)
        if self.spec.case == "B" and self.r_min is not None:
            tf = self.spec.tf
            r = np.hypot(x - tf["beta1"](t), y - tf["beta2"](t))
            if np.any(r < self.r_min):
                i = np.unravel_index(np.argmin(r), np.shape(r)) if np.ndim(r) else ()
                raise ExcludedRegionError(
                    f"point at distance {float(np.asarray(r)[i]):.3g} from the rotation centre "
                    f"is inside the excluded disc r_min={self.r_min:g}"
                )

    def _frame(self, t):
        if self.spec.case != "A":
            return ()
        if self.spec.rotation_free:
            z = 0.0 if np.ndim(t) == 0 else np.zeros(np.shape(t))
            return (z, z, z)
        return self.spec.frame.values(t)[1:]

    def __call__(self, x, y, t) -> dict[str, np.ndarray]:
        x, y, t = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x, y, t)))
        self._check(x, y, t)
        vals = self._np(x, y, t, *self._frame(t))
        return {k: np.broadcast_to(v, x.shape).astype(float) for k, v in zip(self.names, vals)}

    def scalar(self, x: float, y: float, t: float) -> tuple[float, ...]:
        self._check(x, y, t)
        return self._math(x, y, t, *self._frame(t))


# ---------------------------------------------------------------------------
# Field model
# ---------------------------------------------------------------------------


class FieldModel:
    """Evaluator of ``E1, E2, B`` and their first partial derivatives."""

    def __init__(
        self,
        spec: SymmetrySpec,
        profile: FieldProfile,
        exprs: Mapping[str, el.Expr],
        r_min: float | None = None,
        x_window=(-1.0, 1.0),
        y_window=(-1.0, 1.0),
        label: str = "",
    ):
        self.spec = spec
        self.profile = profile
        self.exprs = {k: el.simplify(exprs[k]) for k in COMPONENTS}
        self.r_min = r_min
        self.x_window = tuple(map(float, x_window))
        self.y_window = tuple(map(float, y_window))
        self.label = label or f"case {spec.case}"
        self.bundle = ExprBundle(spec, self.exprs, r_min)

    @property
    def case(self) -> str:
        return self.spec.case

    @cached_property
    def _partials_bundle(self) -> ExprBundle:
        out = {}
        variables = ("x", "y") if self.case == "A" else ("x", "y", "t")
        for comp, expr in self.exprs.items():
            for v in variables:
                out[f"{comp}_{v}"] = el.differentiate(expr, v)
        return ExprBundle(self.spec, out, self.r_min)

    def evaluate(self, x, y, t):
        """``(E1, E2, B)`` at the given point(s)."""
        v = self.bundle(x, y, t)
        return v["E1"], v["E2"], v["B"]

    def scalar(self, x: float, y: float, t: float) -> tuple[float, float, float]:
        return self.bundle.scalar(x, y, t)

    def partials(self, x, y, t) -> dict[str, np.ndarray]:
        """First partials keyed ``E1_x, E1_y, E1_t, ..., B_t``."""
        out = self._partials_bundle(x, y, t)
        if self.case == "A":
            t = np.asarray(t, dtype=float)
            h = fd_step(t)
            plus = self.bundle(x, y, t + h)
            minus = self.bundle(x, y, t - h)
            for comp in COMPONENTS:
                out[f"{comp}_t"] = (plus[comp] - minus[comp]) / (2 * h)
        return out

    @property
    def time_derivative_method(self) -> str:
        return "finite-difference" if self.case == "A" else "symbolic"

    def perturbed(self, component: str, expr, epsilon: float) -> "FieldModel":
        """Copy with ``epsilon * expr(x, y, t)`` added to one component."""
        if component not in COMPONENTS:
            raise FieldError(f"unknown field component {component!r}")
        extra = el.parse(expr) if isinstance(expr, str) else el.as_expr(expr)
        bad = el.free_variables(extra) - {"x", "y", "t"}
        if bad:
            raise FieldError(f"perturbation may only depend on x, y, t, found {sorted(bad)}")
        exprs = dict(self.exprs)
        exprs[component] = exprs[component] + el.Num(epsilon) * extra
        return FieldModel(
            self.spec, self.profile, exprs, self.r_min, self.x_window, self.y_window,
            label=f"{self.label} + {epsilon:g}*({el.to_text(extra)}) in {component}",
        )


def _base_exprs_A(ing: Ingredients, profile: FieldProfile) -> dict[str, el.Expr]:
    f = ing.f
    rho, rd, rdd = f("rho"), f("rho", 1), f("rho", 2)
    om, omd = f("omega"), f("omega", 1)
    al1, al1d, al1dd = f("alpha1"), f("alpha1", 1), f("alpha1", 2)
    al2, al2d, al2dd = f("alpha2"), f("alpha2", 1), f("alpha2", 2)
    c, s = ing.rotation
    Bb = ing.bar(profile.Bbar)
    Eb1 = ing.bar(el.Neg(el.differentiate(profile.Vbar, XB)))
    Eb2 = ing.bar(el.Neg(el.differentiate(profile.Vbar, YB)))
    rho3 = rho ** 3
    rho4 = rho ** 4
    B = (Bb - 2 * om) / rho ** 2
    E1 = (
        al1dd
        + rdd / rho * (X - al1)
        + om * om * X / rho4
        - (rho * omd - 2 * rd * om) * Y / rho3
        + om / rho3 * (rho * al2d - rd * al2)
        + (Eb1 * c - Eb2 * s) / rho3
        - (rho * rd * (Y - al2) + rho * rho * al2d + om * X) * Bb / rho4
    )
    E2 = (
        al2dd
        + rdd / rho * (Y - al2)
        + om * om * Y / rho4
        + (rho * omd - 2 * rd * om) * X / rho3
        - om / rho3 * (rho * al1d - rd * al1)
        + (Eb2 * c + Eb1 * s) / rho3
        + (rho * rd * (X - al1) + rho * rho * al1d - om * Y) * Bb / rho4
    )
    return {"E1": E1, "E2": E2, "B": B}


def _vector_form_exprs_A(ing: Ingredients, profile: FieldProfile) -> dict[str, el.Expr]:
    f = ing.f
    rho, rd, om = f("rho"), f("rho", 1), f("omega")
    al = (f("alpha1"), f("alpha2"))
    ald = (f("alpha1", 1), f("alpha2", 1))
    q = (X, Y)
    # eta = rho rho' (q - alpha) + rho^2 alpha' + Omega x q
    omxq = (el.Neg(om * Y), om * X)
    eta = tuple(rho * rd * (q[i] - al[i]) + rho * rho * ald[i] + omxq[i] for i in range(2))
    eta_t = tuple(el.differentiate(e, "t") for e in eta)
    c, s = ing.rotation
    Bb = ing.bar(profile.Bbar)
    Eb = (ing.bar(el.Neg(el.differentiate(profile.Vbar, XB))),
          ing.bar(el.Neg(el.differentiate(profile.Vbar, YB))))
    REb = (c * Eb[0] - s * Eb[1], s * Eb[0] + c * Eb[1])
    eta_x_om = (eta[1] * om, el.Neg(eta[0] * om))
    B_x_eta = (el.Neg(Bb * eta[1]), Bb * eta[0])
    rho4 = rho ** 4
    E = [
        (rho * (rho * eta_t[i] - rd * eta[i]) + eta_x_om[i]) / rho4
        + REb[i] / rho ** 3
        + B_x_eta[i] / rho4
        for i in range(2)
    ]
    return {"E1": E[0], "E2": E[1]}


def _base_exprs_B(ing: Ingredients, profile: FieldProfile) -> dict[str, el.Expr]:
    f = ing.f
    b1, b2 = f("beta1"), f("beta2")
    xb = el.Var(XB)
    Bb = ing.bar(el.Neg(el.differentiate(profile.psi, XB)) / xb)
    Eb2 = ing.bar(el.differentiate(profile.psi, YB) / xb ** 2)
    Eb1 = ing.bar(el.Neg(el.differentiate(profile.Vbar, XB)) / xb)
    E1 = f("beta1", 2) - f("beta2", 1) * Bb + (X - b1) * Eb1 - (Y - b2) * Eb2
    E2 = f("beta2", 2) + f("beta1", 1) * Bb + (X - b1) * Eb2 + (Y - b2) * Eb1
    return {"E1": E1, "E2": E2, "B": Bb}


def _base_exprs_C(ing: Ingredients, profile: FieldProfile) -> dict[str, el.Expr]:
    f = ing.f
    a1, a1d, a1dd = f("a1"), f("a1", 1), f("a1", 2)
    a2, a2d, a2dd = f("a2"), f("a2", 1), f("a2", 2)
    if ing.spec.swapped:
        a1, a1d, a1dd, a2, a2d, a2dd = a2, a2d, a2dd, a1, a1d, a1dd
    xb = el.Var(XB)
    psi = profile.psi
    Vx = el.differentiate(profile.Vbar, XB)
    Bb = ing.bar(el.differentiate(psi, XB))
    Eb1 = ing.bar(el.Neg(Vx))
    Eb2 = ing.bar(a1dd / a2 * xb - a2d / a2 * psi - el.differentiate(psi, YB) + a1 / a2 * Vx)
    E1 = a1dd * Y / a2 - a2d * Y / a2 * Bb + Eb1
    E2 = a2dd * Y / a2 + a1d * Y / a2 * Bb + Eb2
    exprs = {"E1": E1, "E2": E2, "B": Bb}
    if ing.spec.swapped:
        s = swap_axes(exprs)
        exprs = {"E1": s["E2"], "E2": s["E1"], "B": el.Neg(s["B"])}
    return exprs


_BUILDERS = {"A": _base_exprs_A, "B": _base_exprs_B, "C": _base_exprs_C}


def build_field(
    spec: SymmetrySpec,
    profile: FieldProfile,
    r_min: float = 1e-6,
    x_window=(-1.0, 1.0),
    y_window=(-1.0, 1.0),
) -> FieldModel:
    """Construct the field class matching ``spec.case``."""
    profile.require(spec.case)
    ing = Ingredients(spec)
    exprs = _BUILDERS[spec.case](ing, profile)
    return FieldModel(
        spec, profile, exprs,
        r_min=r_min if spec.case == "B" else None,
        x_window=x_window, y_window=y_window,
    )


def _expect_case(spec: SymmetrySpec, case: str) -> None:
    if spec.case != case:
        raise FieldError(f"expected a case {case} symmetry, got case {spec.case}")


def build_field_A(spec, profile, **kw) -> FieldModel:
    _expect_case(spec, "A")
    return build_field(spec, profile, **kw)


def build_field_B(spec, profile, **kw) -> FieldModel:
    _expect_case(spec, "B")
    return build_field(spec, profile, **kw)


def build_field_C(spec, profile, **kw) -> FieldModel:
    _expect_case(spec, "C")
    return build_field(spec, profile, **kw)


class VectorFormA:
    """Compact rotation-matrix form of the case A electric field."""

    def __init__(self, spec: SymmetrySpec, profile: FieldProfile):
        _expect_case(spec, "A")
        profile.require("A")
        self.bundle = ExprBundle(spec, _vector_form_exprs_A(Ingredients(spec), profile))

    def __call__(self, x, y, t):
        v = self.bundle(x, y, t)
        return v["E1"], v["E2"]


def electric_field_vector_form_A(spec: SymmetrySpec, profile: FieldProfile, x, y, t):
    return VectorFormA(spec, profile)(x, y, t)


# ---------------------------------------------------------------------------
# Potentials and the gauge term F
# ---------------------------------------------------------------------------


class PotentialSet:
    """``A1, A2, V`` and the Noether gauge term ``F`` as evaluators of (x, y, t)."""

    def __init__(self, spec: SymmetrySpec, profile: FieldProfile, exprs: Mapping[str, el.Expr], r_min=None):
        self.spec = spec
        self.profile = profile
        self.exprs = dict(exprs)
        self.bundle = ExprBundle(spec, self.exprs, r_min)
        ing = Ingredients(spec)
        self._gen = ExprBundle(spec, {"tau": ing.tau, "eta1": ing.eta[0], "eta2": ing.eta[1]})

    def evaluate(self, x, y, t):
        v = self.bundle(x, y, t)
        return v["A1"], v["A2"], v["V"], v["F"]

    def derived_fields(self, x, y, t):
        """``E1 = -V_x - A1_t``, ``E2 = -V_y - A2_t``, ``B = A2_x - A1_y`` by central differences."""
        x, y, t = (np.asarray(v, dtype=float) for v in (x, y, t))
        hx, hy, ht = fd_step(x), fd_step(y), fd_step(t)

        def d(var):
            if var == "x":
                p, m, h = self.bundle(x + hx, y, t), self.bundle(x - hx, y, t), hx
            elif var == "y":
                p, m, h = self.bundle(x, y + hy, t), self.bundle(x, y - hy, t), hy
            else:
                p, m, h = self.bundle(x, y, t + ht), self.bundle(x, y, t - ht), ht
            return {k: (p[k] - m[k]) / (2 * h) for k in p}

        dx, dy, dt = d("x"), d("y"), d("t")
        E1 = -dx["V"] - dt["A1"]
        E2 = -dy["V"] - dt["A2"]
        B = dx["A2"] - dy["A1"]
        return E1, E2, B

    def invariant(self, x, y, vx, vy, t):
        """``tau (v^2/2 + V) - eta . (v + A) + F``."""
        v = self.bundle(x, y, t)
        g = self._gen(x, y, t)
        return (
            g["tau"] * (0.5 * (vx * vx + vy * vy) + v["V"])
            - g["eta1"] * (vx + v["A1"])
            - g["eta2"] * (vy + v["A2"])
            + v["F"]
        )


def _grad(lam: el.Expr) -> tuple[el.Expr, el.Expr, el.Expr]:
    return (el.differentiate(lam, "x"), el.differentiate(lam, "y"), el.differentiate(lam, "t"))


def _potentials_A(ing: Ingredients, profile: FieldProfile) -> dict[str, el.Expr]:
    f = ing.f
    rho, rd, rdd = f("rho"), f("rho", 1), f("rho", 2)
    om = f("omega")
    al = (f("alpha1"), f("alpha2"))
    ald = (f("alpha1", 1), f("alpha2", 1))
    aldd = (f("alpha1", 2), f("alpha2", 2))
    q = (X, Y)
    lam = profile.gauge
    lx, ly, lt = _grad(lam)
    c, s = ing.rotation
    Ab = (ing.bar(profile.Abar1), ing.bar(profile.Abar2))
    RAb = (c * Ab[0] - s * Ab[1], s * Ab[0] + c * Ab[1])
    A1 = Y * om / rho ** 2 + RAb[0] / rho + lx
    A2 = el.Neg(X * om) / rho ** 2 + RAb[1] / rho + ly
    w = tuple(rho * ald[i] - rd * al[i] for i in range(2))
    acc = tuple(rho * aldd[i] - rdd * al[i] for i in range(2))
    q2 = X * X + Y * Y
    eta = ing.eta
    V = (
        el.Neg(acc[0] * X + acc[1] * Y) / rho
        - rdd / (2 * rho) * q2
        - (w[1] * om * X - w[0] * om * Y) / rho ** 3
        - om * om * q2 / (2 * rho ** 4)
        + ing.bar(profile.Vbar) / rho ** 2
        + (eta[0] * RAb[0] + eta[1] * RAb[1]) / rho ** 3
        - lt
    )
    F = (
        (w[0] * w[0] + w[1] * w[1]) / 2
        + rd * (w[0] * X + w[1] * Y)
        + rho * (acc[0] * X + acc[1] * Y)
        + (rd * rd + rho * rdd) * q2 / 2
        + (w[1] * om * X - w[0] * om * Y) / rho
        + ing.generator(lam)
    )
    return {"A1": A1, "A2": A2, "V": V, "F": F}


def _potentials_B(ing: Ingredients, profile: FieldProfile) -> dict[str, el.Expr]:
    f = ing.f
    b1, b2 = f("beta1"), f("beta2")
    b1d, b2d = f("beta1", 1), f("beta2", 1)
    lam = profile.gauge
    lx, ly, lt = _grad(lam)
    psi = ing.bar(profile.psi)
    xb2 = ing.bar(el.Var(XB) ** 2)
    A1 = (Y - b2) * psi / xb2 + lx
    A2 = el.Neg(X - b1) * psi / xb2 + ly
    V = (
        el.Neg(f("beta1", 2)) * (X - b1)
        - f("beta2", 2) * (Y - b2)
        + ing.bar(profile.Vbar)
        + (b1d * (Y - b2) - b2d * (X - b1)) * psi / xb2
        - lt
    )
    F = b2d * (X - b1) - b1d * (Y - b2) + ing.generator(lam)
    return {"A1": A1, "A2": A2, "V": V, "F": F}


def _potentials_C(ing: Ingredients, profile: FieldProfile) -> dict[str, el.Expr]:
    f = ing.f
    a1, a1d, a1dd = f("a1"), f("a1", 1), f("a1", 2)
    a2, a2d, a2dd = f("a2"), f("a2", 1), f("a2", 2)
    if ing.spec.swapped:
        a1, a1d, a1dd, a2, a2d, a2dd = a2, a2d, a2dd, a1, a1d, a1dd
    psi = ing.bar(profile.psi)
    A1 = el.ZERO
    A2 = psi
    V = (
        el.Neg(a1dd) / a2 * X * Y
        + (a1 * a1dd - a2 * a2dd) / (2 * a2 * a2) * Y * Y
        + ing.bar(profile.Vbar)
        + a2d * Y / a2 * psi
    )
    F = a1d * X + a2d * Y
    if ing.spec.swapped:
        s = swap_axes({"A1": A1, "A2": A2, "V": V, "F": F})
        A1, A2, V, F = s["A2"], s["A1"], s["V"], s["F"]
    # gauge terms are added in physical axes
    lam = profile.gauge
    lx, ly, lt = _grad(lam)
    return {"A1": A1 + lx, "A2": A2 + ly, "V": V - lt, "F": F + ing.generator(lam)}


def check_vector_potential(spec: SymmetrySpec, profile: FieldProfile, points) -> float:
    """Max |d Abar2/d xbar - d Abar1/d ybar - Bbar| over canonical images of ``points``."""
    from .symmetry import to_canonical

    x, y, t = points
    c = to_canonical(spec, x, y, t)
    resid = el.simplify(
        el.differentiate(profile.Abar2, XB) - el.differentiate(profile.Abar1, YB) - profile.Bbar
    )
    fn = el.lambdify(resid, [XB, YB], "numpy")
    vals = np.broadcast_to(fn(np.asarray(c.xbar), np.asarray(c.ybar)), np.shape(c.xbar))
    return float(np.max(np.abs(vals))) if np.size(vals) else 0.0


def build_potentials(
    spec: SymmetrySpec,
    profile: FieldProfile,
    r_min: float = 1e-6,
    x_window=(-1.0, 1.0),
    y_window=(-1.0, 1.0),
    curl_tol: float = 1e-6,
) -> PotentialSet:
    """Potentials ``A, V`` and ``F`` reproducing :func:`build_field` for ``profile``."""
    profile.require(spec.case)
    ing = Ingredients(spec)
    if spec.case == "A":
        if profile.Abar1 is None:
            raise FieldError("case A potentials need Abar1, Abar2 with curl equal to Bbar")
        xs = np.linspace(*x_window, 9)
        ys = np.linspace(*y_window, 9)
        ts = np.linspace(*spec.window, 5)
        pts = np.meshgrid(xs, ys, ts, indexing="ij")
        resid = check_vector_potential(spec, profile, pts)
        if resid > curl_tol:
            raise FieldError(f"Abar is not a vector potential for Bbar: curl residual {resid:.3g}")
        exprs = _potentials_A(ing, profile)
    elif spec.case == "B":
        exprs = _potentials_B(ing, profile)
    else:
        exprs = _potentials_C(ing, profile)
    return PotentialSet(spec, profile, exprs, r_min if spec.case == "B" else None)


def field_scale(values) -> float:
    """``1 + max |component|`` over sampled field values."""
    m = 0.0
    for v in values:
        if np.size(v):
            m = max(m, float(np.max(np.abs(v))))
    return 1.0 + m


__all__ = [
    "FieldProfile", "FieldModel", "PotentialSet", "VectorFormA", "FieldError",
    "ExcludedRegionError", "build_field", "build_field_A", "build_field_B", "build_field_C",
    "build_potentials", "electric_field_vector_form_A", "Ingredients", "field_scale",
    "SymmetryError",
]
