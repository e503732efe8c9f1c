import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noetherem.dynamics import (
    CanonicalState,
    IntegrationError,
    State,
    StepSizeUnderflow,
    Trajectory,
    WindowExitError,
    canonical_dynamics_A,
    canonical_energy,
    canonical_to_state,
    cyclic_momentum,
    dopri5,
    integrate,
    integrate_many,
    invariant,
    invariant_A,
    invariant_B,
    invariant_C,
    lorentz_rhs,
    output_times,
    state_to_canonical,
)
from noetherem.fields import FieldProfile, build_field, build_potentials
from noetherem.scenario import random_scenario
from noetherem.symmetry import SymmetryError, SymmetrySpec

WIDE = dict(x_window=(-5, 5), y_window=(-5, 5))

FIVE_POINT = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12


def uniform_b(b0=1.0, window=(0, 7)):
    return build_field(SymmetrySpec.case_a(window=window), FieldProfile(Bbar=str(b0), Vbar="0"), **WIDE)


class TestLorentzRhs:
    def test_magnetic_force(self):
        assert lorentz_rhs(uniform_b(0.7), State(0, 0.1, 0.2, 1.5, 0)) == pytest.approx((1.5, 0, 0, -1.5 * 0.7))

    def test_electric_force(self):
        f = build_field(SymmetrySpec.case_a(), FieldProfile(Bbar="0", Vbar="-0.4*xbar"))
        assert lorentz_rhs(f, State(0.3, 0.1, 0.2, 0, 0)) == pytest.approx((0, 0, 0.4, 0))


class TestIntegrate:
    def test_cyclotron_closes(self):
        traj = integrate(uniform_b(), State(0, 0, 0, 1, 0), 2 * math.pi)
        assert math.hypot(traj.x[-1], traj.y[-1]) <= 1e-7
        # circle of radius 1 about (0, -1)
        assert np.allclose(np.hypot(traj.x, traj.y + 1), 1, atol=1e-8)

    def test_uniform_electric_field(self):
        f = build_field(SymmetrySpec.case_a(window=(0, 2)), FieldProfile(Bbar="0", Vbar="-xbar"), **WIDE)
        traj = integrate(f, State(0, 0, 0, 0, 0), 2.0, output_dt=0.1)
        assert np.max(np.abs(traj.x - traj.t**2 / 2)) <= 1e-9
        assert np.max(np.abs(traj.y)) <= 1e-12

    def test_samples(self):
        traj = integrate(uniform_b(), State(0, 0, 0, 1, 0), 1.05, output_dt=0.1)
        assert np.all(np.diff(traj.t) > 0)
        assert np.all(np.diff(traj.t) <= 0.1 + 1e-15)
        assert traj.t[0] == 0 and traj.t[-1] == 1.05 and len(traj) == 12
        s = traj.stats
        assert s.steps > 0 and s.tol == 1e-10 and s.nfev >= 6 * s.steps

    def test_window_exit(self):
        f = build_field(SymmetrySpec.case_a(window=(0, 5)), FieldProfile(Bbar="0", Vbar="0"))
        with pytest.raises(WindowExitError) as info:
            integrate(f, State(0, 0, 0, 1, 0), 5.0)
        assert info.value.t == pytest.approx(1.0, abs=1e-9)

    def test_window_check_can_be_disabled(self):
        f = build_field(SymmetrySpec.case_a(window=(0, 5)), FieldProfile(Bbar="0", Vbar="0"))
        traj = integrate(f, State(0, 0, 0, 1, 0), 5.0, enforce_window=False)
        assert traj.x[-1] == pytest.approx(5.0)

    def test_time_outside_window(self):
        with pytest.raises(SymmetryError):
            integrate(uniform_b(window=(0, 1)), State(0, 0, 0, 1, 0), 3.0)

    def test_step_size_underflow_located(self):
        # y' = y^2 blows up at t = 1
        with pytest.raises(StepSizeUnderflow) as info:
            dopri5(lambda t, y: y * y, 0.0, [1.0], 2.0, tol=1e-10)
        assert info.value.t == pytest.approx(1.0, abs=1e-3)

    def test_non_finite_rhs(self):
        with pytest.raises(IntegrationError):
            dopri5(lambda t, y: np.array([np.nan]), 0.0, [1.0], 1.0)

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            dopri5(lambda t, y: y, 0.0, [1.0], 1.0, tol=0)
        with pytest.raises(ValueError):
            dopri5(lambda t, y: y, 1.0, [1.0], 1.0)
        with pytest.raises(ValueError):
            State(0, math.nan, 0, 0, 0)

    def test_dense_output_matches_exact(self):
        ts = np.linspace(0, 3, 301)
        _, Y, _ = dopri5(lambda t, y: np.array([y[1], -y[0]]), 0.0, [0.0, 1.0], 3.0, 1e-12, ts)
        assert np.max(np.abs(Y[:, 0] - np.sin(ts))) <= 1e-10

    def test_fixed_step_order(self):
        # global error of the fifth-order solution ~ h^5; halving h gains about 32
        f = build_field(SymmetrySpec.case_c(a1="0", a2="1", window=(0, 2)), FieldProfile(psi="xbar + 0.2*xbar^2*ybar", Vbar="0.5*xbar^2"), **WIDE)
        s0 = State(0, 0.3, -0.2, 0.4, 0.1)
        ref = integrate(f, s0, 2.0, tol=1e-14, output_dt=2.0)
        errs = []
        for h in (0.1, 0.05, 0.025):
            tr = integrate(f, s0, 2.0, fixed_step=h, output_dt=2.0, invariant=False)
            errs.append(np.max(np.abs(tr.state(-1).vector - ref.state(-1).vector)))
        orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert np.all(orders >= 4.5), orders

    def test_many_matches_sequential(self):
        sc = random_scenario("C", 3)
        f = sc.field()
        seq = integrate_many(f, sc.initial_conditions, sc.simulation_end)
        par = integrate_many(f, sc.initial_conditions, sc.simulation_end, threads=3)
        for a, b in zip(seq, par):
            assert np.array_equal(a.x, b.x) and np.array_equal(a.I, b.I)


def test_csv_round_trip(tmp_path):
    traj = integrate(uniform_b(), State(0, 0, 0, 1, 0), 1.0, output_dt=0.25)
    path = traj.to_csv(tmp_path / "t.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == "t,x,y,vx,vy,I"
    assert len(lines) == 6
    back = Trajectory.from_csv(path)
    for k in ("t", "x", "y", "vx", "vy", "I"):
        assert np.array_equal(getattr(back, k), getattr(traj, k))


@settings(max_examples=100, deadline=None)
@given(st.floats(-5, 5), st.floats(0.01, 10), st.floats(0.001, 2))
def test_output_times(t0, span, dt):
    ts = output_times(t0, t0 + span, dt)
    assert ts[0] == t0 and ts[-1] == t0 + span
    assert np.all(np.diff(ts) > 0)
    assert np.all(np.diff(ts) <= dt * (1 + 1e-9))


# -- invariants ----------------------------------------------------------------


class TestInvariantReductions:
    def test_energy(self):
        spec = SymmetrySpec.case_a()
        prof = FieldProfile(Bbar="0.3", Vbar="xbar^2 + sin(ybar)")
        s = State(0.4, 0.3, -0.7, 1.1, 0.2)
        assert invariant_A(spec, prof, s) == pytest.approx(0.5 * (1.1**2 + 0.2**2) + 0.09 + math.sin(-0.7), abs=1e-14)

    def test_angular_momentum(self):
        spec = SymmetrySpec.case_b()
        s = State(0.2, 0.3, -0.7, 1.1, 0.2)
        assert invariant_B(spec, FieldProfile(psi="0", Vbar="0"), s) == pytest.approx(-0.7 * 1.1 - 0.3 * 0.2, abs=1e-14)

    def test_translation_momentum(self):
        spec = SymmetrySpec.case_c(a1="0", a2="1")
        s = State(0.2, 0.3, -0.7, 1.1, 0.2)
        assert invariant_C(spec, FieldProfile(psi="0", Vbar="0"), s) == pytest.approx(-0.2, abs=1e-15)

    def test_case_mismatch(self):
        with pytest.raises(SymmetryError):
            invariant_A(SymmetrySpec.case_c(), FieldProfile(psi="0", Vbar="0"), State(0, 0, 0, 0, 0))


def test_energy_map_cross_oracle():
    rng = np.random.default_rng(8)
    for seed in range(4):
        sc = random_scenario("A", seed)
        for _ in range(10):
            t = float(rng.uniform(*sc.t_window))
            s = State(t, *rng.uniform(-1, 1, 4))
            a = invariant(sc.spec, sc.field_profile, s)
            b = canonical_energy(sc.spec, sc.field_profile, s)
            assert abs(a - b) <= 1e-9 * (1 + abs(a))


@pytest.mark.parametrize("case", ["B", "C"])
def test_invariant_is_minus_cyclic_momentum(case):
    for seed in range(3):
        sc = random_scenario(case, seed)
        traj = integrate(sc.field(), sc.initial_conditions[0], sc.simulation_end, output_dt=sc.simulation_end / 10)
        for k in range(len(traj)):
            s = traj.state(k)
            p = cyclic_momentum(sc.spec, sc.field_profile, s)
            assert abs(traj.I[k] + p) <= 1e-9 * (1 + abs(p))


def test_swapped_case_c_momentum():
    spec = SymmetrySpec.case_c(a1="1 + 0.5*t", a2="0", window=(0, 2))
    prof = FieldProfile(psi="xbar + 0.2*xbar*ybar", Vbar="0.5*xbar^2")
    traj = integrate(build_field(spec, prof, **WIDE), State(0, 0.3, 0.4, 0.2, -0.1), 2.0, output_dt=0.2)
    assert traj.max_drift <= 1e-7
    for k in range(len(traj)):
        assert abs(traj.I[k] + cyclic_momentum(spec, prof, traj.state(k))) <= 1e-9


@pytest.mark.parametrize("case", ["A", "B", "C"])
def test_conservation(case):
    for seed in range(3):
        sc = random_scenario(case, 100 + seed)
        for traj in integrate_many(sc.field(), sc.initial_conditions, sc.simulation_end):
            assert traj.max_drift <= 1e-7


@pytest.mark.parametrize("case", ["A", "B", "C"])
def test_broken_symmetry_drifts(case):
    drifts = []
    for seed in range(3):
        sc = random_scenario(case, seed)
        f = sc.field().perturbed("E1", "x*y + t*y", 1e-2)
        drifts += [integrate(f, s, sc.simulation_end).max_drift for s in sc.initial_conditions]
    assert max(drifts) >= 1e-4


def test_euler_lagrange_residual():
    """d/dt (v + A) - grad(v.A - V) vanishes along the computed motion."""
    sc = random_scenario("C", 2)
    pots = build_potentials(sc.spec, sc.field_profile.with_gauge("x*y*t"))
    dt = 1e-2
    traj = integrate(sc.field(), sc.initial_conditions[1], sc.simulation_end, output_dt=dt)
    t, x, y, vx, vy = traj.t[:-1], traj.x[:-1], traj.y[:-1], traj.vx[:-1], traj.vy[:-1]
    A1, A2, _, _ = pots.evaluate(x, y, t)
    p1, p2 = vx + A1, vy + A2

    def lagr(xx, yy):
        a1, a2, V, _ = pots.evaluate(xx, yy, t)
        return 0.5 * (vx**2 + vy**2) + vx * a1 + vy * a2 - V

    h = 1e-5
    Lx = (lagr(x + h, y) - lagr(x - h, y)) / (2 * h)
    Ly = (lagr(x, y + h) - lagr(x, y - h)) / (2 * h)
    k = np.arange(2, t.size - 2)
    dp1 = sum(w * p1[k + o] for w, o in zip(FIVE_POINT, (-2, -1, 0, 1, 2))) / dt
    dp2 = sum(w * p2[k + o] for w, o in zip(FIVE_POINT, (-2, -1, 0, 1, 2))) / dt
    assert np.max(np.abs(dp1 - Lx[k])) <= 1e-6
    assert np.max(np.abs(dp2 - Ly[k])) <= 1e-6


# -- case A canonical frame ------------------------------------------------------


class TestCanonicalA:
    def test_free_motion_is_straight(self):
        spec = SymmetrySpec.case_a(rho="1 + 0.2*t", omega="0.3", window=(0, 2))
        prof = FieldProfile(Bbar="0", Vbar="0")
        traj = canonical_dynamics_A(spec, prof, CanonicalState(0.0, 0.1, 0.2, 0.5, -0.3), 1.0)
        assert np.allclose(traj.x, 0.1 + 0.5 * traj.t, atol=1e-13)
        assert np.allclose(traj.y, 0.2 - 0.3 * traj.t, atol=1e-13)
        assert traj.canonical

    def test_state_round_trip(self):
        sc = random_scenario("A", 1)
        s = State(0.4, 0.3, -0.2, 0.5, 0.1)
        back = canonical_to_state(sc.spec, state_to_canonical(sc.spec, s))
        assert np.allclose(back.vector, s.vector, atol=1e-12) and back.t == pytest.approx(0.4, abs=1e-12)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_commuting_diagram(self, seed):
        sc = random_scenario("A", seed)
        spec, prof = sc.spec, sc.field_profile
        s0 = sc.initial_conditions[0]
        phys = integrate(sc.field(), s0, sc.simulation_end, output_dt=sc.simulation_end / 20)
        tbar = spec.frame.values(phys.t)[0]
        can = canonical_dynamics_A(spec, prof, state_to_canonical(spec, s0), float(tbar[-1]), tbar_eval=tbar)
        assert can.max_drift <= 1e-8
        for k in range(len(phys)):
            cs = state_to_canonical(spec, phys.state(k))
            got = np.array([cs.xbar, cs.ybar, cs.vxbar, cs.vybar])
            want = np.array([can.x[k], can.y[k], can.vx[k], can.vy[k]])
            assert np.max(np.abs(got - want)) <= 1e-6

    def test_mapped_canonical_motion_obeys_lorentz(self):
        sc = random_scenario("A", 4)
        spec, prof, f = sc.spec, sc.field_profile, sc.field()
        s0 = sc.initial_conditions[2]
        tb_end = float(spec.frame.values(sc.simulation_end * 0.9)[0])
        d = 1e-3
        c0 = state_to_canonical(spec, s0)
        tbar = output_times(c0.tbar, tb_end, d)
        can = canonical_dynamics_A(spec, prof, c0, tb_end, tbar_eval=tbar)
        for j in range(1, (len(can) - 3) // 50):
            ks = [50 * j + o for o in (-2, -1, 0, 1, 2)]
            ss = [canonical_to_state(spec, CanonicalState(tbar[k], can.x[k], can.y[k], can.vx[k], can.vy[k])) for k in ks]
            dts = sum(w * s.t for w, s in zip(FIVE_POINT, ss)) / d
            dvx = sum(w * s.vx for w, s in zip(FIVE_POINT, ss)) / d / dts
            dvy = sum(w * s.vy for w, s in zip(FIVE_POINT, ss)) / d / dts
            _, _, ax, ay = lorentz_rhs(f, ss[2])
            assert abs(dvx - ax) <= 1e-6 * (1 + abs(ax)) and abs(dvy - ay) <= 1e-6 * (1 + abs(ay))

    def test_wrong_case(self):
        with pytest.raises(SymmetryError):
            canonical_dynamics_A(SymmetrySpec.case_c(), FieldProfile(psi="0", Vbar="0"), CanonicalState(0, 0, 0, 0, 0), 1.0)
