import copy
import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from noetherem.cli import main
from noetherem.dynamics import Trajectory
from noetherem.scenario import ScenarioError, load_scenario, random_scenario, scenario_from_dict
from noetherem.symmetry import CanonicalCoords, from_canonical

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"
PASSING = ["caseA_static", "cyclotron", "caseA_timedep", "caseB_uniform", "caseB_general", "caseC_free", "caseC_general"]

BASE = {
    "case": "C",
    "symmetry": {"a1": "0", "a2": "1"},
    "profile": {"psi": "xbar", "Vbar": "0.5*xbar^2"},
    "windows": {"t": [0, 1], "x": [-2, 2], "y": [-2, 2]},
    "initial_conditions": [{"x": 0.1, "y": 0.2, "vx": 0.3, "vy": 0.0}],
    "grid": {"nx": 6, "ny": 6, "nt": 3},
}


def write(tmp_path, data, name="s.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return str(p)


def run(*argv):
    return main([str(a) for a in argv])


@pytest.mark.parametrize("name", PASSING)
def test_demo_verify_and_simulate(name, tmp_path):
    path = SCENARIOS / f"{name}.json"
    assert run("verify", "--scenario", path, "--out", tmp_path) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["all_passed"] and len(report["reports"]) >= 4
    assert run("simulate", "--scenario", path, "--out", tmp_path) == 0
    summary = json.loads((tmp_path / "simulation.json").read_text())
    assert all(r["max_relative_drift"] <= 1e-7 for r in summary["trajectories"])


def test_perturbed_demo_fails_magnetic_condition(tmp_path):
    assert run("verify", "--scenario", SCENARIOS / "caseA_perturbed.json", "--out", tmp_path) == 1
    report = json.loads((tmp_path / "report.json").read_text())
    failing = [r["identity"] for r in report["reports"] if not r["passed"]]
    assert "noether_magnetic" in failing


def test_cyclotron_csv_closes(tmp_path):
    assert run("simulate", "--scenario", SCENARIOS / "cyclotron.json", "--out", tmp_path) == 0
    traj = Trajectory.from_csv(tmp_path / "trajectory_0.csv")
    assert traj.t[-1] == pytest.approx(2 * math.pi / 1.5, abs=1e-15)
    assert math.hypot(traj.x[-1] - traj.x[0], traj.y[-1] - traj.y[0]) <= 1e-6


def test_time_dependent_demo_drift(tmp_path):
    sc = load_scenario(SCENARIOS / "caseA_timedep.json")
    assert sc.symmetry["rho"].replace(" ", "") == "sqrt(1+t^2)"
    assert run("simulate", "--scenario", SCENARIOS / "caseA_timedep.json", "--out", tmp_path) == 0
    summary = json.loads((tmp_path / "simulation.json").read_text())
    assert max(r["max_relative_drift"] for r in summary["trajectories"]) <= 1e-7


class TestInputErrors:
    def test_malformed_expression_names_field(self, tmp_path, capsys):
        data = copy.deepcopy(BASE)
        data["profile"]["psi"] = "xbar*("
        assert run("verify", "--scenario", write(tmp_path, data)) == 2
        assert "profile.psi" in capsys.readouterr().err

    def test_empty_initial_conditions(self, tmp_path, capsys):
        data = copy.deepcopy(BASE)
        data["initial_conditions"] = []
        assert run("simulate", "--scenario", write(tmp_path, data), "--out", tmp_path) == 2
        assert "initial_conditions" in capsys.readouterr().err

    def test_invalid_json_location(self, tmp_path, capsys):
        p = tmp_path / "bad.json"
        p.write_text('{\n  "case": "C",\n  oops\n}')
        assert run("verify", "--scenario", p) == 2
        assert "bad.json:3:" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert run("verify", "--scenario", tmp_path / "none.json") == 2

    def test_bad_flags(self):
        assert run("verify") == 2
        assert run("nonsense", "--scenario", "x") == 2
        assert run("verify", "--scenario", SCENARIOS / "caseC_free.json", "--threads", "0") == 2

    @pytest.mark.parametrize(
        "mutate, where",
        [
            (lambda d: d.update(case="D"), "case"),
            (lambda d: d["symmetry"].pop("a2"), "symmetry.a2"),
            (lambda d: d["symmetry"].update(rho="1"), "symmetry.rho"),
            (lambda d: d["symmetry"].update(a1="x"), "symmetry.a1"),
            (lambda d: d["profile"].update(psi="t"), "profile.psi"),
            (lambda d: d["windows"].update(t=[1, 1]), "windows.t"),
            (lambda d: d["grid"].update(nx=1), "grid.nx"),
            (lambda d: d["initial_conditions"][0].pop("vy"), "initial_conditions[0].vy"),
            (lambda d: d["initial_conditions"][0].update(x=9), "initial_conditions[0]"),
            (lambda d: d.update(extra=1), "extra"),
            (lambda d: d["tolerances"].update(drift=-1) if "tolerances" in d else d.update(tolerances={"drift": -1}), "tolerances.drift"),
            (lambda d: d["symmetry"].update(a2="t - 0.5"), "symmetry"),
        ],
    )
    def test_validation_names_field(self, mutate, where):
        data = copy.deepcopy(BASE)
        mutate(data)
        with pytest.raises(ScenarioError) as info:
            scenario_from_dict(data)
        assert info.value.where == where


class TestTransform:
    def scenario(self, tmp_path, case, symmetry, profile):
        data = {**copy.deepcopy(BASE), "case": case, "symmetry": symmetry, "profile": profile}
        data["windows"]["t"] = [0, 6]
        return write(tmp_path, data, f"{case}.json")

    def transform(self, capsys, path, x, y, t):
        assert run("transform", "--scenario", path, x, y, t) == 0
        return json.loads(capsys.readouterr().out)

    def test_identity(self, tmp_path, capsys):
        path = self.scenario(tmp_path, "A", {"rho": "1", "omega": "0", "alpha1": "0", "alpha2": "0"}, {"Bbar": "1", "Vbar": "0"})
        out = self.transform(capsys, path, 1, 2, 3)
        assert (out["xbar"], out["ybar"]) == (1.0, 2.0)
        assert out["tbar"] == pytest.approx(3.0, abs=1e-9)
        assert (out["tau"], out["eta1"], out["eta2"]) == (1.0, 0.0, 0.0)

    def test_rotation(self, tmp_path, capsys):
        path = self.scenario(tmp_path, "B", {"beta1": "0", "beta2": "0"}, {"psi": "0", "Vbar": "0"})
        out = self.transform(capsys, path, 0, 2, 5)
        assert out["xbar"] == pytest.approx(2.0) and out["ybar"] == 5.0
        assert out["tbar"] == pytest.approx(math.pi / 2)
        assert (out["tau"], out["eta1"], out["eta2"]) == (0.0, -2.0, 0.0)

    @pytest.mark.parametrize("case", ["A", "B", "C"])
    def test_round_trip(self, case, tmp_path, capsys):
        sc = random_scenario(case, 9)
        data = sc.to_dict()
        path = write(tmp_path, data)
        rng = np.random.default_rng(1)
        for _ in range(3):
            x, y = rng.uniform(-1, 1, 2)
            t = float(rng.uniform(*sc.t_window))
            out = self.transform(capsys, path, repr(float(x)), repr(float(y)), repr(t))
            xx, yy = from_canonical(sc.spec, CanonicalCoords(out["xbar"], out["ybar"], out["tbar"]), t)
            assert abs(xx - x) <= 1e-9 and abs(yy - y) <= 1e-9


def test_reports_byte_stable(tmp_path):
    path = SCENARIOS / "caseB_general.json"
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    for d in (a, b):
        assert run("verify", "--scenario", path, "--out", d) == 0
        assert run("simulate", "--scenario", path, "--out", d) == 0
    for name in ("report.json", "simulation.json", "trajectory_0.csv", "trajectory_1.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert run("verify", "--scenario", path, "--out", c, "--threads", "4") == 0
    ra, rc = (json.loads((d / "report.json").read_text()) for d in (a, c))
    assert rc.pop("threads") == 4 and ra.pop("threads") == 1
    assert ra == rc


def test_scenario_dump_round_trip(tmp_path):
    sc = random_scenario("A", 2)
    back = load_scenario(sc.dump(tmp_path / "r.json"))
    assert back.to_dict() == sc.to_dict()


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "noetherem", "verify", "--scenario", str(SCENARIOS / "caseC_free.json"), "--out", str(tmp_path)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert "PASS noether_magnetic" in proc.stdout
