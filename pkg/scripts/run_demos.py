"""Run verify and simulate on every shipped scenario and print a summary table."""

import argparse
import json
from pathlib import Path

from noetherem.cli import run_simulate, run_verify
from noetherem.scenario import load_scenario

ROOT = Path(__file__).resolve().parent.parent


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--scenarios", default=str(ROOT / "scenarios"))
    p.add_argument("--out", default=str(ROOT / "out"))
    p.add_argument("--threads", type=int, default=1)
    args = p.parse_args()

    quiet = lambda *_: None
    print(f"{'scenario':<18}{'verify':>8}{'worst residual/tol':>22}{'simulate':>10}{'max drift':>12}")
    for path in sorted(Path(args.scenarios).glob("*.json")):
        sc = load_scenario(path)
        out = Path(args.out) / sc.name
        v = run_verify(sc, out, args.threads, log=quiet)
        report = json.loads((out / sc.outputs.report).read_text())
        worst = max(r["max_abs"] / (r["tol"] * r["scale"]) for r in report["reports"])
        s = run_simulate(sc, out, args.threads, log=quiet)
        summary = json.loads((out / sc.outputs.summary).read_text())
        drift = max(r["max_relative_drift"] for r in summary["trajectories"])
        print(f"{sc.name:<18}{v:>8}{worst:>22.3e}{s:>10}{drift:>12.3e}")
    print("exit codes: 0 pass, 1 failed checks")


if __name__ == "__main__":
    main()
