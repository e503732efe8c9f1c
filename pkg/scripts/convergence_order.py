"""Observed order of the Runge-Kutta integrator by fixed-step halving.

Runs each random scenario with steps h, h/2, h/4, ... and compares the end
state against a tight adaptive reference.  Prints the error table and the
observed orders log2(err(h) / err(h/2)).
"""

import argparse

import numpy as np

from noetherem.dynamics import integrate
from noetherem.scenario import random_scenario


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--cases", default="ABC")
    p.add_argument("--seeds", type=int, default=3)
    p.add_argument("--h0", type=float, default=0.1)
    p.add_argument("--levels", type=int, default=4)
    args = p.parse_args()

    print(f"{'scenario':<14} " + " ".join(f"{'h=' + format(args.h0 / 2**k, '.4g'):>12}" for k in range(args.levels)) + "   orders")
    for case in args.cases:
        for seed in range(args.seeds):
            sc = random_scenario(case, seed)
            f, s0, t_end = sc.field(), sc.initial_conditions[0], sc.simulation_end
            span = t_end - s0.t
            ref = integrate(f, s0, t_end, tol=1e-14, output_dt=span, invariant=False).state(-1).vector
            errs = []
            for k in range(args.levels):
                tr = integrate(f, s0, t_end, fixed_step=args.h0 / 2**k, output_dt=span, invariant=False)
                errs.append(float(np.max(np.abs(tr.state(-1).vector - ref))))
            orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
            print(f"{sc.name:<14} " + " ".join(f"{e:12.3e}" for e in errs) + "   " + " ".join(f"{o:5.2f}" for o in orders))


if __name__ == "__main__":
    main()
