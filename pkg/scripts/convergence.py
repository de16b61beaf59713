"""Grid-oracle and eigen-solver error against closed forms as the grid doubles.

    python3 scripts/convergence.py --out out/convergence
"""

import argparse
import csv
import os
import sys

import numpy as np

from fellerx import extended_resolvent, solve_eigen
from fellerx.fixtures import all_cases
from fellerx.grid_oracle import discretize, solve_resolvent

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "tests"))
import oracles as O  # noqa: E402

# (p1, p2, p3), (q1, q2, q3), p4 atoms, q4 atoms for the Brownian fixtures
BM_DATA = {
    "bm_sticky_both": ((0, 1, 1), (0, 1, 1), (), ()),
    "bm_sticky_killed": ((0, 1, 1), (1, 0, 0), (), ()),
    "bm_jump_elastic": ((0.5, 1, 0), (0, 1, 0.5), ((0.5, 0.7), (1.0, 0.3)), ((0.25, 1.0), (0.0, 0.2))),
}


def sup_error(fn, ref, xs):
    return max(abs(fn(x) - float(ref(x))) for x in xs)


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--r", type=float, default=0.5)
    p.add_argument("--nodes", default="251,501,1001,2001,4001")
    p.add_argument("--out", default="out/convergence")
    args = p.parse_args()
    sizes = [int(t) for t in args.nodes.split(",")]
    cases = {fx.name: fx for fx in all_cases()}

    rows = []
    for name, (pp, qq, p4, q4) in BM_DATA.items():
        fx = cases[name]
        ref = O.bm_extended(pp, qq, args.r, 1.0, 0.5, 3.0, p4, q4)
        xs = np.linspace(0, 1, 51)
        prev = {}
        for n in sizes:
            sol = solve_resolvent(discretize(fx.spec, fx.data, n), fx.g, args.r)
            er = extended_resolvent(fx.data, fx.spec, solve_eigen(fx.spec, args.r, n), fx.g)
            errs = {"grid": sup_error(sol, ref, xs), "analytic": sup_error(er, ref, xs)}
            for method, e in errs.items():
                ratio = prev[method] / e if method in prev else np.nan
                rows.append((name, method, n, e, ratio))
                print(f"{name:18s} {method:8s} n={n:5d}  sup error {e:.3e}  ratio {ratio:.2f}")
            prev = errs

    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "convergence.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["fixture", "method", "nodes", "sup_error", "ratio"])
        w.writerows(rows)


if __name__ == "__main__":
    main()
