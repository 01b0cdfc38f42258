"""Squared error of HDBEN against the rate (s_beta + s_gamma) ln d / n over a range of n."""
import argparse

import numpy as np

from hdben.diagnostics import contraction_ratio
from hdben.simulation import ScenarioSpec, run_grid


def run():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--d", type=int, default=100)
    ap.add_argument("--s", type=int, default=5, help="s_beta = s_gamma")
    ap.add_argument("--ns", default="100,200,400")
    ap.add_argument("--replicates", type=int, default=5)
    args = ap.parse_args()
    print("n, mean squared error, implied constant")
    for n in (int(v) for v in args.ns.split(",")):
        spec = ScenarioSpec(n=n, d=args.d, s_beta=args.s, s_gamma=args.s,
                            replicates=args.replicates, methods=("hdben",))
        res = run_grid([spec])[0]
        err_sq = float(np.mean([r.l2_error**2 for r in res.method_records("hdben")]))
        print(f"{n}, {err_sq:.4f}, {contraction_ratio(err_sq, n, args.d, args.s, args.s):.3f}")


if __name__ == "__main__":
    run()
