"""R-hat and ESS of HDBEN on one simulated replicate.

Defaults follow the full profile (5,000 iterations, 1,000 burn-in, 3 chains)
at n=200, d=100.
"""
import argparse
import time

import numpy as np

from hdben.diagnostics import summarize
from hdben.samplers import fit_hdben
from hdben.simulation import ScenarioSpec, generate_dataset, method_seed


def run():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=200)
    ap.add_argument("--d", type=int, default=100)
    ap.add_argument("--profile", default="full", choices=("desk", "full"))
    ap.add_argument("--kernel", default="hmc", choices=("hmc", "langevin", "random_walk"))
    ap.add_argument("--replicate", type=int, default=0)
    args = ap.parse_args()
    spec = ScenarioSpec(n=args.n, d=args.d, sampler_options={"gamma_kernel": args.kernel})
    spec = spec.with_profile(args.profile)
    data = generate_dataset(spec, args.replicate)
    start = time.perf_counter()
    cfg = spec.sampler_config(method_seed(spec, args.replicate, "hdben"))
    draws = fit_hdben(data, spec.hyper(), cfg)
    s = summarize(draws)
    print(f"{args.kernel}: {time.perf_counter() - start:.1f}s, gamma acceptance {s.mh_acceptance:.3f}")
    for name, block in (("beta", s.beta), ("gamma", s.gamma)):
        print(f"{name}: max R-hat {block.rhat.max():.4f}, ESS min {block.ess.min():.0f}, "
              f"10th pct {np.percentile(block.ess, 10):.0f}, share > 1000 {np.mean(block.ess > 1000):.2f}")


if __name__ == "__main__":
    run()
