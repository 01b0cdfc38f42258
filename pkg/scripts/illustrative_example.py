"""Three-coordinate heteroscedastic example: HDBEN against the Bayesian lasso.

beta0 = (2, 1, 0.5), gamma0 = (1.5, 0.5, 0).  Prints posterior means and 95%
intervals for beta from both fits and the HDBEN estimate of gamma.
"""
import argparse

import numpy as np

from hdben.baselines import HomoBayesConfig, fit_blasso
from hdben.diagnostics import summarize
from hdben.model import Dataset, GroundTruth
from hdben.samplers import SamplerConfig, fit_hdben


def report(name, block, truth):
    print(f"{name}")
    for j, t in enumerate(truth):
        lo, hi = block.q_low[j], block.q_high[j]
        print(f"  [{j}] truth {t:5.2f}  mean {block.mean[j]:6.3f}  "
              f"95% [{lo:6.3f}, {hi:6.3f}]  width {hi - lo:.3f}")


def run():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=200)
    ap.add_argument("--seed", type=int, default=2024)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    beta0, gamma0 = np.array([2.0, 1.0, 0.5]), np.array([1.5, 0.5, 0.0])
    x = rng.standard_normal((args.n, 3))
    y = x @ beta0 + np.exp(0.5 * x @ gamma0) * rng.standard_normal(args.n)
    data = Dataset(x, y, GroundTruth(beta0, gamma0))

    hd = summarize(fit_hdben(data, None, SamplerConfig(seed=args.seed)))
    bl = fit_blasso(data, None, HomoBayesConfig(seed=args.seed))
    report("HDBEN beta", hd.beta, beta0)
    report("HDBEN gamma", hd.gamma, gamma0)
    report("BLasso beta", summarize(bl).beta, beta0)
    print(f"HDBEN gamma acceptance {hd.mh_acceptance:.3f}, max beta R-hat {hd.beta.rhat.max():.3f}")


if __name__ == "__main__":
    run()
