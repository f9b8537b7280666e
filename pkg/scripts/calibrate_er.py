"""Calibrate the constants in front of sqrt(log(max(p, n)) / n) for LOVE.

Two tables:

* delta: fraction of replications in which the pure-variable partition is
  recovered exactly, for several delta scales and sample sizes;
* mu: median excess risk of the ER predictor for several mu scales, with
  PCR-K as a reference.

    python3 scripts/calibrate_er.py --reps 30
"""

import argparse

import numpy as np

from factorpred.er import ERConfig, fit_er, pure_var, second_moment
from factorpred.model import ERDesign, generate_er
from factorpred.predictors import fit_pcr
from factorpred.risk import exact_excess_risk


def recovered(data, k, m, scale):
    delta, _ = ERConfig(delta_scale=scale).resolve(data.n, data.p)
    part, _ = pure_var(second_moment(data.x), delta)
    truth = {frozenset(range(a * m, (a + 1) * m)) for a in range(k)}
    return {frozenset(g) for g in part} == truth


def delta_table(reps, scales, ns, k=5, m=5, p=500):
    print(f"exact partition recovery, K={k}, m={m}, p={p}, {reps} reps")
    print("scale  " + "  ".join(f"n={n:>5}" for n in ns))
    for s in scales:
        cells = []
        for n in ns:
            hits = sum(recovered(generate_er(ERDesign(k, m, p, n), seed=r)[1], k, m, s)
                       for r in range(reps))
            cells.append(f"{hits:>3}/{reps:<3}")
        print(f"{s:>5}  " + "  ".join(cells))


def mu_table(reps, scales, ks, n=300, m=5, p=500):
    print(f"\nmedian excess risk, n={n}, p={p}, m={m}, {reps} reps")
    print("mu scale  " + "  ".join(f"K={k:>3}" for k in ks))
    draws = {k: [generate_er(ERDesign(k, m, p, n), seed=r) for r in range(reps)] for k in ks}
    for s in scales:
        cells = []
        for k in ks:
            risks = []
            for theta, d in draws[k]:
                try:
                    _, pred = fit_er(d, ERConfig(mu_scale=s))
                    risks.append(exact_excess_risk(theta, pred.alpha))
                except Exception:
                    risks.append(np.inf)
            cells.append(f"{np.median(risks):7.3f}")
        print(f"{s:>8}  " + "  ".join(cells))
    ref = [np.median([exact_excess_risk(t, fit_pcr(d, None, k).alpha) for t, d in draws[k]])
           for k in ks]
    print(f"{'PCR-K':>8}  " + "  ".join(f"{v:7.3f}" for v in ref))


def main():
    ap = argparse.ArgumentParser(description="LOVE tuning-constant calibration")
    ap.add_argument("--reps", type=int, default=30)
    args = ap.parse_args()
    delta_table(args.reps, (0.75, 1.5, 2.0, 3.0, 4.0), (300, 2000))
    mu_table(args.reps, (0.25, 0.5, 1.0, 2.0, 4.0), (5, 20))


if __name__ == "__main__":
    main()
