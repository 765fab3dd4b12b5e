"""Compression schemes against their risk bounds.

Runs the SVM scheme and the interval closure scheme on realizable data and
prints empirical risk statistics next to the bound values.  Then shows how
majority-of-three relates to its three component reconstructions.

    python3 demos/compression_bounds.py [--trials 500]
"""

import argparse

import numpy as np

from excessrisk import compression as comp
from excessrisk import domain, harness


def svm_expectation(trials):
    spec = domain.realizable(domain.uniform_ball(2), domain.AffineHalfspace([1.0, 0.5], 0.1))
    learner = harness.SchemeLearner(harness.make_scheme("svm", 2))
    table = harness.run_trials(learner, spec, [24, 49, 99], trials, master_seed=1)
    print("SVM scheme, d=2, k=3: mean risk vs k/(n+1)")
    for n in table.ns:
        r = table.values(n)
        size = np.array([row.aux for row in table.select(n)])
        print(f"  n={n:4d}  mean {r.mean():.4f} +- {r.std(ddof=1) / np.sqrt(r.size):.4f}"
              f"   bound {harness.bound_value('k_over_n_plus_1', n, 0.05, k=3):.4f}"
              f"   mean |C| {size.mean():.2f}")


def interval_deviation(trials):
    spec = domain.realizable(domain.uniform_ball(1), domain.Interval(-0.3, 0.4))
    table = harness.run_trials(harness.SchemeLearner(comp.IntervalClosureScheme()), spec,
                               [50, 100, 200, 400], trials, master_seed=2)
    rep = harness.verify_bound(table, "stable_deviation", 0.05, {"k": 2})
    print("\nInterval scheme, k=2: 95% quantile vs e k ln(1/delta) / n")
    for row in rep.per_n:
        print(f"  n={row['n']:4d}  quantile {row['quantile']:.4f}   bound {row['bound']:.4f}"
              f"   ratio {row['ratio']:.2f}")
    fit = harness.rate_fit(table, column="risk")
    print(f"  log-log slope of the mean risk: {fit.slope:.3f} +- {fit.stderr:.3f}")


def majority_demo():
    spec = domain.realizable(domain.uniform_ball(1), domain.Interval(-0.3, 0.4))
    s = domain.generate_sample(spec, 31, seed=3)
    g = comp.majority_of_three(comp.IntervalClosureScheme(), s)
    print("\nMajority of three on n=31 (one example dropped to make thirds):")
    for j, f in enumerate(g.components, 1):
        print(f"  part {j}: [{f.lo:+.4f}, {f.hi:+.4f}]  risk {domain.true_risk(f, spec):.4f}")
    print(f"  vote risk {domain.true_risk(g, spec):.4f}, truncated {g.truncated}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--trials", type=int, default=500)
    args = ap.parse_args()
    svm_expectation(args.trials)
    interval_deviation(max(args.trials, 400))
    majority_demo()
