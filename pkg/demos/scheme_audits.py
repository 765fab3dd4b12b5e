"""Which compression schemes are stable, and which are homogeneous?

Audits every scheme in the catalogue on seeded realizable samples, shows a
counterexample for the deliberately order-dependent first-k scheme, and
counts psi (the number of removed subsets on which the reconstruction errs
everywhere) for a small interval sample.

    python3 demos/scheme_audits.py [--samples 100]
"""

import argparse

from excessrisk import compression as comp
from excessrisk import harness
from excessrisk.domain import Sample


def audits(count):
    print(f"{'scheme':<11} valid  perm-inv  stable  homogeneous  max|C|  k")
    for name in ("intervals", "rectangles", "svm", "halving", "perceptron", "first-k"):
        d = 1 if name in ("intervals", "first-k") else 2
        scheme = harness.make_scheme(name, d)
        rep = comp.audit(scheme, harness.audit_samples(name, count, seed=0, d=d))
        print(f"{name:<11} {rep.valid!s:<6} {rep.permutation_invariant!s:<9} {rep.stable!s:<7} "
              f"{rep.homogeneous!s:<12} {rep.max_size:<7} {scheme.k}")
        if name == "first-k" and rep.counterexample:
            ce = rep.counterexample
            print(f"  first failing check: {ce['check']} on sample seed {ce['sample_seed']}")


def psi_demo():
    s = Sample([[0.0], [0.1], [0.2], [0.3], [0.4], [0.5], [0.6]], [-1, 1, 1, 1, 1, -1, -1])
    scheme = comp.IntervalClosureScheme()
    print("\npsi counts for the interval scheme on 7 points (k=2):")
    for p in (1, 2, 3):
        res = comp.count_psi(scheme, s, p)
        print(f"  p={p}: psi={res.value}  stable bound k^p={comp.psi_bound_stable(2, p)}"
              f"  homogeneous bound C(k+p,p)={comp.psi_bound_homogeneous(2, p)}  subsets {res.subsets}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--samples", type=int, default=100)
    args = ap.parse_args()
    audits(args.samples)
    psi_demo()
