"""Worst case over a packing of Massart problems, for several margins h.

For each h the packing scale is d(1-h)/(n h^2); each packing member defines
a Massart problem and net ERM is run on all of them.  The worst mean excess
risk is printed between the lower reference and the log-concave upper rate.

    python3 demos/adversarial_family.py [--trials 100] [--n 400]
"""

import argparse
import math

from excessrisk import domain, harness


def main(trials, n):
    d = 2
    cls = domain.homogeneous_halfspaces(d, 720)
    print(f"d={d}, n={n}, {trials} trials per packing member")
    print("    h   B=1/h    eps    lower    observed   upper   constant")
    for h in (0.25, 0.5, 0.75, 1.0):
        if 1 / h > math.sqrt(n / d):
            print(f"  {h:.2f}  skipped: B exceeds sqrt(n/d)")
            continue
        cache: dict = {}

        def factory(spec, B=1 / h):
            return harness.NetErmLearner(cls, spec, 1.0, B, 0.05, fp_cache=cache)

        rep = harness.adversarial_family_eval(factory, d, h, n, packing_size=6, trials=trials)
        print(f"  {h:.2f}  {1 / h:5.2f}  {rep.eps:.4f}  {rep.lower_reference:.4f}   "
              f"{rep.observed:.4f}    {rep.upper_value:.4f}  {rep.fitted_constant:.3f}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--trials", type=int, default=100)
    ap.add_argument("--n", type=int, default=400)
    args = ap.parse_args()
    main(args.trials, args.n)
