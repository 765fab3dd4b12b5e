"""Acceptance suite: one test per criterion, each logging a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v``; the summary block at
the end lists every criterion.
"""

import itertools
import math

import numpy as np
import pytest

from excessrisk import compression as comp
from excessrisk import domain, entropy, harness
from excessrisk.domain import Sample
from excessrisk.entropy import MetricCloud

N_GRID = [100, 200, 400, 800, 1600]


def test_criterion_1_svm_expectation(acceptance_log):
    spec = domain.realizable(domain.uniform_ball(2), domain.AffineHalfspace([1.0, 0.5], 0.1))
    table = harness.run_trials(harness.SchemeLearner(harness.make_scheme("svm", 2)), spec,
                               [99], 2000, master_seed=0)
    rep = harness.verify_bound(table, "k_over_n_plus_1", 0.05, {"k": 3})
    row = rep.per_n[0]
    ok = rep.holds and table.failed() == 0
    acceptance_log("1", ok, f"SVM n=99: mean {row['mean']:.4f} + 3se {3 * row['stderr']:.4f} "
                            f"<= {row['bound']:.4f} ({row['trials']} trials, {table.failed()} failed)")
    assert ok


def test_criterion_2_interval_deviation(acceptance_log):
    spec = domain.realizable(domain.uniform_ball(1), domain.Interval(-0.3, 0.4))
    table = harness.run_trials(harness.SchemeLearner(comp.IntervalClosureScheme()), spec,
                               [200], 5000, master_seed=0)
    rep = harness.verify_bound(table, "stable_deviation", 0.05, {"k": 2})
    row = rep.per_n[0]
    acceptance_log("2", rep.holds, f"intervals n=200: 95% quantile {row['quantile']:.4f} "
                                   f"<= {row['bound']:.4f}")
    assert rep.holds
    assert row["bound"] == pytest.approx(0.0814, abs=5e-4)


def _interval_configs(n):
    x = np.arange(n, dtype=float)[:, None]
    yield Sample(x, -np.ones(n))
    for a in range(n):
        for b in range(a, n):
            y = np.where((np.arange(n) >= a) & (np.arange(n) <= b), 1.0, -1.0)
            yield Sample(x, y)


def _rect_labelings(P):
    sets = {frozenset()}
    xs, ys = sorted(set(P[:, 0])), sorted(set(P[:, 1]))
    for a, b in itertools.combinations_with_replacement(xs, 2):
        for c, d in itertools.combinations_with_replacement(ys, 2):
            inside = (P[:, 0] >= a) & (P[:, 0] <= b) & (P[:, 1] >= c) & (P[:, 1] <= d)
            sets.add(frozenset(np.flatnonzero(inside).tolist()))
    return sets


def _symmetry_class_reps(n):
    """One permutation per orbit of the 8 axis flips / swaps (psi depends only on the order type)."""
    seen, reps = set(), []
    for perm in itertools.permutations(range(n)):
        if perm in seen:
            continue
        orbit = set()
        for p in (perm, tuple(np.argsort(perm))):
            for q in (p, p[::-1]):
                for r in (q, tuple(n - 1 - v for v in q)):
                    orbit.add(tuple(int(v) for v in r))
        seen |= orbit
        reps.append(perm)
    return reps


def _rect_configs(n, rng):
    if n <= 6:
        perms = _symmetry_class_reps(n)
    else:
        perms = [tuple(rng.permutation(n)) for _ in range({7: 6, 8: 2}[n])]
    for perm in perms:
        P = np.column_stack([np.arange(n), perm]).astype(float)
        for S in sorted(_rect_labelings(P), key=sorted):
            yield Sample(P, np.array([1.0 if i in S else -1.0 for i in range(n)]))


def test_criterion_3_psi_counting(acceptance_log):
    rng = np.random.default_rng(0)
    violations, checked, worst = 0, 0, {}
    for scheme, configs in ((comp.IntervalClosureScheme(), _interval_configs),
                            (comp.RectangleClosureScheme(2), lambda n: _rect_configs(n, rng))):
        for n in range(2, 9):
            for s in configs(n):
                for p in (1, 2, 3):
                    if n - p < 1:
                        continue
                    v = comp.count_psi(scheme, s, p).value
                    checked += 1
                    key = (scheme.scheme_id, p)
                    worst[key] = max(worst.get(key, 0), v)
                    if v > comp.psi_bound_stable(scheme.k, p) or v > comp.psi_bound_homogeneous(scheme.k, p):
                        violations += 1
    detail = ", ".join(f"{sid} p={p}: max {v}" for (sid, p), v in sorted(worst.items()))
    acceptance_log("3", violations == 0, f"{checked} psi counts, {violations} violations ({detail})")
    assert violations == 0


def test_criterion_4_audits(acceptance_log):
    results = {}
    for name in ("intervals", "rectangles", "svm", "halving"):
        d = 1 if name == "intervals" else 2
        samples = harness.audit_samples(name, 200, seed=0, d=d)
        results[name] = comp.audit(harness.make_scheme(name, d), samples)
    ok = (all(results[s].stable and results[s].homogeneous and results[s].valid
              for s in ("intervals", "rectangles"))
          and results["svm"].stable and results["svm"].valid
          and results["halving"].stable and results["halving"].max_size <= 4)
    detail = "; ".join(f"{k}: stable={r.stable} homogeneous={r.homogeneous} max|C|={r.max_size}"
                       for k, r in results.items())
    acceptance_log("4", ok, detail)
    assert ok


def test_criterion_5_formulas(acceptance_log):
    fw = harness.bound_value("floyd_warmuth", 105, 0.05, k=5)
    pol = harness.bound_value("pol", 300, 0.1, k=3)
    ok = abs(fw - 0.2322) <= 5e-4 and abs(pol - 0.0646) <= 5e-4
    acceptance_log("5", ok, f"Floyd-Warmuth {fw:.5f} (0.2322), polynomial tail {pol:.5f} (0.0646)")
    assert ok


def _brute_cover(D, eps):
    n = len(D)
    for size in range(1, n + 1):
        for centers in itertools.combinations(range(n), size):
            if np.all((D[list(centers)] <= eps + 1e-12).any(axis=0)):
                return size


def test_criterion_6_entropy_oracles(acceptance_log):
    rng = np.random.default_rng(6)
    greedy_optimal, sandwich_fail, exact_fail, chain_fail = 0, 0, 0, 0
    for _ in range(50):
        n, m = rng.integers(2, 13), rng.integers(2, 17)
        V = (rng.random((n, m)) < 0.5).astype(float) if rng.random() < 0.5 else rng.random((n, m))
        w = rng.random(m) + 0.05
        cloud = MetricCloud(V, w / w.sum())
        eps = float(rng.uniform(0.05, 0.4))
        ex = entropy.covering_number(cloud, eps, "exact")
        gr = entropy.covering_number(cloud, eps, "greedy")
        exact_fail += ex != _brute_cover(cloud.distances, eps)
        greedy_optimal += gr == ex
        sandwich_fail += not (ex <= gr <= ex * (1 + math.log(16)))
        for delta in (2.0, 4.0, 8.0):
            for bracketing in (True, False):
                chain_fail += not entropy.chaining_check(cloud, eps, 1.0, 1.0, delta, bracketing)["holds"]
    ok = sandwich_fail == 0 and exact_fail == 0 and chain_fail == 0
    acceptance_log("6", ok, f"50 clouds: greedy optimal on {greedy_optimal}, exact != brute force "
                            f"{exact_fail}, sandwich failures {sandwich_fail}, chain failures {chain_fail}")
    assert ok


def test_criterion_7_local_entropy_halfspaces(acceptance_log):
    cls = domain.homogeneous_halfspaces(2, 720)
    spec = domain.realizable(domain.uniform_sphere(2), cls[0])
    cloud = entropy.build_cloud(cls, spec, m=2880, mode="loss-class", lattice=True)
    eps = [0.05, 0.1, 0.2, 0.4]
    prof = entropy.local_entropy_profile(cloud, eps)
    ratio = float(max(prof.dloc) / min(prof.dloc))
    ok = ratio <= 2.0
    vals = ", ".join(f"{e:g}: {v:.3f}" for e, v in zip(eps, prof.dloc))
    acceptance_log("7", ok, f"D_loc over eps ({vals}); max/min = {ratio:.3f} <= 2")
    assert ok


@pytest.fixture(scope="module")
def net_erm_table():
    cls = domain.homogeneous_halfspaces(2, 720)
    specs = [domain.massart(domain.uniform_ball(2), cls[j], 0.5)
             for j in harness.rotation_indices(len(cls), 20)]
    cache: dict = {}

    def factory(spec):
        return harness.NetErmLearner(cls, spec, 1.0, 2.0, 0.05, fp_cache=cache,
                                     check_decompositions=True)

    return harness.run_family(factory, specs, N_GRID, 1000, master_seed=0)


def test_criterion_8a_net_erm_rate(acceptance_log, net_erm_table):
    fit = harness.rate_fit(net_erm_table)
    ok = -1.15 <= fit.slope <= -0.85
    means = ", ".join(f"{v:.4g}" for v in fit.values)
    acceptance_log("8a", ok, f"net ERM slope {fit.slope:.3f} +- {fit.stderr:.3f} (means {means})")
    assert ok


def test_criterion_8b_interval_rate(acceptance_log):
    spec = domain.realizable(domain.uniform_ball(1), domain.Interval(-0.3, 0.4))
    table = harness.run_trials(harness.SchemeLearner(comp.IntervalClosureScheme()), spec,
                               N_GRID, 1000, master_seed=0)
    fit = harness.rate_fit(table, column="risk")
    ok = -1.15 <= fit.slope <= -0.85
    acceptance_log("8b", ok, f"interval scheme slope {fit.slope:.3f} +- {fit.stderr:.3f}")
    assert ok


def test_criterion_9_decompositions(acceptance_log, net_erm_table):
    checks = net_erm_table.checks
    ok = set(checks) == {"net_decomposition", "aggregation"} and all(p == t for p, t in checks.values())
    detail = ", ".join(f"{k} {p}/{t}" for k, (p, t) in sorted(checks.items()))
    acceptance_log("9", ok, detail)
    assert ok


def test_criterion_10_adversarial_sandwich(acceptance_log):
    cls = domain.homogeneous_halfspaces(2, 720)
    cache: dict = {}

    def factory(spec):
        return harness.NetErmLearner(cls, spec, 1.0, 4.0, 0.05, fp_cache=cache)

    rep = harness.adversarial_family_eval(factory, 2, 0.25, 400, packing_size=8, trials=200)
    ok = rep.sandwich_ok and rep.observed >= 0 and rep.fitted_constant <= 10
    acceptance_log("10", ok, f"observed {rep.observed:.4f}; lower ref {rep.lower_reference:.4f}; "
                             f"upper {rep.upper_value:.4f}; fitted constant {rep.fitted_constant:.3f}")
    assert ok
