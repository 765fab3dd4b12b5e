import math
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from excessrisk import domain, entropy
from excessrisk.entropy import MetricCloud
from excessrisk.errors import CapacityError, ConfigurationError


def brute_cover(cloud, eps):
    """Smallest set of centers covering the cloud, by trying all subsets in size order."""
    n = len(cloud)
    D = np.array([[np.abs(cloud.vectors[i] - cloud.vectors[j]) @ cloud.weights if cloud.r == 1
                   else math.sqrt(((cloud.vectors[i] - cloud.vectors[j]) ** 2) @ cloud.weights)
                   for j in range(n)] for i in range(n)])
    for size in range(1, n + 1):
        for centers in combinations(range(n), size):
            if np.all((D[list(centers)] <= eps + 1e-12).any(axis=0)):
                return size
    raise AssertionError


def brute_brackets(cloud, eps, max_subset=4):
    """Fewest subset-spanned brackets (subsets of size <= 4) of width <= eps covering the cloud."""
    n = len(cloud)
    V, w = cloud.vectors, cloud.weights
    sets = []
    for size in range(1, max_subset + 1):
        for sub in combinations(range(n), size):
            lo, hi = V[list(sub)].min(axis=0), V[list(sub)].max(axis=0)
            if (hi - lo) @ w <= eps + 1e-12:
                inside = frozenset(i for i in range(n)
                                   if np.all(V[i] >= lo - 1e-12) and np.all(V[i] <= hi + 1e-12))
                sets.append(inside)
    for k in range(1, n + 1):
        for combo in combinations(sets, k):
            if frozenset().union(*combo) == frozenset(range(n)):
                return k
    raise AssertionError


@st.composite
def clouds(draw, max_n=8, max_m=6, r=1):
    n = draw(st.integers(1, max_n))
    m = draw(st.integers(1, max_m))
    binary = draw(st.booleans())
    seed = draw(st.integers(0, 2**31))
    rng = np.random.default_rng(seed)
    V = (rng.random((n, m)) < 0.5).astype(float) if binary else rng.random((n, m))
    w = rng.random(m) + 0.05
    return MetricCloud(V, w / w.sum(), r)


FIVE = MetricCloud(
    np.array([[0.0, 0.0, 1.0, 0.2], [0.1, 0.0, 0.9, 0.2], [1.0, 0.5, 0.0, 0.0],
              [0.9, 0.6, 0.1, 0.0], [0.5, 0.5, 0.5, 0.5]]),
    np.array([0.1, 0.2, 0.3, 0.4]),
)


class TestCloud:
    def test_finite_support_construction(self):
        atoms = [[0.0], [1.0]]
        cls = domain.finite_class([[1, 1], [1, -1], [-1, -1]], atoms)
        spec = domain.realizable(domain.finite_support([0.25, 0.75], atoms), cls[0])
        cloud = entropy.build_cloud(cls, spec, mode="loss-class")
        assert cloud.vectors.shape == (3, 2)
        assert np.allclose(cloud.weights, [0.25, 0.75])

    def test_excess_target_vector_is_zero(self):
        cls = domain.homogeneous_halfspaces(2, 12)
        spec = domain.massart(domain.uniform_sphere(2), cls[4], 0.5)
        cloud = entropy.build_cloud(cls, spec, mode="excess-loss-class", m=500)
        assert np.all(cloud.vectors[4] == 0)

    def test_loss_distances_are_half_raw(self):
        cls = domain.homogeneous_halfspaces(2, 12)
        spec = domain.realizable(domain.uniform_ball(2), cls[0])
        loss = entropy.build_cloud(cls, spec, m=400, seed=3, mode="loss-class")
        raw = entropy.build_cloud(cls, spec, m=400, seed=3, mode="raw-class")
        assert np.allclose(loss.distances, raw.distances / 2)

    def test_overflow(self):
        cls = domain.homogeneous_halfspaces(2, 10_000)
        spec = domain.realizable(domain.uniform_sphere(2), cls[0])
        entropy.build_cloud(cls, spec, m=4, mode="raw-class")
        big = domain.HypothesisClass("homogeneous-halfspace",
                                     list(cls) + [domain.HomogeneousHalfspace([1.0, 1e-3])], 2)
        with pytest.raises(ConfigurationError, match="10001"):
            entropy.build_cloud(big, spec, m=4)

    @settings(max_examples=60, deadline=None)
    @given(clouds())
    def test_metric_axioms(self, cloud):
        D = cloud.distances
        assert np.allclose(np.diag(D), 0)
        assert np.allclose(D, D.T)
        n = len(cloud)
        rng = np.random.default_rng(0)
        for _ in range(20):
            i, j, k = rng.integers(0, n, 3)
            assert D[i, k] <= D[i, j] + D[j, k] + 1e-12

    @settings(max_examples=30, deadline=None)
    @given(clouds(r=2))
    def test_l2_distances(self, cloud):
        for i in range(len(cloud)):
            for j in range(len(cloud)):
                assert cloud.distances[i, j] == pytest.approx(cloud.distance(i, j), abs=1e-9)


class TestCovering:
    def test_singleton(self):
        assert entropy.covering_number(MetricCloud([[0.3, 0.2]], [0.5, 0.5]), 0.01) == 1

    def test_equidistant_triple(self):
        V = np.array([[1.0, 0, 0], [0, 1.0, 0], [0, 0, 1.0]])
        cloud = MetricCloud(V, np.full(3, 1 / 3))
        assert np.allclose(cloud.distances[~np.eye(3, dtype=bool)], 2 / 3)
        cloud = MetricCloud(V * 0.75, np.full(3, 1 / 3))
        assert entropy.covering_number(cloud, 0.6, "exact") == 1

    def test_five_hypothesis_oracle(self):
        assert entropy.covering_number(FIVE, 0.2, "exact") == brute_cover(FIVE, 0.2)
        # frozen oracle value
        assert brute_cover(FIVE, 0.2) == 3

    def test_exact_cap(self):
        cloud = MetricCloud(np.random.default_rng(0).random((25, 3)), np.full(3, 1 / 3))
        with pytest.raises(CapacityError):
            entropy.covering_number(cloud, 0.1, "exact")

    @settings(max_examples=80, deadline=None)
    @given(clouds(), st.floats(0.01, 1.0))
    def test_exact_matches_brute_force(self, cloud, eps):
        assert entropy.covering_number(cloud, eps, "exact") == brute_cover(cloud, eps)

    @settings(max_examples=80, deadline=None)
    @given(clouds(max_n=12, max_m=8), st.floats(0.01, 1.0))
    def test_greedy_sandwich(self, cloud, eps):
        ex = entropy.covering_number(cloud, eps, "exact")
        gr = entropy.covering_number(cloud, eps, "greedy")
        assert ex <= gr <= ex * (1 + math.log(len(cloud)))

    @settings(max_examples=50, deadline=None)
    @given(clouds(max_n=10), st.floats(0.01, 1.0))
    def test_proper_cover_valid(self, cloud, eps):
        centers = entropy.proper_cover(cloud, eps, "exact")
        assert set(centers) <= set(range(len(cloud)))
        assert np.all((cloud.distances[centers] <= eps + 1e-12).any(axis=0))

    @settings(max_examples=40, deadline=None)
    @given(clouds(max_n=10))
    def test_monotone_in_eps(self, cloud):
        grid = [0.02, 0.05, 0.1, 0.2, 0.4, 0.8]
        cov = [entropy.covering_number(cloud, e, "exact") for e in grid]
        br = [entropy.bracketing_number(cloud, e) for e in grid]
        assert all(a >= b for a, b in zip(cov, cov[1:]))
        assert all(a >= b for a, b in zip(br, br[1:]))


class TestBracketing:
    def test_singleton(self):
        assert entropy.bracketing_number(MetricCloud([[0.3, 0.2]], [0.5, 0.5]), 0.01) == 1

    def test_two_close_vectors(self):
        cloud = MetricCloud([[0.0, 0.0], [0.1, 0.1]], [0.5, 0.5])
        assert cloud.distance(0, 1) == pytest.approx(0.1)
        assert entropy.bracketing_number(cloud, 0.2) == 1

    def test_five_hypothesis_oracle(self):
        for eps in (0.05, 0.1, 0.2, 0.4):
            assert entropy.bracketing_number(FIVE, eps) == brute_brackets(FIVE, eps)

    def test_bracket_widths(self):
        for br in entropy.bracket_cover(FIVE, 0.2):
            assert np.all(br.lower <= br.upper)
            assert br.width(FIVE.weights) <= 0.2 + 1e-12

    @settings(max_examples=60, deadline=None)
    @given(clouds(max_n=7), st.floats(0.01, 1.0))
    def test_matches_brute_force(self, cloud, eps):
        assert entropy.bracketing_number(cloud, eps) == brute_brackets(cloud, eps)

    @settings(max_examples=60, deadline=None)
    @given(clouds(max_n=10), st.floats(0.01, 1.0))
    def test_cover_below_brackets(self, cloud, eps):
        assert entropy.covering_number(cloud, eps, "exact") <= entropy.bracketing_number(cloud, eps)


class TestLocalEntropy:
    def test_singleton(self):
        assert entropy.local_entropy(MetricCloud([[0.5]], [1.0]), 0.1) == 0

    def test_small_balls(self):
        # pairs far apart: every ball of radius 2 gamma with gamma < 0.25 holds <= 2 members
        V = np.array([[0.0], [0.01], [0.6], [0.61], [1.0]])
        cloud = MetricCloud(V, [1.0])
        assert entropy.local_entropy(cloud, 0.005) >= 0
        val = max(entropy.local_number(cloud, 2 * g, g) for g in (0.005, 0.01, 0.02, 0.05, 0.1))
        assert val <= 2

    def test_profile_monotone(self):
        cloud = MetricCloud(np.random.default_rng(1).random((15, 6)), np.full(6, 1 / 6))
        prof = entropy.local_entropy_profile(cloud, [0.02, 0.05, 0.1, 0.2, 0.4])
        assert np.all(np.diff(prof.dloc) <= 1e-12)

    @settings(max_examples=25, deadline=None)
    @given(clouds(max_n=10), st.sampled_from([2, 4, 8]), st.floats(0.02, 0.5))
    def test_chaining_chain(self, cloud, delta, eps):
        for bracketing in (True, False):
            rep = entropy.chaining_check(cloud, eps, 1.0, 1.0, delta, bracketing=bracketing)
            assert rep["holds"], rep


class TestFixedPoint:
    def two_point(self):
        return MetricCloud([[0.0], [1.0]], [1.0])

    def test_constant_entropy(self):
        cloud = self.two_point()
        for e in (0.01, 0.1, 0.3, 0.6):
            assert entropy.local_entropy(cloud, e) == pytest.approx(math.log(2))
        k = 0.2
        fp = entropy.fixed_point(cloud, k)
        assert fp.converged
        assert fp.value == pytest.approx(k * math.log(2), rel=2e-3)

    def test_crossing_invariant(self):
        cloud = self.two_point()
        fp = entropy.fixed_point(cloud, 0.2)
        above = fp.value * (1 + 1e-3)
        below = fp.value * (1 - 2e-3)
        assert 0.2 * entropy.local_entropy(cloud, above) <= above
        assert 0.2 * entropy.local_entropy(cloud, below) > below

    def test_singleton(self):
        fp = entropy.fixed_point(MetricCloud([[0.2]], [1.0]), 1.0)
        assert fp.value == 1e-6

    def test_large_k_lands_on_diameter(self):
        fp = entropy.fixed_point(self.two_point(), 10.0)
        assert fp.converged and fp.value == pytest.approx(1.0, rel=2e-3)

    def test_no_crossing_flag(self):
        fp = entropy.fixed_point(self.two_point(), 10.0, hi=0.5)
        assert fp.value == 0.5 and not fp.converged

    def test_metric_mismatch(self):
        with pytest.raises(ConfigurationError):
            entropy.fixed_point(MetricCloud([[0.0], [1.0]], [1.0], r=1), 0.1, kind="zeta")

    def test_zeta(self):
        cloud = MetricCloud([[0.0], [1.0]], [1.0], r=2)
        fp = entropy.fixed_point(cloud, 0.1, kind="zeta")
        assert fp.value == pytest.approx(math.sqrt(0.1 * math.log(2)), rel=2e-3)
