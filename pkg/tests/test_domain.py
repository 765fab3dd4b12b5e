import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from excessrisk import domain
from excessrisk.domain import (
    ConstantHypothesis,
    HomogeneousHalfspace,
    Interval,
    Sample,
    TableHypothesis,
)
from excessrisk.errors import ConfigurationError


def halfspace_at(theta):
    return HomogeneousHalfspace([math.cos(theta), math.sin(theta)])


SPHERE2 = domain.uniform_sphere(2)


class TestSamples:
    def test_realizable_labels_follow_target(self):
        f = halfspace_at(0.3)
        s = domain.generate_sample(domain.realizable(domain.uniform_ball(2), f), 10, seed=1)
        assert len(s) == 10
        assert np.array_equal(s.y, f(s.X))

    def test_massart_h1_is_bit_identical_to_realizable(self):
        f = halfspace_at(1.1)
        for seed in range(5):
            a = domain.generate_sample(domain.realizable(SPHERE2, f), 10, seed)
            b = domain.generate_sample(domain.massart(SPHERE2, f, 1.0), 10, seed)
            assert a.X.tobytes() == b.X.tobytes()
            assert a.y.tobytes() == b.y.tobytes()

    def test_massart_flip_rate(self):
        # direct count of label flips against the target
        f = halfspace_at(0.0)
        s = domain.generate_sample(domain.massart(domain.uniform_ball(2), f, 0.4), 100_000, 7)
        rate = np.mean(s.y != f(s.X))
        assert abs(rate - 0.3) < 0.01

    def test_deterministic(self):
        spec = domain.massart(domain.uniform_ball(3), HomogeneousHalfspace([1, 0, 0]), 0.5)
        a = domain.generate_sample(spec, 50, 3)
        b = domain.generate_sample(spec, 50, 3)
        assert np.array_equal(a.X, b.X) and np.array_equal(a.y, b.y)

    def test_regression_labels_bounded(self):
        spec = domain.bounded_regression(domain.uniform_ball(2), domain.LinearRegressor([0.5, 0.2]), 0.25)
        s = domain.generate_sample(spec, 1000, 0)
        assert np.all(np.abs(s.y) <= 1)
        resid = s.y - spec.target(s.X)
        assert np.allclose(np.abs(resid), 0.25)

    def test_sample_keys_and_take(self):
        s = Sample([[0.1], [0.2], [0.1]], [1, -1, 1])
        assert s.key_set() == {((0.1,), 1.0), ((0.2,), -1.0)}
        assert len(s.take([0, 2])) == 2
        assert len(s.drop(1)) == 2


class TestSpecValidation:
    @pytest.mark.parametrize("h", [0.0, -0.1, 1.5])
    def test_bad_margin(self, h):
        with pytest.raises(ConfigurationError):
            domain.massart(SPHERE2, halfspace_at(0), h)

    def test_pmf_weights_must_sum_to_one(self):
        atoms = [[0.0], [1.0]]
        with pytest.raises(ConfigurationError):
            domain.realizable(domain.finite_support([0.3, 0.3], atoms), TableHypothesis(atoms, [1, 1]))

    def test_empty_pmf(self):
        with pytest.raises(ConfigurationError):
            domain.realizable(domain.finite_support([]), ConstantHypothesis(1.0))

    def test_regression_noise_cap(self):
        with pytest.raises(ConfigurationError):
            domain.bounded_regression(domain.uniform_ball(2), domain.LinearRegressor([0.1, 0]), 0.3)

    def test_collects_all_errors(self):
        marg = domain.Marginal("pmf", 1, np.array([[0.0], [1.0]]), np.array([0.2, 0.2]))
        with pytest.raises(ConfigurationError) as info:
            domain.DistributionSpec(marg, domain.Noise("massart", TableHypothesis([[0.0], [1.0]], [1, 1]), 2.0))
        assert len(info.value.errors) >= 2


class TestClasses:
    def test_empty_class_rejected(self):
        with pytest.raises(ConfigurationError):
            domain.HypothesisClass("finite", [], 1)

    def test_duplicates_rejected(self):
        with pytest.raises(ConfigurationError):
            domain.finite_class([[1, -1], [1, -1]])

    def test_zero_normal_rejected(self):
        with pytest.raises(ConfigurationError):
            HomogeneousHalfspace([0.0, 0.0])

    def test_predict_matches_members(self):
        cls = domain.homogeneous_halfspaces(3, 40, seed=2)
        X = np.random.default_rng(0).normal(size=(25, 3))
        P = cls.predict(X)
        for i, h in enumerate(cls):
            assert np.array_equal(P[i], h(X))

    def test_interval_grid_contains_empty(self):
        cls = domain.intervals_on_grid([0.0, 0.5, 1.0])
        assert any(h.empty for h in cls)


class TestRisks:
    def test_target_risk_zero_realizable(self):
        f = halfspace_at(0.4)
        assert domain.true_risk(f, domain.realizable(SPHERE2, f)) == 0

    def test_bayes_risk_massart(self):
        f = halfspace_at(0.4)
        assert domain.true_risk(f, domain.massart(SPHERE2, f, 0.4)) == pytest.approx(0.3)

    @given(st.floats(0.0, math.pi))
    def test_angle_formula(self, theta):
        f, g = halfspace_at(0.0), halfspace_at(theta)
        spec = domain.realizable(SPHERE2, f)
        assert domain.true_risk(g, spec) == pytest.approx(theta / math.pi, abs=1e-12)

    def test_orthogonal_disagreement(self):
        assert domain.disagreement_mass(halfspace_at(0), halfspace_at(math.pi / 2),
                                        domain.realizable(SPHERE2, halfspace_at(0))) == pytest.approx(0.5)

    def test_disagreement_identity(self):
        f = halfspace_at(0.7)
        assert domain.disagreement_mass(f, f, domain.realizable(SPHERE2, f)) == 0

    def test_finite_support_disagreement(self):
        atoms = [[0.0], [1.0]]
        f = TableHypothesis(atoms, [1, 1])
        g = TableHypothesis(atoms, [1, -1])
        spec = domain.realizable(domain.finite_support([0.25, 0.75], atoms), f)
        assert domain.disagreement_mass(f, g, spec) == pytest.approx(0.75)

    def test_monte_carlo_matches_closed_form(self):
        # intervals in d=1 under the ball: MC estimate against the exact symmetric difference
        f, g = Interval(-0.2, 0.3), Interval(0.0, 0.6)
        spec = domain.realizable(domain.uniform_ball(1), f)
        exact = domain.disagreement_mass(f, g, spec)
        assert exact == pytest.approx(0.25)
        X = domain.eval_points(spec.marginal)
        assert np.mean(f(X) != g(X)) == pytest.approx(exact, abs=0.005)

    def test_massart_excess_is_h_times_disagreement(self):
        f, g = halfspace_at(0.0), halfspace_at(0.2 * math.pi)
        spec = domain.massart(SPHERE2, f, 0.5)
        assert domain.disagreement_mass(f, g, spec) == pytest.approx(0.2)
        assert domain.excess_risk(g, spec) == pytest.approx(0.1)

    def test_square_loss_excess_is_l2_distance(self):
        fstar = domain.LinearRegressor([0.3, 0.0])
        f = domain.LinearRegressor([0.3 + 0.4, 0.0])
        spec = domain.bounded_regression(SPHERE2, fstar, 0.1)
        # on the circle E[(0.4 x1)^2] = 0.16 / 2 = 0.08
        assert domain.l2_distance_sq(f, fstar, spec) == pytest.approx(0.08)
        assert domain.excess_risk(f, spec) == pytest.approx(0.08)

    def test_square_loss_excess_direct(self):
        fstar = domain.LinearRegressor([0.2, 0.1])
        f = domain.LinearRegressor([0.0, 0.1])
        spec = domain.bounded_regression(domain.uniform_ball(2), fstar, 0.2)
        direct = domain.true_risk(f, spec, "square") - domain.true_risk(fstar, spec, "square")
        assert domain.excess_risk(f, spec) == pytest.approx(direct, abs=1e-3)
        assert domain.excess_risk(f, spec) == pytest.approx(0.04 / 4)

    def test_excess_nonnegative_on_finite_class(self):
        rng = np.random.default_rng(3)
        labels = np.unique(np.where(rng.random((12, 5)) < 0.5, 1.0, -1.0), axis=0)
        cls = domain.finite_class(labels)
        w = rng.random(5)
        spec = domain.massart(domain.finite_support(w / w.sum(), cls[0].atoms), cls[0], 0.3)
        assert all(domain.excess_risk(h, spec) >= -1e-12 for h in cls)


@st.composite
def pmf_massart(draw):
    m = draw(st.integers(2, 6))
    w = np.array(draw(st.lists(st.floats(0.05, 1.0), min_size=m, max_size=m)))
    h = draw(st.floats(0.05, 1.0))
    rng = np.random.default_rng(draw(st.integers(0, 10_000)))
    labels = np.where(rng.random((6, m)) < 0.5, 1.0, -1.0)
    labels = np.unique(labels, axis=0)
    cls = domain.finite_class(labels)
    spec = domain.massart(domain.finite_support(w / w.sum(), cls[0].atoms), cls[0], h)
    return cls, spec, h


class TestLossClassProperties:
    @settings(max_examples=40, deadline=None)
    @given(pmf_massart())
    def test_constant_margin_sandwich(self, data):
        cls, spec, h = data
        pg, pabs, _ = domain.loss_moments(cls, spec, mode="excess")
        assert np.allclose(h * pabs, pg, atol=1e-9)

    @settings(max_examples=40, deadline=None)
    @given(pmf_massart())
    def test_loss_distance_equals_disagreement(self, data):
        from excessrisk.entropy import build_cloud

        cls, spec, _ = data
        cloud = build_cloud(cls, spec, mode="loss-class")
        for i in range(len(cls)):
            for j in range(len(cls)):
                assert cloud.distances[i, j] == pytest.approx(
                    domain.disagreement_mass(cls[i], cls[j], spec), abs=1e-12)


class TestBernstein:
    def test_realizable_loss_class(self):
        cls = domain.homogeneous_halfspaces(2, 36)
        spec = domain.realizable(SPHERE2, cls[0])
        est = domain.estimate_bernstein(cls, spec, mode="loss")
        assert (est.beta, est.B) == (1.0, 1.0)

    @pytest.mark.parametrize("h", [0.25, 0.5, 0.8])
    def test_massart_excess_class(self, h):
        cls = domain.homogeneous_halfspaces(2, 36)
        spec = domain.massart(SPHERE2, cls[3], h)
        est = domain.estimate_bernstein(cls, spec)
        assert est.beta == 1.0
        assert est.B == pytest.approx(1.0 / h)

    def test_singleton_target_class(self):
        f = halfspace_at(0.2)
        cls = domain.HypothesisClass("homogeneous-halfspace", [f], 2)
        est = domain.estimate_bernstein(cls, domain.massart(SPHERE2, f, 0.5))
        assert (est.beta, est.B) == (1.0, 1.0)

    def test_condition_holds_for_every_member(self):
        cls = domain.homogeneous_halfspaces(2, 24)
        spec = domain.massart(SPHERE2, cls[0], 0.6)
        est = domain.estimate_bernstein(cls, spec, kind="L2")
        pg, _, psq = domain.loss_moments(cls, spec)
        assert np.all(psq <= est.B * np.maximum(pg, 0) ** est.beta + 1e-9)

    def test_empty_class(self):
        with pytest.raises(ConfigurationError):
            domain.estimate_bernstein([], domain.realizable(SPHERE2, halfspace_at(0)))
