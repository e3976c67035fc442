import math

import numpy as np
import pytest

from dualproj.oracle import (ConditionalTable, DiscreteJoint, SupportError, lemma1_gap,
                             pinsker_sandwich, posterior_from_joint, prop1_identity,
                             prop2_identity, random_conditional, random_joint,
                             random_theorem_instance, theorem1_bound)

LN2 = math.log(2)


class TestTables:
    def test_validation(self):
        with pytest.raises(ValueError):
            DiscreteJoint([[0.5, 0.6]])
        with pytest.raises(ValueError):
            DiscreteJoint([0.5, 0.5])
        with pytest.raises(ValueError):
            ConditionalTable([[0.5, 0.6]])

    def test_reassembly(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            j = random_joint(rng, 4, 3, 0.5)
            px, post = posterior_from_joint(j)
            back = DiscreteJoint.from_parts(px, post)
            assert np.max(np.abs(back.table - j.table)) <= 1e-14

    def test_zero_marginal_rows_are_undefined(self):
        px, post = posterior_from_joint(DiscreteJoint([[0.5, 0.5], [0.0, 0.0]]))
        assert post.undefined == (1,)
        with pytest.raises(SupportError):
            post.row(1)


class TestLemma1:
    def test_bayes_classifier_has_zero_gap(self):
        j = random_joint(np.random.default_rng(1), 3, 3)
        _, post = posterior_from_joint(j)
        assert abs(lemma1_gap(j, post)) <= 1e-14

    def test_gap_is_non_negative(self):
        rng = np.random.default_rng(2)
        for _ in range(300):
            j = random_joint(rng, 3, 4, 0.5)
            assert lemma1_gap(j, random_conditional(rng, 3, 4)) >= -1e-14

    def test_zero_probability_on_observed_pair(self):
        with pytest.raises(SupportError):
            lemma1_gap([[0.5, 0.5]], [[1.0, 0.0]])


class TestProp1:
    def test_constant_half(self):
        j = random_joint(np.random.default_rng(3), 3, 3)
        lhs, rhs, diff = prop1_identity(j, j, np.full((3, 3), 0.5))
        assert lhs == pytest.approx(-2 * LN2, abs=1e-15)
        assert diff <= 1e-15

    def test_random_instances(self):
        rng = np.random.default_rng(4)
        for _ in range(300):
            P, Q = random_joint(rng, 3, 3), random_joint(rng, 3, 3)
            D = rng.uniform(0.01, 0.99, (3, 3))
            assert prop1_identity(P, Q, D).difference < 1e-12

    def test_errors(self):
        j = DiscreteJoint([[0.5, 0.0], [0.5, 0.0]])
        with pytest.raises(ValueError):
            prop1_identity(j, j, np.full((2, 2), 0.5))
        k = DiscreteJoint([[0.25, 0.25], [0.25, 0.25]])
        with pytest.raises(ValueError):
            prop1_identity(k, k, np.ones((2, 2)))


class TestProp2:
    def test_equal_posteriors(self):
        post = random_conditional(np.random.default_rng(5), 3, 3)
        lhs, rhs, _ = prop2_identity(post, post, [0.2, 0.3, 0.5])
        assert lhs == rhs == 0.0

    def test_frozen_two_point_example(self):
        lhs, rhs, diff = prop2_identity([[0.9, 0.1], [0.2, 0.8]], [[0.5, 0.5], [0.5, 0.5]],
                                        [0.5, 0.5])
        want = 0.5 * (0.5 * math.log(0.5 / 0.9) + 0.5 * math.log(0.5 / 0.1)) \
            + 0.5 * (0.5 * math.log(0.5 / 0.2) + 0.5 * math.log(0.5 / 0.8))
        assert lhs == pytest.approx(want, abs=1e-15)
        assert round(lhs, 4) == 0.3670
        assert diff <= 1e-15

    def test_support_violation(self):
        with pytest.raises(SupportError):
            prop2_identity([[1.0, 0.0]], [[0.5, 0.5]], [1.0])


class TestTheorem:
    def test_matched_distributions(self):
        j = random_joint(np.random.default_rng(6), 3, 3)
        _, post = posterior_from_joint(j)
        rep = theorem1_bound(j, j, post, post)
        assert rep.lhs == pytest.approx(0.0, abs=1e-15)
        assert rep.rhs == pytest.approx(0.0, abs=1e-7)  # sqrt of rounding-level KLs

    def test_random_instances_and_chain(self):
        rng = np.random.default_rng(7)
        worst = math.inf
        for _ in range(1000):
            rep = theorem1_bound(*random_theorem_instance(rng))
            worst = min(worst, rep.margin)
            vals = list(rep.chain.values())
            assert all(a <= b + 1e-10 for a, b in zip(vals, vals[1:])), rep.chain
        assert worst >= -1e-10

    def test_disjoint_support(self):
        P = DiscreteJoint([[0.5, 0.5], [0.0, 0.0]])
        Q = DiscreteJoint([[0.0, 0.0], [0.5, 0.5]])
        shared = ConditionalTable([[0.5, 0.5], [0.5, 0.5]])
        rep = theorem1_bound(P, Q, shared, shared, P_posterior=shared, Q_posterior=shared)
        assert rep.lhs == pytest.approx(LN2, abs=1e-15)
        assert rep.terms["marginal"] == pytest.approx(2 * math.sqrt(2 * LN2), abs=1e-15)
        assert rep.terms["real_posterior"] == rep.terms["fake_posterior"] == 0.0
        assert rep.lhs <= rep.rhs

    def test_support_violation(self):
        P = DiscreteJoint([[0.5, 0.5]])
        with pytest.raises(SupportError):
            theorem1_bound(P, P, [[1.0, 0.0]], [[0.5, 0.5]])


class TestSandwich:
    def test_equal(self):
        rep = pinsker_sandwich([0.3, 0.7], [0.3, 0.7])
        assert (rep.tv, rep.kl, rep.jsd) == (0.0, 0.0, 0.0) and rep.passed

    def test_example(self):
        rep = pinsker_sandwich([1.0, 0.0], [0.5, 0.5])
        assert rep.tv == 0.5
        assert math.sqrt(rep.kl / 2) == pytest.approx(0.5887, abs=5e-5)
        assert rep.passed

    def test_random_pairs(self):
        rng = np.random.default_rng(8)
        for _ in range(1000):
            k = int(rng.integers(2, 6))
            assert pinsker_sandwich(rng.dirichlet(np.ones(k)), rng.dirichlet(np.ones(k))).passed

    def test_support(self):
        with pytest.raises(SupportError):
            pinsker_sandwich([0.5, 0.5], [1.0, 0.0])
