import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import norm

from oracles import g, g_prime, truncated_mean_mc, winner_gaps

from mpcvm.probit import (class_probabilities, class_probabilities_batch, expected_z,
                          expected_z_batch, gauss_hermite, log_class_probabilities,
                          log_norm_cdf)

RULE = gauss_hermite(64)


class TestQuadratureRule:
    def test_moments(self):
        assert RULE.expect(lambda x: np.ones_like(x)) == pytest.approx(1.0, abs=1e-14)
        assert RULE.expect(lambda x: x) == pytest.approx(0.0, abs=1e-14)
        assert RULE.expect(lambda x: x ** 2) == pytest.approx(1.0, abs=1e-12)
        assert RULE.expect(lambda x: x ** 4) == pytest.approx(3.0, abs=1e-10)

    def test_symmetric_nodes(self):
        np.testing.assert_array_equal(RULE.nodes, -RULE.nodes[::-1])

    @pytest.mark.parametrize("k", [1, 0, 300])
    def test_bad_node_count(self, k):
        with pytest.raises(ValueError):
            gauss_hermite(k)


class TestLogNormCdf:
    @pytest.mark.parametrize("x", [-40.0, -10.0, -1.0, 0.0, 3.0, 8.0])
    def test_against_high_precision(self, x):
        mpmath.mp.dps = 50
        ref = float(mpmath.log(mpmath.ncdf(x)))
        assert log_norm_cdf(x) == pytest.approx(ref, rel=1e-12, abs=1e-300)

    def test_deep_tail_finite(self):
        assert np.isfinite(log_norm_cdf(-1e3))


class TestClassProbabilities:
    def test_binary_reduces_to_probit(self, rng):
        a = rng.uniform(-5, 5, size=1000)
        y = np.column_stack([a, np.zeros_like(a)])
        p = class_probabilities_batch(y, RULE)[:, 0]
        assert np.max(np.abs(p - norm.cdf(a / np.sqrt(2)))) < 1e-6

    def test_equal_potentials_uniform(self):
        np.testing.assert_allclose(class_probabilities(np.zeros(5), RULE), 0.2, atol=1e-12)

    def test_shift_invariant(self, rng):
        y = rng.normal(size=4)
        np.testing.assert_allclose(class_probabilities(y, RULE),
                                   class_probabilities(y + 7.5, RULE), atol=1e-12)

    def test_monotone_in_own_potential(self):
        p0 = class_probabilities([0.0, 0.3, -0.2], RULE)[0]
        p1 = class_probabilities([0.5, 0.3, -0.2], RULE)[0]
        assert p1 > p0

    def test_many_classes_no_underflow(self):
        y = np.linspace(-30, 30, 40)
        p = class_probabilities(y, RULE)
        assert np.all(np.isfinite(p)) and p.sum() == pytest.approx(1.0, abs=1e-9)
        assert np.argmax(p) == 39

    def test_unnormalized_against_direct_sum(self, rng):
        y = rng.normal(size=(3, 4))
        direct = np.empty((3, 4))
        for r in range(3):
            for i in range(4):
                direct[r, i] = RULE.expect(lambda e: g(e, winner_gaps(y[r], i)))
        np.testing.assert_allclose(np.exp(log_class_probabilities(y, RULE)), direct, rtol=1e-12)

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.floats(-8, 8), min_size=2, max_size=10))
    def test_rows_sum_to_one(self, y):
        p = class_probabilities(np.array(y), RULE)
        assert np.all(p >= 0)
        assert abs(p.sum() - 1.0) < 1e-6

    def test_rejects_scalar(self):
        with pytest.raises(ValueError):
            class_probabilities([1.0], RULE)


class TestExpectedZ:
    def test_symmetric_binary(self):
        z = expected_z([0.0, 0.0], 1, RULE)
        c = 1.0 / np.sqrt(np.pi)
        np.testing.assert_allclose(z, [c, -c], atol=1e-6)

    def test_two_class_closed_form(self, rng):
        """With two classes ``z_w - z_l`` is a normal truncated at zero; ``z_w + z_l`` is free."""
        for _ in range(200):
            y = rng.uniform(-6, 6, size=2)
            mu = y[1] - y[0]
            gap = mu + np.sqrt(2) * norm.pdf(mu / np.sqrt(2)) / norm.cdf(mu / np.sqrt(2))
            exact = [(y.sum() - gap) / 2, (y.sum() + gap) / 2]
            np.testing.assert_allclose(expected_z(y, 2, RULE), exact, rtol=0, atol=1e-9)

    def test_stein_identity(self, rng):
        """``E[eps g(eps)] = E[g'(eps)]`` and the winner update equals it divided by ``p_i``."""
        for _ in range(100):
            c = int(rng.integers(2, 11))
            y = rng.uniform(-3, 3, size=c)
            i = int(rng.integers(c))
            gaps = winner_gaps(y, i)
            lhs = RULE.expect(lambda e: e * g(e, gaps))
            rhs = RULE.expect(lambda e: g_prime(e, gaps))
            assert abs(lhs - rhs) < 1e-6
            p = RULE.expect(lambda e: g(e, gaps))
            z = expected_z(y, i + 1, RULE)
            assert (z[i] - y[i]) * p == pytest.approx(lhs, abs=1e-6)

    def test_winner_moves_up_losers_move_down(self, rng):
        y = rng.normal(size=5)
        z = expected_z(y, 3, RULE)
        assert z[2] > y[2]
        assert np.all(np.delete(z, 2) < np.delete(y, 2))

    def test_label_is_argmax_of_expectation_for_confident_row(self):
        z = expected_z([4.0, 0.0, -1.0], 1, RULE)
        assert np.argmax(z) == 0

    def test_against_monte_carlo(self, rng):
        for _ in range(8):
            c = int(rng.integers(2, 5))
            y = rng.uniform(-1, 1, size=c)
            label = int(np.argmax(y)) + 1
            mean, se = truncated_mean_mc(y, label, rng, accepted=100_000, chunk=400_000)
            assert np.all(np.abs(expected_z(y, label, RULE) - mean) < 4 * se)

    def test_hopeless_label_stays_finite(self):
        z = expected_z([0.0, 60.0, 50.0], 1, RULE)
        assert np.all(np.isfinite(z))

    def test_batch_matches_rows(self, rng):
        y = rng.normal(size=(6, 3))
        labels = rng.integers(1, 4, size=6)
        batch = expected_z_batch(y, labels, RULE)
        for r in range(6):
            np.testing.assert_allclose(batch[r], expected_z(y[r], int(labels[r]), RULE))

    def test_bad_label(self):
        with pytest.raises(ValueError):
            expected_z([0.0, 1.0], 3, RULE)
