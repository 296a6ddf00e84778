import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import chi2

from mpcvm.metrics import (RankTable, average_ranks, bonferroni_dunn, chi_square_sf,
                           confusion_matrix, critical_difference, error_rate, evaluate,
                           friedman_q, generalized_auc, q_alpha)
from oracles import hand_till, pair_auc

# average ranks over 8 data sets; columns mRVM1, mRVM2, SVM, DLSR, MLR, proposed
ERR_RANKS_EM = [3.375, 3.375, 3.75, 5.375, 3.875, 1.25]
ERR_RANKS_FMLM = [3.5, 3.375, 3.875, 5.375, 3.875, 1.0]
NAMES = ("mRVM1", "mRVM2", "SVM", "DLSR", "MLR", "mPCVM")


class TestErrorRate:
    def test_value(self):
        assert error_rate([1, 2, 3, 3], [1, 2, 3, 1]) == 25.0

    def test_errors(self):
        with pytest.raises(ValueError):
            error_rate([1], [1, 2])
        with pytest.raises(ValueError):
            error_rate([], [])


class TestGeneralizedAuc:
    def test_perfect(self):
        s = np.eye(3)[[0, 0, 1, 1, 2, 2]]
        assert generalized_auc(s, np.array([1, 1, 2, 2, 3, 3])) == 100.0

    def test_constant_scores_give_half(self):
        assert generalized_auc(np.ones((6, 3)), np.array([1, 1, 2, 2, 3, 3])) == 50.0

    def test_binary_classical(self):
        pos, neg = [0.9, 0.4, 0.7], [0.3, 0.8, 0.1, 0.4]
        s = np.array(pos + neg)
        scores = np.column_stack([s, 1 - s])
        truth = np.array([1] * 3 + [2] * 4)
        assert generalized_auc(scores, truth) == pytest.approx(100 * pair_auc(pos, neg))

    @settings(max_examples=40, deadline=None)
    @given(st.integers(2, 5), st.integers(0, 10 ** 6))
    def test_matches_pair_counting(self, c, seed):
        rng = np.random.default_rng(seed)
        truth = np.concatenate([np.arange(1, c + 1), rng.integers(1, c + 1, size=20)])
        # rounding creates ties, which must get half credit
        scores = np.round(rng.random((truth.size, c)), 1)
        classes = np.arange(1, c + 1)
        assert generalized_auc(scores, truth) == pytest.approx(
            hand_till(scores, truth, classes), abs=1e-9)

    def test_missing_class(self):
        with pytest.raises(ValueError):
            generalized_auc(np.ones((2, 3)), np.array([1, 2]))

    def test_custom_labels(self):
        s = np.eye(2)[[0, 1]]
        assert generalized_auc(s, np.array([5, 9]), classes=[5, 9]) == 100.0


def test_confusion_and_evaluate():
    truth = np.array([1, 1, 2, 2])
    pred = np.array([1, 2, 2, 2])
    np.testing.assert_array_equal(confusion_matrix(pred, truth, [1, 2]), [[1, 1], [0, 2]])
    rep = evaluate(pred, truth, np.eye(2)[[0, 1, 1, 1]], [1, 2])
    assert rep.err == 25.0 and 50 <= rep.auc <= 100
    assert rep.to_dict()["confusion"] == [[1, 1], [0, 2]]


class TestRanks:
    def test_average_ranks_with_ties(self):
        table = [[0.1, 0.2, 0.2], [0.3, 0.1, 0.2]]
        r = average_ranks(table)
        np.testing.assert_allclose(r.avg_ranks, [2.0, 1.75, 2.25])
        r.check()

    def test_higher_is_better(self):
        r = average_ranks([[90.0, 95.0]], direction="higher")
        np.testing.assert_array_equal(r.avg_ranks, [2.0, 1.0])

    def test_bad_inputs(self):
        with pytest.raises(ValueError):
            average_ranks([[1.0, np.nan]])
        with pytest.raises(ValueError):
            average_ranks([[1.0, 2.0]], direction="up")
        with pytest.raises(ValueError):
            RankTable(3, 2, [1.0, 2.0])

    def test_check_rank_sum(self):
        with pytest.raises(ValueError):
            RankTable(2, 1, [1.0, 1.0]).check()


class TestFriedman:
    def test_published_em_ranks(self):
        q = friedman_q(RankTable(6, 8, ERR_RANKS_EM))
        assert q == pytest.approx(20.143, abs=1e-3)
        assert chi_square_sf(q, 5) == pytest.approx(0.001, abs=5e-4)

    def test_published_fmlm_ranks(self):
        assert friedman_q(RankTable(6, 8, ERR_RANKS_FMLM)) == pytest.approx(23.0, abs=1e-3)

    def test_identical_columns(self):
        r = average_ranks([[1.0, 1.0], [2.0, 2.0]])
        assert friedman_q(r) == 0.0
        assert chi_square_sf(0.0, 1) == 1.0

    def test_chi_square_exact(self):
        assert chi_square_sf(2 * np.log(2), 2) == pytest.approx(0.5, abs=1e-15)
        assert chi_square_sf(23.0, 5) == pytest.approx(0.000335, abs=5e-6)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0, 80), st.integers(1, 30))
    def test_chi_square_against_scipy_stats(self, q, dof):
        assert chi_square_sf(q, dof) == pytest.approx(chi2.sf(q, dof), rel=1e-10, abs=1e-300)

    def test_chi_square_domain(self):
        with pytest.raises(ValueError):
            chi_square_sf(-1.0, 2)


class TestPostHoc:
    def test_critical_difference(self):
        assert critical_difference(6, 8, 2.326) == pytest.approx(2.176, abs=1e-3)
        assert critical_difference(6, 8, 0.0) == 0.0
        assert critical_difference(6, 32, 2.326) == pytest.approx(2.176 / 2, abs=1e-3)

    def test_q_alpha_table(self):
        assert q_alpha(6, 0.10) == 2.326
        with pytest.raises(ValueError):
            q_alpha(20, 0.10)

    def test_q_alpha_table_matches_normal_quantile(self):
        from scipy.stats import norm
        for alpha in (0.05, 0.10):
            for k in range(2, 11):
                expected = norm.ppf(1 - alpha / (2 * (k - 1)))
                assert q_alpha(k, alpha) == pytest.approx(expected, abs=1.5e-3)

    def test_em_row(self):
        out = bonferroni_dunn(RankTable(6, 8, ERR_RANKS_EM, NAMES), control=5)
        diffs = [d["difference"] for d in out]
        np.testing.assert_allclose(diffs, [2.272, 2.272, 2.673, 4.410, 2.806], atol=1e-3)
        assert [d["name"] for d in out] == list(NAMES[:5])

    def test_fmlm_consistent_cells(self):
        out = {d["name"]: d for d in bonferroni_dunn(RankTable(6, 8, ERR_RANKS_FMLM, NAMES), 5)}
        assert out["mRVM1"]["difference"] == pytest.approx(2.673, abs=1e-3)
        assert out["SVM"]["difference"] == pytest.approx(3.074, abs=1e-3)
        assert out["SVM"]["significant"]

    def test_significance_uses_q_alpha(self):
        out = bonferroni_dunn(RankTable(6, 8, ERR_RANKS_EM), control=5)
        assert [d["significant"] for d in out] == [False, False, True, True, True]

    def test_self_difference_zero(self):
        r = RankTable(2, 4, [1.5, 1.5])
        assert bonferroni_dunn(r, 0, qa=1.0)[0]["difference"] == 0.0

    def test_bad_control(self):
        with pytest.raises(ValueError):
            bonferroni_dunn(RankTable(2, 4, [1.5, 1.5]), 2)
