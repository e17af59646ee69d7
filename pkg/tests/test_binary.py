"""Binary calibrators against closed forms and independent oracles."""
import itertools
import math

import numpy as np
import pytest

from calibkit.binary import (
    EQUAL_FREQUENCY,
    EQUAL_WIDTH,
    BBQModel,
    HistogramBinningModel,
    IsotonicModel,
    PlattModel,
    apply_binary,
    fit_bbq,
    fit_histogram,
    fit_isotonic,
    fit_platt,
)
from calibkit.binning import bin_index
from calibkit.dataset import BinaryCalibrationSet
from calibkit.errors import DegenerateLabelsError, ValidationError
from calibkit.synth import gen_binary


def _exact_isotonic(y: np.ndarray) -> np.ndarray:
    """Exhaustive least-squares monotone fit for tiny n.

    Enumerates every consecutive partition, keeps those whose block means
    are nondecreasing, and returns the per-position values of the best
    one. The optimum of the monotone least-squares problem is always such
    a partition, so this is an exact oracle.
    """
    n = len(y)
    best_sse = np.inf
    best = None
    for mask in range(1 << (n - 1)):
        bounds = [0] + [j + 1 for j in range(n - 1) if (mask >> j) & 1] + [n]
        means = [float(np.mean(y[a:b])) for a, b in zip(bounds, bounds[1:])]
        if any(m2 < m1 for m1, m2 in zip(means, means[1:])):
            continue
        fitted = np.concatenate(
            [np.full(b - a, m) for a, b, m in zip(bounds, bounds[1:], means)]
        )
        sse = float(np.sum((fitted - y) ** 2))
        if sse < best_sse - 1e-15:
            best_sse = sse
            best = fitted
    return best


class TestHistogramBinning:
    def test_single_bin_is_outcome_mean(self):
        s = BinaryCalibrationSet(scores=[0.2, 0.5, 0.9], outcomes=[1, 1, 0])
        model = fit_histogram(s, m_bins=1)
        assert model.thetas[0] == pytest.approx(2 / 3, rel=1e-15)

    def test_all_positive_outcomes(self):
        s = BinaryCalibrationSet(scores=np.linspace(0.05, 0.95, 10), outcomes=np.ones(10))
        for mode in (EQUAL_WIDTH, EQUAL_FREQUENCY):
            model = fit_histogram(s, m_bins=4, mode=mode)
            idx = bin_index(model.boundaries, s.scores)
            occupied = np.unique(idx)
            np.testing.assert_array_equal(model.thetas[occupied], 1.0)

    def test_equal_frequency_split_point(self):
        s = BinaryCalibrationSet(scores=[0.1, 0.2, 0.8, 0.9], outcomes=[0, 0, 1, 1])
        model = fit_histogram(s, m_bins=2, mode=EQUAL_FREQUENCY)
        assert 0.2 < model.boundaries[1] < 0.8
        assert model.thetas[0] == 0.0
        assert model.thetas[1] == 1.0

    def test_empty_bins_predict_midpoints(self):
        s = BinaryCalibrationSet(scores=[0.05, 0.1], outcomes=[0, 1])
        model = fit_histogram(s, m_bins=4, mode=EQUAL_WIDTH)
        # bins (0.25,0.5], (0.5,0.75], (0.75,1] hold no samples
        np.testing.assert_allclose(model.thetas[1:], [0.375, 0.625, 0.875])

    def test_closed_form_matches_bin_means(self):
        rng = np.random.default_rng(21)
        for _ in range(25):
            n = int(rng.integers(5, 300))
            s = BinaryCalibrationSet(
                scores=rng.random(n), outcomes=rng.integers(0, 2, n)
            )
            mode = EQUAL_WIDTH if rng.random() < 0.5 else EQUAL_FREQUENCY
            m_bins = int(rng.integers(1, 20))
            model = fit_histogram(s, m_bins=m_bins, mode=mode)
            idx = bin_index(model.boundaries, s.scores)
            for m in range(m_bins):
                mask = idx == m
                if mask.any():
                    assert model.thetas[m] == np.mean(s.outcomes[mask].astype(float))

    def test_unknown_mode_rejected(self):
        s = BinaryCalibrationSet(scores=[0.5], outcomes=[1])
        with pytest.raises(ValidationError):
            fit_histogram(s, m_bins=2, mode="quantile")

    def test_bin_lookup_on_apply(self):
        model = HistogramBinningModel(boundaries=[0.0, 0.5, 1.0], thetas=[0.2, 0.9])
        assert apply_binary(model, 0.7) == 0.9
        assert apply_binary(model, 0.5) == 0.2
        assert apply_binary(model, 0.0) == 0.2


class TestIsotonic:
    def test_worked_example(self):
        s = BinaryCalibrationSet(scores=[0.2, 0.4, 0.6, 0.8], outcomes=[0, 1, 1, 0])
        model = fit_isotonic(s)
        fitted = apply_binary(model, np.array(s.scores))
        np.testing.assert_allclose(fitted, [0.0, 2 / 3, 2 / 3, 2 / 3], atol=1e-12)
        np.testing.assert_allclose(fitted, _exact_isotonic(np.array([0.0, 1, 1, 0])), atol=1e-12)

    def test_already_monotone_is_identity(self):
        s = BinaryCalibrationSet(scores=[0.1, 0.3, 0.6, 0.9], outcomes=[0, 0, 1, 1])
        fitted = apply_binary(fit_isotonic(s), np.array(s.scores))
        np.testing.assert_array_equal(fitted, [0.0, 0.0, 1.0, 1.0])

    def test_constant_outcomes_give_constant_fit(self):
        s = BinaryCalibrationSet(scores=[0.2, 0.5, 0.8], outcomes=[1, 1, 1])
        model = fit_isotonic(s)
        np.testing.assert_array_equal(model.values, [1.0])

    def test_matches_exhaustive_oracle_on_all_patterns(self):
        scores = np.linspace(0.1, 0.9, 8)
        for pattern in itertools.product([0, 1], repeat=8):
            s = BinaryCalibrationSet(scores=scores, outcomes=np.array(pattern))
            fitted = apply_binary(fit_isotonic(s), scores)
            oracle = _exact_isotonic(np.asarray(pattern, dtype=float))
            np.testing.assert_allclose(fitted, oracle, atol=1e-6)

    def test_output_monotone_in_score(self):
        rng = np.random.default_rng(22)
        for _ in range(20):
            n = int(rng.integers(2, 200))
            s = BinaryCalibrationSet(scores=rng.random(n), outcomes=rng.integers(0, 2, n))
            model = fit_isotonic(s)
            grid = np.sort(rng.random(100))
            out = apply_binary(model, grid)
            assert np.all(np.diff(out) >= -1e-15)

    def test_out_of_range_clamps_to_end_values(self):
        s = BinaryCalibrationSet(scores=[0.4, 0.5, 0.6], outcomes=[0, 1, 1])
        model = fit_isotonic(s)
        assert apply_binary(model, 0.0) == model.values[0]
        assert apply_binary(model, 1.0) == model.values[-1]

    def test_tied_scores_yield_a_function(self):
        s = BinaryCalibrationSet(scores=[0.5, 0.5, 0.5], outcomes=[0, 1, 0])
        model = fit_isotonic(s)
        assert model.breakpoints.size == 1
        assert apply_binary(model, 0.5) == pytest.approx(1 / 3)

    def test_never_worse_than_any_monotone_binning(self):
        # Jointly optimizing boundaries and values cannot lose to a fixed
        # binning whose fitted values happen to be monotone (a fixed
        # binning with non-monotone values is outside the isotonic family
        # and may legitimately fit the training set better).
        rng = np.random.default_rng(23)
        monotone_cases = 0
        for _ in range(30):
            n = int(rng.integers(50, 400))
            scores = rng.random(n)
            outcomes = (rng.random(n) < scores).astype(int)
            s = BinaryCalibrationSet(scores=scores, outcomes=outcomes)
            order = np.argsort(scores)
            hist = apply_binary(fit_histogram(s, m_bins=5), scores)
            if np.any(np.diff(hist[order]) < 0):
                continue
            monotone_cases += 1
            iso = apply_binary(fit_isotonic(s), scores)
            sse_iso = np.sum((iso - outcomes) ** 2)
            sse_hist = np.sum((hist - outcomes) ** 2)
            assert sse_iso <= sse_hist + 1e-9
        assert monotone_cases >= 5

    def test_reproduces_monotone_histogram_fit(self):
        # When outcomes step from 0 to 1 exactly at a bin edge, the fixed
        # binning is already optimal and both methods agree on the data.
        s = BinaryCalibrationSet(
            scores=[0.1, 0.2, 0.3, 0.7, 0.8, 0.9], outcomes=[0, 0, 0, 1, 1, 1]
        )
        hist = fit_histogram(s, m_bins=2, mode=EQUAL_FREQUENCY)
        iso = fit_isotonic(s)
        assert np.all(np.diff(hist.thetas) >= 0)
        np.testing.assert_array_equal(
            apply_binary(iso, np.array(s.scores)), apply_binary(hist, np.array(s.scores))
        )


class TestBBQ:
    def test_posterior_mean_balanced(self):
        s = BinaryCalibrationSet(scores=[0.3, 0.6], outcomes=[1, 0])
        model = fit_bbq(s, candidate_bin_counts=[1])
        assert apply_binary(model, 0.5) == pytest.approx(0.5, abs=1e-15)

    def test_posterior_mean_all_positive(self):
        s = BinaryCalibrationSet(scores=[0.3, 0.6], outcomes=[1, 1])
        model = fit_bbq(s, candidate_bin_counts=[1])
        assert apply_binary(model, 0.1) == pytest.approx(0.75, abs=1e-15)

    def test_identical_schemes_share_weight(self):
        s = BinaryCalibrationSet(scores=[0.2, 0.4, 0.7], outcomes=[0, 1, 1])
        model = fit_bbq(s, candidate_bin_counts=[2, 2])
        np.testing.assert_allclose(np.exp(model.log_weights), [0.5, 0.5], atol=1e-9)

    def test_log_weights_normalized(self):
        s = gen_binary(500, 0.1, seed=31)
        model = fit_bbq(s)
        total = np.exp(model.log_weights).sum()
        assert total == pytest.approx(1.0, abs=1e-9)

    def test_vanishing_prior_recovers_histogram(self):
        s = gen_binary(400, 0.0, seed=32)
        m_bins = 7
        hist = fit_histogram(s, m_bins=m_bins, mode=EQUAL_FREQUENCY)
        bbq = fit_bbq(s, candidate_bin_counts=[m_bins], prior_alpha=1e-6, prior_beta=1e-6)
        idx = bin_index(hist.boundaries, s.scores)
        for m in range(m_bins):
            if np.any(idx == m):
                probe = s.scores[idx == m][0]
                assert apply_binary(bbq, probe) == pytest.approx(hist.thetas[m], abs=1e-4)

    def test_empty_candidate_list_rejected(self):
        s = BinaryCalibrationSet(scores=[0.5], outcomes=[1])
        with pytest.raises(ValidationError):
            fit_bbq(s, candidate_bin_counts=[])

    def test_mixture_outputs_in_unit_interval(self):
        s = gen_binary(300, 0.3, seed=33)
        model = fit_bbq(s)
        out = apply_binary(model, np.linspace(0.0, 1.0, 101))
        assert np.all(out >= 0.0) and np.all(out <= 1.0)


class TestPlatt:
    def test_identity_parameters_leave_scores_alone(self):
        model = PlattModel(a=1.0, b=0.0)
        scores = np.array([0.2, 0.5, 0.9])
        np.testing.assert_allclose(apply_binary(model, scores), scores, atol=1e-9)

    def test_single_class_rejected(self):
        s = BinaryCalibrationSet(scores=[0.2, 0.8], outcomes=[1, 1])
        with pytest.raises(DegenerateLabelsError):
            fit_platt(s)

    def test_separable_data_rejected(self):
        s = BinaryCalibrationSet(scores=[0.1, 0.2, 0.8, 0.9], outcomes=[0, 0, 1, 1])
        with pytest.raises(DegenerateLabelsError):
            fit_platt(s)

    def test_independent_outcomes_drive_slope_to_zero(self):
        rng = np.random.default_rng(34)
        n = 2_000
        scores = rng.uniform(0.05, 0.95, n)
        outcomes = np.zeros(n, dtype=int)
        outcomes[: n // 2] = 1
        rng.shuffle(outcomes)
        s = BinaryCalibrationSet(scores=scores, outcomes=outcomes)
        model = fit_platt(s)
        rate = outcomes.mean()
        sigma_b = 1.0 / (1.0 + math.exp(-model.b))
        assert abs(model.a) < 0.2
        assert sigma_b == pytest.approx(rate, abs=0.05)

        # Grid-search oracle: no nearby (a, b) does better on the loss.
        z = np.log(scores) - np.log1p(-scores)
        def mean_nll(a, b):
            u = a * z + b
            return float(np.mean(np.logaddexp(0.0, u) - outcomes * u))

        fitted = mean_nll(model.a, model.b)
        for a in np.linspace(-1.0, 1.0, 21):
            for b in np.linspace(-1.0, 1.0, 21):
                assert fitted <= mean_nll(a, b) + 1e-9

    def test_fit_never_loses_to_identity(self):
        for seed in range(5):
            s = gen_binary(1_000, 0.2, seed=seed)
            model = fit_platt(s)
            z = np.log(np.clip(s.scores, 1e-12, 1 - 1e-12)) - np.log1p(
                -np.clip(s.scores, 1e-12, 1 - 1e-12)
            )
            y = s.outcomes

            def mean_nll(a, b):
                u = a * z + b
                return float(np.mean(np.logaddexp(0.0, u) - y * u))

            assert mean_nll(model.a, model.b) <= mean_nll(1.0, 0.0) + 1e-12

    def test_explicit_logits_used_when_given(self):
        rng = np.random.default_rng(35)
        z = rng.normal(0, 2, 500)
        y = (rng.random(500) < 1.0 / (1.0 + np.exp(-z))).astype(int)
        s = BinaryCalibrationSet(scores=1.0 / (1.0 + np.exp(-z)), outcomes=y)
        model = fit_platt(s, from_logits=z)
        assert model.a == pytest.approx(1.0, abs=0.3)
        assert model.b == pytest.approx(0.0, abs=0.3)


class TestApplyBinary:
    def test_outputs_stay_in_unit_interval(self):
        rng = np.random.default_rng(36)
        s = gen_binary(300, 0.25, seed=37)
        models = [
            fit_histogram(s, m_bins=8),
            fit_isotonic(s),
            fit_bbq(s, candidate_bin_counts=[1, 3, 9]),
            fit_platt(s),
        ]
        probe = rng.random(500)
        for model in models:
            out = apply_binary(model, probe)
            assert np.all(out >= 0.0) and np.all(out <= 1.0)

    def test_scalar_in_scalar_out(self):
        s = gen_binary(100, 0.0, seed=38)
        model = fit_histogram(s, m_bins=4)
        assert isinstance(apply_binary(model, 0.5), float)

    def test_score_out_of_range_rejected(self):
        model = HistogramBinningModel(boundaries=[0.0, 1.0], thetas=[0.5])
        with pytest.raises(ValidationError):
            apply_binary(model, 1.5)

    def test_unknown_model_rejected(self):
        with pytest.raises(TypeError):
            apply_binary(object(), 0.5)

    def test_model_field_validation(self):
        with pytest.raises(ValidationError):
            HistogramBinningModel(boundaries=[0.0, 0.5], thetas=[0.2])
        with pytest.raises(ValidationError):
            IsotonicModel(breakpoints=[0.2, 0.1], values=[0.1, 0.2])
        with pytest.raises(ValidationError):
            IsotonicModel(breakpoints=[0.1, 0.2], values=[0.5, 0.4])
        with pytest.raises(ValidationError):
            PlattModel(a=float("nan"), b=0.0)
        with pytest.raises(ValidationError):
            BBQModel(schemes=(), log_weights=np.array([]))
