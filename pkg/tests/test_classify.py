from __future__ import annotations

import numpy as np
import pytest

from fastdata.classify import (
    MadModel,
    RulePredicate,
    ThresholdState,
    classify,
    hybrid_or,
    rule_classifier,
    score_mad,
    score_mahalanobis,
    score_zscore,
    train_fastmcd,
    train_mad,
)
from fastdata.core import Label
from fastdata.sketches import AdaptableDampedReservoir


class TestMad:
    def test_hand_computed_nested_medians(self):
        model = train_mad(np.array([1.0, 2.0, 3.0, 4.0, 100.0]))
        assert model.median == 3.0
        assert model.mad == 1.0

    def test_constant_sample_degenerate(self):
        model = train_mad(np.array([5.0, 5.0, 5.0]))
        assert model.mad == 0.0
        assert model.degenerate

    def test_symmetric_sample(self):
        model = train_mad(np.array([-1.0, 0.0, 1.0]))
        assert model.median == 0.0
        assert model.mad == 1.0

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            train_mad(np.array([]))

    def test_score_examples(self):
        model = MadModel(median=3.0, mad=1.0, fallback_scale=1.0)
        assert score_mad(model, 5.0) == 2.0
        assert score_mad(model, 3.0) == 0.0

    def test_translation_invariance(self):
        rng = np.random.default_rng(0)
        data = rng.normal(10.0, 3.0, 500)
        x = 17.0
        shifted = train_mad(data + 4.0)
        base = train_mad(data)
        assert score_mad(shifted, x + 4.0) == pytest.approx(score_mad(base, x))

    def test_degenerate_fallback_uses_nonzero_deviations(self):
        # quantized data: most values equal, a few off
        model = train_mad(np.array([2.0] * 10 + [3.0, 1.0]))
        assert model.degenerate
        assert model.scale == 1.0
        assert np.isfinite(score_mad(model, 9.0))

    def test_scale_equivariance_of_labels(self):
        rng = np.random.default_rng(1)
        data = rng.normal(0.0, 1.0, 400)
        c = 7.5

        def labels(sample):
            model = train_mad(sample)
            scores = score_mad(model, sample)
            cutoff = np.quantile(scores, 0.95)
            return scores > cutoff

        assert np.array_equal(labels(data), labels(data * c))


class TestZScore:
    def test_examples(self):
        assert score_zscore(0.0, 1.0, 2.0) == 2.0
        assert score_zscore(5.0, 2.0, 5.0) == 0.0

    def test_zero_sd_rejected(self):
        with pytest.raises(ValueError):
            score_zscore(0.0, 0.0, 1.0)


class TestMahalanobis:
    def _model(self, mu, cov):
        cov = np.asarray(cov, dtype=float)
        from fastdata.classify import McdModel

        return McdModel(
            mu=np.asarray(mu, dtype=float),
            cov=cov,
            cov_inv=np.linalg.inv(cov),
            det=float(np.linalg.det(cov)),
            h_fraction=0.5,
            iterations=0,
        )

    def test_identity_reduces_to_euclidean(self):
        model = self._model([0.0, 0.0], np.eye(2))
        assert score_mahalanobis(model, np.array([3.0, 4.0])) == pytest.approx(5.0)

    def test_center_scores_zero(self):
        model = self._model([1.0, 2.0], np.eye(2))
        assert score_mahalanobis(model, np.array([1.0, 2.0])) == 0.0

    def test_axis_scaling(self):
        model = self._model([0.0, 0.0], np.diag([4.0, 1.0]))
        assert score_mahalanobis(model, np.array([2.0, 0.0])) == pytest.approx(1.0)

    def test_scaled_identity_is_euclidean_over_sigma(self):
        sigma = 3.0
        model = self._model([0.0, 0.0], sigma**2 * np.eye(2))
        x = np.array([1.5, -2.0])
        assert score_mahalanobis(model, x) == pytest.approx(np.linalg.norm(x) / sigma)

    def test_dimension_mismatch(self):
        model = self._model([0.0, 0.0], np.eye(2))
        with pytest.raises(ValueError, match="dimension"):
            score_mahalanobis(model, np.array([1.0, 2.0, 3.0]))


class TestFastMcd:
    def test_determinant_nonincreasing_random_instances(self):
        rng = np.random.default_rng(42)
        for trial in range(20):
            pts = rng.normal(size=(200, 2)) @ rng.normal(size=(2, 2))
            model = train_fastmcd(pts, seed=trial, n_starts=3)
            for history in model.det_history:
                for a, b in zip(history, history[1:]):
                    assert b <= a * (1 + 1e-9)

    def test_gaussian_location_recovery(self):
        rng = np.random.default_rng(0)
        pts = rng.normal(size=(10_000, 2))
        model = train_fastmcd(pts, h_fraction=0.75, seed=0)
        assert np.all(np.abs(model.mu) < 0.1)

    def test_contaminated_location_recovery(self):
        rng = np.random.default_rng(1)
        clean = rng.normal(size=(9_000, 2))
        clump = rng.normal(loc=1000.0, scale=1.0, size=(1_000, 2))
        pts = np.vstack([clean, clump])
        model = train_fastmcd(pts, seed=1)
        assert np.all(np.abs(model.mu) < 0.2)
        # the plain mean is displaced by roughly 100 per coordinate
        assert np.all(np.abs(pts.mean(axis=0)) > 50.0)

    def test_cov_inverse_contract(self):
        rng = np.random.default_rng(5)
        pts = rng.normal(size=(500, 3))
        model = train_fastmcd(pts, seed=0)
        assert np.allclose(model.cov_inv @ model.cov, np.eye(3), atol=1e-8)
        assert model.det > 0

    def test_too_few_points_rejected(self):
        with pytest.raises(ValueError, match="d\\+1"):
            train_fastmcd(np.zeros((2, 2)), seed=0)

    def test_identical_points_degenerate(self):
        from fastdata.classify import DegenerateModelError

        with pytest.raises((DegenerateModelError, ValueError)):
            train_fastmcd(np.ones((50, 2)), seed=0)


class TestRuleAndHybrid:
    def test_power_drain_rule(self):
        rule = RulePredicate.parse("metric[0] > 100")
        (label,) = rule_classifier(rule, np.array([[101.0]]))
        assert label.is_outlier

    def test_l2norm_boundary_not_exceeded(self):
        rule = RulePredicate.parse("l2norm > 5")
        (label,) = rule_classifier(rule, np.array([[3.0, 4.0]]))
        assert not label.is_outlier

    def test_missing_index_config_error(self):
        rule = RulePredicate.parse("metric[3] > 1")
        with pytest.raises(ValueError, match="metric\\[3\\]"):
            rule_classifier(rule, np.array([[1.0, 2.0]]))

    def test_hybrid_or(self):
        assert hybrid_or([Label(False, 1.0), Label(True, 2.0)]) == Label(True, 2.0)
        assert hybrid_or([Label(False, 1.0), Label(False, 0.5)]) == Label(False, 1.0)
        single = Label(True, 3.0)
        assert hybrid_or([single]) == single


class TestClassifyAndThreshold:
    def test_strict_cutoff(self):
        assert classify(991.0, 990.0).is_outlier
        assert not classify(990.0, 990.0).is_outlier

    def test_cutoff_from_reservoir(self):
        adr = AdaptableDampedReservoir(2000, seed=0)
        adr.observe_many(np.arange(1.0, 1001.0))
        state = ThresholdState(adr, outlier_percentile=0.01)
        assert state.refresh() == 990.0

    def test_all_equal_scores_yield_zero_outliers(self):
        adr = AdaptableDampedReservoir(100, seed=0)
        adr.observe_many(np.full(50, 3.3))
        state = ThresholdState(adr, outlier_percentile=0.01)
        cutoff = state.refresh()
        assert cutoff == 3.3
        assert not classify(3.3, cutoff).is_outlier

    def test_empty_reservoir_keeps_cutoff_and_warns(self):
        adr = AdaptableDampedReservoir(10, seed=0)
        state = ThresholdState(adr, outlier_percentile=0.01, cutoff=5.0)
        assert state.refresh() == 5.0
        assert state.warned_empty

    def test_shift_doubles_cutoff(self):
        adr = AdaptableDampedReservoir(4000, seed=0)
        scores = np.arange(1.0, 2001.0)
        adr.observe_many(scores)
        state = ThresholdState(adr, outlier_percentile=0.01)
        first = state.refresh()
        doubled = AdaptableDampedReservoir(4000, seed=0)
        doubled.observe_many(scores * 2.0)
        state.reservoir = doubled
        assert state.refresh() == pytest.approx(first * 2.0)

    def test_drift_check(self):
        adr = AdaptableDampedReservoir(10, seed=0)
        state = ThresholdState(adr, outlier_percentile=0.01)
        state.record_labels(n_outliers=2, n_total=200)  # 1% expected, 1% seen-ish
        assert not state.drift_check()
        state.record_labels(n_outliers=150, n_total=200)
        assert state.drift_check()

    def test_nearest_rank_marks_top_set(self):
        rng = np.random.default_rng(3)
        scores = rng.permutation(np.arange(1000.0))
        adr = AdaptableDampedReservoir(2000, seed=0)
        adr.observe_many(scores)
        state = ThresholdState(adr, outlier_percentile=0.05)
        cutoff = state.refresh()
        n_out = int((scores > cutoff).sum())
        assert n_out == int(np.ceil(0.05 * len(scores))) - 1 or n_out == int(
            np.floor(0.05 * len(scores))
        )
