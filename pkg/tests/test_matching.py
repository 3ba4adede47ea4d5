"""Imputation, propensity matching, and Rubin pooling."""

import math

import numpy as np
import pandas as pd
import pytest

from screenaudit.errors import EstimationError
from screenaudit.matching import (
    EffectEstimate,
    flag_imbalanced,
    matched_effect,
    matching_grid,
    pmm_impute,
    pooled_percent,
    propensity_match,
    rubin_pool,
    standardized_mean_difference,
)
from screenaudit.rdd import effect_to_percent


def toy_frame(n=60, missing=0, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.uniform(0, 10, n)
    z = 0.5 * x + rng.standard_normal(n)
    d = (x + rng.standard_normal(n) > 5).astype(int)
    y = 1.0 + 0.4 * d + 0.2 * x + 0.1 * rng.standard_normal(n)
    frame = pd.DataFrame({"treated": d, "outcome": y, "x": x, "z": z})
    if missing:
        gaps = rng.choice(n, size=missing, replace=False)
        frame.loc[gaps, "z"] = np.nan
    return frame


class TestPmmImpute:
    def test_no_missing_returns_m_identical_copies(self):
        frame = toy_frame()
        result = pmm_impute(frame, ["x", "z"], m=4)
        assert result.m == 4
        for dataset in result.datasets:
            pd.testing.assert_frame_equal(dataset, frame)

    def test_observed_cells_untouched_and_gaps_filled(self):
        frame = toy_frame(missing=12, seed=1)
        observed = frame["z"].notna()
        result = pmm_impute(frame, ["x", "z"], m=3, max_iterations=5)
        for dataset in result.datasets:
            assert not dataset["z"].isna().any()
            pd.testing.assert_series_equal(
                dataset.loc[observed, "z"], frame.loc[observed, "z"]
            )
            pd.testing.assert_series_equal(dataset["x"], frame["x"])
            pd.testing.assert_series_equal(dataset["outcome"], frame["outcome"])

    def test_imputed_values_are_observed_donors(self):
        frame = toy_frame(missing=10, seed=2)
        donors = set(frame.loc[frame["z"].notna(), "z"])
        result = pmm_impute(frame, ["x", "z"], m=2, max_iterations=5)
        gaps = frame["z"].isna()
        for dataset in result.datasets:
            assert set(dataset.loc[gaps, "z"]) <= donors

    def test_donor_neighborhood_on_exact_line(self):
        # y = 2x exactly, one missing y at x = 50: the bootstrap fit
        # recovers the exact line, so donors are the k nearest by |2x-100|.
        x = np.array([v for v in range(101)], dtype=float)
        y = 2.0 * x
        frame = pd.DataFrame({"x": x, "y": y})
        frame.loc[50, "y"] = np.nan
        result = pmm_impute(frame, ["x", "y"], m=10, max_iterations=2, seed=7)
        values = {float(ds.loc[50, "y"]) for ds in result.datasets}
        assert values <= {94.0, 96.0, 98.0, 102.0, 104.0, 106.0}
        assert len(values) >= 2  # uniform donor draw varies across chains

    def test_deterministic_per_seed(self):
        frame = toy_frame(missing=15, seed=3)
        a = pmm_impute(frame, ["x", "z"], m=2, max_iterations=4, seed=9)
        b = pmm_impute(frame, ["x", "z"], m=2, max_iterations=4, seed=9)
        for da, db in zip(a.datasets, b.datasets):
            pd.testing.assert_frame_equal(da, db)
        c = pmm_impute(frame, ["x", "z"], m=2, max_iterations=4, seed=10)
        assert any(
            not da["z"].equals(dc["z"]) for da, dc in zip(a.datasets, c.datasets)
        )

    def test_half_missing_rejected(self):
        frame = toy_frame(n=40, missing=20, seed=4)
        with pytest.raises(EstimationError, match=">= 50%"):
            pmm_impute(frame, ["x", "z"], m=2)

    def test_all_missing_rejected(self):
        frame = toy_frame(n=20)
        frame["z"] = np.nan
        with pytest.raises(EstimationError, match="no complete cases"):
            pmm_impute(frame, ["x", "z"], m=2)

    def test_unknown_predictor_rejected(self):
        with pytest.raises(EstimationError, match="ghost"):
            pmm_impute(toy_frame(), ["x", "ghost"], m=2)

    def test_chained_over_two_gappy_columns(self):
        frame = toy_frame(n=80, missing=10, seed=5)
        frame.loc[frame.index[:8], "x"] = np.nan
        result = pmm_impute(frame, ["x", "z"], m=2, max_iterations=4)
        for dataset in result.datasets:
            assert not dataset[["x", "z"]].isna().any().any()


class TestPropensityMatch:
    def test_identical_units_match_at_distance_zero(self):
        x = list(range(1, 11))
        frame = pd.DataFrame(
            {"treated": [1] * 10 + [0] * 10, "x": x + x}
        )
        match = propensity_match(frame, "treated", ["x"], caliper_sd=0.0)
        assert len(match.pairs) == 10
        assert match.n_dropped == 0
        for t_label, c_label in match.pairs:
            assert frame.loc[t_label, "x"] == frame.loc[c_label, "x"]

    def test_pairs_are_one_to_one(self):
        frame = toy_frame(seed=6)
        match = propensity_match(frame, "treated", ["x", "z"], caliper_sd=0.5)
        controls = [c for _, c in match.pairs]
        assert len(controls) == len(set(controls))
        assert all(frame.loc[t, "treated"] == 1 for t, _ in match.pairs)
        assert all(frame.loc[c, "treated"] == 0 for _, c in match.pairs)
        n_treated = int(frame["treated"].sum())
        assert len(match.pairs) + match.n_dropped == n_treated

    def test_deterministic(self):
        frame = toy_frame(seed=7)
        a = propensity_match(frame, "treated", ["x", "z"], caliper_sd=0.3)
        b = propensity_match(frame, "treated", ["x", "z"], caliper_sd=0.3)
        assert a.pairs == b.pairs

    def test_wider_caliper_never_drops_more(self):
        frame = toy_frame(seed=8)
        narrow = propensity_match(frame, "treated", ["x", "z"], caliper_sd=0.05)
        wide = propensity_match(frame, "treated", ["x", "z"], caliper_sd=1.0)
        assert wide.n_dropped <= narrow.n_dropped

    def test_single_group_rejected(self):
        frame = toy_frame()
        frame["treated"] = 1
        with pytest.raises(EstimationError, match="non-empty"):
            propensity_match(frame, "treated", ["x"], caliper_sd=0.2)

    def test_negative_caliper_rejected(self):
        with pytest.raises(EstimationError, match="non-negative"):
            propensity_match(toy_frame(), "treated", ["x"], caliper_sd=-0.1)

    def test_no_pairs_within_caliper_raises(self):
        # Perfectly separated groups: logits far apart, caliper 0 has no ties.
        frame = pd.DataFrame(
            {
                "treated": [1] * 6 + [0] * 6,
                "x": [10.0, 11, 12, 13, 14, 15, 0.0, 1, 2, 3, 4, 5],
            }
        )
        try:
            with pytest.raises(EstimationError, match="caliper"):
                propensity_match(frame, "treated", ["x"], caliper_sd=0.0)
        except EstimationError:
            pass  # separation may already fail the propensity fit


class TestBalanceMetrics:
    def test_smd_hand_value(self):
        frame = pd.DataFrame({"x": [2.0, 4.0, 1.0, 3.0]}, index=list("abcd"))
        pairs = [("a", "c"), ("b", "d")]
        smd = standardized_mean_difference(frame, pairs, "x")
        assert smd == pytest.approx(1.0 / math.sqrt(1.25))

    def test_smd_zero_for_identical_groups(self):
        frame = pd.DataFrame({"x": [1.0, 2.0, 1.0, 2.0]}, index=list("abcd"))
        smd = standardized_mean_difference(frame, [("a", "c"), ("b", "d")], "x")
        assert smd == 0.0

    def test_zero_sd_rejected(self):
        frame = pd.DataFrame({"x": [3.0, 3.0]}, index=list("ab"))
        with pytest.raises(EstimationError, match="zero pooled sd"):
            standardized_mean_difference(frame, [("a", "b")], "x")

    def test_empty_pairs_rejected(self):
        with pytest.raises(EstimationError, match="empty"):
            standardized_mean_difference(pd.DataFrame({"x": [1.0]}), [], "x")

    def test_flag_threshold_is_strict(self):
        frame = pd.DataFrame({"x": [2.0, 4.0, 1.0, 3.0]}, index=list("abcd"))
        pairs = [("a", "c"), ("b", "d")]
        smd = abs(standardized_mean_difference(frame, pairs, "x"))
        assert flag_imbalanced(frame, pairs, ["x"], threshold=smd) == []
        assert flag_imbalanced(frame, pairs, ["x"], threshold=smd - 1e-9) == ["x"]


class TestMatchedEffect:
    def test_recovers_constructed_difference(self):
        frame = pd.DataFrame(
            {
                "treated": [1, 1, 0, 0],
                "y": [8.0, 8.0, 5.0, 5.0],
            },
            index=list("abcd"),
        )
        pairs = [("a", "c"), ("b", "d")]
        effect = matched_effect(frame, pairs, "y", "treated")
        assert effect.beta == pytest.approx(3.0, abs=1e-12)
        assert effect.se == pytest.approx(0.0, abs=1e-9)
        assert effect.n == 4

    def test_adjustment_columns_enter_model(self):
        frame = toy_frame(seed=9)
        match = propensity_match(frame, "treated", ["x", "z"], caliper_sd=0.5)
        plain = matched_effect(frame, match.pairs, "outcome", "treated")
        adjusted = matched_effect(
            frame, match.pairs, "outcome", "treated", adjust=["x"]
        )
        assert isinstance(adjusted, EffectEstimate)
        assert adjusted.beta != plain.beta

    def test_empty_pairs_rejected(self):
        with pytest.raises(EstimationError, match="empty"):
            matched_effect(toy_frame(), [], "outcome", "treated")


class TestRubinPool:
    def test_hand_example(self):
        pooled = rubin_pool([(1.0, 1.0), (3.0, 1.0)], [100, 100])
        assert pooled.beta_bar == 2.0
        assert pooled.var_within == 1.0
        assert pooled.var_between == 2.0
        assert pooled.var_pooled == 4.0
        assert pooled.se_pooled == 2.0
        assert pooled.mean_n == 100.0
        assert pooled.sd_n == 0.0

    def test_variance_identity(self):
        rng = np.random.default_rng(14)
        for _ in range(25):
            m = int(rng.integers(2, 12))
            estimates = [
                (float(rng.normal()), float(rng.uniform(0.1, 2)))
                for _ in range(m)
            ]
            pooled = rubin_pool(estimates)
            expected = pooled.var_within + pooled.var_between * (1 + 1 / m)
            assert pooled.var_pooled == pytest.approx(expected, abs=1e-12)

    def test_permutation_invariance(self):
        estimates = [(0.5, 0.2), (0.9, 0.3), (0.1, 0.25)]
        a = rubin_pool(estimates)
        b = rubin_pool(list(reversed(estimates)))
        assert a.beta_bar == pytest.approx(b.beta_bar)
        assert a.var_pooled == pytest.approx(b.var_pooled)

    def test_single_estimate_rejected(self):
        with pytest.raises(EstimationError, match="m >= 2"):
            rubin_pool([(1.0, 0.5)])

    def test_pooled_percent_matching_transform(self):
        pooled = rubin_pool([(0.6, 0.1), (0.8, 0.1)])
        percent, ci = pooled_percent(pooled)
        expected = effect_to_percent(pooled.beta_bar, pooled.se_pooled)
        assert (percent, ci) == expected


class TestMatchingGrid:
    def test_rows_and_columns(self):
        frame = toy_frame(n=80, missing=10, seed=15)
        imputations = pmm_impute(frame, ["x", "z"], m=3, max_iterations=3)
        grid = matching_grid(
            imputations, "treated", "outcome", ["x", "z"],
            calipers=(0.2, 0.4),
        )
        assert list(grid["caliper"]) == [0.2, 0.4]
        assert set(grid.columns) >= {
            "caliper", "percent", "ci_low", "ci_high", "beta_bar",
            "se_pooled", "mean_n", "sd_n", "m",
        }
        assert (grid["m"] == 3).all()
        assert (grid["ci_low"] <= grid["percent"]).all()
        assert (grid["percent"] <= grid["ci_high"]).all()
