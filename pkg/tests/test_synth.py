"""Synthetic population, funding surface, and missingness generators."""

import math

import numpy as np
import pytest

from screenaudit.data import HealthSet, ModelSpec
from screenaudit.engine import apply_health_set, run_model
from screenaudit.errors import SchemaError
from screenaudit.funding import repair_projects
from screenaudit.synth import (
    CUBIC_COEFFICIENTS,
    SynthConfig,
    demographics_map,
    funding_surface,
    generate_funding_rdd,
    generate_projects,
    generate_tracts,
    mask_missing,
    synthetic_schema,
)


class TestConfig:
    def test_validation(self):
        with pytest.raises(SchemaError):
            SynthConfig(n_tracts=-1)
        with pytest.raises(SchemaError):
            SynthConfig(n_tracts=10, n_variables=3)
        with pytest.raises(SchemaError):
            SynthConfig(n_tracts=10, correlation=1.0)
        with pytest.raises(SchemaError):
            SynthConfig(n_tracts=10, missing_rate=-0.1)


class TestSchema:
    def test_round_robin_subcategories(self):
        schema = synthetic_schema(SynthConfig(n_tracts=1, n_variables=6))
        subs = [v.subcategory_id for v in schema.variables]
        assert len(schema.variables) == 6
        assert subs[0] == subs[4]
        assert subs[1] == subs[5]
        assert len(set(subs)) == 4

    def test_extended_twin(self):
        schema = synthetic_schema(
            SynthConfig(n_tracts=1, n_variables=8, extended_health=True)
        )
        twins = [v for v in schema.variables if v.extended_only]
        assert len(twins) == 1
        twin = twins[0]
        assert twin.variable_id.endswith("_survey")
        assert twin.extended_weight == 0.5
        host_id = twin.variable_id.removesuffix("_survey")
        host = next(v for v in schema.variables if v.variable_id == host_id)
        assert host.extended_weight == 0.5
        assert host.subcategory_id == "sensitive_populations"
        baseline = apply_health_set(schema, HealthSet.BASELINE)
        extended = apply_health_set(schema, HealthSet.EXTENDED)
        assert twin.variable_id not in baseline.variable_ids
        assert twin.variable_id in extended.variable_ids


class TestGenerateTracts:
    def test_deterministic(self):
        config = SynthConfig(n_tracts=40, n_districts=4, missing_rate=0.0)
        assert generate_tracts(config) == generate_tracts(config)

    def test_zero_tracts(self):
        assert generate_tracts(SynthConfig(n_tracts=0)) == []

    def test_structure(self):
        config = SynthConfig(n_tracts=60, n_districts=5)
        records = generate_tracts(config)
        assert len(records) == 60
        ids = [r.tract_id for r in records]
        assert len(set(ids)) == 60
        for r in records:
            assert len(r.values) == 8
            assert all(v is not None for v in r.values.values())
            assert r.population >= 50.0
            assert r.demographics is not None
            assert r.demographics.party in ("blue", "red")
            has_evidence = (
                r.district_id is not None or bool(r.population_in_district)
            )
            assert has_evidence

    def test_multi_district_fraction(self):
        records = generate_tracts(SynthConfig(n_tracts=500, n_districts=10))
        multi = [
            r for r in records
            if r.population_in_district and len(r.population_in_district) == 2
        ]
        assert 0.05 <= len(multi) / len(records) <= 0.15

    def test_correlation_knob(self):
        def mean_abs_corr(rho):
            records = generate_tracts(
                SynthConfig(n_tracts=1000, correlation=rho, seed=5)
            )
            matrix = np.array(
                [[r.values[f"var_{j:02d}"] for j in range(8)] for r in records]
            )
            ranks = np.argsort(np.argsort(matrix, axis=0), axis=0).astype(float)
            corr = np.corrcoef(ranks.T)
            off = corr[~np.eye(8, dtype=bool)]
            return float(np.mean(np.abs(off)))

        assert mean_abs_corr(0.0) < 0.1
        assert mean_abs_corr(0.8) > 0.4

    def test_demographics_map(self):
        records = generate_tracts(SynthConfig(n_tracts=10))
        mapping = demographics_map(records)
        assert set(mapping) == {r.tract_id for r in records}
        shares = next(iter(mapping.values())).race_shares
        assert set(shares) == {"groupa", "groupb"}

    def test_population_scores_cleanly(self):
        config = SynthConfig(n_tracts=50)
        records = generate_tracts(config)
        schema = synthetic_schema(config)
        results = run_model(records, schema, ModelSpec())
        assert sum(r.percentile is not None for r in results) == 50


class TestFundingSurface:
    def test_cubic_endpoints(self):
        assert funding_surface(np.array([0.0])).item() == CUBIC_COEFFICIENTS[0]
        assert funding_surface(np.array([100.0])).item() == pytest.approx(
            sum(CUBIC_COEFFICIENTS)
        )

    def test_noiseless_jump_is_exact(self):
        config = SynthConfig(n_tracts=30)
        records = generate_tracts(config)
        percentiles = {
            r.tract_id: float(10 + 3 * i) % 100.0
            for i, r in enumerate(records)
        }
        out = generate_funding_rdd(
            records, percentiles, tau_star=0.7, noise_sd=0.0, seed=1
        )
        for tract_id, y in out.items():
            p = percentiles[tract_id]
            expected = funding_surface(np.array([p])).item() + 0.7 * (p >= 75.0)
            assert y == pytest.approx(expected, abs=1e-12)

    def test_zero_effect_is_continuous(self):
        config = SynthConfig(n_tracts=4)
        records = generate_tracts(config)
        ids = [r.tract_id for r in records]
        percentiles = dict(zip(ids, [74.999999, 75.0, 75.000001, 50.0]))
        out = generate_funding_rdd(
            records, percentiles, tau_star=0.0, noise_sd=0.0, seed=1
        )
        assert abs(out[ids[1]] - out[ids[0]]) < 1e-6
        assert abs(out[ids[2]] - out[ids[1]]) < 1e-6

    def test_unscored_tracts_skipped_and_deterministic(self):
        config = SynthConfig(n_tracts=10)
        records = generate_tracts(config)
        percentiles = {r.tract_id: 50.0 for r in records[:6]}
        a = generate_funding_rdd(records, percentiles, 0.7, 0.2, seed=3)
        b = generate_funding_rdd(records, percentiles, 0.7, 0.2, seed=3)
        c = generate_funding_rdd(records, percentiles, 0.7, 0.2, seed=4)
        assert set(a) == set(percentiles)
        assert a == b
        assert a != c


class TestMaskMissing:
    def config_records(self, n=1000):
        return generate_tracts(SynthConfig(n_tracts=n, seed=9))

    def test_rate_zero_identity(self):
        records = self.config_records(20)
        assert mask_missing(records, 0.0, seed=1) == records

    def test_deterministic(self):
        records = self.config_records(100)
        a = mask_missing(records, 0.1, seed=2)
        b = mask_missing(records, 0.1, seed=2)
        assert a == b

    def test_masked_fraction_near_rate(self):
        records = self.config_records()
        masked = mask_missing(records, 0.05, seed=3)
        cells = sum(
            1 for r in masked for vid in r.values if vid != "var_00"
        )
        gone = sum(
            1 for r in masked
            for vid, v in r.values.items()
            if vid != "var_00" and v is None
        )
        assert 0.035 <= gone / cells <= 0.065

    def test_conditioner_never_masked(self):
        records = self.config_records()
        masked = mask_missing(records, 0.3, seed=4)
        assert all(r.values["var_00"] is not None for r in masked)

    def test_observed_values_unchanged(self):
        records = self.config_records(200)
        masked = mask_missing(records, 0.2, seed=5)
        for before, after in zip(records, masked):
            for vid, value in after.values.items():
                if value is not None:
                    assert value == before.values[vid]

    def test_missingness_tracks_conditioner(self):
        records = self.config_records()
        masked = mask_missing(records, 0.1, seed=6)
        conditioner = np.array([r.values["var_00"] for r in records])
        median = float(np.median(conditioner))

        def missing_rate(rows):
            cells = [
                v is None for r in rows
                for vid, v in r.values.items() if vid != "var_00"
            ]
            return float(np.mean(cells))

        top = [r for r, c in zip(masked, conditioner) if c > median]
        bottom = [r for r, c in zip(masked, conditioner) if c <= median]
        assert missing_rate(top) > missing_rate(bottom)

    def test_rate_validated(self):
        with pytest.raises(SchemaError):
            mask_missing(self.config_records(5), 1.0, seed=1)


class TestGenerateProjects:
    def setup(self):
        config = SynthConfig(n_tracts=40, n_districts=4)
        records = generate_tracts(config)
        schema = synthetic_schema(config)
        results = run_model(records, schema, ModelSpec())
        percentiles = {
            r.tract_id: r.percentile for r in results if r.percentile is not None
        }
        designated = {r.tract_id: r.designated for r in results}
        log_funding = generate_funding_rdd(records, percentiles, 0.7, 0.1, seed=7)
        return records, log_funding, designated

    def test_tract_projects_realize_totals(self):
        records, log_funding, designated = self.setup()
        projects = generate_projects(records, log_funding, designated, seed=8)
        by_tract = {p.tract_id: p for p in projects if p.tract_id is not None}
        assert set(by_tract) == set(log_funding)
        for tract_id, y in log_funding.items():
            p = by_tract[tract_id]
            assert p.total == pytest.approx(math.exp(y))
            assert p.earmark_low_income == pytest.approx(0.1 * p.total)
            if designated[tract_id]:
                assert p.earmark_dac == pytest.approx(0.6 * p.total)
            else:
                assert p.earmark_dac == 0.0

    def test_defects_planted_and_repairable(self):
        records, log_funding, designated = self.setup()
        projects = generate_projects(
            records, log_funding, designated, seed=8, include_defects=True
        )
        ids = {p.project_id for p in projects}
        assert {"PBAD0001", "PBAD0002"} <= ids
        fixed, log = repair_projects(projects)
        assert {e.project_id for e in log} == {"PBAD0001", "PBAD0002"}
        assert "PBAD0001" not in {p.project_id for p in fixed}

    def test_deterministic(self):
        records, log_funding, designated = self.setup()
        a = generate_projects(records, log_funding, designated, seed=8)
        b = generate_projects(records, log_funding, designated, seed=8)
        assert a == b
