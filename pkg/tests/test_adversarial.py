"""Demographic objectives and the Hooke-Jeeves weight search."""

import numpy as np
import pytest

from screenaudit.adversarial import (
    AdversarialProblem,
    DemographicDescriptor,
    Direction,
    RaceMode,
    StepSchedule,
    demographic_objective,
    hooke_jeeves_search,
    manipulation_range,
)
from screenaudit.data import Demographics, HealthSet, ModelSpec
from screenaudit.engine import run_model
from screenaudit.errors import SearchError

from test_engine import make_records, schema_1var_each


def demo_population(n=24, seed=2):
    rng = np.random.default_rng(seed)
    records = make_records({v: rng.uniform(1, 99, n).tolist() for v in "abcd"})
    demographics = {
        r.tract_id: Demographics(
            race_shares={"groupa": float(rng.uniform(0, 1))},
            party="blue" if i % 3 == 0 else "red",
        )
        for i, r in enumerate(records)
    }
    return records, demographics


class TestDemographicObjective:
    def results(self, designated_ids, all_ids):
        from screenaudit.engine import ScoreResult
        return [
            ScoreResult(t, {}, {}, 1.0, 50.0, t in designated_ids)
            for t in all_ids
        ]

    def test_party_count(self):
        demographics = {
            "t1": Demographics(party="blue"),
            "t2": Demographics(party="red"),
            "t3": Demographics(party="blue"),
        }
        results = self.results({"t1", "t3"}, ["t1", "t2", "t3"])
        assert demographic_objective(
            results, demographics, DemographicDescriptor("party", "blue")
        ) == 2.0
        assert demographic_objective(
            results, demographics, DemographicDescriptor("party", "red")
        ) == 0.0

    def test_race_share_sum(self):
        demographics = {
            "t1": Demographics(race_shares={"groupa": 0.6}),
            "t2": Demographics(race_shares={"groupa": 0.1}),
        }
        results = self.results({"t1", "t2"}, ["t1", "t2"])
        assert demographic_objective(
            results, demographics, DemographicDescriptor("race", "groupa")
        ) == pytest.approx(0.7)

    def test_race_majority_count(self):
        demographics = {
            "t1": Demographics(race_shares={"groupa": 0.6}),
            "t2": Demographics(race_shares={"groupa": 0.4}),
        }
        results = self.results({"t1", "t2"}, ["t1", "t2"])
        descriptor = DemographicDescriptor(
            "race", "groupa", race_mode=RaceMode.TRACT_COUNT_MAJORITY
        )
        assert demographic_objective(results, demographics, descriptor) == 1.0

    def test_unknown_label_raises(self):
        demographics = {"t1": Demographics(party="blue")}
        results = self.results({"t1"}, ["t1"])
        with pytest.raises(SearchError, match="green"):
            demographic_objective(
                results, demographics, DemographicDescriptor("party", "green")
            )

    def test_missing_demographics_contribute_nothing(self):
        demographics = {"t1": Demographics(party="blue")}
        results = self.results({"t1", "t2"}, ["t1", "t2"])
        assert demographic_objective(
            results, demographics, DemographicDescriptor("party", "blue")
        ) == 1.0

    def test_bad_kind_rejected(self):
        with pytest.raises(SearchError):
            DemographicDescriptor("age", "x")


class TestStepSchedule:
    def test_validation(self):
        with pytest.raises(SearchError):
            StepSchedule(initial_step=0.01, min_step=0.02)
        with pytest.raises(SearchError):
            StepSchedule(shrink=1.0)


class TestProblemValidation:
    def test_initial_weights_must_fit_box(self):
        with pytest.raises(SearchError):
            AdversarialProblem(
                demographic=DemographicDescriptor("party", "blue"),
                initial_weights={"a": 0.05},
            )

    def test_multistart_values(self):
        with pytest.raises(SearchError):
            AdversarialProblem(
                demographic=DemographicDescriptor("party", "blue"),
                multistart="everything",
            )


def quadratic_problem(direction=Direction.MINIMIZE, multistart="none"):
    return AdversarialProblem(
        demographic=DemographicDescriptor("party", "blue"),
        direction=direction,
        initial_weights={"a": 0.3, "b": 0.3, "c": 0.3},
        multistart=multistart,
    )


class TestHookeJeevesOnAnalyticObjectives:
    def test_separable_quadratic_reaches_optimum(self):
        target = 0.47

        def objective(spec: ModelSpec) -> float:
            return sum((w - target) ** 2 for w in spec.weights.values())

        result = hooke_jeeves_search(
            quadratic_problem(), [], schema_1var_each(), objective=objective
        )
        min_step = StepSchedule().min_step
        for w in result.best_spec.weights.values():
            assert abs(w - target) <= min_step + 1e-12
        assert result.best_objective <= 3 * min_step**2 + 1e-12

    def test_linear_objective_reaches_boundary(self):
        def objective(spec: ModelSpec) -> float:
            return sum(spec.weights.values())

        low = hooke_jeeves_search(
            quadratic_problem(Direction.MINIMIZE), [], schema_1var_each(),
            objective=objective,
        )
        assert list(low.best_spec.weights.values()) == pytest.approx([0.1] * 3)
        high = hooke_jeeves_search(
            quadratic_problem(Direction.MAXIMIZE), [], schema_1var_each(),
            objective=objective,
        )
        assert list(high.best_spec.weights.values()) == pytest.approx([0.9] * 3)

    def test_combo_tie_breaks_to_first(self):
        result = hooke_jeeves_search(
            quadratic_problem(), [], schema_1var_each(),
            objective=lambda spec: 1.0,
        )
        assert result.best_spec.preprocessing.value == "percentile_rank"
        assert result.best_spec.aggregation.value == "multiplicative"

    def test_override_requires_initial_weights(self):
        problem = AdversarialProblem(
            demographic=DemographicDescriptor("party", "blue")
        )
        with pytest.raises(SearchError, match="initial_weights"):
            hooke_jeeves_search(problem, [], schema_1var_each(),
                                objective=lambda spec: 0.0)

    def test_trace_records_improvements(self):
        def objective(spec: ModelSpec) -> float:
            return sum((w - 0.5) ** 2 for w in spec.weights.values())

        result = hooke_jeeves_search(
            quadratic_problem(), [], schema_1var_each(), objective=objective
        )
        assert result.trace
        assert result.n_evaluations > 0
        pm_trace = [
            e.objective for e in result.trace
            if e.preprocessing == "percentile_rank"
            and e.aggregation == "multiplicative" and e.start_index == 0
        ]
        assert pm_trace == sorted(pm_trace, reverse=True)


class TestSearchOnPopulations:
    def test_search_never_worse_than_baseline(self):
        records, demographics = demo_population()
        schema = schema_1var_each()
        descriptor = DemographicDescriptor("party", "blue")
        baseline = demographic_objective(
            run_model(records, schema, ModelSpec()), demographics, descriptor
        )
        problem = AdversarialProblem(demographic=descriptor,
                                     direction=Direction.MAXIMIZE)
        result = hooke_jeeves_search(problem, records, schema, demographics)
        assert result.best_objective >= baseline
        problem = AdversarialProblem(demographic=descriptor,
                                     direction=Direction.MINIMIZE)
        result = hooke_jeeves_search(problem, records, schema, demographics)
        assert result.best_objective <= baseline

    def test_best_spec_reproduces_best_objective(self):
        records, demographics = demo_population(seed=5)
        schema = schema_1var_each()
        descriptor = DemographicDescriptor("party", "blue")
        problem = AdversarialProblem(demographic=descriptor,
                                     direction=Direction.MAXIMIZE,
                                     multistart="corners")
        result = hooke_jeeves_search(problem, records, schema, demographics)
        rerun = run_model(records, schema, result.best_spec)
        assert demographic_objective(
            rerun, demographics, descriptor
        ) == pytest.approx(result.best_objective)

    def test_deterministic(self):
        records, demographics = demo_population(seed=6)
        schema = schema_1var_each()
        problem = AdversarialProblem(
            demographic=DemographicDescriptor("party", "blue"),
            direction=Direction.MAXIMIZE, multistart="corners",
        )
        a = hooke_jeeves_search(problem, records, schema, demographics)
        b = hooke_jeeves_search(problem, records, schema, demographics)
        assert a.best_spec == b.best_spec
        assert a.trace == b.trace

    def test_jobs_do_not_change_search(self):
        records, demographics = demo_population(seed=7)
        schema = schema_1var_each()
        problem = AdversarialProblem(
            demographic=DemographicDescriptor("party", "blue"),
            direction=Direction.MAXIMIZE, multistart="none",
        )
        serial = hooke_jeeves_search(problem, records, schema, demographics)
        parallel = hooke_jeeves_search(problem, records, schema, demographics,
                                       jobs=4)
        assert serial.best_spec == parallel.best_spec
        assert serial.best_objective == parallel.best_objective

    def test_restricted_search_leaves_other_weights_alone(self):
        records, demographics = demo_population(seed=8)
        schema = schema_1var_each()
        problem = AdversarialProblem(
            demographic=DemographicDescriptor("party", "blue"),
            direction=Direction.MAXIMIZE,
            initial_weights={"a": 0.5},
            multistart="none",
        )
        result = hooke_jeeves_search(problem, records, schema, demographics)
        assert set(result.best_spec.weights) == {"a"}


class TestManipulationRange:
    def test_range_nonnegative_and_consistent(self):
        records, demographics = demo_population(n=30, seed=9)
        schema = schema_1var_each()
        result = manipulation_range(records, schema, demographics, "blue")
        assert result.baseline_objective > 0
        assert result.increase_pct >= 0.0
        assert result.decrease_pct >= 0.0
        up = result.baseline_objective * (1 + result.increase_pct / 100.0)
        assert result.maximize.best_objective == pytest.approx(up)

    def test_zero_baseline_rejected(self):
        records, demographics = demo_population(n=12, seed=10)
        demographics = {
            t: Demographics(party="red" if d.party == "blue" else "blue")
            for t, d in demographics.items()
        }
        # retune so that no designated tract is 'green'
        demographics["t0000"] = Demographics(party="green")
        schema = schema_1var_each()
        results = run_model(records, schema, ModelSpec())
        if any(r.designated and r.tract_id == "t0000" for r in results):
            pytest.skip("t0000 designated in this draw")
        with pytest.raises(SearchError, match="green"):
            manipulation_range(records, schema, demographics, "green")
