"""Adversarial search over indicator weights for demographic objectives.

Finds the model specification (variable weights in a box, plus the discrete
pre-processing/aggregation toggles) that maximizes or minimizes a demographic
group's designated presence.  The continuous part uses classic Hooke-Jeeves
pattern search (exploratory coordinate probes, pattern moves, step halving);
the four discrete combinations are enumerated exhaustively.  Deterministic
multi-start keeps the pattern search from stalling on the piecewise-constant
designation objective.
"""

from __future__ import annotations

import enum
import itertools
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .data import (
    Aggregation,
    Demographics,
    HealthSet,
    IndicatorSchema,
    ModelSpec,
    Preprocessing,
    TractRecord,
)
from .engine import (
    ScoreResult,
    _active_schema,
    compile_schema,
    preprocess_matrix,
    run_model,
    score_processed,
    value_matrix,
)
from .errors import ScoringError, SearchError

LOGGER = logging.getLogger(__name__)

WEIGHT_BOUNDS = (0.1, 0.9)

#: In "axes" mode each discrete combination's pattern search is additionally
#: seeded from the best point of a coarse evenly-spaced weight lattice,
#: provided the full lattice fits the evaluation budget (evaluations are
#: memoized, so this stays cheap at low dimension).  Designation counts are
#: piecewise constant in the weights, and axis probes alone can stall on a
#: plateau that a coarse global sweep sees past.
LATTICE_SEED_LEVELS = 5
LATTICE_SEED_BUDGET = 20_000

PA_COMBOS: tuple[tuple[Preprocessing, Aggregation], ...] = (
    (Preprocessing.PERCENTILE_RANK, Aggregation.MULTIPLICATIVE),
    (Preprocessing.PERCENTILE_RANK, Aggregation.ADDITIVE),
    (Preprocessing.ZSCORE, Aggregation.MULTIPLICATIVE),
    (Preprocessing.ZSCORE, Aggregation.ADDITIVE),
)


class Direction(str, enum.Enum):
    MAXIMIZE = "maximize"
    MINIMIZE = "minimize"


class RaceMode(str, enum.Enum):
    POPULATION_SHARE_SUM = "population_share_sum"
    TRACT_COUNT_MAJORITY = "tract_count_by_majority_district"


@dataclass(frozen=True)
class DemographicDescriptor:
    """What to total over designated tracts.

    ``party`` counts designated tracts whose party matches ``label``; ``race``
    either sums the race share (population_share_sum) or counts tracts where
    the share exceeds 0.5.
    """

    kind: str  # "party" | "race"
    label: str
    race_mode: RaceMode = RaceMode.POPULATION_SHARE_SUM

    def __post_init__(self) -> None:
        if self.kind not in ("party", "race"):
            raise SearchError(f"descriptor kind must be 'party' or 'race', got {self.kind!r}")


@dataclass(frozen=True)
class StepSchedule:
    initial_step: float = 0.2
    shrink: float = 0.5
    min_step: float = 0.0125

    def __post_init__(self) -> None:
        if not 0.0 < self.min_step <= self.initial_step:
            raise SearchError("need 0 < min_step <= initial_step")
        if not 0.0 < self.shrink < 1.0:
            raise SearchError("shrink must lie in (0, 1)")


@dataclass(frozen=True)
class AdversarialProblem:
    demographic: DemographicDescriptor
    direction: Direction = Direction.MAXIMIZE
    weight_bounds: tuple[float, float] = WEIGHT_BOUNDS
    #: Variables to search and their starting weights; None searches every
    #: active schema variable from the box midpoint.
    initial_weights: Mapping[str, float] | None = None
    step_schedule: StepSchedule = field(default_factory=StepSchedule)
    health_set: HealthSet = HealthSet.BASELINE
    threshold_quantile: float = 0.75
    #: Deterministic multi-start breadth: "none" (start point only),
    #: "corners" (+ all-low/all-high), "axes" (+ per-axis extremes and, at
    #: low dimension, a coarse-lattice seed; see LATTICE_SEED_BUDGET).
    multistart: str = "axes"
    max_restarts: int = 3

    def __post_init__(self) -> None:
        lo, hi = self.weight_bounds
        if not 0.0 < lo < hi:
            raise SearchError(f"invalid weight bounds {self.weight_bounds}")
        if self.initial_weights is not None:
            bad = {
                k: v
                for k, v in self.initial_weights.items()
                if not lo <= float(v) <= hi
            }
            if bad:
                raise SearchError(f"initial weights outside bounds: {bad}")
            object.__setattr__(self, "initial_weights", dict(self.initial_weights))
        if self.multistart not in ("none", "corners", "axes"):
            raise SearchError("multistart must be 'none', 'corners', or 'axes'")


def demographic_objective(
    results: Sequence[ScoreResult],
    demographics: Mapping[str, Demographics],
    descriptor: DemographicDescriptor,
) -> float:
    """Total the demographic presence among designated tracts.

    Tracts without demographics contribute nothing.  A label matching no
    tract at all raises (likely a typo, not a zero).
    """
    if descriptor.kind == "party":
        known = {
            d.party for d in demographics.values() if d is not None and d.party
        }
        if descriptor.label not in known:
            raise SearchError(
                f"party label {descriptor.label!r} not present in demographics"
            )
    else:
        if not any(
            d is not None and descriptor.label in d.race_shares
            for d in demographics.values()
        ):
            raise SearchError(
                f"race label {descriptor.label!r} not present in demographics"
            )
    total = 0.0
    for r in results:
        if not r.designated:
            continue
        demo = demographics.get(r.tract_id)
        if demo is None:
            continue
        if descriptor.kind == "party":
            total += 1.0 if demo.party == descriptor.label else 0.0
        else:
            share = demo.race_shares.get(descriptor.label)
            if share is None:
                continue
            if descriptor.race_mode == RaceMode.POPULATION_SHARE_SUM:
                total += float(share)
            else:
                total += 1.0 if share > 0.5 else 0.0
    return total


# ---------------------------------------------------------------------------
# Fast objective evaluation


class _Evaluator:
    """Caches pre-processing per (p) flag; scoring is then pure weight algebra."""

    def __init__(
        self,
        records: Sequence[TractRecord],
        schema: IndicatorSchema,
        problem: AdversarialProblem,
        demographics: Mapping[str, Demographics],
    ) -> None:
        spec_for_resolution = ModelSpec(
            health_set=problem.health_set,
            threshold_quantile=problem.threshold_quantile,
        )
        self.resolved = _active_schema(records, schema, spec_for_resolution)
        self.compiled = compile_schema(self.resolved)
        self.threshold = problem.threshold_quantile
        self.values = value_matrix(records, self.compiled.variable_ids)
        self._processed: dict[Preprocessing, np.ndarray] = {}
        self.n_evaluations = 0
        self._memo: dict[tuple, float] = {}

        if problem.initial_weights is None:
            self.search_ids = tuple(self.compiled.variable_ids)
            mid = (problem.weight_bounds[0] + problem.weight_bounds[1]) / 2.0
            self.start = np.full(len(self.search_ids), mid)
        else:
            unknown = set(problem.initial_weights) - set(self.compiled.variable_ids)
            if unknown:
                raise SearchError(
                    f"initial weights name variables outside the active schema: "
                    f"{sorted(unknown)}"
                )
            self.search_ids = tuple(
                vid for vid in self.compiled.variable_ids if vid in problem.initial_weights
            )
            self.start = np.array(
                [float(problem.initial_weights[vid]) for vid in self.search_ids]
            )
        self.search_index = np.array(
            [self.compiled.variable_ids.index(vid) for vid in self.search_ids],
            dtype=int,
        )

        ids = [r.tract_id for r in records]
        descriptor = problem.demographic
        if descriptor.kind == "party":
            known = {
                d.party for d in demographics.values() if d is not None and d.party
            }
            if descriptor.label not in known:
                raise SearchError(
                    f"party label {descriptor.label!r} not present in demographics"
                )
            self.group = np.array(
                [
                    demographics.get(t) is not None
                    and demographics[t].party == descriptor.label
                    for t in ids
                ],
                dtype=float,
            )
        else:
            shares = np.array(
                [
                    np.nan
                    if demographics.get(t) is None
                    or descriptor.label not in demographics[t].race_shares
                    else float(demographics[t].race_shares[descriptor.label])
                    for t in ids
                ]
            )
            if not np.isfinite(shares).any():
                raise SearchError(
                    f"race label {descriptor.label!r} not present in demographics"
                )
            if descriptor.race_mode == RaceMode.POPULATION_SHARE_SUM:
                self.group = np.where(np.isfinite(shares), shares, 0.0)
            else:
                self.group = np.where(
                    np.isfinite(shares) & (shares > 0.5), 1.0, 0.0
                )

    def processed(self, preprocessing: Preprocessing) -> np.ndarray:
        cached = self._processed.get(preprocessing)
        if cached is None:
            try:
                cached = preprocess_matrix(
                    self.values, preprocessing, self.compiled.variable_ids
                )
            except ScoringError as exc:
                raise SearchError(
                    f"objective evaluation failed under {preprocessing.value}: {exc}"
                ) from exc
            self._processed[preprocessing] = cached
        return cached

    def full_weights(self, x: np.ndarray) -> np.ndarray:
        w = self.compiled.weights.copy()
        w[self.search_index] = x
        return w

    def objective(
        self, x: np.ndarray, preprocessing: Preprocessing, aggregation: Aggregation
    ) -> float:
        key = (preprocessing, aggregation, tuple(np.round(x, 9)))
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        try:
            arrays = score_processed(
                self.processed(preprocessing),
                self.compiled,
                aggregation,
                self.threshold,
                weights=self.full_weights(x),
            )
        except ScoringError as exc:
            raise SearchError(
                f"objective evaluation failed under "
                f"{preprocessing.value}+{aggregation.value} at weights "
                f"{dict(zip(self.search_ids, np.round(x, 6)))}: {exc}"
            ) from exc
        value = float(self.group @ arrays.designated)
        self.n_evaluations += 1
        self._memo[key] = value
        return value

    def spec_for(
        self, x: np.ndarray, preprocessing: Preprocessing, aggregation: Aggregation,
        health_set: HealthSet,
    ) -> ModelSpec:
        return ModelSpec(
            preprocessing=preprocessing,
            aggregation=aggregation,
            health_set=health_set,
            threshold_quantile=self.threshold,
            weights={vid: float(v) for vid, v in zip(self.search_ids, x)},
        )


# ---------------------------------------------------------------------------
# Hooke-Jeeves pattern search (minimization core)


def _explore(
    f: Callable[[np.ndarray], float],
    x: np.ndarray,
    fx: float,
    step: float,
    lo: float,
    hi: float,
) -> tuple[np.ndarray, float]:
    """One exploratory sweep: per coordinate, try +step then -step, keep improvements."""
    x = x.copy()
    for i in range(x.size):
        for delta in (step, -step):
            trial = min(hi, max(lo, x[i] + delta))
            if trial == x[i]:
                continue
            z = x.copy()
            z[i] = trial
            fz = f(z)
            if fz < fx:
                x, fx = z, fz
                break
    return x, fx


def _hooke_jeeves(
    f: Callable[[np.ndarray], float],
    x0: np.ndarray,
    lo: float,
    hi: float,
    schedule: StepSchedule,
    on_accept: Callable[[float, float, np.ndarray], None],
    max_restarts: int,
) -> tuple[np.ndarray, float]:
    def one_pass(x: np.ndarray, fx: float) -> tuple[np.ndarray, float]:
        step = schedule.initial_step
        while step >= schedule.min_step * (1.0 - 1e-12):
            cand, f_cand = _explore(f, x, fx, step, lo, hi)
            if f_cand < fx:
                while True:
                    pattern = np.clip(cand + (cand - x), lo, hi)
                    x, fx = cand, f_cand
                    on_accept(step, fx, x)
                    probe, f_probe = _explore(f, pattern, f(pattern), step, lo, hi)
                    if f_probe < fx:
                        cand, f_cand = probe, f_probe
                    else:
                        break
            else:
                step *= schedule.shrink
        return x, fx

    x = np.clip(np.asarray(x0, dtype=float), lo, hi)
    fx = f(x)
    on_accept(schedule.initial_step, fx, x)
    x, fx = one_pass(x, fx)
    for _ in range(max_restarts):
        x2, fx2 = one_pass(x, fx)
        improved = fx2 < fx - 1e-15
        x, fx = x2, fx2
        if not improved:
            break
    return x, fx


@dataclass(frozen=True)
class TraceEntry:
    preprocessing: str
    aggregation: str
    start_index: int
    iteration: int
    step: float
    objective: float
    weights: tuple[float, ...]


@dataclass(frozen=True)
class SearchResult:
    best_spec: ModelSpec
    best_objective: float
    trace: tuple[TraceEntry, ...]
    n_evaluations: int


def _start_points(
    start: np.ndarray, lo: float, hi: float, multistart: str
) -> list[np.ndarray]:
    points = [start]
    if multistart in ("corners", "axes"):
        points.append(np.full_like(start, lo))
        points.append(np.full_like(start, hi))
    if multistart == "axes":
        for i in range(start.size):
            for bound in (lo, hi):
                z = start.copy()
                z[i] = bound
                points.append(z)
    unique: list[np.ndarray] = []
    seen = set()
    for p in points:
        key = tuple(np.round(p, 9))
        if key not in seen:
            seen.add(key)
            unique.append(p)
    return unique


def hooke_jeeves_search(
    problem: AdversarialProblem,
    records: Sequence[TractRecord],
    schema: IndicatorSchema,
    demographics: Mapping[str, Demographics] | None = None,
    objective: Callable[[ModelSpec], float] | None = None,
    jobs: int | None = None,
) -> SearchResult:
    """Best specification for the problem's demographic objective.

    Runs an independent pattern search per discrete (pre-processing,
    aggregation) combination from every multi-start point, with objective
    memoization, and returns the best across all runs (ties break toward the
    earlier combination/start).  ``objective`` replaces the designation-count
    objective with an arbitrary function of the candidate ModelSpec (test
    hook).  Fully deterministic.
    """
    lo, hi = problem.weight_bounds
    sign = -1.0 if problem.direction == Direction.MAXIMIZE else 1.0

    if objective is None:
        if demographics is None:
            raise SearchError("demographics required unless an objective override is given")
        evaluator = _Evaluator(records, schema, problem, demographics)
        start = evaluator.start
        search_ids = evaluator.search_ids

        def evaluate(x: np.ndarray, p: Preprocessing, a: Aggregation) -> float:
            return evaluator.objective(x, p, a)

        def spec_of(x: np.ndarray, p: Preprocessing, a: Aggregation) -> ModelSpec:
            return evaluator.spec_for(x, p, a, problem.health_set)

        eval_counter = lambda: evaluator.n_evaluations
    else:
        if problem.initial_weights is None:
            raise SearchError("objective override requires explicit initial_weights")
        evaluator = None
        search_ids = tuple(sorted(problem.initial_weights))
        start = np.array([float(problem.initial_weights[v]) for v in search_ids])
        counter = {"n": 0}
        memo: dict[tuple, float] = {}

        def spec_of(x: np.ndarray, p: Preprocessing, a: Aggregation) -> ModelSpec:
            return ModelSpec(
                preprocessing=p,
                aggregation=a,
                health_set=problem.health_set,
                threshold_quantile=problem.threshold_quantile,
                weights={vid: float(v) for vid, v in zip(search_ids, x)},
            )

        def evaluate(x: np.ndarray, p: Preprocessing, a: Aggregation) -> float:
            key = (p, a, tuple(np.round(x, 9)))
            if key not in memo:
                counter["n"] += 1
                memo[key] = float(objective(spec_of(x, p, a)))
            return memo[key]

        eval_counter = lambda: counter["n"]

    starts = _start_points(start, lo, hi, problem.multistart)
    if objective is None and evaluator is not None:
        # Weight renormalization makes uniformly scaled defaults score
        # identically to the schema defaults, so this start point anchors the
        # search at the baseline spec whenever it fits the box.
        defaults = evaluator.compiled.weights[evaluator.search_index]
        if defaults.size and defaults.max() > 0:
            scaled = defaults * (hi / defaults.max())
            if scaled.min() >= lo:
                key = tuple(np.round(scaled, 9))
                if key not in {tuple(np.round(s, 9)) for s in starts}:
                    starts.insert(1, scaled)

    lattice_points: list[np.ndarray] | None = None
    if (
        problem.multistart == "axes"
        and LATTICE_SEED_LEVELS ** start.size <= LATTICE_SEED_BUDGET
    ):
        levels = np.linspace(lo, hi, LATTICE_SEED_LEVELS)
        lattice_points = [
            np.array(combo)
            for combo in itertools.product(levels, repeat=start.size)
        ]

    def run_combo(
        combo: tuple[Preprocessing, Aggregation]
    ) -> tuple[list[TraceEntry], list[tuple[float, int, np.ndarray]]]:
        p, a = combo
        trace: list[TraceEntry] = []
        bests: list[tuple[float, int, np.ndarray]] = []
        combo_starts = starts
        if lattice_points is not None:
            seed = min(lattice_points, key=lambda z: sign * evaluate(z, p, a))
            if tuple(np.round(seed, 9)) not in {
                tuple(np.round(s, 9)) for s in starts
            }:
                combo_starts = starts + [seed]
        for s_idx, x0 in enumerate(combo_starts):
            counter = {"i": 0}

            def on_accept(step: float, fx: float, x: np.ndarray) -> None:
                trace.append(
                    TraceEntry(
                        preprocessing=p.value,
                        aggregation=a.value,
                        start_index=s_idx,
                        iteration=counter["i"],
                        step=step,
                        objective=sign * fx,
                        weights=tuple(float(v) for v in x),
                    )
                )
                counter["i"] += 1

            x_best, f_best = _hooke_jeeves(
                lambda x: sign * evaluate(x, p, a),
                x0, lo, hi, problem.step_schedule, on_accept, problem.max_restarts,
            )
            bests.append((f_best, s_idx, x_best))
        return trace, bests

    if jobs is not None and jobs > 1:
        with ThreadPoolExecutor(max_workers=min(jobs, len(PA_COMBOS))) as pool:
            combo_outputs = list(pool.map(run_combo, PA_COMBOS))
    else:
        combo_outputs = [run_combo(combo) for combo in PA_COMBOS]

    full_trace: list[TraceEntry] = []
    best: tuple[float, int, int, np.ndarray] | None = None
    for c_idx, (trace, bests) in enumerate(combo_outputs):
        full_trace.extend(trace)
        for f_best, s_idx, x_best in bests:
            key = (f_best, c_idx, s_idx)
            if best is None or key < (best[0], best[1], best[2]):
                best = (f_best, c_idx, s_idx, x_best)
    assert best is not None
    p_best, a_best = PA_COMBOS[best[1]]
    return SearchResult(
        best_spec=spec_of(best[3], p_best, a_best),
        best_objective=sign * best[0],
        trace=tuple(full_trace),
        n_evaluations=eval_counter(),
    )


# ---------------------------------------------------------------------------
# Manipulation range


@dataclass(frozen=True)
class ManipulationRange:
    increase_pct: float
    decrease_pct: float
    baseline_objective: float
    maximize: SearchResult
    minimize: SearchResult


def manipulation_range(
    records: Sequence[TractRecord],
    schema: IndicatorSchema,
    demographics: Mapping[str, Demographics],
    party_label: str,
    problem: AdversarialProblem | None = None,
    jobs: int | None = None,
) -> ManipulationRange:
    """How far weight/flag manipulation can move a party's designated count.

    Returns percent increase and decrease relative to the baseline model's
    count for ``party_label`` (the caller picks the party, typically the one
    with fewer designated tracts).
    """
    descriptor = DemographicDescriptor(kind="party", label=party_label)
    template = problem or AdversarialProblem(demographic=descriptor)
    base_spec = ModelSpec(
        health_set=template.health_set,
        threshold_quantile=template.threshold_quantile,
    )
    baseline = demographic_objective(
        run_model(records, schema, base_spec), demographics, descriptor
    )
    if baseline <= 0.0:
        raise SearchError(
            f"baseline designated count for party {party_label!r} is zero; "
            "percent change undefined"
        )
    up = hooke_jeeves_search(
        AdversarialProblem(
            demographic=descriptor,
            direction=Direction.MAXIMIZE,
            weight_bounds=template.weight_bounds,
            initial_weights=template.initial_weights,
            step_schedule=template.step_schedule,
            health_set=template.health_set,
            threshold_quantile=template.threshold_quantile,
            multistart=template.multistart,
            max_restarts=template.max_restarts,
        ),
        records, schema, demographics, jobs=jobs,
    )
    down = hooke_jeeves_search(
        AdversarialProblem(
            demographic=descriptor,
            direction=Direction.MINIMIZE,
            weight_bounds=template.weight_bounds,
            initial_weights=template.initial_weights,
            step_schedule=template.step_schedule,
            health_set=template.health_set,
            threshold_quantile=template.threshold_quantile,
            multistart=template.multistart,
            max_restarts=template.max_restarts,
        ),
        records, schema, demographics, jobs=jobs,
    )
    return ManipulationRange(
        increase_pct=100.0 * (up.best_objective - baseline) / baseline,
        decrease_pct=100.0 * (baseline - down.best_objective) / baseline,
        baseline_objective=baseline,
        maximize=up,
        minimize=down,
    )
