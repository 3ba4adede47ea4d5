"""Specification-lattice sensitivity analysis and designation diagnostics.

The lattice toggles three modeling choices (pre-processing, aggregation,
health-variable set) into 8 specifications; churn metrics, per-tract score
ranges with a quantile-regression prediction band, multi-model union
designations, and predictor-strength diagnostics follow.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np
import pandas as pd
from scipy import sparse
from scipy.optimize import linprog
from scipy.stats import rankdata

from .data import (
    Aggregation,
    HealthSet,
    IndicatorSchema,
    ModelSpec,
    Preprocessing,
    TractRecord,
)
from .engine import ScoreResult, run_model, value_matrix
from .errors import AnalysisError

LOGGER = logging.getLogger(__name__)

DEFAULT_SEED = 20240001


@dataclass(frozen=True)
class LatticeResult:
    """All 8 specification combinations scored on one tract population."""

    specs: tuple[ModelSpec, ...]
    results: tuple[tuple[ScoreResult, ...], ...]
    base_index: int

    @property
    def base_results(self) -> tuple[ScoreResult, ...]:
        return self.results[self.base_index]


@dataclass(frozen=True)
class TractRange:
    tract_id: str
    base_percentile: float
    min_percentile: float
    max_percentile: float

    def __post_init__(self) -> None:
        if not (
            self.min_percentile - 1e-9
            <= self.base_percentile
            <= self.max_percentile + 1e-9
        ):
            raise AnalysisError(
                f"tract {self.tract_id!r}: range "
                f"[{self.min_percentile}, {self.max_percentile}] does not bracket "
                f"base {self.base_percentile}"
            )


def lattice_specs(base_spec: ModelSpec | None = None) -> tuple[ModelSpec, ...]:
    """The 2x2x2 grid, ordered with pre-processing slowest and health fastest."""
    base = base_spec or ModelSpec()
    return tuple(
        ModelSpec(
            preprocessing=p,
            aggregation=a,
            health_set=h,
            threshold_quantile=base.threshold_quantile,
            weights=base.weights,
        )
        for p in (Preprocessing.PERCENTILE_RANK, Preprocessing.ZSCORE)
        for a in (Aggregation.MULTIPLICATIVE, Aggregation.ADDITIVE)
        for h in (HealthSet.BASELINE, HealthSet.EXTENDED)
    )


def enumerate_lattice(
    records: Sequence[TractRecord],
    schema: IndicatorSchema,
    base_spec: ModelSpec | None = None,
    jobs: int | None = None,
) -> LatticeResult:
    """Score the population under all 8 lattice specifications.

    ``base_spec`` contributes the threshold and any weight overrides to every
    member and identifies which lattice cell is the reference (its three
    toggles); by default the reference is percentile-rank + multiplicative +
    baseline health, which is always cell 0.
    """
    base = base_spec or ModelSpec()
    specs = lattice_specs(base)
    base_index = next(
        i
        for i, s in enumerate(specs)
        if (s.preprocessing, s.aggregation, s.health_set)
        == (base.preprocessing, base.aggregation, base.health_set)
    )
    if jobs is not None and jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(lambda s: run_model(records, schema, s), specs))
    else:
        results = [run_model(records, schema, s) for s in specs]
    return LatticeResult(
        specs=specs,
        results=tuple(tuple(r) for r in results),
        base_index=base_index,
    )


# ---------------------------------------------------------------------------
# Churn metrics


def _aligned_designations(
    a: Sequence[ScoreResult], b: Sequence[ScoreResult]
) -> tuple[np.ndarray, np.ndarray]:
    ids_a = [r.tract_id for r in a]
    ids_b = [r.tract_id for r in b]
    if sorted(ids_a) != sorted(ids_b):
        raise AnalysisError("mismatched tract sets between result lists")
    flag_b = {r.tract_id: r.designated for r in b}
    da = np.array([r.designated for r in a], dtype=bool)
    db = np.array([flag_b[t] for t in ids_a], dtype=bool)
    return da, db


def designation_churn(a: Sequence[ScoreResult], b: Sequence[ScoreResult]) -> float:
    """Percent of tracts whose designation differs between two result lists."""
    if not a:
        raise AnalysisError("empty result lists")
    da, db = _aligned_designations(a, b)
    return 100.0 * float((da != db).sum()) / len(da)


def overall_sensitivity(lattice: LatticeResult) -> float:
    """Percent of tracts that flip designation under at least one lattice spec."""
    base = lattice.base_results
    ids = [r.tract_id for r in base]
    flipped: set[str] = set()
    for i, results in enumerate(lattice.results):
        if i == lattice.base_index:
            continue
        da, db = _aligned_designations(base, results)
        flipped.update(t for t, x, y in zip(ids, da, db) if x != y)
    return 100.0 * len(flipped) / len(ids)


def tract_score_ranges(lattice: LatticeResult) -> list[TractRange]:
    """Min/max percentile across the lattice for each tract scored in base.

    Tracts with no base percentile are skipped; specs where a tract is
    unscored contribute nothing to its range.
    """
    base = {r.tract_id: r.percentile for r in lattice.base_results}
    spans: dict[str, list[float]] = {t: [] for t in base}
    for results in lattice.results:
        for r in results:
            if r.percentile is not None and r.tract_id in spans:
                spans[r.tract_id].append(r.percentile)
    out = []
    for r in lattice.base_results:
        p = base[r.tract_id]
        if p is None:
            continue
        values = spans[r.tract_id]
        out.append(
            TractRange(
                tract_id=r.tract_id,
                base_percentile=float(p),
                min_percentile=float(min(values)),
                max_percentile=float(max(values)),
            )
        )
    return out


# ---------------------------------------------------------------------------
# Quantile-regression interval band


def _spline_basis(x: np.ndarray, knots: np.ndarray) -> np.ndarray:
    columns = [np.ones_like(x), x]
    columns += [np.clip(x - k, 0.0, None) for k in knots]
    return np.column_stack(columns)


def _pinball_fit(x: np.ndarray, y: np.ndarray, tau: float, knots: np.ndarray) -> np.ndarray:
    """Quantile regression on a piecewise-linear spline basis via LP.

    minimize tau * u+ + (1 - tau) * u-  s.t.  X beta + u+ - u- = y.
    """
    X = _spline_basis(x, knots)
    n, p = X.shape
    cost = np.concatenate([np.zeros(p), np.full(n, tau), np.full(n, 1.0 - tau)])
    eye = sparse.eye(n, format="csc")
    A = sparse.hstack([sparse.csc_matrix(X), eye, -eye], format="csc")
    bounds = [(None, None)] * p + [(0.0, None)] * (2 * n)
    res = linprog(cost, A_eq=A, b_eq=y, bounds=bounds, method="highs")
    if not res.success:
        raise AnalysisError(f"quantile-regression LP failed: {res.message}")
    return res.x[:p]


def _pava_increasing(y: np.ndarray) -> np.ndarray:
    """Pool-adjacent-violators projection onto non-decreasing sequences."""
    values: list[float] = []
    weights: list[float] = []
    counts: list[int] = []
    for v in np.asarray(y, dtype=float):
        values.append(float(v))
        weights.append(1.0)
        counts.append(1)
        while len(values) > 1 and values[-2] > values[-1]:
            w = weights[-2] + weights[-1]
            merged = (values[-2] * weights[-2] + values[-1] * weights[-1]) / w
            values.pop(); weights.pop()
            c = counts.pop()
            values[-1] = merged
            weights[-1] = w
            counts[-1] += c
    return np.repeat(values, counts)


@dataclass(frozen=True)
class IntervalModel:
    """Evaluable prediction band: base percentile -> (low, high) percentile."""

    grid: np.ndarray
    low: np.ndarray
    high: np.ndarray

    def band(self, percentile: float | np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        lo = np.interp(percentile, self.grid, self.low)
        hi = np.interp(percentile, self.grid, self.high)
        return lo, hi

    def width(self, percentile: float | np.ndarray) -> np.ndarray:
        lo, hi = self.band(percentile)
        return hi - lo


N_BAND_KNOTS = 10


def fit_interval_model(
    ranges: Sequence[TractRange],
    low_quantile: float = 0.025,
    high_quantile: float = 0.975,
) -> IntervalModel:
    """Fit the score-variability prediction band.

    Two pinball-loss spline quantile regressions as functions of the base
    percentile: `low_quantile` on the per-tract minimum and `high_quantile`
    on the per-tract maximum.  Both curves are repaired to be non-decreasing
    (pool-adjacent-violators) on an integer evaluation grid and clipped to
    [0, 100]; a band still crossing after repair raises.
    """
    if len(ranges) < 50:
        raise AnalysisError(f"interval model needs >= 50 ranges, got {len(ranges)}")
    x = np.array([r.base_percentile for r in ranges])
    y_min = np.array([r.min_percentile for r in ranges])
    y_max = np.array([r.max_percentile for r in ranges])
    knots = np.linspace(x.min(), x.max(), N_BAND_KNOTS + 2)[1:-1]
    beta_low = _pinball_fit(x, y_min, low_quantile, knots)
    beta_high = _pinball_fit(x, y_max, high_quantile, knots)
    grid = np.arange(0.0, 101.0)
    basis = _spline_basis(grid, knots)
    low = _pava_increasing(basis @ beta_low)
    high = _pava_increasing(basis @ beta_high)
    low = np.clip(low, 0.0, 100.0)
    high = np.clip(high, 0.0, 100.0)
    gap = low - high
    if (gap > 1e-8).any():
        worst = grid[int(np.argmax(gap))]
        raise AnalysisError(
            f"degenerate interval fit: quantile curves cross at percentile {worst}"
        )
    crossing = gap > 0.0
    if crossing.any():
        mid = (low[crossing] + high[crossing]) / 2.0
        low = low.copy(); high = high.copy()
        low[crossing] = mid
        high[crossing] = mid
    return IntervalModel(grid=grid, low=low, high=high)


# ---------------------------------------------------------------------------
# Multi-model unions


def union_designation(
    model_results: Sequence[Sequence[ScoreResult]],
) -> list[ScoreResult]:
    """Designated iff designated in any model; score fields from the first."""
    if not model_results:
        raise AnalysisError("union requires at least one model")
    first = list(model_results[0])
    union_flags = {r.tract_id: r.designated for r in first}
    for other in model_results[1:]:
        _aligned_designations(first, other)  # validates the tract set
        for r in other:
            union_flags[r.tract_id] = union_flags[r.tract_id] or r.designated
    return [replace(r, designated=union_flags[r.tract_id]) for r in first]


def sensitivity_reduction(
    base_sensitivity: float,
    model_set: Sequence[Sequence[ScoreResult]],
    lattice: LatticeResult,
) -> float:
    """Percent reduction in overall sensitivity under a union-of-models policy.

    ``model_set[0]`` must be the lattice's base model (the one each lattice
    spec replaces); the remaining members are held fixed in the union.  A
    lattice flip then counts only when it changes the union designation,
    i.e. when no fixed member already designates the tract.
    """
    if not model_set:
        raise AnalysisError("model_set must contain at least the base model")
    base = lattice.base_results
    da, db = _aligned_designations(base, model_set[0])
    if (da != db).any():
        raise AnalysisError(
            "model_set[0] must carry the same designations as the lattice base"
        )
    ids = [r.tract_id for r in base]
    fixed = np.zeros(len(ids), dtype=bool)
    for member in model_set[1:]:
        _, dm = _aligned_designations(base, member)
        fixed |= dm
    flipped: set[str] = set()
    base_flags = np.array([r.designated for r in base], dtype=bool)
    for i, results in enumerate(lattice.results):
        if i == lattice.base_index:
            continue
        _, ds = _aligned_designations(base, results)
        flips = (ds != base_flags) & ~fixed
        flipped.update(t for t, f in zip(ids, flips) if f)
    new_sensitivity = 100.0 * len(flipped) / len(ids)
    if base_sensitivity <= 0.0:
        return 0.0
    return 100.0 * (1.0 - new_sensitivity / base_sensitivity)


# ---------------------------------------------------------------------------
# Predictor diagnostics


def predictor_auc(
    values: Sequence[float | None], designations: Sequence[bool]
) -> float:
    """Mann-Whitney AUC of a single variable against designation (ties 0.5)."""
    if len(values) != len(designations):
        raise AnalysisError("values and designations differ in length")
    kept = [(v, d) for v, d in zip(values, designations) if v is not None]
    if not kept:
        raise AnalysisError("no non-missing values")
    v = np.array([p[0] for p in kept], dtype=float)
    d = np.array([p[1] for p in kept], dtype=bool)
    n_pos = int(d.sum())
    n_neg = int((~d).sum())
    if n_pos == 0 or n_neg == 0:
        raise AnalysisError("AUC requires both classes present")
    ranks = rankdata(v, method="average")
    rank_sum = float(ranks[d].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


@dataclass(frozen=True)
class CorrelationDiagnostics:
    r_squared: float
    table: pd.DataFrame          # variable, auc, mean_abs_corr
    correlation: pd.DataFrame    # pairwise-complete Pearson matrix


def auc_correlation_r2(
    records: Sequence[TractRecord],
    schema: IndicatorSchema,
    designations: Sequence[bool],
) -> CorrelationDiagnostics:
    """How well inter-variable correlation explains single-variable AUC.

    Per variable: Mann-Whitney AUC against the designations and the mean
    absolute pairwise-complete Pearson correlation to the other variables.
    Returns the R-squared of the simple regression AUC ~ mean|corr| along
    with both diagnostic tables.  Zero-variance variables are excluded with
    a warning; a degenerate regressor raises.
    """
    if len(schema.variable_ids) < 3:
        raise AnalysisError("needs at least 3 variables")
    matrix = value_matrix(records, schema.variable_ids)
    frame = pd.DataFrame(matrix, columns=list(schema.variable_ids))
    variances = frame.var(ddof=1)
    dead = [c for c in frame.columns if not variances[c] > 0]
    if dead:
        LOGGER.warning("excluding zero-variance variables from diagnostics: %s", dead)
        frame = frame.drop(columns=dead)
    if frame.shape[1] < 3:
        raise AnalysisError("fewer than 3 usable variables after exclusions")
    corr = frame.corr()  # pairwise-complete Pearson
    np.fill_diagonal(corr.values, np.nan)
    mean_abs = corr.abs().mean(axis=1, skipna=True)
    flags = list(designations)
    aucs = {
        column: predictor_auc(
            [None if np.isnan(v) else float(v) for v in frame[column].to_numpy()],
            flags,
        )
        for column in frame.columns
    }
    table = pd.DataFrame(
        {
            "variable": list(frame.columns),
            "auc": [aucs[c] for c in frame.columns],
            "mean_abs_corr": [float(mean_abs[c]) for c in frame.columns],
        }
    )
    x = table["mean_abs_corr"].to_numpy()
    y = table["auc"].to_numpy()
    if float(np.var(x)) == 0.0:
        raise AnalysisError("mean|corr| is constant across variables; R^2 undefined")
    slope, intercept = np.polyfit(x, y, 1)
    residuals = y - (slope * x + intercept)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    if ss_tot == 0.0:
        raise AnalysisError("AUC is constant across variables; R^2 undefined")
    r_squared = 1.0 - float((residuals**2).sum()) / ss_tot
    np.fill_diagonal(corr.values, 1.0)
    return CorrelationDiagnostics(r_squared=r_squared, table=table, correlation=corr)


# ---------------------------------------------------------------------------
# Subgroup discordance


@dataclass(frozen=True)
class DiscordanceBin:
    share_low: float
    share_high: float
    n: int
    rate: float
    ci_low: float
    ci_high: float


def subgroup_discordance(
    results_a: Sequence[ScoreResult],
    results_b: Sequence[ScoreResult],
    demographic_share: Mapping[str, float],
    bins: int | Sequence[float] = 10,
    n_bootstrap: int = 1000,
    seed: int = DEFAULT_SEED,
) -> list[DiscordanceBin]:
    """Signed designation discordance by demographic-share bin.

    Within each bin the rate is ``mean(1[b and not a] - 1[a and not b])`` —
    positive where model b designates tracts model a does not.  95% bands are
    a percentile bootstrap over tracts within the bin (seeded, 1,000
    resamples by default).  Tracts without a share value are excluded; empty
    bins yield no point.
    """
    da, db = _aligned_designations(results_a, results_b)
    ids = [r.tract_id for r in results_a]
    edges = (
        np.linspace(0.0, 1.0, bins + 1)
        if isinstance(bins, int)
        else np.asarray(list(bins), dtype=float)
    )
    if len(edges) < 2 or (np.diff(edges) <= 0).any():
        raise AnalysisError("bin edges must be increasing with at least one bin")
    shares = np.array(
        [np.nan if demographic_share.get(t) is None else float(demographic_share[t]) for t in ids]
    )
    keep = np.isfinite(shares)
    shares = shares[keep]
    diff = db[keep].astype(float) - da[keep].astype(float)
    idx = np.clip(np.searchsorted(edges, shares, side="right") - 1, 0, len(edges) - 2)
    out = []
    for b in range(len(edges) - 1):
        members = diff[idx == b]
        if members.size == 0:
            continue
        rng = np.random.default_rng(seed + b)
        means = np.array(
            [
                members[rng.integers(0, members.size, members.size)].mean()
                for _ in range(n_bootstrap)
            ]
        )
        lo, hi = np.percentile(means, [2.5, 97.5])
        out.append(
            DiscordanceBin(
                share_low=float(edges[b]),
                share_high=float(edges[b + 1]),
                n=int(members.size),
                rate=float(members.mean()),
                ci_low=float(lo),
                ci_high=float(hi),
            )
        )
    return out
