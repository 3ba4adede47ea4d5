"""Composite-indicator scoring pipeline.

Raw variables are pre-processed over the full tract population (percentile
rank or z-score), averaged (weight-renormalized over non-missing values) into
subcategories, combined into the two fixed categories, rescaled to a 0-10
scale by division by the category maximum, aggregated multiplicatively or
additively, percentile-ranked, and thresholded into designations.

Designation rule: the top ``ceil((1 - threshold_quantile) * n_scored)`` tracts
by final score are designated; ties at the cutoff score are all designated.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import rankdata

from .data import (
    CATEGORY_IDS,
    Aggregation,
    HealthSet,
    IndicatorSchema,
    ModelSpec,
    Preprocessing,
    TractRecord,
)
from .errors import ScoringError, SchemaError

LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class ScoreResult:
    """Scores for a single tract under one model specification."""

    tract_id: str
    subcategory_scores: Mapping[str, float | None]
    category_scores: Mapping[str, float | None]
    raw_score: float | None
    percentile: float | None
    designated: bool

    def __post_init__(self) -> None:
        object.__setattr__(self, "subcategory_scores", dict(self.subcategory_scores))
        object.__setattr__(self, "category_scores", dict(self.category_scores))


# ---------------------------------------------------------------------------
# Pre-processing


def _percentile_of(arr: np.ndarray) -> np.ndarray:
    """Average-rank percentiles: 100 * rank / n over non-missing entries."""
    out = np.full(arr.shape, np.nan)
    mask = np.isfinite(arr)
    n = int(mask.sum())
    if n:
        out[mask] = 100.0 * rankdata(arr[mask], method="average") / n
    return out


def percentile_rank(values: Sequence[float | None], label: str = "values") -> list[float | None]:
    """Map values to percentile ranks on a 0-100 scale.

    Ties take the average rank; percentiles are ``100 * rank / n`` over the
    non-missing entries, so the maximum always maps to 100.  Missing values
    pass through.

    Examples
    --------
    >>> percentile_rank([10, 20, 30])
    [33.33333333333333, 66.66666666666666, 100.0]
    >>> percentile_rank([5, 5])
    [75.0, 75.0]
    """
    arr = np.array(
        [np.nan if v is None else float(v) for v in values], dtype=float
    )
    if not np.isfinite(arr).any():
        raise ScoringError(f"{label}: percentile rank needs at least one non-missing value")
    out = _percentile_of(arr)
    return [None if not np.isfinite(x) else float(x) for x in out]


def _zscore_of(arr: np.ndarray, label: str) -> np.ndarray:
    mask = np.isfinite(arr)
    n = int(mask.sum())
    if n < 2:
        raise ScoringError(f"{label}: z-score needs at least 2 non-missing values")
    sd = float(np.std(arr[mask], ddof=1))
    if sd == 0.0:
        raise ScoringError(f"{label}: zero variance, z-score undefined")
    out = np.full(arr.shape, np.nan)
    out[mask] = (arr[mask] - float(np.mean(arr[mask]))) / sd
    return out


def zscore_standardize(values: Sequence[float | None], label: str = "values") -> list[float | None]:
    """Standardize to mean 0 and sample standard deviation 1 (ddof=1).

    Statistics are computed over non-missing entries; missing values pass
    through.  Zero variance raises :class:`ScoringError` naming `label`.
    """
    arr = np.array([np.nan if v is None else float(v) for v in values], dtype=float)
    out = _zscore_of(arr, label)
    return [None if not np.isfinite(x) else float(x) for x in out]


def apply_health_set(schema: IndicatorSchema, health_set: HealthSet) -> IndicatorSchema:
    """Resolve a schema against a health-variable set.

    Baseline drops every ``extended_only`` variable; Extended keeps them and
    swaps in ``extended_weight`` wherever one is declared.
    """
    if health_set == HealthSet.BASELINE:
        variables = tuple(v for v in schema.variables if not v.extended_only)
    else:
        variables = tuple(
            v if v.extended_weight is None else replace(v, weight=v.extended_weight)
            for v in schema.variables
        )
    return IndicatorSchema(variables=variables, subcategories=schema.subcategories)


# ---------------------------------------------------------------------------
# Scalar (per-tract) operations


def _weighted_mean(
    pairs: Sequence[tuple[float | None, float]]
) -> float | None:
    num = 0.0
    den = 0.0
    for value, weight in pairs:
        if value is None:
            continue
        num += weight * value
        den += weight
    if den == 0.0:
        return None
    return num / den


def subcategory_score(
    processed: Mapping[str, float | None],
    subcategory_id: str,
    schema: IndicatorSchema,
    spec: ModelSpec | None = None,
) -> float | None:
    """Weighted mean of a subcategory's non-missing processed values.

    Weights come from the schema, overridden per variable by ``spec.weights``;
    they are renormalized over the non-missing subset.  Returns ``None`` when
    every variable in the subcategory is missing.
    """
    variables = schema.subcategory_variables(subcategory_id)
    overrides = (spec.weights or {}) if spec is not None else {}
    pairs = [
        (processed.get(v.variable_id), float(overrides.get(v.variable_id, v.weight)))
        for v in variables
    ]
    return _weighted_mean(pairs)


def category_scores(
    subcategory_values: Mapping[str, float | None], schema: IndicatorSchema
) -> dict[str, float | None]:
    """Combine subcategory scores into the two categories.

    Each category is the weighted mean of its subcategories' non-missing
    scores using the schema's subcategory weights (for the canonical schema:
    pollution burden = (exposures + 0.5 * effects) / 1.5).
    """
    out: dict[str, float | None] = {}
    for category in CATEGORY_IDS:
        pairs = [
            (subcategory_values.get(s.subcategory_id), s.weight)
            for s in schema.subcategories
            if s.category_id == category
        ]
        out[category] = _weighted_mean(pairs)
    return out


def category_maxima(
    population_of_scores: Sequence[Mapping[str, float | None]]
) -> dict[str, float]:
    """Per-category maximum over the population, used for 0-10 rescaling."""
    maxima: dict[str, float] = {}
    for category in CATEGORY_IDS:
        values = [
            s[category]
            for s in population_of_scores
            if s.get(category) is not None
        ]
        if not values:
            raise ScoringError(f"category {category!r} has no scores in the population")
        best = max(values)
        if best <= 0.0:
            raise ScoringError(
                f"category {category!r} maximum is {best}; 0-10 rescaling undefined"
            )
        maxima[category] = float(best)
    return maxima


def final_score(
    tract_categories: Mapping[str, float | None],
    spec: ModelSpec,
    population_of_scores: Sequence[Mapping[str, float | None]],
) -> float | None:
    """Rescale categories to 0-10 by max-division and aggregate.

    Multiplicative aggregation multiplies the two rescaled categories;
    additive takes their arithmetic mean.  Returns ``None`` when either
    category score is missing.
    """
    maxima = category_maxima(population_of_scores)
    rescaled = []
    for category in CATEGORY_IDS:
        value = tract_categories.get(category)
        if value is None:
            return None
        rescaled.append(10.0 * value / maxima[category])
    if spec.aggregation == Aggregation.MULTIPLICATIVE:
        return rescaled[0] * rescaled[1]
    return (rescaled[0] + rescaled[1]) / 2.0


# ---------------------------------------------------------------------------
# Vectorized pipeline


@dataclass(frozen=True)
class _Compiled:
    """Schema flattened into index arrays for array-at-a-time scoring."""

    variable_ids: tuple[str, ...]
    weights: np.ndarray            # (k,) effective default weights
    subcategory_ids: tuple[str, ...]
    sub_columns: tuple[np.ndarray, ...]   # column index arrays per subcategory
    sub_weights: np.ndarray        # (s,) subcategory weights within category
    sub_category: np.ndarray       # (s,) 0 = pollution burden, 1 = population


def compile_schema(
    schema: IndicatorSchema, weight_overrides: Mapping[str, float] | None = None
) -> _Compiled:
    overrides = weight_overrides or {}
    unknown = set(overrides) - set(schema.variable_ids)
    if unknown:
        raise SchemaError(f"weight overrides for unknown variables: {sorted(unknown)}")
    variable_ids = schema.variable_ids
    index = {vid: i for i, vid in enumerate(variable_ids)}
    weights = np.array(
        [float(overrides.get(v.variable_id, v.weight)) for v in schema.variables]
    )
    sub_ids = tuple(s.subcategory_id for s in schema.subcategories)
    sub_columns = tuple(
        np.array(
            [index[v.variable_id] for v in schema.variables if v.subcategory_id == sid],
            dtype=int,
        )
        for sid in sub_ids
    )
    sub_weights = np.array([s.weight for s in schema.subcategories])
    sub_category = np.array(
        [CATEGORY_IDS.index(s.category_id) for s in schema.subcategories], dtype=int
    )
    return _Compiled(
        variable_ids=variable_ids,
        weights=weights,
        subcategory_ids=sub_ids,
        sub_columns=sub_columns,
        sub_weights=sub_weights,
        sub_category=sub_category,
    )


def value_matrix(
    records: Sequence[TractRecord], variable_ids: Sequence[str]
) -> np.ndarray:
    """Stack raw values into an (n_tracts, n_variables) array, NaN = missing."""
    out = np.full((len(records), len(variable_ids)), np.nan)
    for i, record in enumerate(records):
        values = record.values
        for j, vid in enumerate(variable_ids):
            v = values.get(vid)
            if v is not None:
                out[i, j] = v
    return out


def preprocess_matrix(
    values: np.ndarray, method: Preprocessing, variable_ids: Sequence[str]
) -> np.ndarray:
    out = np.empty_like(values)
    for j, vid in enumerate(variable_ids):
        column = values[:, j]
        if method == Preprocessing.PERCENTILE_RANK:
            if not np.isfinite(column).any():
                raise ScoringError(
                    f"{vid}: percentile rank needs at least one non-missing value"
                )
            out[:, j] = _percentile_of(column)
        else:
            out[:, j] = _zscore_of(column, vid)
    return out


def _masked_weighted_mean(block: np.ndarray, weights: np.ndarray) -> np.ndarray:
    mask = np.isfinite(block)
    den = (mask * weights).sum(axis=1)
    num = np.where(mask, block, 0.0) @ weights
    return np.where(den > 0.0, num / np.where(den > 0.0, den, 1.0), np.nan)


@dataclass(frozen=True)
class ScoreArrays:
    """Array view of a scored population (rows align with the input records)."""

    subcategory: np.ndarray   # (n, s)
    category: np.ndarray      # (n, 2)
    final: np.ndarray         # (n,)
    percentile: np.ndarray    # (n,)
    designated: np.ndarray    # (n,) bool


def designation_cutoff_count(n_scored: int, threshold_quantile: float) -> int:
    """Number of designated tracts before tie expansion: ceil((1-q) * n)."""
    if n_scored <= 0:
        return 0
    return max(1, math.ceil((1.0 - threshold_quantile) * n_scored - 1e-9))


def score_processed(
    processed: np.ndarray,
    compiled: _Compiled,
    aggregation: Aggregation,
    threshold_quantile: float,
    weights: np.ndarray | None = None,
) -> ScoreArrays:
    """Score pre-processed values; `weights` overrides the compiled defaults."""
    w = compiled.weights if weights is None else np.asarray(weights, dtype=float)
    n = processed.shape[0]
    n_sub = len(compiled.subcategory_ids)
    sub = np.full((n, n_sub), np.nan)
    for j, cols in enumerate(compiled.sub_columns):
        if cols.size:
            sub[:, j] = _masked_weighted_mean(processed[:, cols], w[cols])
    cat = np.full((n, 2), np.nan)
    for c in (0, 1):
        members = np.where(compiled.sub_category == c)[0]
        cat[:, c] = _masked_weighted_mean(sub[:, members], compiled.sub_weights[members])
    finals = np.full(n, np.nan)
    if n:
        rescaled = np.full((n, 2), np.nan)
        for c, name in enumerate(CATEGORY_IDS):
            col = cat[:, c]
            if not np.isfinite(col).any():
                raise ScoringError(f"category {name!r} has no scores in the population")
            best = np.nanmax(col)
            if best <= 0.0:
                raise ScoringError(
                    f"category {name!r} maximum is {best}; 0-10 rescaling undefined"
                )
            rescaled[:, c] = 10.0 * col / best
        scored = np.isfinite(rescaled).all(axis=1)
        if aggregation == Aggregation.MULTIPLICATIVE:
            finals = np.where(scored, rescaled[:, 0] * rescaled[:, 1], np.nan)
        else:
            finals = np.where(scored, (rescaled[:, 0] + rescaled[:, 1]) / 2.0, np.nan)
    percentiles = _percentile_of(finals) if np.isfinite(finals).any() else np.full(n, np.nan)
    designated = np.zeros(n, dtype=bool)
    scored_mask = np.isfinite(finals)
    m = int(scored_mask.sum())
    if m:
        k = designation_cutoff_count(m, threshold_quantile)
        cutoff = np.sort(finals[scored_mask])[m - k]
        designated[scored_mask] = finals[scored_mask] >= cutoff
    return ScoreArrays(
        subcategory=sub,
        category=cat,
        final=finals,
        percentile=percentiles,
        designated=designated,
    )


def _active_schema(
    records: Sequence[TractRecord], schema: IndicatorSchema, spec: ModelSpec
) -> IndicatorSchema:
    """Health-set resolution plus removal of variables that are missing everywhere."""
    resolved = apply_health_set(schema, spec.health_set)
    values = value_matrix(records, resolved.variable_ids)
    dead = [
        vid
        for j, vid in enumerate(resolved.variable_ids)
        if not np.isfinite(values[:, j]).any()
    ]
    if dead:
        LOGGER.info("dropping variables with no observed values this run: %s", dead)
        resolved = IndicatorSchema(
            variables=tuple(v for v in resolved.variables if v.variable_id not in dead),
            subcategories=resolved.subcategories,
        )
    return resolved


def _results_from_arrays(
    records: Sequence[TractRecord], compiled: _Compiled, arrays: ScoreArrays
) -> list[ScoreResult]:
    def opt(x: float) -> float | None:
        return float(x) if np.isfinite(x) else None

    results = []
    for i, record in enumerate(records):
        results.append(
            ScoreResult(
                tract_id=record.tract_id,
                subcategory_scores={
                    sid: opt(arrays.subcategory[i, j])
                    for j, sid in enumerate(compiled.subcategory_ids)
                },
                category_scores={
                    name: opt(arrays.category[i, c])
                    for c, name in enumerate(CATEGORY_IDS)
                },
                raw_score=opt(arrays.final[i]),
                percentile=opt(arrays.percentile[i]),
                designated=bool(arrays.designated[i]),
            )
        )
    return results


def run_model(
    records: Sequence[TractRecord], schema: IndicatorSchema, spec: ModelSpec
) -> list[ScoreResult]:
    """Run the full scoring pipeline for one model specification.

    Deterministic: identical inputs give bit-identical outputs.  Tracts whose
    categories cannot be scored keep ``raw_score = None`` and are never
    designated.  Variables with no observed values anywhere are dropped from
    the run (logged), so specs that reference absent columns degrade
    gracefully rather than failing the whole population.
    """
    if not records:
        return []
    resolved = _active_schema(records, schema, spec)
    overrides = spec.weights
    if overrides:
        unknown = set(overrides) - set(schema.variable_ids)
        if unknown:
            raise SchemaError(
                f"weight overrides for unknown variables: {sorted(unknown)}"
            )
        # overrides for variables resolved away (health set, all-missing drop)
        # are silently inert
        overrides = {
            k: v for k, v in overrides.items() if k in resolved.variable_ids
        }
    compiled = compile_schema(resolved, overrides)
    values = value_matrix(records, compiled.variable_ids)
    processed = preprocess_matrix(values, spec.preprocessing, compiled.variable_ids)
    arrays = score_processed(
        processed, compiled, spec.aggregation, spec.threshold_quantile
    )
    return _results_from_arrays(records, compiled, arrays)


def omit_category_model(
    records: Sequence[TractRecord],
    schema: IndicatorSchema,
    spec: ModelSpec,
    omitted: str,
) -> list[ScoreResult]:
    """Re-run the pipeline with one subcategory deleted.

    The parent category renormalizes over its remaining subcategories; the
    omitted subcategory is absent from the results' score maps.  Omitting a
    category's only subcategory raises :class:`SchemaError`.
    """
    target = schema.subcategory(omitted)
    siblings = [
        s
        for s in schema.subcategories
        if s.category_id == target.category_id and s.subcategory_id != omitted
    ]
    if not siblings:
        raise SchemaError(
            f"cannot omit {omitted!r}: category {target.category_id!r} would be empty"
        )
    reduced = IndicatorSchema(
        variables=tuple(v for v in schema.variables if v.subcategory_id != omitted),
        subcategories=tuple(
            s for s in schema.subcategories if s.subcategory_id != omitted
        ),
    )
    return run_model(records, reduced, spec)


# ---------------------------------------------------------------------------
# CSV export / import

SCORE_FIXED_COLUMNS = ("raw_score", "percentile", "designated")


def scores_to_csv(results: Sequence[ScoreResult], path: str) -> None:
    """Write results as CSV.

    Column order is fixed: ``tract_id``, subcategory columns (result order),
    the two category columns, then ``raw_score``, ``percentile``,
    ``designated`` (``true``/``false``).  Missing scores serialize as empty
    cells.
    """
    if not results:
        raise ScoringError("no results to export")
    sub_ids = list(results[0].subcategory_scores)
    columns = ["tract_id", *sub_ids, *CATEGORY_IDS, *SCORE_FIXED_COLUMNS]

    def cell(x: float | None) -> str:
        return "" if x is None else repr(float(x))

    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for r in results:
            row = [r.tract_id]
            row += [cell(r.subcategory_scores.get(s)) for s in sub_ids]
            row += [cell(r.category_scores.get(c)) for c in CATEGORY_IDS]
            row += [
                cell(r.raw_score),
                cell(r.percentile),
                "true" if r.designated else "false",
            ]
            writer.writerow(row)


def scores_from_csv(path: str) -> list[ScoreResult]:
    """Read back a file written by :func:`scores_to_csv`."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ScoringError(f"{path}: empty scores file")
        fixed = {"tract_id", *CATEGORY_IDS, *SCORE_FIXED_COLUMNS}
        sub_ids = [c for c in reader.fieldnames if c not in fixed]

        def num(cell: str) -> float | None:
            return None if cell == "" else float(cell)

        results = []
        for row in reader:
            results.append(
                ScoreResult(
                    tract_id=row["tract_id"],
                    subcategory_scores={s: num(row[s]) for s in sub_ids},
                    category_scores={c: num(row[c]) for c in CATEGORY_IDS},
                    raw_score=num(row["raw_score"]),
                    percentile=num(row["percentile"]),
                    designated=row["designated"] == "true",
                )
            )
    return results
