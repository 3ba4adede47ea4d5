"""Seeded synthetic data with known ground truth for tests and demos.

Indicator variables come from a Gaussian copula with equicorrelated normal
scores and mixed lognormal/uniform marginals (so rank-based and moment-based
pre-processing genuinely disagree); demographics tie to the same latent
factor; the RDD outcome is a documented smooth cubic plus an exact jump at
the cutoff.  Everything is a pure function of (config, seed).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import norm

from .data import (
    Demographics,
    FundingProject,
    IndicatorSchema,
    Subcategory,
    TractRecord,
    Variable,
    POLLUTION_BURDEN,
    POPULATION_CHARACTERISTICS,
)
from .errors import SchemaError

LOGGER = logging.getLogger(__name__)

_SUBCATEGORY_CYCLE = (
    ("exposures", POLLUTION_BURDEN, 1.0),
    ("environmental_effects", POLLUTION_BURDEN, 0.5),
    ("sensitive_populations", POPULATION_CHARACTERISTICS, 1.0),
    ("socioeconomic_factors", POPULATION_CHARACTERISTICS, 1.0),
)

PROJECT_CATEGORY_LABELS = (
    "transportation",
    "housing",
    "clean_energy",
    "water",
    "community",
    "waste",
)


@dataclass(frozen=True)
class SynthConfig:
    n_tracts: int
    n_variables: int = 8
    correlation: float = 0.3
    tau_star: float = 0.7
    missing_rate: float = 0.0
    seed: int = 20240001
    n_districts: int | None = None
    extended_health: bool = False

    def __post_init__(self) -> None:
        if self.n_tracts < 0:
            raise SchemaError("n_tracts must be non-negative")
        if self.n_variables < 4:
            raise SchemaError("need at least 4 variables (one per subcategory)")
        if not 0.0 <= self.correlation < 1.0:
            raise SchemaError("correlation must lie in [0, 1)")
        if not 0.0 <= self.missing_rate < 1.0:
            raise SchemaError("missing_rate must lie in [0, 1)")


def synthetic_schema(config: SynthConfig) -> IndicatorSchema:
    """Variables var_00.. assigned round-robin to the four subcategories.

    With ``extended_health`` the last sensitive-population variable gains an
    extended-only twin at half weight (so Baseline and Extended specs differ).
    """
    variables = []
    for j in range(config.n_variables):
        sub = _SUBCATEGORY_CYCLE[j % 4][0]
        variables.append(Variable(f"var_{j:02d}", sub))
    if config.extended_health:
        donors = [v for v in variables if v.subcategory_id == "sensitive_populations"]
        twin_source = donors[-1]
        variables = [
            replace(v, extended_weight=0.5)
            if v.variable_id == twin_source.variable_id
            else v
            for v in variables
        ]
        variables.append(
            Variable(
                f"{twin_source.variable_id}_survey",
                "sensitive_populations",
                extended_only=True,
                extended_weight=0.5,
            )
        )
    subcategories = tuple(
        Subcategory(sid, cat, weight=w) for sid, cat, w in _SUBCATEGORY_CYCLE
    )
    return IndicatorSchema(variables=tuple(variables), subcategories=subcategories)


def generate_tracts(config: SynthConfig) -> list[TractRecord]:
    """Synthetic tract population matching :func:`synthetic_schema`.

    Normal scores are equicorrelated at ``config.correlation`` through a
    single latent factor; even-indexed variables get lognormal marginals and
    odd-indexed ones uniform marginals on [0, 100].  Demographics (poverty,
    one race share pair, foreign-born share, a two-party district label) are
    monotone in the latent factor, so demographic objectives respond to
    scoring choices.  Deterministic per seed.
    """
    schema = synthetic_schema(config)
    rng = np.random.default_rng(config.seed)
    n = config.n_tracts
    if n == 0:
        return []
    rho = config.correlation
    factor = rng.standard_normal(n)
    k = len(schema.variables)
    noise = rng.standard_normal((n, k))
    z = math.sqrt(rho) * factor[:, None] + math.sqrt(1.0 - rho) * noise
    values = np.empty_like(z)
    for j in range(k):
        if j % 2 == 0:
            values[:, j] = np.exp(z[:, j])  # skewed marginal
        else:
            values[:, j] = 100.0 * norm.cdf(z[:, j])  # uniform marginal
    populations = np.maximum(
        50, rng.lognormal(mean=8.0, sigma=0.4, size=n).astype(int)
    )

    n_districts = config.n_districts or max(2, n // 25)
    order = np.argsort(factor + 0.5 * rng.standard_normal(n), kind="stable")
    district_of = np.empty(n, dtype=int)
    district_of[order] = np.arange(n) * n_districts // n

    poverty = 1.0 / (1.0 + np.exp(-(0.9 * factor + 0.6 * rng.standard_normal(n))))
    share_a = 1.0 / (1.0 + np.exp(-(0.8 * factor + 0.7 * rng.standard_normal(n))))
    foreign = 0.6 / (1.0 + np.exp(-(0.5 * factor + 0.8 * rng.standard_normal(n))))
    multi_district = rng.random(n) < 0.1

    records = []
    for i in range(n):
        district = f"D{district_of[i]:03d}"
        party = "blue" if district_of[i] < n_districts / 2 else "red"
        demographics = Demographics(
            race_shares={"groupa": float(share_a[i]), "groupb": float(1.0 - share_a[i])},
            poverty_share=float(poverty[i]),
            foreign_born_share=float(foreign[i]),
            party=party,
        )
        if multi_district[i] and n_districts > 1:
            other = f"D{(district_of[i] + 1) % n_districts:03d}"
            pop_split = float(rng.uniform(0.55, 0.95))
            record = TractRecord(
                tract_id=f"T{i:05d}",
                population=int(populations[i]),
                values={
                    v.variable_id: float(values[i, j])
                    for j, v in enumerate(schema.variables)
                },
                district_id=None,
                population_in_district={
                    district: pop_split * float(populations[i]),
                    other: (1.0 - pop_split) * float(populations[i]),
                },
                blocks_in_district={district: 7, other: 3},
                area_in_district={district: 2.0, other: 1.0},
                demographics=demographics,
            )
        else:
            record = TractRecord(
                tract_id=f"T{i:05d}",
                population=int(populations[i]),
                values={
                    v.variable_id: float(values[i, j])
                    for j, v in enumerate(schema.variables)
                },
                district_id=district,
                demographics=demographics,
            )
        records.append(record)
    return records


def demographics_map(records: Sequence[TractRecord]) -> dict[str, Demographics]:
    return {
        r.tract_id: r.demographics for r in records if r.demographics is not None
    }


#: Smooth component of the synthetic log-funding outcome (q = percentile/100).
CUBIC_COEFFICIENTS = (1.0, 0.8, 0.3, -0.2)


def funding_surface(percentile: np.ndarray) -> np.ndarray:
    q = np.asarray(percentile, dtype=float) / 100.0
    c0, c1, c2, c3 = CUBIC_COEFFICIENTS
    return c0 + c1 * q + c2 * q**2 + c3 * q**3


def generate_funding_rdd(
    records: Sequence[TractRecord],
    percentiles: Mapping[str, float],
    tau_star: float,
    noise_sd: float,
    seed: int,
    cutoff: float = 75.0,
) -> dict[str, float]:
    """Log funding with a known discontinuity.

    log funding = cubic(percentile) + tau_star * 1[percentile >= cutoff] +
    Normal(0, noise_sd).  The smooth part is :data:`CUBIC_COEFFICIENTS`, so
    the true jump at the cutoff is exactly ``tau_star``.  Tracts absent from
    ``percentiles`` (unscored) get no outcome.  Noise is aligned to the
    record order, so the same (records, seed) pair reproduces exactly.
    """
    rng = np.random.default_rng(seed)
    ids = [r.tract_id for r in records if r.tract_id in percentiles]
    p = np.array([float(percentiles[t]) for t in ids])
    y = funding_surface(p) + tau_star * (p >= cutoff)
    if noise_sd > 0:
        y = y + noise_sd * rng.standard_normal(len(ids))
    return {t: float(v) for t, v in zip(ids, y)}


def mask_missing(
    records: Sequence[TractRecord],
    missing_rate: float,
    seed: int,
) -> list[TractRecord]:
    """Mask cells missing-at-random, conditioned on one observed variable.

    The first variable id (sorted) stays fully observed and drives the
    masking probability of every other cell: 2 * rate * F(conditioner), with
    F its empirical CDF — so missingness averages ``missing_rate`` but
    depends only on observed data.  Same seed, same mask.
    """
    if not 0.0 <= missing_rate < 1.0:
        raise SchemaError("missing_rate must lie in [0, 1)")
    if missing_rate == 0.0 or not records:
        return list(records)
    variable_ids = sorted(records[0].values)
    conditioner = variable_ids[0]
    base = np.array(
        [
            np.nan if r.values.get(conditioner) is None else float(r.values[conditioner])
            for r in records
        ]
    )
    finite = np.isfinite(base)
    cdf = np.full(len(records), 0.5)
    if finite.any():
        ranks = base[finite].argsort().argsort()
        cdf[finite] = (ranks + 1.0) / (finite.sum() + 1.0)
    probability = np.clip(2.0 * missing_rate * cdf, 0.0, 0.95)
    rng = np.random.default_rng(seed)
    out = []
    for i, record in enumerate(records):
        values = dict(record.values)
        for vid in variable_ids[1:]:
            if values.get(vid) is not None and rng.random() < probability[i]:
                values[vid] = None
        out.append(replace(record, values=values))
    return out


def generate_projects(
    records: Sequence[TractRecord],
    log_funding: Mapping[str, float],
    designated: Mapping[str, bool],
    seed: int,
    district_project_rate: float = 0.15,
    include_defects: bool = False,
) -> list[FundingProject]:
    """A project ledger realizing the synthetic funding totals.

    One tract-routed project per tract with log funding (earmarked toward
    designated tracts), plus district-routed projects on a fraction of
    districts.  ``include_defects`` plants negative-total and over-earmarked
    rows to exercise repair.
    """
    rng = np.random.default_rng(seed)
    projects = []
    years = (2017, 2018, 2019, 2020, 2021)
    for i, record in enumerate(records):
        y = log_funding.get(record.tract_id)
        if y is None:
            continue
        total = float(math.exp(y))
        dac = total * 0.6 if designated.get(record.tract_id) else 0.0
        projects.append(
            FundingProject(
                project_id=f"P{i:05d}",
                year=years[i % len(years)],
                total=total,
                earmark_dac=dac,
                earmark_low_income=total * 0.1,
                earmark_buffer=0.0,
                tract_id=record.tract_id,
                category_label=PROJECT_CATEGORY_LABELS[i % len(PROJECT_CATEGORY_LABELS)],
            )
        )
    districts = sorted(
        {r.district_id for r in records if r.district_id is not None}
    )
    for j, district in enumerate(districts):
        if rng.random() >= district_project_rate:
            continue
        total = float(rng.lognormal(mean=1.0, sigma=0.5))
        projects.append(
            FundingProject(
                project_id=f"PD{j:04d}",
                year=years[j % len(years)],
                total=total,
                earmark_dac=total * 0.5,
                earmark_low_income=0.0,
                earmark_buffer=0.0,
                district_id=district,
                category_label=PROJECT_CATEGORY_LABELS[j % len(PROJECT_CATEGORY_LABELS)],
            )
        )
    if include_defects and projects:
        projects.append(
            FundingProject(
                project_id="PBAD0001",
                year=2019,
                total=-5.0,
                tract_id=records[0].tract_id if records else None,
                category_label="waste",
            )
        )
        anchor = records[min(1, len(records) - 1)]
        projects.append(
            FundingProject(
                project_id="PBAD0002",
                year=2020,
                total=10.0,
                earmark_dac=8.0,
                earmark_low_income=8.0,
                earmark_buffer=0.0,
                tract_id=anchor.tract_id,
                category_label="housing",
            )
        )
    return projects
