"""One-shot audit report: lattice churn, ranges, band, union, diagnostics.

Everything the `audit` CLI subcommand emits lives here so it can be driven
(and tested) without a shell.  All outputs are deterministic: JSON is written
with sorted keys, CSV cells use ``repr`` for floats, and no timestamps or
environment details leak into the artifacts.
"""

from __future__ import annotations

import csv
import json
import logging
import os
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import _svg
from .data import (
    Aggregation,
    HealthSet,
    IndicatorSchema,
    ModelSpec,
    Preprocessing,
    _format_cell,
    ces_schema,
    ingest_demographics,
    ingest_tracts,
    join_demographics,
    schema_from_json,
)
from .engine import apply_health_set, omit_category_model, scores_to_csv
from .errors import ScreenAuditError
from .sensitivity import (
    DEFAULT_SEED,
    LatticeResult,
    designation_churn,
    enumerate_lattice,
    fit_interval_model,
    overall_sensitivity,
    sensitivity_reduction,
    tract_score_ranges,
    auc_correlation_r2,
    union_designation,
)

LOGGER = logging.getLogger(__name__)

REPORT_FORMATS = ("json", "csv", "svg")
MIN_BAND_RANGES = 50


@dataclass(frozen=True)
class AuditConfig:
    """Inputs and knobs for :func:`run_audit_report`."""

    tracts: str
    out_dir: str
    demographics: str | None = None
    schema: str | None = None
    spec: ModelSpec = field(default_factory=ModelSpec)
    seed: int = DEFAULT_SEED
    jobs: int | None = None
    formats: tuple[str, ...] = ("json", "csv")

    def __post_init__(self) -> None:
        unknown = set(self.formats) - set(REPORT_FORMATS)
        if unknown:
            raise ScreenAuditError(
                f"unknown report formats: {sorted(unknown)}; "
                f"choose from {REPORT_FORMATS}"
            )
        if not self.formats:
            raise ScreenAuditError("at least one report format is required")


def _write_csv(path: str, columns: Sequence[str], rows: Sequence[Sequence]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_format_cell(cell) for cell in row])


def _write_json(path: str, payload: Mapping) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _spec_index(lattice: LatticeResult, preprocessing: Preprocessing,
                aggregation: Aggregation, health_set: HealthSet) -> int:
    for i, spec in enumerate(lattice.specs):
        if (spec.preprocessing, spec.aggregation, spec.health_set) == (
            preprocessing, aggregation, health_set,
        ):
            return i
    raise ScreenAuditError("lattice is missing a required specification")


def run_audit_report(config: AuditConfig) -> int:
    """Run the full audit and write artifacts under ``config.out_dir``.

    Returns 0 on success.  On failure writes ``error.json`` (machine readable:
    error class + message) into the output directory and returns 1.
    """
    os.makedirs(config.out_dir, exist_ok=True)
    try:
        _run(config)
        return 0
    except Exception as exc:  # noqa: BLE001 - contract: nonzero + error file
        LOGGER.error("audit failed: %s", exc)
        _write_json(
            os.path.join(config.out_dir, "error.json"),
            {"error": type(exc).__name__, "message": str(exc)},
        )
        return 1


def _run(config: AuditConfig) -> None:
    out = config.out_dir
    schema = (
        schema_from_json(config.schema) if config.schema else ces_schema(extended=True)
    )
    records = ingest_tracts(config.tracts, schema)
    if config.demographics:
        records = join_demographics(records, ingest_demographics(config.demographics))
    if not records:
        raise ScreenAuditError(f"{config.tracts}: no tract rows to audit")

    lattice = enumerate_lattice(records, schema, base_spec=config.spec, jobs=config.jobs)
    base = lattice.base_results
    base_spec = lattice.specs[lattice.base_index]

    churn_rows = []
    churn_map: dict[str, float] = {}
    for i, spec in enumerate(lattice.specs):
        value = (
            0.0 if i == lattice.base_index
            else designation_churn(base, lattice.results[i])
        )
        churn_rows.append(
            (spec.label(), spec.preprocessing.value, spec.aggregation.value,
             spec.health_set.value, value)
        )
        churn_map[spec.label()] = value
    overall = overall_sensitivity(lattice)

    omit_rows = []
    omit_map: dict[str, float] = {}
    for sub in schema.subcategories:
        omitted = omit_category_model(records, schema, base_spec, sub.subcategory_id)
        value = designation_churn(base, omitted)
        omit_rows.append((sub.subcategory_id, sub.category_id, value))
        omit_map[sub.subcategory_id] = value

    ranges = tract_score_ranges(lattice)
    band = None
    if len(ranges) >= MIN_BAND_RANGES:
        band = fit_interval_model(ranges)
    else:
        LOGGER.warning(
            "only %d scored tracts; interval band needs %d — skipping",
            len(ranges), MIN_BAND_RANGES,
        )

    additive_idx = _spec_index(
        lattice, base_spec.preprocessing, Aggregation.ADDITIVE, base_spec.health_set
    )
    zscore_idx = _spec_index(
        lattice, Preprocessing.ZSCORE, base_spec.aggregation, base_spec.health_set
    )
    two_set = [base, lattice.results[additive_idx]]
    three_set = two_set + [lattice.results[zscore_idx]]
    reduction_two = sensitivity_reduction(overall, two_set, lattice)
    reduction_three = sensitivity_reduction(overall, three_set, lattice)
    union_three = union_designation(three_set)
    n_base = sum(r.designated for r in base)
    n_union = sum(r.designated for r in union_three)
    union_growth = 100.0 * (n_union - n_base) / n_base if n_base else 0.0

    active = apply_health_set(schema, base_spec.health_set)
    designations = {r.tract_id: r.designated for r in base}
    diagnostics = auc_correlation_r2(
        records, active, [designations[r.tract_id] for r in records]
    )

    summary = {
        "n_tracts": len(records),
        "n_scored": len(ranges),
        "n_designated": int(n_base),
        "base_spec": base_spec.label(),
        "threshold_quantile": base_spec.threshold_quantile,
        "seed": config.seed,
        "churn_vs_base": churn_map,
        "overall_sensitivity": overall,
        "omitted_subcategory_churn": omit_map,
        "union_two_model_reduction": reduction_two,
        "union_three_model_reduction": reduction_three,
        "union_three_model_designated": int(n_union),
        "union_designation_growth_pct": union_growth,
        "band_width_p75": float(band.width(75.0)) if band else None,
        "band_width_p95": float(band.width(95.0)) if band else None,
        "auc_correlation_r_squared": diagnostics.r_squared,
    }

    if "json" in config.formats:
        _write_json(os.path.join(out, "audit.json"), summary)
    if "csv" in config.formats:
        _write_csv(
            os.path.join(out, "churn.csv"),
            ("spec", "preprocessing", "aggregation", "health_set", "churn_pct"),
            churn_rows,
        )
        _write_csv(
            os.path.join(out, "omitted_category.csv"),
            ("subcategory_id", "category_id", "churn_pct"),
            omit_rows,
        )
        _write_csv(
            os.path.join(out, "ranges.csv"),
            ("tract_id", "base_percentile", "min_percentile", "max_percentile"),
            [
                (r.tract_id, r.base_percentile, r.min_percentile, r.max_percentile)
                for r in ranges
            ],
        )
        if band is not None:
            grid = np.arange(0, 101, dtype=float)
            low, high = band.band(grid)
            _write_csv(
                os.path.join(out, "band.csv"),
                ("base_percentile", "low", "high"),
                list(zip(grid, low, high)),
            )
        scores_to_csv(base, os.path.join(out, "scores.csv"))
        _write_csv(
            os.path.join(out, "diagnostics.csv"),
            ("variable", "auc", "mean_abs_corr"),
            list(diagnostics.table.itertuples(index=False, name=None)),
        )
    if "svg" in config.formats:
        if band is not None:
            grid = np.arange(0, 101, dtype=float)
            low, high = band.band(grid)
            _svg.line_chart(
                os.path.join(out, "band.svg"),
                grid,
                [("base percentile", grid)],
                title="Designation-score interval band",
                x_label="base percentile",
                y_label="percentile range across specifications",
                band=(low, high),
            )
        _svg.bar_chart(
            os.path.join(out, "churn.svg"),
            [row[0] for row in churn_rows],
            [row[4] for row in churn_rows],
            title="Designation churn vs base specification",
            y_label="churn (% of tracts)",
        )
        table = diagnostics.table
        xs = table["mean_abs_corr"].to_numpy(dtype=float)
        ys = table["auc"].to_numpy(dtype=float)
        slope, intercept = np.polyfit(xs, ys, 1)
        _svg.scatter_chart(
            os.path.join(out, "auc_correlation.svg"),
            xs,
            ys,
            title="Single-variable AUC vs inter-variable correlation",
            x_label="mean |pairwise correlation|",
            y_label="Mann-Whitney AUC",
            fit_line=(float(intercept), float(slope)),
        )
