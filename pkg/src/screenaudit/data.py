"""Domain records, indicator schemas, and CSV ingestion.

Tabular inputs are plain CSV (RFC 4180, header row required).  Empty cells
and the markers ``NA``/``NaN`` (case-insensitive) denote missing values.
All record types are immutable after ingestion.
"""

from __future__ import annotations

import csv
import enum
import json
import logging
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

from .errors import IngestionError, SchemaError

LOGGER = logging.getLogger(__name__)

NA_MARKERS = frozenset({"", "na", "nan"})

#: Category identifiers are fixed by the scoring design.
POLLUTION_BURDEN = "pollution_burden"
POPULATION_CHARACTERISTICS = "population_characteristics"
CATEGORY_IDS = (POLLUTION_BURDEN, POPULATION_CHARACTERISTICS)


class Preprocessing(str, enum.Enum):
    PERCENTILE_RANK = "percentile_rank"
    ZSCORE = "zscore"


class Aggregation(str, enum.Enum):
    MULTIPLICATIVE = "multiplicative"
    ADDITIVE = "additive"


class HealthSet(str, enum.Enum):
    BASELINE = "baseline"
    EXTENDED = "extended"


@dataclass(frozen=True)
class ModelSpec:
    """One fully determined scoring model (a point in the specification lattice)."""

    preprocessing: Preprocessing = Preprocessing.PERCENTILE_RANK
    aggregation: Aggregation = Aggregation.MULTIPLICATIVE
    health_set: HealthSet = HealthSet.BASELINE
    threshold_quantile: float = 0.75
    #: Optional per-variable weight overrides (variable id -> weight).
    weights: Mapping[str, float] | None = None

    def __post_init__(self) -> None:
        if not 0.0 < self.threshold_quantile < 1.0:
            raise SchemaError(
                f"threshold_quantile must lie in (0, 1), got {self.threshold_quantile}"
            )
        if self.weights is not None:
            bad = [k for k, v in self.weights.items() if not v > 0.0]
            if bad:
                raise SchemaError(f"weights must be positive; offending: {sorted(bad)}")
            object.__setattr__(self, "weights", dict(self.weights))

    def label(self) -> str:
        return (
            f"{self.preprocessing.value}+{self.aggregation.value}"
            f"+{self.health_set.value}"
        )


@dataclass(frozen=True)
class Variable:
    """One indicator variable within a subcategory."""

    variable_id: str
    subcategory_id: str
    weight: float = 1.0
    #: Present only in the extended health set (dropped under baseline).
    extended_only: bool = False
    #: Weight that replaces ``weight`` when the extended health set is active.
    extended_weight: float | None = None

    def __post_init__(self) -> None:
        if not self.weight > 0.0:
            raise SchemaError(
                f"variable {self.variable_id!r} has non-positive weight {self.weight}"
            )
        if self.extended_weight is not None and not self.extended_weight > 0.0:
            raise SchemaError(
                f"variable {self.variable_id!r} has non-positive extended weight"
            )


@dataclass(frozen=True)
class Subcategory:
    subcategory_id: str
    category_id: str
    #: Weight of this subcategory inside its category mean.
    weight: float = 1.0


@dataclass(frozen=True)
class IndicatorSchema:
    """Variables grouped into subcategories, grouped into the two categories."""

    variables: tuple[Variable, ...]
    subcategories: tuple[Subcategory, ...]

    def __post_init__(self) -> None:
        sub_ids = [s.subcategory_id for s in self.subcategories]
        if len(set(sub_ids)) != len(sub_ids):
            raise SchemaError("duplicate subcategory ids")
        var_ids = [v.variable_id for v in self.variables]
        if len(set(var_ids)) != len(var_ids):
            dupes = sorted({v for v in var_ids if var_ids.count(v) > 1})
            raise SchemaError(f"duplicate variable ids: {dupes}")
        known = set(sub_ids)
        for v in self.variables:
            if v.subcategory_id not in known:
                raise SchemaError(
                    f"variable {v.variable_id!r} references unknown subcategory "
                    f"{v.subcategory_id!r}"
                )
        for s in self.subcategories:
            if s.category_id not in CATEGORY_IDS:
                raise SchemaError(
                    f"subcategory {s.subcategory_id!r} references unknown category "
                    f"{s.category_id!r}; categories are fixed: {CATEGORY_IDS}"
                )
            if not s.weight > 0.0:
                raise SchemaError(
                    f"subcategory {s.subcategory_id!r} has non-positive weight"
                )
        for cat in CATEGORY_IDS:
            if not any(s.category_id == cat for s in self.subcategories):
                raise SchemaError(f"category {cat!r} has no subcategories")

    @property
    def variable_ids(self) -> tuple[str, ...]:
        return tuple(v.variable_id for v in self.variables)

    def variable(self, variable_id: str) -> Variable:
        for v in self.variables:
            if v.variable_id == variable_id:
                return v
        raise SchemaError(f"unknown variable {variable_id!r}")

    def subcategory(self, subcategory_id: str) -> Subcategory:
        for s in self.subcategories:
            if s.subcategory_id == subcategory_id:
                return s
        raise SchemaError(f"unknown subcategory {subcategory_id!r}")

    def subcategory_variables(self, subcategory_id: str) -> tuple[Variable, ...]:
        self.subcategory(subcategory_id)
        return tuple(v for v in self.variables if v.subcategory_id == subcategory_id)

    def to_json(self, path: str) -> None:
        payload = {
            "variables": [
                {
                    "variable_id": v.variable_id,
                    "subcategory_id": v.subcategory_id,
                    "weight": v.weight,
                    "extended_only": v.extended_only,
                    "extended_weight": v.extended_weight,
                }
                for v in self.variables
            ],
            "subcategories": [
                {
                    "subcategory_id": s.subcategory_id,
                    "category_id": s.category_id,
                    "weight": s.weight,
                }
                for s in self.subcategories
            ],
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")


def schema_from_json(path: str) -> IndicatorSchema:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    try:
        variables = tuple(
            Variable(
                variable_id=item["variable_id"],
                subcategory_id=item["subcategory_id"],
                weight=float(item.get("weight", 1.0)),
                extended_only=bool(item.get("extended_only", False)),
                extended_weight=(
                    None
                    if item.get("extended_weight") is None
                    else float(item["extended_weight"])
                ),
            )
            for item in payload["variables"]
        )
        subcategories = tuple(
            Subcategory(
                subcategory_id=item["subcategory_id"],
                category_id=item["category_id"],
                weight=float(item.get("weight", 1.0)),
            )
            for item in payload["subcategories"]
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed schema file {path}: {exc}") from exc
    return IndicatorSchema(variables=variables, subcategories=subcategories)


@dataclass(frozen=True)
class Demographics:
    """Optional per-tract demographic attributes."""

    race_shares: Mapping[str, float] = field(default_factory=dict)
    poverty_share: float | None = None
    foreign_born_share: float | None = None
    party: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "race_shares", dict(self.race_shares))
        for name, value in list(self.race_shares.items()) + [
            ("poverty_share", self.poverty_share),
            ("foreign_born_share", self.foreign_born_share),
        ]:
            if value is not None and not 0.0 <= float(value) <= 1.0:
                raise IngestionError(f"share {name!r} must lie in [0, 1], got {value}")


@dataclass(frozen=True)
class TractRecord:
    """One census tract: identifiers, population, and raw indicator values.

    ``values`` maps variable id to a raw measurement (``None`` when missing).
    ``district_id`` is the assigned political district when unambiguous; the
    per-district maps carry the evidence used to resolve multi-district tracts.
    """

    tract_id: str
    population: int
    values: Mapping[str, float | None]
    district_id: str | None = None
    population_in_district: Mapping[str, float] | None = None
    blocks_in_district: Mapping[str, int] | None = None
    area_in_district: Mapping[str, float] | None = None
    demographics: Demographics | None = None

    def __post_init__(self) -> None:
        if self.population < 0:
            raise IngestionError(
                f"tract {self.tract_id!r} has negative population {self.population}"
            )
        object.__setattr__(self, "values", dict(self.values))


@dataclass(frozen=True)
class FundingProject:
    """One funded project from a program ledger."""

    project_id: str
    year: int
    total: float
    earmark_dac: float = 0.0
    earmark_low_income: float = 0.0
    earmark_buffer: float = 0.0
    tract_id: str | None = None
    district_id: str | None = None
    category_label: str | None = None

    @property
    def earmark_sum(self) -> float:
        return self.earmark_dac + self.earmark_low_income + self.earmark_buffer


# ---------------------------------------------------------------------------
# Canonical schema


_BASELINE_VARIABLES: tuple[tuple[str, str], ...] = (
    ("ozone", "exposures"),
    ("pm25", "exposures"),
    ("diesel_pm", "exposures"),
    ("drinking_water", "exposures"),
    ("lead", "exposures"),
    ("pesticides", "exposures"),
    ("toxic_releases", "exposures"),
    ("traffic", "exposures"),
    ("cleanup_sites", "environmental_effects"),
    ("groundwater_threats", "environmental_effects"),
    ("hazardous_waste", "environmental_effects"),
    ("impaired_waters", "environmental_effects"),
    ("solid_waste", "environmental_effects"),
    ("asthma", "sensitive_populations"),
    ("cardiovascular_disease", "sensitive_populations"),
    ("low_birth_weight", "sensitive_populations"),
    ("education", "socioeconomic_factors"),
    ("housing_burden", "socioeconomic_factors"),
    ("linguistic_isolation", "socioeconomic_factors"),
    ("poverty", "socioeconomic_factors"),
    ("unemployment", "socioeconomic_factors"),
)

#: Extra health variables available only under the extended health set.
_EXTENDED_VARIABLES: tuple[str, ...] = (
    "survey_asthma",
    "copd",
    "survey_cardiovascular",
    "kidney_disease",
    "cancer",
)

#: Weights applied when the extended health set is active.  Grouped conditions
#: (respiratory, cardiovascular) share a unit of weight; the remaining health
#: variables carry a full unit each.
EXTENDED_HEALTH_WEIGHTS: Mapping[str, float] = {
    "asthma": 1.0 / 3.0,
    "survey_asthma": 1.0 / 3.0,
    "copd": 1.0 / 3.0,
    "cardiovascular_disease": 1.0 / 2.0,
    "survey_cardiovascular": 1.0 / 2.0,
    "low_birth_weight": 1.0,
    "kidney_disease": 1.0,
    "cancer": 1.0,
}


def ces_schema(extended: bool = False) -> IndicatorSchema:
    """The canonical 21-variable screening schema.

    Parameters
    ----------
    extended : bool
        When True, include the five extra health variables (marked
        ``extended_only``) so that files carrying them can be ingested.
        Scoring-time selection between baseline/extended sets is a
        ``ModelSpec`` concern, not a schema concern.
    """
    variables = [
        Variable(vid, sub, extended_weight=EXTENDED_HEALTH_WEIGHTS.get(vid) if extended else None)
        for vid, sub in _BASELINE_VARIABLES
    ]
    if extended:
        variables.extend(
            Variable(
                vid,
                "sensitive_populations",
                extended_only=True,
                extended_weight=EXTENDED_HEALTH_WEIGHTS.get(vid),
            )
            for vid in _EXTENDED_VARIABLES
        )
    subcategories = (
        Subcategory("exposures", POLLUTION_BURDEN, weight=1.0),
        Subcategory("environmental_effects", POLLUTION_BURDEN, weight=0.5),
        Subcategory("sensitive_populations", POPULATION_CHARACTERISTICS, weight=1.0),
        Subcategory("socioeconomic_factors", POPULATION_CHARACTERISTICS, weight=1.0),
    )
    return IndicatorSchema(variables=tuple(variables), subcategories=subcategories)


# ---------------------------------------------------------------------------
# CSV parsing helpers


def _is_missing(cell: str | None) -> bool:
    return cell is None or cell.strip().lower() in NA_MARKERS


def _parse_float(cell: str, *, row: int, column: str, path: str) -> float:
    try:
        return float(cell)
    except ValueError as exc:
        raise IngestionError(
            f"{path}: row {row}, column {column!r}: cannot parse {cell!r} as a number"
        ) from exc


def _parse_int(cell: str, *, row: int, column: str, path: str) -> int:
    value = _parse_float(cell, row=row, column=column, path=path)
    if value != int(value):
        raise IngestionError(
            f"{path}: row {row}, column {column!r}: expected an integer, got {cell!r}"
        )
    return int(value)


def _read_rows(path: str) -> tuple[list[str], list[dict[str, str]]]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestionError(f"{path}: file is empty") from None
        header = [h.strip() for h in header]
        if len(set(header)) != len(header):
            dupes = sorted({h for h in header if header.count(h) > 1})
            raise IngestionError(f"{path}: duplicate header columns: {dupes}")
        rows = []
        for lineno, raw in enumerate(reader, start=2):
            if not raw or all(not c.strip() for c in raw):
                continue
            if len(raw) != len(header):
                raise IngestionError(
                    f"{path}: row {lineno} has {len(raw)} cells, expected {len(header)}"
                )
            row = dict(zip(header, raw))
            row["__line__"] = str(lineno)
            rows.append(row)
    return header, rows


def _require_columns(header: Sequence[str], required: Iterable[str], path: str) -> None:
    missing = [c for c in required if c not in header]
    if missing:
        raise IngestionError(f"{path}: missing required columns: {missing}")


# ---------------------------------------------------------------------------
# Ingestion


def ingest_tracts(path: str, schema: IndicatorSchema) -> list[TractRecord]:
    """Read a tract indicator table.

    Required columns: ``tract_id``, ``population``.  Optional: ``district_id``.
    Every remaining column must name a schema variable; unknown columns raise
    :class:`SchemaError`.  Schema variables absent from the file are treated as
    fully missing.  Missing cells become ``None``.

    Returns records in file order.  Duplicate tract ids raise
    :class:`IngestionError`.
    """
    header, rows = _read_rows(path)
    _require_columns(header, ("tract_id", "population"), path)
    known = set(schema.variable_ids)
    extras = [
        c
        for c in header
        if c not in known and c not in ("tract_id", "population", "district_id")
    ]
    if extras:
        raise SchemaError(
            f"{path}: columns not in schema: {sorted(extras)}; "
            "pass a schema that declares them or drop the columns"
        )
    value_columns = [c for c in header if c in known]
    absent = [v for v in schema.variable_ids if v not in header]
    if absent:
        LOGGER.info("%s: schema variables absent from file (fully missing): %s",
                    path, absent)

    records: list[TractRecord] = []
    seen: set[str] = set()
    for row in rows:
        line = int(row["__line__"])
        tract_id = row["tract_id"].strip()
        if not tract_id:
            raise IngestionError(f"{path}: row {line}: empty tract_id")
        if tract_id in seen:
            raise IngestionError(f"{path}: row {line}: duplicate tract_id {tract_id!r}")
        seen.add(tract_id)
        if _is_missing(row["population"]):
            raise IngestionError(f"{path}: row {line}: population is missing")
        population = _parse_int(row["population"], row=line, column="population", path=path)
        if population < 0:
            raise IngestionError(
                f"{path}: row {line}: population must be non-negative, got {population}"
            )
        values: dict[str, float | None] = {}
        for col in value_columns:
            cell = row[col]
            values[col] = (
                None if _is_missing(cell)
                else _parse_float(cell, row=line, column=col, path=path)
            )
        for vid in absent:
            values[vid] = None
        district = row.get("district_id", "").strip() or None
        records.append(
            TractRecord(
                tract_id=tract_id,
                population=population,
                values=values,
                district_id=district,
            )
        )
    return records


def ingest_demographics(path: str) -> dict[str, Demographics]:
    """Read a demographics table keyed by ``tract_id``.

    Recognized columns: ``poverty_share``, ``foreign_born_share``, ``party``,
    and any number of ``race_<label>`` share columns.  Shares must lie in
    [0, 1]; out-of-range values raise with row/column coordinates.
    """
    header, rows = _read_rows(path)
    _require_columns(header, ("tract_id",), path)
    race_columns = [c for c in header if c.startswith("race_")]
    out: dict[str, Demographics] = {}
    for row in rows:
        line = int(row["__line__"])
        tract_id = row["tract_id"].strip()
        if tract_id in out:
            raise IngestionError(f"{path}: row {line}: duplicate tract_id {tract_id!r}")

        def share(column: str) -> float | None:
            cell = row.get(column)
            if cell is None or _is_missing(cell):
                return None
            value = _parse_float(cell, row=line, column=column, path=path)
            if not 0.0 <= value <= 1.0:
                raise IngestionError(
                    f"{path}: row {line}, column {column!r}: share {value} "
                    "outside [0, 1]"
                )
            return value

        races = {}
        for col in race_columns:
            value = share(col)
            if value is not None:
                races[col[len("race_"):]] = value
        party_cell = row.get("party", "")
        out[tract_id] = Demographics(
            race_shares=races,
            poverty_share=share("poverty_share"),
            foreign_born_share=share("foreign_born_share"),
            party=None if _is_missing(party_cell) else party_cell.strip(),
        )
    return out


def join_demographics(
    records: Sequence[TractRecord], demographics: Mapping[str, Demographics]
) -> list[TractRecord]:
    """Attach demographics to records by tract id; unmatched tracts keep None."""
    return [
        replace(r, demographics=demographics.get(r.tract_id)) for r in records
    ]


def ingest_districts(path: str) -> dict[str, dict[str, dict[str, float]]]:
    """Read tract-to-district evidence rows.

    Columns: ``tract_id``, ``district_id``, and optional ``population``,
    ``blocks``, ``area``.  Returns ``{tract_id: {criterion: {district: value}}}``
    with criteria ``population``, ``blocks``, ``area``.
    """
    header, rows = _read_rows(path)
    _require_columns(header, ("tract_id", "district_id"), path)
    out: dict[str, dict[str, dict[str, float]]] = {}
    for row in rows:
        line = int(row["__line__"])
        tract_id = row["tract_id"].strip()
        district_id = row["district_id"].strip()
        if not district_id:
            raise IngestionError(f"{path}: row {line}: empty district_id")
        entry = out.setdefault(
            tract_id, {"population": {}, "blocks": {}, "area": {}}
        )
        any_evidence = False
        for criterion in ("population", "blocks", "area"):
            cell = row.get(criterion)
            if cell is not None and not _is_missing(cell):
                entry[criterion][district_id] = _parse_float(
                    cell, row=line, column=criterion, path=path
                )
                any_evidence = True
        if not any_evidence:
            LOGGER.warning(
                "%s: row %d: district %r for tract %r carries no evidence "
                "(population/blocks/area all missing); row ignored",
                path, line, district_id, tract_id,
            )
    return out


def attach_districts(
    records: Sequence[TractRecord],
    links: Mapping[str, Mapping[str, Mapping[str, float]]],
) -> list[TractRecord]:
    """Fill the per-district evidence maps on records from ingested links."""
    out = []
    for r in records:
        link = links.get(r.tract_id)
        if link is None:
            out.append(r)
            continue
        out.append(
            replace(
                r,
                population_in_district=dict(link.get("population", {})) or None,
                blocks_in_district={k: int(v) for k, v in link.get("blocks", {}).items()}
                or None,
                area_in_district=dict(link.get("area", {})) or None,
            )
        )
    return out


@dataclass(frozen=True)
class ProjectIngestReport:
    n_rows: int
    n_projects: int
    projects_per_year: Mapping[int, int]


def ingest_projects(path: str) -> tuple[list[FundingProject], ProjectIngestReport]:
    """Read a funding ledger.

    Required columns: ``project_id``, ``year``, ``total``.  Optional:
    ``earmark_dac``, ``earmark_low_income``, ``earmark_buffer`` (blank means
    0), ``tract_id``, ``district_id``, ``category_label``.  No repair happens
    here; defective rows (negative totals, over-committed earmarks) pass
    through for :func:`screenaudit.funding.repair_projects`.
    """
    header, rows = _read_rows(path)
    _require_columns(header, ("project_id", "year", "total"), path)
    projects: list[FundingProject] = []
    per_year: dict[int, int] = {}
    for row in rows:
        line = int(row["__line__"])
        project_id = row["project_id"].strip()
        if not project_id:
            raise IngestionError(f"{path}: row {line}: empty project_id")
        year = _parse_int(row["year"], row=line, column="year", path=path)
        if _is_missing(row["total"]):
            raise IngestionError(f"{path}: row {line}: total is missing")
        total = _parse_float(row["total"], row=line, column="total", path=path)

        def money(column: str) -> float:
            cell = row.get(column)
            if cell is None or _is_missing(cell):
                return 0.0
            return _parse_float(cell, row=line, column=column, path=path)

        tract = row.get("tract_id", "").strip() or None
        district = row.get("district_id", "").strip() or None
        label = row.get("category_label", "").strip() or None
        projects.append(
            FundingProject(
                project_id=project_id,
                year=year,
                total=total,
                earmark_dac=money("earmark_dac"),
                earmark_low_income=money("earmark_low_income"),
                earmark_buffer=money("earmark_buffer"),
                tract_id=tract,
                district_id=district,
                category_label=label,
            )
        )
        per_year[year] = per_year.get(year, 0) + 1
    report = ProjectIngestReport(
        n_rows=len(rows), n_projects=len(projects), projects_per_year=dict(sorted(per_year.items()))
    )
    return projects, report


# ---------------------------------------------------------------------------
# Writers (round-trip with the ingesters)


def _format_cell(value: float | int | str | None) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_tracts(records: Sequence[TractRecord], schema: IndicatorSchema, path: str) -> None:
    """Write records in the layout :func:`ingest_tracts` reads (column order:
    tract_id, population, district_id, then schema variables)."""
    columns = ["tract_id", "population", "district_id", *schema.variable_ids]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for r in records:
            row = [r.tract_id, str(r.population), r.district_id or ""]
            row += [_format_cell(r.values.get(v)) for v in schema.variable_ids]
            writer.writerow(row)


def write_demographics(
    demographics: Mapping[str, Demographics], path: str
) -> None:
    race_labels = sorted({k for d in demographics.values() for k in d.race_shares})
    columns = ["tract_id", "poverty_share", "foreign_born_share", "party"]
    columns += [f"race_{label}" for label in race_labels]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for tract_id in demographics:
            d = demographics[tract_id]
            row = [
                tract_id,
                _format_cell(d.poverty_share),
                _format_cell(d.foreign_born_share),
                d.party or "",
            ]
            row += [_format_cell(d.race_shares.get(label)) for label in race_labels]
            writer.writerow(row)


def write_projects(projects: Sequence[FundingProject], path: str) -> None:
    columns = [
        "project_id", "year", "total", "earmark_dac", "earmark_low_income",
        "earmark_buffer", "tract_id", "district_id", "category_label",
    ]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for p in projects:
            writer.writerow([
                p.project_id, str(p.year), _format_cell(p.total),
                _format_cell(p.earmark_dac), _format_cell(p.earmark_low_income),
                _format_cell(p.earmark_buffer), p.tract_id or "",
                p.district_id or "", p.category_label or "",
            ])


def write_districts(records: Sequence[TractRecord], path: str) -> None:
    """Write per-district evidence rows in the layout
    :func:`ingest_districts` reads (one row per tract/district pair)."""
    columns = ["tract_id", "district_id", "population", "blocks", "area"]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for r in records:
            districts: list[str] = []
            for source in (
                r.population_in_district,
                r.blocks_in_district,
                r.area_in_district,
            ):
                if source:
                    districts += [d for d in source if d not in districts]
            for district in districts:
                writer.writerow([
                    r.tract_id,
                    district,
                    _format_cell((r.population_in_district or {}).get(district)),
                    _format_cell((r.blocks_in_district or {}).get(district)),
                    _format_cell((r.area_in_district or {}).get(district)),
                ])


def missingness_summary(
    records: Sequence[TractRecord], schema: IndicatorSchema
) -> dict[str, int]:
    """Count missing cells per schema variable."""
    counts = {vid: 0 for vid in schema.variable_ids}
    for r in records:
        for vid in schema.variable_ids:
            if r.values.get(vid) is None:
                counts[vid] += 1
    return counts
