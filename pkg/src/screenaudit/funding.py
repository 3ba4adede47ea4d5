"""Funding-ledger repair, district assignment, and tract-level attribution.

Projects carry a total plus earmarks for three tract classes (designated
communities, low-income, buffer).  Defective rows are repaired by trusting
the total; district-routed money is attributed to tracts in three stages
(earmarks to their priority tracts, a capped remainder to non-priority
tracts, residue to everyone) with exact conservation.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Sequence

import numpy as np
import pandas as pd

from .data import FundingProject, TractRecord
from .errors import LedgerError

LOGGER = logging.getLogger(__name__)

EARMARK_KEYS = ("dac", "low_income", "buffer")


@dataclass(frozen=True)
class PrioritySets:
    """Tract classes that earmarked funds target."""

    dac: frozenset[str] = frozenset()
    low_income: frozenset[str] = frozenset()
    buffer: frozenset[str] = frozenset()

    def of(self, key: str) -> frozenset[str]:
        return getattr(self, key)


@dataclass(frozen=True)
class RepairAction:
    project_id: str
    defect: str
    action: str


@dataclass(frozen=True)
class TractFunding:
    tract_id: str
    total: float
    by_earmark: Mapping[str, float]
    by_category: Mapping[str, float]

    def __post_init__(self) -> None:
        object.__setattr__(self, "by_earmark", dict(self.by_earmark))
        object.__setattr__(self, "by_category", dict(self.by_category))


def repair_projects(
    projects: Sequence[FundingProject],
) -> tuple[list[FundingProject], list[RepairAction]]:
    """Remove or repair defective ledger rows, logging every action.

    Rows with negative totals are removed.  Negative earmark cells are
    clipped to zero.  Rows whose earmark sum exceeds the total are repaired
    by trusting the total: earmarks rescale proportionally (which sets a
    single dominant earmark equal to the total and splits it evenly across
    equal earmarks).  Consistent rows pass through unchanged.
    """
    repaired: list[FundingProject] = []
    log: list[RepairAction] = []
    for project in projects:
        if project.total < 0:
            log.append(
                RepairAction(
                    project_id=project.project_id,
                    defect=f"negative total {project.total}",
                    action="removed",
                )
            )
            continue
        current = project
        negatives = {
            key: getattr(current, f"earmark_{key}")
            for key in EARMARK_KEYS
            if getattr(current, f"earmark_{key}") < 0
        }
        if negatives:
            current = replace(
                current,
                **{
                    f"earmark_{key}": max(0.0, getattr(current, f"earmark_{key}"))
                    for key in EARMARK_KEYS
                },
            )
            log.append(
                RepairAction(
                    project_id=current.project_id,
                    defect=f"negative earmarks {negatives}",
                    action="clipped to 0",
                )
            )
        earmark_sum = current.earmark_sum
        if earmark_sum > current.total and earmark_sum > 0:
            scale = current.total / earmark_sum
            current = replace(
                current,
                earmark_dac=current.earmark_dac * scale,
                earmark_low_income=current.earmark_low_income * scale,
                earmark_buffer=current.earmark_buffer * scale,
            )
            log.append(
                RepairAction(
                    project_id=current.project_id,
                    defect=(
                        f"earmark sum {earmark_sum} exceeds total {current.total}"
                    ),
                    action=f"earmarks rescaled by {scale:.6g}",
                )
            )
        repaired.append(current)
    return repaired, log


def write_repair_log(log: Sequence[RepairAction], path: str) -> None:
    """Line-delimited JSON, one repair action per line."""
    with open(path, "w", encoding="utf-8") as fh:
        for entry in log:
            fh.write(
                json.dumps(
                    {
                        "project_id": entry.project_id,
                        "defect": entry.defect,
                        "action": entry.action,
                    },
                    sort_keys=True,
                )
            )
            fh.write("\n")


# ---------------------------------------------------------------------------
# District assignment


def assign_tract_district(tract: TractRecord) -> str:
    """Resolve a tract's district using the largest-share fallback chain.

    An explicit ``district_id`` wins.  Otherwise candidates come from the
    per-district evidence maps, compared by population, then block count,
    then area; a criterion whose map is missing (or that leaves a tie) falls
    through to the next, and a final tie breaks to the lexicographically
    smallest district id.
    """
    if tract.district_id is not None:
        return tract.district_id
    criteria = (
        tract.population_in_district,
        tract.blocks_in_district,
        tract.area_in_district,
    )
    candidates: set[str] = set()
    for criterion in criteria:
        if criterion:
            candidates.update(criterion)
    if not candidates:
        raise LedgerError(f"tract {tract.tract_id!r} has no candidate districts")
    survivors = sorted(candidates)
    for criterion in criteria:
        if not criterion:
            continue
        scores = {d: float(criterion.get(d, 0)) for d in survivors}
        best = max(scores.values())
        leaders = [d for d in survivors if scores[d] == best]
        if len(leaders) == 1:
            return leaders[0]
        survivors = leaders
    return survivors[0]


# ---------------------------------------------------------------------------
# Attribution


def attribute_district_funds(
    project: FundingProject,
    tracts_in_district: Sequence[str],
    priority: PrioritySets,
) -> dict[str, float]:
    """Split a district-routed project's total across the district's tracts.

    Stage 1: each earmark divides equally among its priority tracts present
    in the district (an earmark with no eligible tracts falls through to the
    later stages).  Stage 2: remaining funds go equally to non-priority
    tracts, capped at the stage-1 total.  Stage 3: any residue divides
    equally among all tracts.  The attributed amounts sum to the project
    total exactly (to float precision).
    """
    tract_ids = list(tracts_in_district)
    if len(set(tract_ids)) != len(tract_ids):
        raise LedgerError(
            f"project {project.project_id!r}: duplicate tracts in district list"
        )
    if not tract_ids:
        raise LedgerError(
            f"project {project.project_id!r}: district has zero tracts"
        )
    if project.total < 0:
        raise LedgerError(
            f"project {project.project_id!r}: negative total (repair first)"
        )
    out = {t: 0.0 for t in tract_ids}
    stage1_total = 0.0
    priority_union: set[str] = set()
    for key in EARMARK_KEYS:
        targets = [t for t in tract_ids if t in priority.of(key)]
        priority_union.update(targets)
        amount = getattr(project, f"earmark_{key}")
        if amount <= 0:
            continue
        if not targets:
            continue  # falls through to the remainder stages
        share = amount / len(targets)
        for t in targets:
            out[t] += share
        stage1_total += amount
    remaining = project.total - stage1_total
    non_priority = [t for t in tract_ids if t not in priority_union]
    if remaining > 0 and non_priority and stage1_total > 0:
        stage2_total = min(remaining, stage1_total)
        share = stage2_total / len(non_priority)
        for t in non_priority:
            out[t] += share
        remaining -= stage2_total
    if remaining > 0:
        share = remaining / len(tract_ids)
        for t in tract_ids:
            out[t] += share
    return out


def district_membership(records: Sequence[TractRecord]) -> dict[str, list[str]]:
    """district_id -> tract ids, resolving multi-district tracts by assignment."""
    out: dict[str, list[str]] = {}
    for record in records:
        try:
            district = assign_tract_district(record)
        except LedgerError:
            continue  # tract has no district evidence at all
        out.setdefault(district, []).append(record.tract_id)
    return out


def tract_funding_totals(
    projects: Sequence[FundingProject],
    records: Sequence[TractRecord],
    priority: PrioritySets,
) -> tuple[list[TractFunding], list[RepairAction]]:
    """Per-tract funding totals from a repaired ledger.

    Tract-routed projects accrue directly; district-routed projects go
    through :func:`attribute_district_funds` (attributed dollars inherit the
    project's earmark proportions).  Projects with neither route, or whose
    district matches no known tract, are logged and excluded.  Earmark
    buckets: dac, low_income, buffer, other; category buckets follow each
    project's ``category_label`` (unlabeled dollars fall under
    ``"unlabeled"``).
    """
    membership = district_membership(records)
    totals: dict[str, float] = {}
    by_earmark: dict[str, dict[str, float]] = {}
    by_category: dict[str, dict[str, float]] = {}
    skipped: list[RepairAction] = []

    def accrue(tract_id: str, amount: float, project: FundingProject) -> None:
        if amount == 0.0:
            return
        totals[tract_id] = totals.get(tract_id, 0.0) + amount
        buckets = by_earmark.setdefault(
            tract_id, {key: 0.0 for key in (*EARMARK_KEYS, "other")}
        )
        if project.total > 0:
            for key in EARMARK_KEYS:
                buckets[key] += amount * getattr(project, f"earmark_{key}") / project.total
            buckets["other"] += (
                amount * max(0.0, project.total - project.earmark_sum) / project.total
            )
        else:
            buckets["other"] += amount
        label = project.category_label or "unlabeled"
        categories = by_category.setdefault(tract_id, {})
        categories[label] = categories.get(label, 0.0) + amount

    for project in projects:
        if project.tract_id is not None:
            accrue(project.tract_id, project.total, project)
        elif project.district_id is not None:
            tracts = membership.get(project.district_id, [])
            if not tracts:
                skipped.append(
                    RepairAction(
                        project_id=project.project_id,
                        defect=f"district {project.district_id!r} has no known tracts",
                        action="excluded",
                    )
                )
                continue
            for tract_id, amount in attribute_district_funds(
                project, tracts, priority
            ).items():
                accrue(tract_id, amount, project)
        else:
            skipped.append(
                RepairAction(
                    project_id=project.project_id,
                    defect="neither tract nor district",
                    action="excluded",
                )
            )
    if skipped:
        LOGGER.warning("excluded %d projects from attribution", len(skipped))
    out = [
        TractFunding(
            tract_id=tract_id,
            total=totals[tract_id],
            by_earmark=by_earmark.get(tract_id, {}),
            by_category=by_category.get(tract_id, {}),
        )
        for tract_id in sorted(totals)
    ]
    return out, skipped


def funding_frame(totals: Sequence[TractFunding]) -> pd.DataFrame:
    """Flatten TractFunding rows for CSV export."""
    earmark_cols = [*EARMARK_KEYS, "other"]
    categories = sorted({label for t in totals for label in t.by_category})
    rows = []
    for t in totals:
        row: dict[str, object] = {"tract_id": t.tract_id, "total": t.total}
        for key in earmark_cols:
            row[f"earmark_{key}"] = t.by_earmark.get(key, 0.0)
        for label in categories:
            row[f"category_{label}"] = t.by_category.get(label, 0.0)
        rows.append(row)
    return pd.DataFrame(rows)


def binned_funding_profile(
    totals: Mapping[str, float] | Sequence[TractFunding],
    percentiles: Mapping[str, float],
    binwidth: float,
) -> pd.DataFrame:
    """Mean log funding per percentile bin (bins without tracts are absent).

    Tracts need a percentile and positive funding to contribute (the log is
    undefined otherwise).  Percentile 100 closes into the last bin.
    """
    if not binwidth > 0:
        raise LedgerError(f"binwidth must be positive, got {binwidth}")
    if not isinstance(totals, Mapping):
        totals = {t.tract_id: t.total for t in totals}
    n_bins = max(1, math.ceil(100.0 / binwidth - 1e-9))
    records = []
    for tract_id, amount in totals.items():
        p = percentiles.get(tract_id)
        if p is None or not amount > 0:
            continue
        index = min(int(p / binwidth), n_bins - 1)
        records.append((index, math.log(amount)))
    if not records:
        return pd.DataFrame(columns=["bin_low", "bin_high", "n", "mean_log_funding"])
    frame = pd.DataFrame(records, columns=["bin", "log_funding"])
    grouped = frame.groupby("bin")["log_funding"].agg(["count", "mean"]).reset_index()
    return pd.DataFrame(
        {
            "bin_low": grouped["bin"] * binwidth,
            "bin_high": np.minimum((grouped["bin"] + 1) * binwidth, 100.0),
            "n": grouped["count"].astype(int),
            "mean_log_funding": grouped["mean"],
        }
    )
