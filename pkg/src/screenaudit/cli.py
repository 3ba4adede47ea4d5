"""Command-line front end.

Subcommands: ``ingest``, ``score``, ``audit``, ``adversarial``, ``rdd``,
``match``, ``attribute``, ``synth``.  Each writes only inside its ``--out``
directory.  Option resolution, most specific first: command-line flag, then
environment variable ``SCREENAUDIT_<FLAG>`` (flag upper-cased, dashes to
underscores), then a ``key=value`` config file passed with ``--config``,
then the built-in default.  ``--seed`` pins every stochastic output;
``--jobs`` never changes results, only wall time.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from typing import Callable, Mapping, Sequence, TypeVar

import numpy as np
import pandas as pd

from . import adversarial as adv
from . import funding as fnd
from . import matching as mtc
from . import rdd as rddmod
from . import synth as syn
from .data import (
    Aggregation,
    Demographics,
    HealthSet,
    ModelSpec,
    Preprocessing,
    attach_districts,
    ces_schema,
    ingest_demographics,
    ingest_districts,
    ingest_projects,
    ingest_tracts,
    join_demographics,
    missingness_summary,
    schema_from_json,
    write_demographics,
    write_districts,
    write_projects,
    write_tracts,
)
from .engine import run_model, scores_from_csv, scores_to_csv
from .errors import ScreenAuditError
from .report import AuditConfig, run_audit_report
from .sensitivity import DEFAULT_SEED

LOGGER = logging.getLogger(__name__)
ENV_PREFIX = "SCREENAUDIT_"
T = TypeVar("T")


# ---------------------------------------------------------------------------
# Option resolution


def load_config_file(path: str) -> dict[str, str]:
    """Read a ``key=value`` per line config file ('#' starts a comment)."""
    out: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ScreenAuditError(
                    f"{path}: line {lineno}: expected key=value, got {raw.rstrip()!r}"
                )
            key, value = line.split("=", 1)
            out[key.strip().replace("-", "_")] = value.strip()
    return out


class Options:
    """Resolves option values: flag > environment > config file > default."""

    def __init__(self, args: argparse.Namespace):
        self._args = vars(args)
        config_path = self._args.get("config")
        self._config = load_config_file(config_path) if config_path else {}

    def get(
        self,
        name: str,
        default: T | None = None,
        cast: Callable[[str], T] | None = None,
        required: bool = False,
    ) -> T | None:
        key = name.replace("-", "_")
        raw: object = self._args.get(key)
        if raw is None:
            raw = os.environ.get(ENV_PREFIX + key.upper())
        if raw is None:
            raw = self._config.get(key)
        if raw is None:
            if required and default is None:
                raise ScreenAuditError(f"missing required option --{name}")
            return default
        if cast is not None and isinstance(raw, str):
            try:
                return cast(raw)
            except (TypeError, ValueError) as exc:
                raise ScreenAuditError(f"--{name}: {exc}") from exc
        return raw  # type: ignore[return-value]

    def flag(self, name: str, default: bool = False) -> bool:
        value = self.get(name)
        if value is None:
            return default
        if isinstance(value, bool):
            return value
        return str(value).strip().lower() in ("1", "true", "yes", "on")


def _csv_list(text: str) -> list[str]:
    return [item.strip() for item in text.split(",") if item.strip()]


def parse_spec(text: str | None) -> ModelSpec:
    """Parse a spec override string.

    Comma-separated ``key=value`` tokens; keys: ``preprocessing``,
    ``aggregation``, ``health_set``, ``threshold``, and ``weight.<variable>``
    for per-variable weight overrides.  Example:
    ``preprocessing=zscore,aggregation=additive,weight.ozone=0.5``.
    """
    if not text:
        return ModelSpec()
    kwargs: dict[str, object] = {}
    weights: dict[str, float] = {}
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        if "=" not in token:
            raise ScreenAuditError(f"--spec: expected key=value, got {token!r}")
        key, value = (part.strip() for part in token.split("=", 1))
        try:
            if key == "preprocessing":
                kwargs["preprocessing"] = Preprocessing(value)
            elif key == "aggregation":
                kwargs["aggregation"] = Aggregation(value)
            elif key == "health_set":
                kwargs["health_set"] = HealthSet(value)
            elif key in ("threshold", "threshold_quantile"):
                kwargs["threshold_quantile"] = float(value)
            elif key.startswith("weight."):
                weights[key[len("weight."):]] = float(value)
            else:
                raise ScreenAuditError(f"--spec: unknown key {key!r}")
        except ValueError as exc:
            raise ScreenAuditError(f"--spec: bad value for {key!r}: {exc}") from exc
    if weights:
        kwargs["weights"] = weights
    return ModelSpec(**kwargs)  # type: ignore[arg-type]


def _out_dir(opt: Options) -> str:
    out = str(opt.get("out", "."))
    os.makedirs(out, exist_ok=True)
    return out


def _load_schema(opt: Options, extended: bool = True):
    path = opt.get("schema")
    if path:
        return schema_from_json(str(path))
    return ces_schema(extended=extended)


def _write_json(path: str, payload: Mapping) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _demographic_covariates(
    demographics: Mapping[str, Demographics],
) -> dict[str, dict[str, float | None]]:
    """Flatten demographics into named covariate rows."""
    out: dict[str, dict[str, float | None]] = {}
    for tract_id, demo in demographics.items():
        row: dict[str, float | None] = {
            "poverty_share": demo.poverty_share,
            "foreign_born_share": demo.foreign_born_share,
        }
        for label, share in demo.race_shares.items():
            row[f"race_{label}"] = share
        out[tract_id] = row
    return out


def _load_priority(
    opt: Options, designated: frozenset[str]
) -> fnd.PrioritySets:
    """Priority sets from ``--priority`` JSON, else DAC = designated tracts."""
    path = opt.get("priority")
    if not path:
        return fnd.PrioritySets(dac=designated)
    with open(str(path), "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    return fnd.PrioritySets(
        dac=frozenset(payload.get("dac", [])),
        low_income=frozenset(payload.get("low_income", [])),
        buffer=frozenset(payload.get("buffer", [])),
    )


# ---------------------------------------------------------------------------
# Subcommands


def _cmd_ingest(opt: Options) -> int:
    out = _out_dir(opt)
    schema = _load_schema(opt)
    records = ingest_tracts(str(opt.get("tracts", required=True)), schema)
    summary: dict[str, object] = {
        "n_tracts": len(records),
        "missing_cells": missingness_summary(records, schema),
    }
    districts_path = opt.get("districts")
    if districts_path:
        records = attach_districts(records, ingest_districts(str(districts_path)))
        write_districts(records, os.path.join(out, "districts.csv"))
    demographics_path = opt.get("demographics")
    if demographics_path:
        demographics = ingest_demographics(str(demographics_path))
        records = join_demographics(records, demographics)
        write_demographics(demographics, os.path.join(out, "demographics.csv"))
        summary["n_demographic_rows"] = len(demographics)
    projects_path = opt.get("projects")
    if projects_path:
        projects, report = ingest_projects(str(projects_path))
        write_projects(projects, os.path.join(out, "projects.csv"))
        summary["n_projects"] = report.n_projects
        summary["projects_per_year"] = dict(report.projects_per_year)
    write_tracts(records, schema, os.path.join(out, "tracts.csv"))
    _write_json(os.path.join(out, "ingest.json"), summary)
    print(json.dumps(summary, sort_keys=True))
    return 0


def _cmd_score(opt: Options) -> int:
    out = _out_dir(opt)
    spec = parse_spec(opt.get("spec"))
    schema = _load_schema(opt, extended=spec.health_set == HealthSet.EXTENDED)
    records = ingest_tracts(str(opt.get("tracts", required=True)), schema)
    results = run_model(records, schema, spec)
    scores_to_csv(results, os.path.join(out, "scores.csv"))
    summary = {
        "spec": spec.label(),
        "threshold_quantile": spec.threshold_quantile,
        "n_tracts": len(results),
        "n_scored": sum(r.percentile is not None for r in results),
        "n_designated": sum(r.designated for r in results),
    }
    _write_json(os.path.join(out, "score.json"), summary)
    print(json.dumps(summary, sort_keys=True))
    return 0


def _cmd_audit(opt: Options) -> int:
    out = _out_dir(opt)
    config = AuditConfig(
        tracts=str(opt.get("tracts", required=True)),
        out_dir=out,
        demographics=opt.get("demographics"),
        schema=opt.get("schema"),
        spec=parse_spec(opt.get("spec")),
        seed=int(opt.get("seed", DEFAULT_SEED, cast=int)),
        jobs=opt.get("jobs", cast=int),
        formats=tuple(opt.get("format", ["json", "csv"], cast=_csv_list)),
    )
    status = run_audit_report(config)
    if status == 0:
        print(json.dumps({"out_dir": out, "status": "ok"}, sort_keys=True))
    return status


def _trace_to_csv(trace, path: str) -> None:
    rows = [
        {
            "preprocessing": e.preprocessing,
            "aggregation": e.aggregation,
            "start_index": e.start_index,
            "iteration": e.iteration,
            "step": e.step,
            "objective": e.objective,
            "weights": json.dumps(list(e.weights)),
        }
        for e in trace
    ]
    pd.DataFrame(
        rows,
        columns=[
            "preprocessing", "aggregation", "start_index",
            "iteration", "step", "objective", "weights",
        ],
    ).to_csv(path, index=False)


def _search_payload(result: adv.SearchResult) -> dict[str, object]:
    return {
        "objective": result.best_objective,
        "n_evaluations": result.n_evaluations,
        "spec": result.best_spec.label(),
        "weights": dict(result.best_spec.weights or {}),
    }


def _cmd_adversarial(opt: Options) -> int:
    out = _out_dir(opt)
    schema = _load_schema(opt)
    records = ingest_tracts(str(opt.get("tracts", required=True)), schema)
    demographics = ingest_demographics(str(opt.get("demographics", required=True)))
    kind = str(opt.get("kind", "party"))
    label = str(opt.get("label", required=True))
    descriptor = adv.DemographicDescriptor(
        kind=kind,
        label=label,
        race_mode=adv.RaceMode(str(opt.get("race-mode", "population_share_sum"))),
    )
    problem_kwargs = dict(
        demographic=descriptor,
        health_set=HealthSet(str(opt.get("health-set", "baseline"))),
        threshold_quantile=float(opt.get("threshold", 0.75, cast=float)),
        multistart=str(opt.get("multistart", "axes")),
        max_restarts=int(opt.get("max-restarts", 3, cast=int)),
    )
    jobs = opt.get("jobs", cast=int)
    direction = str(opt.get("direction", "range"))
    if direction == "range":
        if kind != "party":
            raise ScreenAuditError("--direction range requires --kind party")
        result = adv.manipulation_range(
            records, schema, demographics, label,
            problem=adv.AdversarialProblem(**problem_kwargs),
            jobs=jobs,
        )
        payload = {
            "baseline_objective": result.baseline_objective,
            "increase_pct": result.increase_pct,
            "decrease_pct": result.decrease_pct,
            "maximize": _search_payload(result.maximize),
            "minimize": _search_payload(result.minimize),
        }
        _trace_to_csv(result.maximize.trace, os.path.join(out, "trace_maximize.csv"))
        _trace_to_csv(result.minimize.trace, os.path.join(out, "trace_minimize.csv"))
    else:
        problem = adv.AdversarialProblem(
            direction=adv.Direction(direction), **problem_kwargs
        )
        search = adv.hooke_jeeves_search(
            problem, records, schema, demographics, jobs=jobs
        )
        payload = {"direction": direction, **_search_payload(search)}
        _trace_to_csv(search.trace, os.path.join(out, "trace.csv"))
    _write_json(os.path.join(out, "adversarial.json"), payload)
    print(json.dumps(payload, sort_keys=True))
    return 0


def _prepare_funding(
    opt: Options, records, results
) -> tuple[dict[str, float], list, list, list]:
    """Repair the ledger and attribute it to tracts; shared by rdd/attribute."""
    projects, _report = ingest_projects(str(opt.get("projects", required=True)))
    repaired, repair_log = fnd.repair_projects(projects)
    designated = frozenset(r.tract_id for r in results if r.designated)
    priority = _load_priority(opt, designated)
    totals, skipped = fnd.tract_funding_totals(repaired, records, priority)
    funding = {t.tract_id: t.total for t in totals}
    return funding, totals, repair_log, skipped


def _cmd_rdd(opt: Options) -> int:
    out = _out_dir(opt)
    spec = parse_spec(opt.get("spec"))
    schema = _load_schema(opt, extended=spec.health_set == HealthSet.EXTENDED)
    records = ingest_tracts(str(opt.get("tracts", required=True)), schema)
    results = run_model(records, schema, spec)
    funding, _totals, repair_log, skipped = _prepare_funding(opt, records, results)

    covariate_choice = str(opt.get("covariates", "none"))
    covariate_rows = None
    if covariate_choice == "none":
        estimate_covariates: str | list[str] | None = None
    else:
        demographics_path = opt.get("demographics")
        if not demographics_path:
            raise ScreenAuditError("--covariates needs --demographics")
        covariate_rows = _demographic_covariates(
            ingest_demographics(str(demographics_path))
        )
        estimate_covariates = (
            "all" if covariate_choice == "all" else _csv_list(covariate_choice)
        )
    cutoff = float(opt.get("cutoff", 100.0 * spec.threshold_quantile, cast=float))
    data = rddmod.build_rdd_dataset(results, funding, covariate_rows, cutoff=cutoff)

    bandwidth_text = str(opt.get("bandwidth", "ik"))
    bandwidth: float | str = (
        "ik" if bandwidth_text == "ik" else float(bandwidth_text)
    )
    kernel = str(opt.get("kernel", "uniform"))
    form = rddmod.RddForm(str(opt.get("form", "local_linear")))
    estimate = rddmod.rdd_estimate(
        data, bandwidth=bandwidth, form=form,
        covariates=estimate_covariates, kernel=kernel,
    )
    cells = rddmod.robustness_grid(
        {"main": data},
        covariate_sets=(
            {"all": "all", "none": None} if covariate_rows else {"none": None}
        ),
        kernel=kernel,
    )
    pd.DataFrame(rddmod.grid_rows(cells)).to_csv(
        os.path.join(out, "rdd_grid.csv"), index=False
    )

    treated_funding = [
        funding[t]
        for t, flag in zip(data.tract_ids, data.treated)
        if flag and funding.get(t, 0.0) > 0.0
    ]
    untreated_funding = [
        funding[t]
        for t, flag in zip(data.tract_ids, data.treated)
        if not flag and funding.get(t, 0.0) > 0.0
    ]
    realized = (
        rddmod.aggregate_dollar_effect(estimate, treated_funding, mode="realized")
        if treated_funding
        else None
    )
    counterfactual = (
        rddmod.aggregate_dollar_effect(
            estimate, untreated_funding, mode="counterfactual"
        )
        if untreated_funding
        else None
    )

    def dollars(effect):
        if effect is None:
            return None
        return {
            "dollars": effect.dollars,
            "ci_low": effect.ci_low,
            "ci_high": effect.ci_high,
            "n_tracts": effect.n_tracts,
        }

    payload = {
        "n": data.n,
        "n_excluded_nonpositive": data.n_excluded_nonpositive,
        "cutoff": cutoff,
        "kernel": kernel,
        "form": form.value,
        "bandwidth": estimate.bandwidth,
        "tau": estimate.tau,
        "se": estimate.se,
        "percent": estimate.percent,
        "percent_ci": list(estimate.percent_ci),
        "n_used": estimate.n_used,
        "n_left": estimate.n_left,
        "n_right": estimate.n_right,
        "covariates_used": list(estimate.covariates_used),
        "n_repair_actions": len(repair_log),
        "n_projects_skipped": len(skipped),
        "dollars_realized_treated": dollars(realized),
        "dollars_counterfactual_untreated": dollars(counterfactual),
    }
    _write_json(os.path.join(out, "rdd.json"), payload)
    print(json.dumps(payload, sort_keys=True))
    return 0


def _cmd_match(opt: Options) -> int:
    out = _out_dir(opt)
    seed = int(opt.get("seed", DEFAULT_SEED, cast=int))
    spec = parse_spec(opt.get("spec"))
    schema = _load_schema(opt, extended=spec.health_set == HealthSet.EXTENDED)
    records = ingest_tracts(str(opt.get("tracts", required=True)), schema)
    results = run_model(records, schema, spec)
    funding, _totals, _repair_log, _skipped = _prepare_funding(opt, records, results)

    covariates = opt.get("covariates", cast=_csv_list)
    if not covariates:
        covariates = list(schema.variable_ids)
    by_tract = {r.tract_id: r for r in results}
    rows = []
    for record in records:
        result = by_tract[record.tract_id]
        amount = funding.get(record.tract_id, 0.0)
        if result.percentile is None or not amount > 0.0:
            continue
        row: dict[str, object] = {
            "tract_id": record.tract_id,
            "treatment": int(result.designated),
            "outcome": math.log(amount),
        }
        for name in covariates:
            value = record.values.get(name)
            row[name] = np.nan if value is None else float(value)
        rows.append(row)
    if not rows:
        raise ScreenAuditError("no tracts with positive funding to match")
    frame = pd.DataFrame(rows)

    m = int(opt.get("m", 10, cast=int))
    imputations = mtc.pmm_impute(frame, covariates, m=m, seed=seed)
    calipers = [
        float(c) for c in opt.get("calipers", ["0.1", "0.2", "0.3"], cast=_csv_list)
    ]
    grid = mtc.matching_grid(
        imputations, "treatment", "outcome", covariates, calipers=calipers, seed=seed
    )
    grid.to_csv(os.path.join(out, "match.csv"), index=False)
    payload = {
        "m": m,
        "seed": seed,
        "n_rows": len(frame),
        "n_treated": int(frame["treatment"].sum()),
        "covariates": list(covariates),
        "grid": grid.to_dict(orient="records"),
    }
    _write_json(os.path.join(out, "match.json"), payload)
    print(json.dumps({k: payload[k] for k in ("m", "n_rows", "n_treated")},
                     sort_keys=True))
    return 0


def _cmd_attribute(opt: Options) -> int:
    out = _out_dir(opt)
    spec = parse_spec(opt.get("spec"))
    schema = _load_schema(opt, extended=spec.health_set == HealthSet.EXTENDED)
    records = ingest_tracts(str(opt.get("tracts", required=True)), schema)
    scores_path = opt.get("scores")
    if scores_path:
        results = scores_from_csv(str(scores_path))
    else:
        results = run_model(records, schema, spec)
    projects, report = ingest_projects(str(opt.get("projects", required=True)))
    repaired, repair_log = fnd.repair_projects(projects)
    fnd.write_repair_log(repair_log, os.path.join(out, "repairs.jsonl"))
    designated = frozenset(r.tract_id for r in results if r.designated)
    priority = _load_priority(opt, designated)
    totals, skipped = fnd.tract_funding_totals(repaired, records, priority)
    fnd.funding_frame(totals).to_csv(os.path.join(out, "funding.csv"), index=False)
    percentiles = {
        r.tract_id: r.percentile for r in results if r.percentile is not None
    }
    binwidth = float(opt.get("binwidth", 10.0, cast=float))
    profile = fnd.binned_funding_profile(totals, percentiles, binwidth)
    profile.to_csv(os.path.join(out, "profile.csv"), index=False)
    attributed = sum(t.total for t in totals)
    payload = {
        "n_projects": report.n_projects,
        "n_repair_actions": len(repair_log),
        "n_projects_skipped": len(skipped),
        "n_tracts_funded": len(totals),
        "total_attributed": attributed,
        "binwidth": binwidth,
    }
    _write_json(os.path.join(out, "attribute.json"), payload)
    print(json.dumps(payload, sort_keys=True))
    return 0


def _cmd_synth(opt: Options) -> int:
    out = _out_dir(opt)
    seed = int(opt.get("seed", DEFAULT_SEED, cast=int))
    config = syn.SynthConfig(
        n_tracts=int(opt.get("n-tracts", 500, cast=int)),
        n_variables=int(opt.get("n-variables", 8, cast=int)),
        correlation=float(opt.get("correlation", 0.3, cast=float)),
        tau_star=float(opt.get("tau-star", 0.7, cast=float)),
        missing_rate=float(opt.get("missing-rate", 0.0, cast=float)),
        seed=seed,
        extended_health=opt.flag("extended"),
    )
    schema = syn.synthetic_schema(config)
    records = syn.generate_tracts(config)
    records = syn.mask_missing(records, config.missing_rate, seed + 1)
    schema.to_json(os.path.join(out, "schema.json"))
    write_tracts(records, schema, os.path.join(out, "tracts.csv"))
    write_demographics(
        syn.demographics_map(records), os.path.join(out, "demographics.csv")
    )
    write_districts(records, os.path.join(out, "districts.csv"))

    results = run_model(records, schema, ModelSpec())
    percentiles = {
        r.tract_id: r.percentile for r in results if r.percentile is not None
    }
    designated = {r.tract_id: r.designated for r in results}
    noise_sd = float(opt.get("noise-sd", 0.5, cast=float))
    log_funding = syn.generate_funding_rdd(
        records, percentiles, config.tau_star, noise_sd, seed + 2
    )
    projects = syn.generate_projects(
        records, log_funding, designated, seed + 3,
        include_defects=opt.flag("defects"),
    )
    write_projects(projects, os.path.join(out, "projects.csv"))
    payload = {
        "n_tracts": config.n_tracts,
        "n_variables": config.n_variables,
        "correlation": config.correlation,
        "tau_star": config.tau_star,
        "missing_rate": config.missing_rate,
        "noise_sd": noise_sd,
        "seed": seed,
        "n_projects": len(projects),
        "n_designated": sum(designated.values()),
    }
    _write_json(os.path.join(out, "synth.json"), payload)
    print(json.dumps(payload, sort_keys=True))
    return 0


# ---------------------------------------------------------------------------
# Parser


_COMMANDS: dict[str, tuple[Callable[[Options], int], str, list[str]]] = {
    "ingest": (
        _cmd_ingest,
        "Validate input files and write normalized copies plus a summary.",
        ["tracts", "demographics", "projects", "districts", "schema", "out"],
    ),
    "score": (
        _cmd_score,
        "Score tracts under one model specification.",
        ["tracts", "schema", "spec", "out"],
    ),
    "audit": (
        _cmd_audit,
        "Full sensitivity audit: churn, ranges, band, union, diagnostics.",
        ["tracts", "demographics", "schema", "spec", "seed", "jobs", "out", "format"],
    ),
    "adversarial": (
        _cmd_adversarial,
        "Pattern-search the weight box for demographic manipulation range.",
        [
            "tracts", "demographics", "schema", "out", "jobs", "seed",
            "kind", "label", "race-mode", "direction", "threshold",
            "health-set", "multistart", "max-restarts",
        ],
    ),
    "rdd": (
        _cmd_rdd,
        "Discontinuity estimate of designation's funding effect.",
        [
            "tracts", "projects", "demographics", "schema", "spec", "out",
            "kernel", "bandwidth", "form", "covariates", "cutoff", "priority",
        ],
    ),
    "match": (
        _cmd_match,
        "Propensity matching with multiple imputation, pooled across calipers.",
        [
            "tracts", "projects", "schema", "spec", "seed", "out",
            "covariates", "m", "calipers", "priority",
        ],
    ),
    "attribute": (
        _cmd_attribute,
        "Repair the ledger and attribute funds to tracts.",
        [
            "tracts", "projects", "schema", "spec", "scores", "priority",
            "binwidth", "out",
        ],
    ),
    "synth": (
        _cmd_synth,
        "Generate a seeded synthetic input set with known ground truth.",
        [
            "n-tracts", "n-variables", "correlation", "tau-star", "noise-sd",
            "missing-rate", "seed", "extended", "defects", "out",
        ],
    ),
}

_FLAG_HELP = {
    "tracts": "tract CSV (tract_id, population, district_id, variables)",
    "demographics": "demographics CSV (tract_id, shares, party)",
    "projects": "funding ledger CSV",
    "districts": "tract-to-district evidence CSV",
    "schema": "indicator schema JSON (default: built-in 26-variable schema)",
    "spec": "model spec overrides, e.g. preprocessing=zscore,threshold=0.8",
    "seed": "random seed (pins all stochastic output)",
    "jobs": "worker threads; never changes results",
    "out": "output directory (default: current directory)",
    "format": "report formats, comma-separated subset of json,csv,svg",
    "kind": "objective kind: party or race",
    "label": "objective label (party name or race share column)",
    "race-mode": "race totaling: population_share_sum or "
                 "tract_count_by_majority_district",
    "direction": "maximize, minimize, or range (both directions)",
    "threshold": "designation threshold quantile",
    "health-set": "baseline or extended",
    "multistart": "search breadth: none, corners, or axes",
    "max-restarts": "pattern-search restart polish budget",
    "kernel": "estimation kernel: uniform or triangular",
    "bandwidth": "'ik' or a number (percentile units)",
    "form": "local_linear or quadratic",
    "covariates": "comma-separated covariates, or all/none",
    "cutoff": "running-variable cutoff (default 100 * threshold quantile)",
    "priority": "priority-sets JSON {dac:[],low_income:[],buffer:[]}",
    "scores": "precomputed scores CSV (skip re-scoring)",
    "binwidth": "percentile bin width for the funding profile",
    "m": "number of imputations",
    "calipers": "comma-separated caliper SD multiples",
    "n-tracts": "synthetic tract count",
    "n-variables": "synthetic variable count (>= 4)",
    "correlation": "latent equicorrelation in [0, 1)",
    "tau-star": "planted log-scale funding jump",
    "noise-sd": "funding noise standard deviation",
    "missing-rate": "MAR cell missingness rate in [0, 1)",
    "extended": "also emit an extended health variable (true/false)",
    "defects": "plant repairable ledger defects (true/false)",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="screenaudit",
        description="Composite-indicator designation audit toolkit.",
    )
    parser.add_argument(
        "--log-level", default="WARNING",
        help="logging level (DEBUG, INFO, WARNING, ERROR)",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text, flags) in _COMMANDS.items():
        sub = subparsers.add_parser(name, help=help_text, description=help_text)
        sub.add_argument(
            "--config", default=None,
            help="key=value config file supplying defaults for any flag",
        )
        for flag in flags:
            sub.add_argument(
                f"--{flag}", dest=flag.replace("-", "_"), default=None,
                help=_FLAG_HELP.get(flag, ""),
            )
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
    )
    handler = _COMMANDS[args.command][0]
    try:
        return handler(Options(args))
    except (ScreenAuditError, OSError, json.JSONDecodeError) as exc:
        print(
            json.dumps(
                {"error": type(exc).__name__, "message": str(exc)}, sort_keys=True
            ),
            file=sys.stderr,
        )
        return 1


if __name__ == "__main__":
    sys.exit(main())
