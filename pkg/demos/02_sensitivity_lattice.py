"""Quantify how sensitive designation is to subjective model choices.

Scores one synthetic population under all 8 combinations of pre-processing
(percentile rank / z-score), aggregation (multiplicative / additive), and
the health-variable set (baseline / extended), then summarizes:

  - designation churn of every alternative against the base model,
  - the share of tracts that flip under at least one alternative,
  - a per-tract score-variability band fitted across the lattice,
  - how well a single variable predicts designation (AUC).

Run:  python3 demos/02_sensitivity_lattice.py
"""

from screenaudit.engine import run_model
from screenaudit.data import ModelSpec
from screenaudit.sensitivity import (
    designation_churn,
    enumerate_lattice,
    fit_interval_model,
    overall_sensitivity,
    predictor_auc,
    tract_score_ranges,
)
from screenaudit.synth import SynthConfig, generate_tracts, synthetic_schema

config = SynthConfig(
    n_tracts=500, n_variables=10, correlation=0.35, seed=23, extended_health=True
)
schema = synthetic_schema(config)
records = generate_tracts(config)

lattice = enumerate_lattice(records, schema)
base = lattice.base_results
print(f"base model: {lattice.specs[lattice.base_index].label()!r}")
print("\ndesignation churn vs base (% of tracts):")
for spec, results in zip(lattice.specs, lattice.results):
    if results is base:
        continue
    print(f"  {spec.label():45s} {designation_churn(base, results):5.1f}")

overall = overall_sensitivity(lattice)
print(f"\noverall sensitivity (flips under any alternative): {overall:.1f}%")

band = fit_interval_model(tract_score_ranges(lattice))
print("\nscore-variability band width (percentile ranks):")
for p in (50.0, 75.0, 90.0, 95.0):
    print(f"  at base percentile {p:4.0f}: {float(band.width(p)):5.1f}")

# How predictive is one variable on its own?
variable = schema.variable_ids[0]
values = [r.values.get(variable) for r in records]
flags = [r.designated for r in base]
print(f"\nAUC of single variable {variable!r} for designation: "
      f"{predictor_auc(values, flags):.3f}")
