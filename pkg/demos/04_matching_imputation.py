"""Matched comparison of funding with missing covariates.

Builds a tract-level frame (designation flag, log funding, demographic
covariates), knocks ~12% of covariate cells out, and estimates the funding
effect of designation by propensity matching inside multiple imputation:
match per imputed dataset, check covariate balance, estimate, then pool
with the within/between variance rules.

Run:  python3 demos/04_matching_imputation.py
"""

import math

import numpy as np
import pandas as pd

from screenaudit.data import ModelSpec
from screenaudit.engine import run_model
from screenaudit.matching import flag_imbalanced, matching_grid, pmm_impute, propensity_match
from screenaudit.synth import SynthConfig, generate_funding_rdd, generate_tracts, synthetic_schema

config = SynthConfig(n_tracts=800, correlation=0.4, seed=41)
schema = synthetic_schema(config)
records = generate_tracts(config)
results = run_model(records, schema, ModelSpec())
percentiles = {r.tract_id: r.percentile for r in results if r.percentile is not None}
log_funding = generate_funding_rdd(records, percentiles, 0.7, noise_sd=0.4, seed=42)

covariates = ["poverty_share", "foreign_born_share", "race_groupa"]
rows = []
for record, result in zip(records, results):
    if result.percentile is None or record.demographics is None:
        continue
    demo = record.demographics
    rows.append(
        {
            "tract_id": record.tract_id,
            "treated": int(result.designated),
            "log_funding": log_funding[record.tract_id],
            "poverty_share": demo.poverty_share,
            "foreign_born_share": demo.foreign_born_share,
            "race_groupa": demo.race_shares.get("groupa"),
        }
    )
frame = pd.DataFrame(rows).set_index("tract_id")

rng = np.random.default_rng(43)
for column in covariates:
    frame.loc[rng.random(len(frame)) < 0.12, column] = np.nan
n_missing = int(frame[covariates].isna().sum().sum())
print(
    f"frame: {len(frame)} tracts, {int(frame['treated'].sum())} designated, "
    f"{n_missing} missing covariate cells"
)

imputations = pmm_impute(frame, covariates, m=5, seed=44)
print(f"imputed {imputations.m} complete datasets (predictive mean matching)")

# Balance on the first imputed dataset at the working caliper.
match = propensity_match(imputations.datasets[0], "treated", covariates, 0.2, seed=44)
print(
    f"\ncaliper 0.2 on dataset 1: {len(match.pairs)} pairs, "
    f"{match.n_dropped} treated dropped"
)
imbalanced = flag_imbalanced(imputations.datasets[0], match.pairs, covariates)
print(f"covariates still imbalanced (|SMD| > 0.2): {imbalanced or 'none'}")

print("\npooled effect across imputations, by caliper:")
grid = matching_grid(
    imputations, "treated", "log_funding", covariates,
    calipers=(0.1, 0.2, 0.3), seed=44,
)
for _, row in grid.iterrows():
    print(
        f"  caliper {row['caliper']:.1f}: +{row['percent']:.1f}% funding "
        f"(95% CI {row['ci_low']:.1f}, {row['ci_high']:.1f}), "
        f"mean matched n {row['mean_n']:.0f}"
    )
print(f"\ntrue planted jump at the cutoff: {100 * (math.exp(0.7) - 1):.1f}%")
print(
    "matching on demographics alone leaves the smooth score-funding gradient\n"
    "uncontrolled (designated tracts sit higher on it), so the matched\n"
    "contrast overshoots the jump; the discontinuity design in demo 03\n"
    "removes exactly that bias."
)
