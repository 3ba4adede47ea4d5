"""Random test-instance generators shared across test modules.

All generators take a ``numpy.random.Generator`` so every test controls its
own seed; nothing here reads global state.
"""

from __future__ import annotations

import numpy as np

from screenaudit.data import (
    Aggregation,
    HealthSet,
    IndicatorSchema,
    ModelSpec,
    Preprocessing,
    Subcategory,
    TractRecord,
    Variable,
)

SUBCATEGORIES = (
    Subcategory("exposures", "pollution_burden", weight=1.0),
    Subcategory("environmental_effects", "pollution_burden", weight=0.5),
    Subcategory("sensitive_populations", "population_characteristics", weight=1.0),
    Subcategory("socioeconomic_factors", "population_characteristics", weight=1.0),
)


def random_schema(rng: np.random.Generator, max_variables: int = 8) -> IndicatorSchema:
    """4 subcategories over the 2 fixed categories, random variable weights.

    With probability ~0.4 one variable gains an extended-only twin (plus an
    extended weight), so health-set resolution gets exercised.
    """
    n_vars = int(rng.integers(4, max_variables + 1))
    variables = []
    for j in range(n_vars):
        sub = SUBCATEGORIES[j % 4] if j < 4 else SUBCATEGORIES[rng.integers(0, 4)]
        variables.append(
            Variable(
                f"v{j:02d}",
                sub.subcategory_id,
                weight=float(rng.uniform(0.5, 2.0)),
            )
        )
    if rng.random() < 0.4 and n_vars < max_variables:
        host = variables[int(rng.integers(0, n_vars))]
        variables[variables.index(host)] = Variable(
            host.variable_id, host.subcategory_id, weight=host.weight,
            extended_weight=float(rng.uniform(0.3, 1.0)),
        )
        variables.append(
            Variable(
                f"{host.variable_id}x", host.subcategory_id,
                extended_only=True,
                extended_weight=float(rng.uniform(0.3, 1.0)),
            )
        )
    subcategory_weights = {
        s.subcategory_id: float(rng.uniform(0.4, 1.5)) for s in SUBCATEGORIES
    }
    subcategories = tuple(
        Subcategory(s.subcategory_id, s.category_id, subcategory_weights[s.subcategory_id])
        for s in SUBCATEGORIES
    )
    return IndicatorSchema(variables=tuple(variables), subcategories=subcategories)


def random_records(
    rng: np.random.Generator,
    schema: IndicatorSchema,
    n: int,
    missing_rate: float = 0.15,
) -> list[TractRecord]:
    """Mixed lognormal/uniform columns with iid missingness.

    Every column keeps at least its first two rows observed (distinct with
    probability 1), so z-score pre-processing stays well defined.
    """
    variable_ids = schema.variable_ids
    k = len(variable_ids)
    values = np.where(
        (np.arange(k) % 2 == 0)[None, :],
        np.exp(rng.standard_normal((n, k))),
        rng.uniform(0.0, 100.0, size=(n, k)),
    )
    mask = rng.random((n, k)) < missing_rate
    mask[:2, :] = False
    records = []
    for i in range(n):
        row = {
            vid: None if mask[i, j] else float(values[i, j])
            for j, vid in enumerate(variable_ids)
        }
        records.append(TractRecord(tract_id=f"t{i:04d}", population=100, values=row))
    return records


def random_spec(rng: np.random.Generator, schema: IndicatorSchema) -> ModelSpec:
    weights = None
    if rng.random() < 0.3:
        chosen = rng.choice(
            len(schema.variable_ids), size=min(2, len(schema.variable_ids)),
            replace=False,
        )
        weights = {
            schema.variable_ids[int(c)]: float(rng.uniform(0.2, 3.0)) for c in chosen
        }
    return ModelSpec(
        preprocessing=list(Preprocessing)[rng.integers(0, 2)],
        aggregation=list(Aggregation)[rng.integers(0, 2)],
        health_set=list(HealthSet)[rng.integers(0, 2)],
        threshold_quantile=float(rng.choice([0.6, 0.75, 0.8, 0.9])),
        weights=weights,
    )
