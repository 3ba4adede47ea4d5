"""How far can weight manipulation move designations toward a party?

Runs the adversarial search on a synthetic population: a pattern search over
variable weights (within a bounded box), crossed with the discrete
pre-processing and aggregation toggles, maximizing and then minimizing the
number of designated tracts labeled with one political party.

Run:  python3 demos/05_adversarial_search.py
"""

from screenaudit.adversarial import (
    AdversarialProblem,
    DemographicDescriptor,
    demographic_objective,
    manipulation_range,
)
from screenaudit.data import ModelSpec
from screenaudit.engine import run_model
from screenaudit.synth import SynthConfig, demographics_map, generate_tracts, synthetic_schema

config = SynthConfig(n_tracts=300, n_variables=8, correlation=0.2, seed=52)
schema = synthetic_schema(config)
records = generate_tracts(config)
demographics = demographics_map(records)

descriptor = DemographicDescriptor(kind="party", label="blue")
baseline = demographic_objective(
    run_model(records, schema, ModelSpec()), demographics, descriptor
)
n_designated = sum(r.designated for r in run_model(records, schema, ModelSpec()))
print(
    f"baseline model designates {n_designated} tracts, "
    f"{baseline:.0f} of them labeled 'blue'"
)

problem = AdversarialProblem(demographic=descriptor)
result = manipulation_range(records, schema, demographics, "blue", problem=problem)

print(
    f"\nmaximized: {result.maximize.best_objective:.0f} blue tracts "
    f"(+{result.increase_pct:.0f}%) under "
    f"{result.maximize.best_spec.label()!r}"
)
print(
    f"minimized: {result.minimize.best_objective:.0f} blue tracts "
    f"(-{result.decrease_pct:.0f}%) under "
    f"{result.minimize.best_spec.label()!r}"
)
print(
    f"\nsearch effort: {result.maximize.n_evaluations} + "
    f"{result.minimize.n_evaluations} objective evaluations"
)

weights = result.maximize.best_spec.weights
top = sorted(weights.items(), key=lambda kv: kv[1], reverse=True)
print("\nweights chosen by the maximizing search (top 4):")
for vid, w in top[:4]:
    print(f"  {vid}: {w:.3f}")
print(
    "\nevery specification above is a 'reasonable' model; nothing in the "
    "output reveals it was chosen adversarially."
)
