"""
Generating, scoring and mixing candidates
=========================================

Fit the kernel conditional model on a sparse table.  Draw a scored pool,
keep the plausible half and blend it with the observations.
"""

import numpy as np

from landsynth import (
    GenerationConfig,
    KernelBackend,
    generate_pool,
    get_scenario,
    make_scenario,
    mix,
    pool_to_inventory,
    select_top_quantile,
)

train, truth = make_scenario(get_scenario("irregular", n_train=120, n_truth=5000))
model = KernelBackend.fit(train)
for name, h in zip(train.schema.names, model.bandwidths):
    if np.isfinite(h):
        print(f"bandwidth {name}: {h:.3f}")

# Each candidate draws its features in a fresh random order.  It is then
# scored by averaging chain-rule likelihoods over M random orders.
config = GenerationConfig(N=400, T=1.0, M=4, seed=1)
pool = generate_pool(model, train.schema, config, workers=4)
scores = np.array([c.log_plausibility for c in pool])
print("score range: %.2f .. %.2f" % (scores.min(), scores.max()))
print("first candidate:", pool[0].row, pool[0].metadata["order"])

accepted = select_top_quantile(pool, 0.5)
print(len(accepted), "accepted, mean score %.2f vs pool %.2f"
      % (np.mean([c.log_plausibility for c in accepted]), scores.mean()))

# Temperature widens the draws.
for T in (0.5, 1.0, 2.0):
    cfg = GenerationConfig(N=300, T=T, M=1, seed=2)
    gen = pool_to_inventory(train.schema, generate_pool(model, train.schema, cfg))
    print("T=%.1f  twi sd %.3f" % (T, gen.column("twi").std(ddof=1)))

# Conditioning pins some cells and samples the rest around them.
cfg = GenerationConfig(N=200, M=2, conditioning={"lithology": "limestone"}, seed=3)
gen = pool_to_inventory(train.schema, generate_pool(model, train.schema, cfg))
print("slope | limestone: %.1f  (all rows %.1f)" % (gen.column("slope").mean(), train.column("slope").mean()))

# alpha is the synthetic share of the final corpus.
corpus = mix(train, accepted, alpha=0.2)
print(corpus.n_observed, "observed +", corpus.n_synthetic, "synthetic, realized alpha %.3f" % corpus.realized_alpha)
