"""
Monte Carlo and SMOTE baselines
===============================

Independent marginal sampling loses correlation.  Interpolation keeps
correlation but cannot leave the hull of the source rows.
"""

import numpy as np

from landsynth import SmoteConfig, get_scenario, make_scenario, mc_fit, mc_generate, smote_generate

train, truth = make_scenario(get_scenario("coupled_met"))
a, b = "humidity_d1", "humidity_d3"

mc = mc_generate(mc_fit(train), 10_000, seed=0)
sm = smote_generate(train, SmoteConfig(k=5, n_new=10_000, seed=0))

for label, inv in (("train", train), ("truth", truth), ("mc", mc), ("smote", sm)):
    r = np.corrcoef(inv.column(a), inv.column(b))[0, 1]
    lo, hi = inv.column("rain_7d").min(), inv.column("rain_7d").max()
    print(f"{label:>6s}  corr {r:+.3f}   rain_7d range {lo:7.2f} .. {hi:7.2f}")

# Each SMOTE row sits on the segment between a base row and one of its neighbours.
gen, (base, nbr, lam) = smote_generate(train, SmoteConfig(k=5, n_new=3, seed=1), return_pairs=True)
X = train.numeric_matrix()
for r in range(3):
    print(np.round(gen.numeric_matrix()[r], 3), "=", np.round(X[base[r]] + lam[r] * (X[nbr[r]] - X[base[r]]), 3))
