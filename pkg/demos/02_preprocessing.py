"""
Preprocessing pipelines
=======================

Impute, clip and rescale, then undo the invertible parts.
"""

import tempfile
from pathlib import Path

import numpy as np

from landsynth import FeatureSchema, FeatureSpec, Inventory, TransformPipeline, fit_apply_pipeline

rng = np.random.default_rng(0)
n = 200
slope = rng.normal(25, 8, n)
rain = rng.lognormal(3, 1, n)
slope[rng.random(n) < 0.1] = np.nan

schema = FeatureSchema((
    FeatureSpec("slope", allow_missing=True),
    FeatureSpec("rain"),
))
inv = Inventory(schema, [slope, rain])

# Steps run in the listed order: indicators and imputation first, then
# outlier clipping, then transforms.
steps = [
    {"kind": "missing_indicator"},
    {"kind": "impute_knn", "column": "slope", "k": 5},
    {"kind": "winsorize", "column": "rain", "q_lo": 0.01, "q_hi": 0.99},
    {"kind": "log", "column": "rain"},
    {"kind": "zscore", "column": "rain"},
]
out, pipe = fit_apply_pipeline(inv, steps)
print(out.schema.names)
print("rain after log + zscore: mean %.3f, sd %.3f" % (out.column("rain").mean(), out.column("rain").std(ddof=1)))

for step in pipe.steps:
    print(f"{step.kind:>17s}  {str(step.column):>6s}  invertible: {step.invertible}")
print("winsorize limits:", pipe.steps[2].fitted["lo"], pipe.steps[2].fitted["hi"])

# Inverting undoes log and zscore.  The clipping is not undone.
back = pipe.invert(out)
clipped = np.clip(rain, pipe.steps[2].fitted["lo"], pipe.steps[2].fitted["hi"])
print("max round-trip error:", np.max(np.abs(back.column("rain") - clipped)))

# Fitted parameters are stored, so new data is transformed the same way.
path = Path(tempfile.mkdtemp()) / "pipeline.json"
pipe.save(path)
again = TransformPipeline.load(path)
assert again.apply(inv) == out
