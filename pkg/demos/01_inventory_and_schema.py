"""
Loading and checking an inventory
=================================

A small event table goes through the schema, the CSV reader and the
validation report.
"""

import tempfile
from pathlib import Path

from landsynth import FeatureSchema, FeatureSpec, dedupe, load_csv, save_csv, scan_csv, validate

tmp = Path(tempfile.mkdtemp())

# Missing numbers are written as an empty field or NA.
(tmp / "events.csv").write_text(
    "slope,soil,area\n"
    "12.5,clay,100\n"
    "NA,sand,250.5\n"
    "30.25,,0.001\n"
    "12.5,clay,100\n"
)

schema = FeatureSchema((
    FeatureSpec("slope", "numeric", unit="deg", allow_missing=True),
    FeatureSpec("soil", "categorical", allow_missing=True, categories=("clay", "sand")),
    FeatureSpec("area", "numeric", unit="m2"),
))

inv = load_csv(tmp / "events.csv", schema)
print(inv)
print(inv.rows())

# The report lists duplicates and per-column missing counts.
report = validate(inv)
print(report.to_dict())

inv = dedupe(inv)
print("after dedupe:", inv.n_rows, "rows")

# Writing and reading back gives the same cells, missing flags included.
save_csv(inv, tmp / "clean.csv")
assert load_csv(tmp / "clean.csv", schema) == inv

# A bad cell makes load_csv raise.  scan_csv collects every bad cell instead.
(tmp / "bad.csv").write_text("slope,soil,area\nsteep,clay,1\n2,gravel,3\n")
print(scan_csv(tmp / "bad.csv", schema).type_violations)
