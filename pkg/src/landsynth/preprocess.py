"""Preprocessing steps: missing indicators, imputation, outlier clamping and transforms.

Every step comes in two halves: a ``fit`` that learns parameters from a
training inventory, and an ``apply`` that reuses them on any inventory with
the same columns.  The module-level functions (``impute_median``,
``transform_zscore``, ...) fit and apply in one call and return the fitted
parameters alongside the new table.  :class:`TransformPipeline` chains steps
and round-trips through JSON.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np
from scipy import stats

from ._stats import EPS, sample_sd
from .schema import CATEGORICAL, DataError, FeatureSpec, Inventory

PRESENT, ABSENT = "present", "absent"
INDICATOR_SUFFIX = "__missing"

STEP_KINDS = (
    "missing_indicator",
    "impute_median",
    "impute_knn",
    "winsorize",
    "log",
    "rank_quantile",
    "zscore",
)
INVERTIBLE = {
    "missing_indicator": "no",
    "impute_median": "no",
    "impute_knn": "no",
    "winsorize": "no",
    "log": "yes",
    "rank_quantile": "approx",
    "zscore": "yes",
}


class PipelineError(DataError):
    def __init__(self, index: int, kind: str, cause: Exception):
        super().__init__(f"step {index} ({kind}): {cause}")
        self.index = index
        self.kind = kind


def _numeric_column(inv: Inventory, column: str) -> np.ndarray:
    spec = inv.schema[column]
    if not spec.is_numeric:
        raise DataError(f"column {column!r} is not numeric")
    return inv.column(column)


def _replace(inv: Inventory, column: str, values: np.ndarray) -> Inventory:
    return inv.with_column(column, inv.schema[column], values)


# -- missing indicators ----------------------------------------------------

def _indicator_columns(inv: Inventory, columns: Sequence[str]) -> Inventory:
    specs, values = [], []
    for name in columns:
        new = name + INDICATOR_SUFFIX
        if new in inv.schema.names:
            raise DataError(f"indicator column {new!r} collides with an existing column")
        specs.append(FeatureSpec(new, CATEGORICAL, categories=(PRESENT, ABSENT)))
        values.append(inv.missing_mask(name).astype(np.int64))
    if not specs:
        return inv
    return inv.append_columns(specs, values)


def add_missing_indicators(inv: Inventory) -> Inventory:
    """Append ``<name>__missing`` (present/absent) for every column with a missing cell."""
    cols = [f.name for j, f in enumerate(inv.schema) if inv.missing_mask(j).any()]
    return _indicator_columns(inv, cols)


# -- imputation ------------------------------------------------------------

def _fit_median(inv: Inventory, column: str) -> float:
    x = _numeric_column(inv, column)
    present = x[~np.isnan(x)]
    if present.size == 0:
        raise DataError(f"column {column!r} has no non-missing values")
    return float(np.median(present))


def _apply_fill(inv: Inventory, column: str, value: float) -> Inventory:
    x = _numeric_column(inv, column)
    if not np.isnan(x).any():
        return inv
    return _replace(inv, column, np.where(np.isnan(x), value, x))


def impute_median(inv: Inventory, column: str) -> tuple[Inventory, float]:
    med = _fit_median(inv, column)
    return _apply_fill(inv, column, med), med


def _fit_knn(inv: Inventory, column: str, k: int) -> dict:
    if k < 1:
        raise DataError("impute_knn requires k >= 1")
    y = _numeric_column(inv, column)
    dist_cols = [
        f.name
        for j, f in enumerate(inv.schema)
        if f.is_numeric and f.name != column and not inv.missing_mask(j).any()
    ]
    if not dist_cols:
        raise DataError(f"impute_knn({column!r}): no fully present numeric column to measure distance")
    X = inv.numeric_matrix(dist_cols)
    mean = X.mean(axis=0)
    sd = np.array([sample_sd(X[:, c]) for c in range(X.shape[1])])
    present = ~np.isnan(y)
    if present.sum() < k:
        raise DataError(f"impute_knn({column!r}): only {int(present.sum())} candidate neighbours for k={k}")
    return {
        "k": int(k),
        "distance_columns": dist_cols,
        "means": mean.tolist(),
        "sds": sd.tolist(),
        "reference": X[present].tolist(),
        "values": y[present].tolist(),
    }


def _apply_knn(inv: Inventory, column: str, p: dict) -> Inventory:
    y = _numeric_column(inv, column)
    miss = np.flatnonzero(np.isnan(y))
    if miss.size == 0:
        return inv
    X = inv.numeric_matrix(p["distance_columns"])[miss]
    if np.isnan(X).any():
        raise DataError(f"impute_knn({column!r}): distance columns have missing cells in target rows")
    mean, scale = np.asarray(p["means"]), np.asarray(p["sds"]) + EPS
    ref = (np.asarray(p["reference"], dtype=np.float64).reshape(-1, len(mean)) - mean) / scale
    vals = np.asarray(p["values"], dtype=np.float64)
    out = y.copy()
    for row, x in zip(miss, (X - mean) / scale):
        d2 = ((ref - x) ** 2).sum(axis=1)
        nearest = np.argsort(d2, kind="stable")[: p["k"]]
        out[row] = vals[nearest].mean()
    return _replace(inv, column, out)


def impute_knn(inv: Inventory, column: str, k: int) -> Inventory:
    """Fill missing cells with the mean of the ``k`` nearest rows' values.

    Distance is Euclidean over the z-scored numeric columns that have no
    missing cells; equal distances favour the lower row index.
    """
    return _apply_knn(inv, column, _fit_knn(inv, column, k))


# -- outliers --------------------------------------------------------------

def _fit_winsorize(inv: Inventory, column: str, q_lo: float, q_hi: float) -> tuple[float, float]:
    if not 0.0 <= q_lo < q_hi <= 1.0:
        raise DataError(f"winsorize needs 0 <= q_lo < q_hi <= 1, got ({q_lo}, {q_hi})")
    x = _numeric_column(inv, column)
    x = x[~np.isnan(x)]
    if x.size == 0:
        raise DataError(f"winsorize({column!r}): empty column")
    lo, hi = np.quantile(x, [q_lo, q_hi])
    return float(lo), float(hi)


def _apply_clip(inv: Inventory, column: str, lo: float, hi: float) -> Inventory:
    x = _numeric_column(inv, column)
    return _replace(inv, column, np.clip(x, lo, hi))


def winsorize(inv: Inventory, column: str, q_lo: float, q_hi: float) -> tuple[Inventory, tuple[float, float]]:
    lo, hi = _fit_winsorize(inv, column, q_lo, q_hi)
    return _apply_clip(inv, column, lo, hi), (lo, hi)


# -- transforms ------------------------------------------------------------

def _apply_log(inv: Inventory, column: str) -> Inventory:
    x = _numeric_column(inv, column)
    if (x[~np.isnan(x)] <= 0).any():
        raise DataError(f"log({column!r}): values must be strictly positive")
    return _replace(inv, column, np.log(x))


def transform_log(inv: Inventory, column: str) -> Inventory:
    return _apply_log(inv, column)


def _fit_rank(inv: Inventory, column: str) -> dict:
    x = _numeric_column(inv, column)
    x = x[~np.isnan(x)]
    knots = np.unique(x)
    if knots.size < 2:
        raise DataError(f"rank_quantile({column!r}): needs at least two distinct values")
    ranks = stats.rankdata(x, method="average")
    u = (ranks - 0.5) / x.size
    # each distinct value maps to its (average-rank) plotting position
    pos = np.array([u[x == v][0] for v in knots])
    return {"knots": knots.tolist(), "positions": pos.tolist()}


def _apply_rank(inv: Inventory, column: str, p: dict, target: str) -> Inventory:
    x = _numeric_column(inv, column)
    u = np.interp(x, p["knots"], p["positions"])
    u = np.where(np.isnan(x), np.nan, u)
    out = stats.norm.ppf(u) if target == "normal" else u
    return _replace(inv, column, out)


def transform_rank_quantile(inv: Inventory, column: str, target: str = "uniform") -> tuple[Inventory, dict]:
    """Map values to plotting positions ``(rank - 0.5) / n`` (or their normal scores).

    Ties get the average rank.  The returned reference (distinct sorted
    training values with their positions) maps unseen values by linear
    interpolation and supports approximate inversion.
    """
    if target not in ("uniform", "normal"):
        raise DataError(f"rank_quantile target must be 'uniform' or 'normal', got {target!r}")
    p = _fit_rank(inv, column)
    return _apply_rank(inv, column, p, target), p


def _fit_zscore(inv: Inventory, column: str) -> tuple[float, float]:
    x = _numeric_column(inv, column)
    x = x[~np.isnan(x)]
    if x.size < 2:
        raise DataError(f"zscore({column!r}): needs at least two values")
    return float(x.mean()), sample_sd(x)


def _apply_zscore(inv: Inventory, column: str, mean: float, sd: float) -> Inventory:
    x = _numeric_column(inv, column)
    return _replace(inv, column, (x - mean) / (sd + EPS))


def transform_zscore(inv: Inventory, column: str) -> tuple[Inventory, float, float]:
    mean, sd = _fit_zscore(inv, column)
    return _apply_zscore(inv, column, mean, sd), mean, sd


# -- pipeline --------------------------------------------------------------

@dataclass(frozen=True)
class TransformStep:
    kind: str
    column: str | None = None
    options: dict[str, Any] = field(default_factory=dict)
    fitted: dict[str, Any] | None = None

    @property
    def invertible(self) -> str:
        return INVERTIBLE[self.kind]

    def fit(self, inv: Inventory) -> "TransformStep":
        k, col, o = self.kind, self.column, self.options
        if k not in STEP_KINDS:
            raise DataError(f"unknown step kind {k!r}")
        if k != "missing_indicator":
            if col is None:
                raise DataError(f"step {k!r} needs a column")
            inv.schema.index(col)
        if k == "missing_indicator":
            params = {"columns": [f.name for j, f in enumerate(inv.schema) if inv.missing_mask(j).any()]}
        elif k == "impute_median":
            params = {"median": _fit_median(inv, col)}
        elif k == "impute_knn":
            params = _fit_knn(inv, col, int(o.get("k", 5)))
        elif k == "winsorize":
            lo, hi = _fit_winsorize(inv, col, float(o.get("q_lo", 0.01)), float(o.get("q_hi", 0.99)))
            params = {"lo": lo, "hi": hi}
        elif k == "log":
            params = {}
        elif k == "rank_quantile":
            params = _fit_rank(inv, col)
        else:
            mean, sd = _fit_zscore(inv, col)
            params = {"mean": mean, "sd": sd}
        return TransformStep(k, col, dict(o), params)

    def apply(self, inv: Inventory) -> Inventory:
        if self.fitted is None:
            raise DataError(f"step {self.kind!r} has not been fitted")
        k, col, p = self.kind, self.column, self.fitted
        if k == "missing_indicator":
            return _indicator_columns(inv, p["columns"])
        if k == "impute_median":
            return _apply_fill(inv, col, p["median"])
        if k == "impute_knn":
            return _apply_knn(inv, col, p)
        if k == "winsorize":
            return _apply_clip(inv, col, p["lo"], p["hi"])
        if k == "log":
            return _apply_log(inv, col)
        if k == "rank_quantile":
            return _apply_rank(inv, col, p, self.options.get("target", "uniform"))
        return _apply_zscore(inv, col, p["mean"], p["sd"])

    def invert(self, inv: Inventory) -> Inventory:
        """Undo the step where possible; non-invertible steps pass data through unchanged."""
        k, col, p = self.kind, self.column, self.fitted
        if self.invertible == "no":
            return inv
        x = _numeric_column(inv, col)
        if k == "log":
            out = np.exp(x)
        elif k == "zscore":
            out = x * (p["sd"] + EPS) + p["mean"]
        else:
            u = stats.norm.cdf(x) if self.options.get("target", "uniform") == "normal" else x
            out = np.interp(u, p["positions"], p["knots"])
            out = np.where(np.isnan(x), np.nan, out)
        return _replace(inv, col, out)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "column": self.column,
            "options": dict(self.options),
            "fitted": self.fitted,
            "invertible": self.invertible,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "TransformStep":
        return cls(doc["kind"], doc.get("column"), dict(doc.get("options", {})), doc.get("fitted"))


def _as_step(req) -> TransformStep:
    if isinstance(req, TransformStep):
        return TransformStep(req.kind, req.column, dict(req.options))
    req = dict(req)
    kind = req.pop("kind")
    column = req.pop("column", None)
    options = req.pop("options", {})
    options.update(req)
    return TransformStep(kind, column, options)


@dataclass(frozen=True)
class TransformPipeline:
    steps: tuple[TransformStep, ...] = ()
    fitted_on: str = ""

    def apply(self, inv: Inventory) -> Inventory:
        """Apply every fitted step in order; parameters are never refitted."""
        for i, step in enumerate(self.steps):
            try:
                inv = step.apply(inv)
            except DataError as exc:
                raise PipelineError(i, step.kind, exc) from exc
        return inv

    def invert(self, inv: Inventory) -> Inventory:
        for step in reversed(self.steps):
            inv = step.invert(inv)
        return inv

    def to_dict(self) -> dict:
        return {"fitted_on": self.fitted_on, "steps": [s.to_dict() for s in self.steps]}

    @classmethod
    def from_dict(cls, doc: dict) -> "TransformPipeline":
        return cls(tuple(TransformStep.from_dict(s) for s in doc["steps"]), doc.get("fitted_on", ""))

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> "TransformPipeline":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def fit_apply_pipeline(inv: Inventory, spec: Sequence) -> tuple[Inventory, TransformPipeline]:
    """Fit and apply steps in the listed order.

    ``spec`` items are :class:`TransformStep` objects or dicts such as
    ``{"kind": "winsorize", "column": "slope", "q_lo": 0.01, "q_hi": 0.99}``.
    The order missing_indicator -> imputation -> winsorize -> transforms is
    the recommended default.
    """
    fingerprint = inv.fingerprint()
    fitted = []
    for i, req in enumerate(spec):
        try:
            step = _as_step(req).fit(inv)
            inv = step.apply(inv)
        except (DataError, KeyError) as exc:
            kind = req.kind if isinstance(req, TransformStep) else dict(req).get("kind", "?")
            raise PipelineError(i, kind, exc) from exc
        fitted.append(step)
    return inv, TransformPipeline(tuple(fitted), fingerprint)
