"""Fidelity metrics comparing a generated sample to an original one.

Numeric features get location, spread and distribution-shape scores;
categorical features get total-variation and Jensen-Shannon distances over
category frequencies.  Numeric pairs get Pearson and Spearman correlation
deltas.  Every normalisation by the original SD uses the sample SD plus
``EPS = 1e-8``; logarithms are natural, so JS is bounded by ``ln 2``.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from ._stats import EPS, sample_sd, silverman_bandwidth
from .schema import Inventory, SchemaError

JS_GRID_POINTS = 512
JS_FLOOR = 1e-12
NUMERIC_METRICS = (
    "abs_err", "rel_err", "sd_diff", "rel_sd_diff", "bias_per_sd", "w1_per_sd", "ks_stat", "js_div",
)
CATEGORICAL_METRICS = ("tv_distance", "js_div")


class MetricError(ValueError):
    pass


def _clean(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64).ravel()
    return x[~np.isnan(x)]


def _nonempty(*samples):
    for s in samples:
        if s.size == 0:
            raise MetricError("empty sample")


def mean_metrics(orig, gen) -> tuple[float, float]:
    """Absolute and relative error of the mean."""
    orig, gen = _clean(orig), _clean(gen)
    _nonempty(orig, gen)
    abs_err = abs(float(orig.mean()) - float(gen.mean()))
    return abs_err, abs_err / (abs(float(orig.mean())) + EPS)


def sd_metrics(orig, gen) -> tuple[float, float]:
    orig, gen = _clean(orig), _clean(gen)
    if orig.size < 2 or gen.size < 2:
        raise MetricError("SD metrics need at least two values per sample")
    s_orig = sample_sd(orig)
    diff = abs(s_orig - sample_sd(gen))
    return diff, diff / (s_orig + EPS)


def bias_per_sd(orig, gen) -> float:
    orig, gen = _clean(orig), _clean(gen)
    if orig.size < 2:
        raise MetricError("bias per SD needs at least two original values")
    _nonempty(gen)
    return abs(float(orig.mean()) - float(gen.mean())) / (sample_sd(orig) + EPS)


def wasserstein1(p, q) -> float:
    """Exact 1-Wasserstein distance between two empirical distributions.

    Integrates ``|F_p^-1(u) - F_q^-1(u)|`` over the merged breakpoints of the
    two step quantile functions.  Breakpoints ``k/n`` and ``l/m`` are kept as
    integers over the common denominator ``n*m`` so interval widths are exact.
    """
    a, b = np.sort(_clean(p)), np.sort(_clean(q))
    _nonempty(a, b)
    n, m = a.size, b.size
    t = np.union1d(np.arange(n + 1, dtype=np.int64) * m, np.arange(m + 1, dtype=np.int64) * n)
    left, width = t[:-1], np.diff(t)
    return float(np.sum(np.abs(a[left // m] - b[left // n]) * width) / (n * m))


def wasserstein_per_sd(orig, gen) -> float:
    orig = _clean(orig)
    return wasserstein1(orig, gen) / (sample_sd(orig) + EPS)


def ks_statistic(orig, gen) -> float:
    """Largest gap between the two right-continuous empirical CDFs."""
    a, b = np.sort(_clean(orig)), np.sort(_clean(gen))
    _nonempty(a, b)
    pts = np.concatenate([a, b])
    at = np.abs(np.searchsorted(a, pts, "right") / a.size - np.searchsorted(b, pts, "right") / b.size)
    below = np.abs(np.searchsorted(a, pts, "left") / a.size - np.searchsorted(b, pts, "left") / b.size)
    return float(max(at.max(), below.max()))


def js_from_probabilities(p, q) -> float:
    """JS divergence (natural log) between two probability vectors."""
    p, q = np.asarray(p, dtype=np.float64), np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise MetricError("probability vectors differ in length")
    p, q = p / p.sum(), q / q.sum()
    m = 0.5 * (p + q)

    def kl(x):
        nz = x > 0
        return float(np.sum(x[nz] * np.log(x[nz] / np.maximum(m[nz], JS_FLOOR))))

    return float(min(max(0.5 * kl(p) + 0.5 * kl(q), 0.0), math.log(2.0)))


def kde_grid(orig, gen, points: int = JS_GRID_POINTS):
    """Shared grid and grid-normalised Gaussian KDEs of both samples.

    The bandwidth comes from the pooled sample, so identical inputs give
    identical densities.
    """
    a, b = _clean(orig), _clean(gen)
    # sorted so argument order cannot change the bandwidth by rounding
    pooled = np.sort(np.concatenate([a, b]))
    h = silverman_bandwidth(pooled)
    grid = np.linspace(pooled.min() - 3 * h, pooled.max() + 3 * h, points)

    def density(x):
        out = np.zeros(points)
        for chunk in np.array_split(x, max(1, x.size // 2048)):
            z = (grid[:, None] - chunk[None, :]) / h
            out += np.exp(-0.5 * z * z).sum(axis=1)
        return out / out.sum()

    return grid, density(a), density(b)


def js_divergence(orig, gen) -> float:
    """Jensen-Shannon divergence between KDE estimates of two numeric samples."""
    a, b = _clean(orig), _clean(gen)
    if a.size < 2 or b.size < 2:
        raise MetricError("JS divergence needs at least two values per sample")
    _, p, q = kde_grid(a, b)
    return js_from_probabilities(p, q)


def _pearson(x, y) -> float | None:
    if sample_sd(x) == 0.0 or sample_sd(y) == 0.0:
        return None
    return float(np.corrcoef(x, y)[0, 1])


def _spearman(x, y) -> float | None:
    return _pearson(stats.rankdata(x), stats.rankdata(y))


def _pair_corr(inv: Inventory, a: str, b: str):
    x, y = inv.column(a), inv.column(b)
    ok = ~(np.isnan(x) | np.isnan(y))
    x, y = x[ok], y[ok]
    if x.size < 3:
        raise MetricError(f"pair ({a}, {b}) needs at least three complete rows")
    return _pearson(x, y), _spearman(x, y)


def _delta(u, v):
    return None if u is None or v is None else abs(u - v)


def dependence_delta(orig: Inventory, gen: Inventory) -> list[dict]:
    """Pearson/Spearman correlation deltas for every unordered numeric pair.

    A pair involving a constant column reports ``None`` deltas.
    """
    _check_schemas(orig, gen)
    names = [orig.schema[j].name for j in orig.schema.numeric_indices()]
    out = []
    for a, b in itertools.combinations(names, 2):
        po, so = _pair_corr(orig, a, b)
        pg, sg = _pair_corr(gen, a, b)
        out.append({
            "a": a,
            "b": b,
            "pearson_orig": po,
            "pearson_gen": pg,
            "pearson_delta": _delta(po, pg),
            "spearman_orig": so,
            "spearman_gen": sg,
            "spearman_delta": _delta(so, sg),
        })
    return out


def numeric_feature_metrics(orig, gen) -> dict[str, float]:
    abs_err, rel_err = mean_metrics(orig, gen)
    sd_diff, rel_sd = sd_metrics(orig, gen)
    return {
        "abs_err": abs_err,
        "rel_err": rel_err,
        "sd_diff": sd_diff,
        "rel_sd_diff": rel_sd,
        "bias_per_sd": bias_per_sd(orig, gen),
        "w1_per_sd": wasserstein_per_sd(orig, gen),
        "ks_stat": ks_statistic(orig, gen),
        "js_div": js_divergence(orig, gen),
    }


def category_frequencies(codes: np.ndarray, n_categories: int) -> np.ndarray:
    codes = codes[codes >= 0]
    if codes.size == 0:
        raise MetricError("empty sample")
    return np.bincount(codes, minlength=n_categories) / codes.size


def categorical_feature_metrics(orig_codes, gen_codes, categories: Sequence[str]) -> dict:
    p = category_frequencies(np.asarray(orig_codes), len(categories))
    q = category_frequencies(np.asarray(gen_codes), len(categories))
    return {
        "tv_distance": float(0.5 * np.abs(p - q).sum()),
        "js_div": js_from_probabilities(p, q),
        "freq_abs_err": {c: float(abs(a - b)) for c, a, b in zip(categories, p, q)},
    }


@dataclass
class MetricReport:
    features: dict[str, dict]
    dependence: list[dict]
    aggregates: dict[str, float]
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "meta": self.meta,
            "features": self.features,
            "dependence": self.dependence,
            "aggregates": self.aggregates,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def flat_rows(self) -> list[tuple[str, str, float]]:
        """``(feature, metric, value)`` triples; per-category errors become ``freq_abs_err[label]``."""
        rows = []
        for name, fm in self.features.items():
            for key, val in fm.items():
                if key == "kind":
                    continue
                if isinstance(val, dict):
                    rows.extend((name, f"{key}[{c}]", v) for c, v in val.items())
                else:
                    rows.append((name, key, val))
        return rows


def _check_schemas(orig: Inventory, gen: Inventory) -> None:
    if orig.schema.names != gen.schema.names:
        raise SchemaError(f"feature names differ: {orig.schema.names} vs {gen.schema.names}")
    for a, b in zip(orig.schema, gen.schema):
        if a.is_numeric != b.is_numeric or a.kind != b.kind:
            raise SchemaError(f"feature {a.name!r}: kinds differ ({a.kind} vs {b.kind})")
        if a.categories != b.categories:
            raise SchemaError(f"feature {a.name!r}: category sets differ")


def _aggregate(features: dict[str, dict], dependence: list[dict]) -> dict[str, float]:
    agg = {}
    for metric in NUMERIC_METRICS + ("tv_distance",):
        vals = [fm[metric] for fm in features.values() if metric in fm]
        if vals:
            agg[f"mean_{metric}"] = float(np.mean(vals))
            agg[f"max_{metric}"] = float(np.max(vals))
    for key in ("pearson_delta", "spearman_delta"):
        vals = [row[key] for row in dependence if row[key] is not None]
        if vals:
            agg[f"mean_{key}"] = float(np.mean(vals))
            agg[f"max_{key}"] = float(np.max(vals))
    return agg


def full_report(orig: Inventory, gen: Inventory, label: str = "", seed: int | None = None) -> MetricReport:
    """Per-feature metrics, numeric dependence deltas and their aggregates."""
    _check_schemas(orig, gen)
    features = {}
    for j, spec in enumerate(orig.schema):
        if spec.is_numeric:
            fm = {"kind": "numeric", **numeric_feature_metrics(orig.column(j), gen.column(j))}
        else:
            fm = {"kind": spec.kind, **categorical_feature_metrics(orig.column(j), gen.column(j), spec.categories)}
        features[spec.name] = fm
    dependence = dependence_delta(orig, gen)
    meta = {
        "method": label,
        "seed": seed,
        "n_orig": orig.n_rows,
        "n_gen": gen.n_rows,
        "log_base": "e",
        "eps": EPS,
        "js_grid_points": JS_GRID_POINTS,
        "sd_convention": "sample (n-1)",
    }
    return MetricReport(features, dependence, _aggregate(features, dependence), meta)
