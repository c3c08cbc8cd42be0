"""Known-truth benchmark scenarios and the method comparison harness.

A scenario is a Gaussian copula: latent ``z ~ N(0, R)`` is mapped through
``Phi`` and then through each feature's marginal quantile function.
Categorical features threshold one latent coordinate.  A small training
table and a large, independently seeded truth table are drawn from it.
Generators only ever see the training table.
"""

from __future__ import annotations

import csv
import json
import time
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy import stats

from ._stats import silverman_bandwidth
from .baselines import SmoteConfig, mc_fit, mc_generate, smote_generate
from .generator import GenerationConfig, KernelBackend, generate_pool, pool_to_inventory
from .metrics import MetricReport, full_report
from .preprocess import TransformPipeline, fit_apply_pipeline
from .schema import CATEGORICAL, NUMERIC, DataError, FeatureSchema, FeatureSpec, Inventory
from .selection import SelectionConfig

METHODS = ("proposed", "monte_carlo", "smote")
KDE_EXPORT_POINTS = 256
METHOD_ALIASES = {"mc": "monte_carlo", "montecarlo": "monte_carlo"}


@dataclass(frozen=True)
class Marginal:
    """Marginal quantile map applied to a latent uniform.

    ``kind`` is one of ``identity`` (``loc + scale * z``), ``lognormal``
    (``exp(mu + sigma * z)``), ``t`` (``loc + scale * t_df``) or ``mixture``
    (Gaussian mixture with ``weights``, ``means``, ``sds``).
    """

    name: str
    kind: str = "identity"
    params: dict = field(default_factory=dict)

    def quantile(self, u: np.ndarray) -> np.ndarray:
        p = self.params
        if self.kind == "identity":
            return p.get("loc", 0.0) + p.get("scale", 1.0) * stats.norm.ppf(u)
        if self.kind == "lognormal":
            return np.exp(p.get("mu", 0.0) + p.get("sigma", 1.0) * stats.norm.ppf(u))
        if self.kind == "t":
            return p.get("loc", 0.0) + p.get("scale", 1.0) * stats.t.ppf(u, p.get("df", 3.0))
        if self.kind == "mixture":
            w, mu, sd = (np.asarray(p[k], dtype=np.float64) for k in ("weights", "means", "sds"))
            w = w / w.sum()
            grid = np.linspace((mu - 8 * sd).min(), (mu + 8 * sd).max(), 20001)
            cdf = (w[None, :] * stats.norm.cdf((grid[:, None] - mu) / sd)).sum(axis=1)
            return np.interp(u, cdf, grid)
        raise DataError(f"unknown marginal kind {self.kind!r}")


@dataclass(frozen=True)
class CategoricalFeature:
    """Label from thresholding latent coordinate ``latent`` at ``thresholds``."""

    name: str
    latent: int
    thresholds: tuple[float, ...]
    labels: tuple[str, ...]


@dataclass(frozen=True)
class Scenario:
    name: str
    marginals: tuple[Marginal, ...]
    correlation: tuple[tuple[float, ...], ...]
    categorical: tuple[CategoricalFeature, ...] = ()
    n_train: int = 200
    n_truth: int = 10_000
    truth_seed: int = 0

    def __post_init__(self):
        R = np.asarray(self.correlation, dtype=np.float64)
        d = len(self.marginals)
        if R.shape != (d, d) or not np.allclose(R, R.T) or not np.allclose(np.diag(R), 1.0):
            raise DataError("correlation must be a symmetric matrix with unit diagonal")
        if self.n_train < 10:
            raise DataError("n_train must be at least 10")
        if self.n_truth < 10 * self.n_train:
            raise DataError("n_truth must be at least 10 * n_train")
        for c in self.categorical:
            if len(c.labels) != len(c.thresholds) + 1 or not 0 <= c.latent < d:
                raise DataError(f"categorical feature {c.name!r} is malformed")

    def schema(self) -> FeatureSchema:
        feats = [FeatureSpec(m.name, NUMERIC) for m in self.marginals]
        feats += [FeatureSpec(c.name, CATEGORICAL, categories=c.labels) for c in self.categorical]
        return FeatureSchema(tuple(feats))

    def with_(self, **changes) -> "Scenario":
        fields = {k: getattr(self, k) for k in self.__dataclass_fields__}
        fields.update(changes)
        return Scenario(**fields)


def _draw(scn: Scenario, n: int, seed_words: Sequence[int]) -> Inventory:
    R = np.asarray(scn.correlation, dtype=np.float64)
    try:
        L = np.linalg.cholesky(R)
    except np.linalg.LinAlgError:
        raise DataError(f"scenario {scn.name!r}: correlation matrix is not positive definite") from None
    rng = np.random.default_rng(np.random.SeedSequence(list(seed_words)))
    z = rng.standard_normal((n, R.shape[0])) @ L.T
    u = stats.norm.cdf(z)
    cols = [m.quantile(u[:, k]) for k, m in enumerate(scn.marginals)]
    for c in scn.categorical:
        cols.append(np.searchsorted(np.asarray(c.thresholds), z[:, c.latent]).astype(np.int64))
    return Inventory(scn.schema(), cols)


def make_scenario(scn: Scenario) -> tuple[Inventory, Inventory]:
    """Draw ``(train, truth)`` from the copula with disjoint seed streams."""
    seed = int(scn.truth_seed)
    return _draw(scn, scn.n_train, [seed, 0]), _draw(scn, scn.n_truth, [seed, 1])


def _corr(pairs: Mapping[tuple[int, int], float], d: int) -> tuple[tuple[float, ...], ...]:
    R = np.eye(d)
    for (a, b), r in pairs.items():
        R[a, b] = R[b, a] = r
    return tuple(tuple(float(v) for v in row) for row in R)


PRESETS: dict[str, Scenario] = {
    # symmetric, sharply peaked at zero (profile-curvature-like)
    "zero_peak": Scenario(
        "zero_peak",
        (
            Marginal("curvature", "t", {"df": 3.0, "scale": 0.5}),
            Marginal("slope", "identity", {"loc": 25.0, "scale": 8.0}),
            Marginal("relief", "lognormal", {"mu": 4.0, "sigma": 0.4}),
        ),
        _corr({(0, 1): 0.3, (0, 2): 0.2, (1, 2): 0.6}, 3),
    ),
    # right-skewed distance-like features
    "heavy_tail": Scenario(
        "heavy_tail",
        (
            Marginal("dist_road", "lognormal", {"mu": 6.0, "sigma": 1.0}),
            Marginal("dist_river", "lognormal", {"mu": 5.0, "sigma": 0.8}),
            Marginal("slope", "identity", {"loc": 25.0, "scale": 8.0}),
        ),
        _corr({(0, 1): 0.5, (0, 2): -0.3, (1, 2): -0.2}, 3),
    ),
    # three-mode wetness-index-like feature plus a lithology class
    "irregular": Scenario(
        "irregular",
        (
            Marginal("twi", "mixture", {"weights": [0.5, 0.3, 0.2], "means": [4.0, 8.0, 13.0], "sds": [0.8, 1.0, 1.2]}),
            Marginal("slope", "identity", {"loc": 25.0, "scale": 8.0}),
            Marginal("curvature", "t", {"df": 3.0, "scale": 0.5}),
        ),
        _corr({(0, 1): -0.5, (0, 2): -0.3, (1, 2): 0.2}, 3),
        (CategoricalFeature("lithology", 1, (-0.5, 0.7), ("clay", "sandstone", "limestone")),),
    ),
    # strongly coupled humidity / rainfall windows
    "coupled_met": Scenario(
        "coupled_met",
        (
            Marginal("humidity_d1", "identity", {"loc": 70.0, "scale": 10.0}),
            Marginal("humidity_d3", "identity", {"loc": 68.0, "scale": 11.0}),
            Marginal("rain_1d", "lognormal", {"mu": 2.5, "sigma": 0.6}),
            Marginal("rain_7d", "lognormal", {"mu": 4.0, "sigma": 0.5}),
        ),
        _corr({(0, 1): 0.8, (2, 3): 0.7, (0, 2): 0.6, (0, 3): 0.6, (1, 2): 0.6, (1, 3): 0.6}, 4),
    ),
}


def get_scenario(name: str, **overrides) -> Scenario:
    try:
        scn = PRESETS[name]
    except KeyError:
        raise DataError(f"unknown scenario {name!r}; choose from {sorted(PRESETS)}") from None
    return scn.with_(**overrides) if overrides else scn


# -- comparison ------------------------------------------------------------

def method_seed(seed: int, method: str) -> int:
    """Independent per-method seed derived from the run seed and the method name."""
    ss = np.random.SeedSequence([int(seed), zlib.crc32(method.encode())])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def canonical_method(name: str) -> str:
    return METHOD_ALIASES.get(name, name)


@dataclass
class BenchResult:
    scenario: str
    seed: int
    truth: Inventory
    reports: dict[str, MetricReport]
    samples: dict[str, Inventory]
    errors: dict[str, str] = field(default_factory=dict)
    timings: dict[str, float] = field(default_factory=dict)
    pipeline: TransformPipeline = field(default_factory=TransformPipeline)

    def to_dict(self, include_timings: bool = False) -> dict:
        doc = {
            "scenario": self.scenario,
            "seed": self.seed,
            "n_truth": self.truth.n_rows,
            "reports": {m: r.to_dict() for m, r in self.reports.items()},
            "errors": dict(self.errors),
            "preprocessing": [{"kind": st.kind, "column": st.column} for st in self.pipeline.steps],
        }
        if include_timings:
            doc["timings"] = dict(self.timings)
        return doc

    def to_json(self, include_timings: bool = False) -> str:
        return json.dumps(self.to_dict(include_timings), indent=2, sort_keys=True)


def auto_preprocess_steps(train: Inventory, skew_threshold: float = 1.0) -> list[dict]:
    """Log-transform every strictly positive numeric column with sample skewness above the threshold."""
    steps = []
    for j, spec in enumerate(train.schema):
        if not spec.is_numeric:
            continue
        x = train.column(j)
        x = x[~np.isnan(x)]
        if x.size >= 3 and x.min() > 0 and stats.skew(x) > skew_threshold:
            steps.append({"kind": "log", "column": spec.name})
    return steps


def run_proposed(train: Inventory, gen_config: GenerationConfig, sel_config: SelectionConfig,
                 lambda_cat: float = 0.1, workers: int = 1) -> Inventory:
    """Generate a scored pool from ``train`` and keep the selected rows (no mixing)."""
    model = KernelBackend.fit(train, lambda_cat)
    pool = generate_pool(model, train.schema, gen_config, workers=workers)
    accepted = sel_config.apply(pool)
    if not accepted:
        raise DataError("selection accepted no candidates")
    return pool_to_inventory(train.schema, accepted)


def run_comparison(train: Inventory, truth: Inventory, methods: Sequence[str],
                   gen_config: GenerationConfig | None = None, sel_config: SelectionConfig | None = None,
                   seed: int = 0, *, n_synthetic: int | None = None, smote_k: int = 5,
                   external: Mapping[str, Inventory] | None = None, lambda_cat: float = 0.1,
                   preprocess: str | Sequence = "auto", workers: int = 1,
                   scenario: str = "") -> BenchResult:
    """Run every method on ``train`` and score its output against ``truth``.

    Baselines produce ``n_synthetic`` rows (default: as many as the truth
    sample).  The proposed method produces whatever survives selection from a
    pool of ``gen_config.N``.  Built-in methods share one preprocessing
    pipeline fitted on ``train`` (``"auto"``: log for skewed positive
    columns) and their output is mapped back through its inverse; ``external``
    tables are scored as-is.  A failing method is recorded in ``errors`` and
    the rest still run.
    """
    methods = [canonical_method(m) for m in methods]
    if preprocess == "auto":
        preprocess = auto_preprocess_steps(train)
    work, pipeline = fit_apply_pipeline(train, preprocess or [])
    external = dict(external or {})
    if not methods and not external:
        raise DataError("no methods to compare")
    gen_config = gen_config or GenerationConfig()
    sel_config = sel_config or SelectionConfig()
    n_syn = n_synthetic or truth.n_rows
    reports, samples, errors, timings = {}, {}, {}, {}
    for name in list(methods) + list(external):
        mseed = method_seed(seed, name)
        t0 = time.perf_counter()
        try:
            if name in external:
                gen = external[name]
            elif name == "proposed":
                cfg = GenerationConfig(gen_config.N, gen_config.T, gen_config.M, dict(gen_config.conditioning), mseed)
                gen = pipeline.invert(run_proposed(work, cfg, sel_config, lambda_cat, workers))
            elif name == "monte_carlo":
                gen = pipeline.invert(mc_generate(mc_fit(work), n_syn, mseed))
            elif name == "smote":
                gen = pipeline.invert(smote_generate(work, SmoteConfig(smote_k, n_syn, mseed)))
            else:
                raise DataError(f"unknown method {name!r}")
            reports[name] = full_report(truth, gen, label=name, seed=mseed)
            samples[name] = gen
        except Exception as exc:  # noqa: BLE001 - one failing method must not sink the others
            errors[name] = f"{type(exc).__name__}: {exc}"
        timings[name] = time.perf_counter() - t0
    return BenchResult(scenario, seed, truth, reports, samples, errors, timings, pipeline)


# -- report emission -------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    return format(float(v), ".17g")


def comparison_rows(result: BenchResult) -> list[tuple[str, str, list]]:
    methods = list(result.reports)
    keyed: dict[tuple[str, str], dict] = {}
    for m in methods:
        for feat, metric, val in result.reports[m].flat_rows():
            keyed.setdefault((feat, metric), {})[m] = val
    return [(f, k, [vals.get(m) for m in methods]) for (f, k), vals in keyed.items()]


def emit_report(result: BenchResult, path: str | Path, include_timings: bool = False) -> list[Path]:
    """Write per-method report JSON, a comparison CSV, KDE grids and empirical CDFs."""
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for m, rep in result.reports.items():
        p = out / f"{m}.json"
        p.write_text(rep.to_json() + "\n", encoding="utf-8")
        written.append(p)
    p = out / "bench.json"
    p.write_text(result.to_json(include_timings) + "\n", encoding="utf-8")
    written.append(p)

    methods = list(result.reports)
    p = out / "comparison.csv"
    with open(p, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["feature", "metric"] + methods)
        for feat, metric, vals in comparison_rows(result):
            w.writerow([feat, metric] + [_fmt(v) for v in vals])
    written.append(p)

    numeric = [f.name for f in result.truth.schema if f.is_numeric]
    p = out / "kde_grids.csv"
    with open(p, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["feature", "x", "truth"] + methods)
        for feat in numeric:
            samples = [result.truth.column(feat)] + [result.samples[m].column(feat) for m in methods]
            pooled = np.concatenate(samples)
            h = silverman_bandwidth(pooled)
            grid = np.linspace(pooled.min() - 3 * h, pooled.max() + 3 * h, KDE_EXPORT_POINTS)
            dens = [_kde(grid, x, h) for x in samples]
            for g in range(grid.size):
                w.writerow([feat, _fmt(grid[g])] + [_fmt(d[g]) for d in dens])
    written.append(p)

    p = out / "ecdf.csv"
    with open(p, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["feature", "x", "truth"] + methods)
        for feat in numeric:
            truth = np.sort(result.truth.column(feat))
            xs = np.quantile(truth, np.linspace(0.0, 1.0, 257))
            for x in xs:
                row = [feat, _fmt(x), _fmt(np.searchsorted(truth, x, "right") / truth.size)]
                for m in methods:
                    s = np.sort(result.samples[m].column(feat))
                    row.append(_fmt(np.searchsorted(s, x, "right") / s.size))
                w.writerow(row)
    written.append(p)
    return written


def _kde(grid: np.ndarray, x: np.ndarray, h: float) -> np.ndarray:
    out = np.zeros(grid.size)
    for chunk in np.array_split(x, max(1, x.size // 2048)):
        z = (grid[:, None] - chunk[None, :]) / h
        out += np.exp(-0.5 * z * z).sum(axis=1)
    return out / (x.size * h * np.sqrt(2.0 * np.pi))
