"""Sequential conditional row generation with temperature and permutation-averaged scoring.

A :class:`ConditionalModel` exposes one-dimensional conditionals
``p(x_i | context)``.  Rows are generated by drawing the unconditioned
features one at a time in a random order, each from its tempered
conditional given everything drawn so far.  Candidates are then scored by
averaging the chain-rule likelihood over ``M`` random feature orders.

Contexts are ``{feature_index: cell}`` dicts where cells are floats for
numeric features and category labels for categorical ones.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from ._stats import logsumexp, silverman_bandwidth
from .schema import DataError, FeatureSchema, Inventory, format_number, load_csv, save_csv

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


class GenerationError(RuntimeError):
    """Raised when a generator cannot produce or score a candidate."""


class ConditionalModel(ABC):
    """Interface for the one-dimensional conditionals of a joint table model."""

    schema: FeatureSchema

    @abstractmethod
    def log_conditional(self, i: int, value, context: Mapping[int, object]) -> float:
        """Log-density (numeric ``i``) or log-mass (categorical ``i``) at temperature 1."""

    @abstractmethod
    def sample_conditional(self, i: int, context: Mapping[int, object], temperature: float,
                           rng: np.random.Generator):
        """Draw one cell for feature ``i`` from the tempered conditional."""

    def chain_log_likelihood(self, row: Sequence, order: Sequence[int]) -> float:
        """Sum of log-conditionals of ``row`` with features visited in ``order``."""
        total = 0.0
        context: dict[int, object] = {}
        for i in order:
            total += self.log_conditional(i, row[i], context)
            context[i] = row[i]
        return total

    def _check_context(self, i: int, value, context: Mapping[int, object]) -> None:
        if i in context:
            raise DataError(f"context already contains target feature {i}")
        spec = self.schema[i]
        if value is not None and not spec.is_numeric and value not in spec.categories:
            raise DataError(f"unknown category {value!r} for feature {spec.name!r}")


class KernelBackend(ConditionalModel):
    """Kernel-weighted conditional estimator over the training rows.

    Each training row ``j`` gets weight proportional to the product of
    per-feature kernels between the context and row ``j``: a Gaussian with the
    column's Silverman bandwidth for numeric features, and ``1`` (match) or
    ``lambda_cat`` (mismatch) for categorical ones.  Numeric conditionals are
    the weighted Gaussian mixture centred on the training values; categorical
    conditionals are weighted category frequencies.
    """

    def __init__(self, schema: FeatureSchema, columns: Sequence[np.ndarray], lambda_cat: float = 0.1):
        if not 0.0 < lambda_cat <= 1.0:
            raise DataError("lambda_cat must lie in (0, 1]")
        self.schema = schema
        self.lambda_cat = float(lambda_cat)
        self._cols = [np.asarray(c) for c in columns]
        self.n = int(self._cols[0].shape[0])
        self.bandwidths = np.array(
            [silverman_bandwidth(c) if f.is_numeric else np.nan for f, c in zip(schema, self._cols)]
        )
        self._log_lambda = math.log(self.lambda_cat)

    @classmethod
    def fit(cls, train: Inventory, lambda_cat: float = 0.1) -> "KernelBackend":
        if train.n_rows == 0:
            raise DataError("cannot fit a conditional model on an empty table")
        if train.has_missing():
            raise DataError("training table contains missing cells; impute them first")
        return cls(train.schema, train.columns, lambda_cat)

    # -- kernels ------------------------------------------------------------
    def _encode(self, k: int, value):
        spec = self.schema[k]
        return float(value) if spec.is_numeric else spec.code_of(value)

    def _kernel_log(self, k: int, value) -> np.ndarray:
        """Per-training-row log-kernel of ``value`` in feature ``k`` (unnormalised)."""
        col = self._cols[k]
        if self.schema[k].is_numeric:
            z = (float(value) - col) / self.bandwidths[k]
            return -0.5 * z * z
        return np.where(col == self._encode(k, value), 0.0, self._log_lambda)

    def log_weights(self, context: Mapping[int, object]) -> np.ndarray:
        """Normalised log-weights of the training rows given ``context``."""
        acc = np.zeros(self.n)
        for k, v in context.items():
            acc = acc + self._kernel_log(k, v)
        return acc - logsumexp(acc)

    def context_weights(self, context: Mapping[int, object]) -> np.ndarray:
        return np.exp(self.log_weights(context))

    def _target_log(self, i: int, value, logw: np.ndarray) -> float:
        if self.schema[i].is_numeric:
            h = self.bandwidths[i]
            z = (float(value) - self._cols[i]) / h
            return float(logsumexp(logw - 0.5 * z * z) - LOG_SQRT_2PI - math.log(h))
        hit = self._cols[i] == self._encode(i, value)
        if not hit.any():
            return -math.inf
        return float(logsumexp(logw[hit]))

    # -- ConditionalModel ---------------------------------------------------
    def log_conditional(self, i, value, context):
        self._check_context(i, value, context)
        return self._target_log(i, value, self.log_weights(context))

    def conditional_masses(self, i: int, context: Mapping[int, object], temperature: float = 1.0) -> np.ndarray:
        """Tempered category masses (``p**(1/T)`` renormalised) in category order."""
        spec = self.schema[i]
        if spec.is_numeric:
            raise DataError(f"feature {spec.name!r} is numeric")
        self._check_context(i, None, context)
        w = self.context_weights(context)
        p = np.bincount(self._cols[i], weights=w, minlength=len(spec.categories))
        return temper(p, temperature)

    def conditional_density(self, i: int, grid: np.ndarray, context: Mapping[int, object]) -> np.ndarray:
        """Numeric conditional density (T = 1) evaluated on ``grid``."""
        self._check_context(i, None, context)
        logw = self.log_weights(context)
        h = self.bandwidths[i]
        z = (np.asarray(grid, dtype=np.float64)[:, None] - self._cols[i][None, :]) / h
        return np.exp(logsumexp(logw[None, :] - 0.5 * z * z, axis=1) - LOG_SQRT_2PI - math.log(h))

    def sample_conditional(self, i, context, temperature, rng):
        if temperature <= 0:
            raise DataError("temperature must be positive")
        self._check_context(i, None, context)
        spec = self.schema[i]
        if not spec.is_numeric:
            p = self.conditional_masses(i, context, temperature)
            return spec.categories[int(rng.choice(len(p), p=p))]
        w = temper(self.context_weights(context), temperature)
        j = int(rng.choice(self.n, p=w))
        return float(self._cols[i][j] + self.bandwidths[i] * math.sqrt(temperature) * rng.standard_normal())

    def chain_log_likelihood(self, row, order):
        # Incremental version of the generic loop: the context only grows.
        acc = np.zeros(self.n)
        total = 0.0
        for i in order:
            total += self._target_log(i, row[i], acc - logsumexp(acc))
            acc = acc + self._kernel_log(i, row[i])
        return total


def temper(p: np.ndarray, temperature: float) -> np.ndarray:
    """Return ``p**(1/T)`` renormalised, computed in log space."""
    if temperature <= 0:
        raise DataError("temperature must be positive")
    p = np.asarray(p, dtype=np.float64)
    with np.errstate(divide="ignore"):
        lp = np.log(p) / temperature
    lp = lp - logsumexp(lp)
    q = np.exp(lp)
    return q / q.sum()


def fit(train: Inventory, lambda_cat: float = 0.1) -> KernelBackend:
    return KernelBackend.fit(train, lambda_cat)


def log_conditional(model: ConditionalModel, i: int, value, context) -> float:
    return model.log_conditional(i, value, context)


def sample_conditional(model: ConditionalModel, i: int, context, temperature: float, rng):
    return model.sample_conditional(i, context, temperature, rng)


def _check_conditioning(schema: FeatureSchema, conditioning: Mapping[str, object]) -> dict[int, object]:
    fixed = {}
    for name, v in conditioning.items():
        j = schema.index(name)
        spec = schema[j]
        if v is None:
            raise DataError(f"conditioning value for {name!r} is missing")
        if spec.is_numeric:
            v = float(v)
            if not math.isfinite(v):
                raise DataError(f"conditioning value for {name!r} must be finite")
        elif v not in spec.categories:
            raise DataError(f"unknown category {v!r} for conditioning feature {name!r}")
        fixed[j] = v
    return fixed


def generate_row(model: ConditionalModel, schema: FeatureSchema, temperature: float,
                 conditioning: Mapping[str, object], rng: np.random.Generator) -> tuple[tuple, tuple[int, ...]]:
    """Draw one row; returns the row and the order the free features were sampled in."""
    context = _check_conditioning(schema, conditioning)
    free = [j for j in range(len(schema)) if j not in context]
    order = tuple(int(free[k]) for k in rng.permutation(len(free)))
    for i in order:
        context[i] = model.sample_conditional(i, context, temperature, rng)
    return tuple(context[j] for j in range(len(schema))), order


def plausibility(model: ConditionalModel, row: Sequence, M: int, rng: np.random.Generator) -> float:
    """Log of the chain-rule likelihood averaged over ``M`` feature orders.

    Orders are drawn uniformly at random; when ``M >= d!`` every order is
    used exactly once instead.
    """
    if M < 1:
        raise DataError("M must be at least 1")
    if any(v is None for v in row):
        raise DataError("cannot score a row with missing cells")
    d = len(row)
    if M >= math.factorial(d):
        orders = list(itertools.permutations(range(d)))
    else:
        orders = [tuple(int(k) for k in rng.permutation(d)) for _ in range(M)]
    terms = np.array([model.chain_log_likelihood(row, o) for o in orders])
    if not np.isfinite(terms).all():
        raise GenerationError(f"non-finite conditional log-probability for row {tuple(row)}")
    return float(logsumexp(terms) - math.log(len(orders)))


@dataclass(frozen=True)
class GenerationConfig:
    N: int = 500
    T: float = 1.0
    M: int = 8
    conditioning: dict[str, object] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.N < 1:
            raise DataError("N must be at least 1")
        if not self.T > 0:
            raise DataError("T must be positive")
        if self.M < 1:
            raise DataError("M must be at least 1")

    def to_dict(self) -> dict:
        return {"N": self.N, "T": self.T, "M": self.M, "conditioning": dict(self.conditioning), "seed": self.seed}


@dataclass(frozen=True)
class Candidate:
    row: tuple
    log_plausibility: float
    metadata: dict

    @property
    def index(self) -> int:
        return self.metadata["index"]

    @property
    def order(self) -> tuple[int, ...]:
        return tuple(self.metadata["order"])


def candidate_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed) & (2**64 - 1), int(index)]))


def _make_candidate(model: ConditionalModel, schema: FeatureSchema, config: GenerationConfig, c: int) -> Candidate:
    rng = candidate_rng(config.seed, c)
    row, order = generate_row(model, schema, config.T, config.conditioning, rng)
    # per-feature log-conditionals along the sampling order (conditioned cells come first)
    fixed = [j for j in range(len(schema)) if j not in order]
    context: dict[int, object] = {}
    per_feature = {}
    for i in fixed + list(order):
        per_feature[schema[i].name] = model.log_conditional(i, row[i], context)
        context[i] = row[i]
    score = plausibility(model, row, config.M, rng)
    meta = {
        "index": c,
        "config": config.to_dict(),
        "order": list(order),
        "log_conditionals": per_feature,
        "score_temperature": 1.0,
        "rng_stream": f"{config.seed}:{c}",
    }
    return Candidate(row, score, meta)


def generate_pool(model: ConditionalModel, schema: FeatureSchema, config: GenerationConfig,
                  workers: int = 1) -> list[Candidate]:
    """Generate and score ``config.N`` candidates.

    Candidate ``c`` draws from its own stream seeded by ``(seed, c)``, so the
    pool is identical for any number of ``workers``.
    """
    _check_conditioning(schema, config.conditioning)

    def one(c: int) -> Candidate:
        return _make_candidate(model, schema, config, c)

    if workers <= 1:
        return [one(c) for c in range(config.N)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, range(config.N)))


def pool_to_inventory(schema: FeatureSchema, pool: Sequence[Candidate]) -> Inventory:
    return Inventory.from_rows(schema, [c.row for c in pool])


# -- pool files ------------------------------------------------------------

POOL_COLUMNS = ("__candidate", "__log_plausibility", "__order")


def sidecar_path(path) -> Path:
    return Path(path).with_suffix(".meta.json")


def save_pool(pool: Sequence[Candidate], schema: FeatureSchema, path, extra_meta: dict | None = None) -> None:
    """Write candidates as CSV plus a ``.meta.json`` sidecar with schema and per-candidate metadata."""
    inv = pool_to_inventory(schema, pool)
    extra = {
        "__candidate": [c.index for c in pool],
        "__log_plausibility": [format_number(c.log_plausibility) for c in pool],
        "__order": [";".join(schema[i].name for i in c.order) for c in pool],
    }
    save_csv(inv, path, extra)
    doc = {"schema": schema.to_dict(), "candidates": [c.metadata for c in pool], **(extra_meta or {})}
    with open(sidecar_path(path), "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_pool(path, schema: FeatureSchema | None = None) -> tuple[FeatureSchema, list[Candidate]]:
    """Read a pool CSV written by :func:`save_pool`; metadata comes from the sidecar when present."""
    meta_file = sidecar_path(path)
    meta = {}
    if meta_file.exists():
        with open(meta_file, encoding="utf-8") as fh:
            meta = json.load(fh)
    if schema is None:
        if "schema" not in meta:
            raise DataError(f"{path}: no schema given and no sidecar {meta_file.name} found")
        schema = FeatureSchema.from_dict(meta["schema"])
    inv = load_csv(path, schema, ignore_prefix="__")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in POOL_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise DataError(f"{path}: pool file lacks columns {missing}")
        extras = [(int(r["__candidate"]), float(r["__log_plausibility"]), r["__order"]) for r in reader]
    by_index = {m.get("index"): m for m in meta.get("candidates", [])}
    pool = []
    for k, (idx, score, order) in enumerate(extras):
        md = dict(by_index.get(idx, {}))
        md["index"] = idx
        md.setdefault("order", [schema.index(n) for n in order.split(";") if n])
        pool.append(Candidate(inv.row(k), score, md))
    return schema, pool
