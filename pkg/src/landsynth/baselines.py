"""Comparison generators: independent-marginal Monte Carlo and mixed-type SMOTE."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._stats import EPS, sample_sd, silverman_bandwidth
from .generator import LOG_SQRT_2PI, ConditionalModel
from .schema import DataError, Inventory


class MarginalModel(ConditionalModel):
    """Per-column fitted marginals with no dependence between columns.

    Numeric columns are Gaussian KDEs (Silverman bandwidth) over the sorted
    training values; categorical columns are empirical frequencies.  As a
    :class:`ConditionalModel` every conditional ignores its context.
    """

    def __init__(self, schema, values, bandwidths, frequencies):
        self.schema = schema
        self.values = values
        self.bandwidths = bandwidths
        self.frequencies = frequencies

    def log_conditional(self, i, value, context):
        self._check_context(i, value, context)
        spec = self.schema[i]
        if spec.is_numeric:
            h = self.bandwidths[i]
            z = (float(value) - self.values[i]) / h
            lp = -0.5 * z * z - LOG_SQRT_2PI - math.log(h)
            return float(np.logaddexp.reduce(lp) - math.log(lp.size))
        p = self.frequencies[i][spec.code_of(value)]
        return math.log(p) if p > 0 else -math.inf

    def sample_conditional(self, i, context, temperature, rng):
        spec = self.schema[i]
        if spec.is_numeric:
            x = self.values[i]
            return float(x[rng.integers(x.size)] + self.bandwidths[i] * math.sqrt(temperature) * rng.standard_normal())
        p = self.frequencies[i] ** (1.0 / temperature)
        return spec.categories[int(rng.choice(p.size, p=p / p.sum()))]


def mc_fit(train: Inventory) -> MarginalModel:
    if train.n_rows == 0:
        raise DataError("cannot fit marginals on an empty table")
    if train.has_missing():
        raise DataError("training table contains missing cells")
    values, bws, freqs = {}, {}, {}
    for j, spec in enumerate(train.schema):
        col = train.column(j)
        if spec.is_numeric:
            values[j] = np.sort(col)
            bws[j] = silverman_bandwidth(col)
        else:
            counts = np.bincount(col, minlength=len(spec.categories)).astype(np.float64)
            freqs[j] = counts / counts.sum()
    return MarginalModel(train.schema, values, bws, freqs)


def mc_generate(model: MarginalModel, n: int, seed: int) -> Inventory:
    """Draw ``n`` rows, each column independently from its fitted marginal."""
    if n < 1:
        raise DataError("n must be at least 1")
    rng = np.random.default_rng(seed)
    cols = []
    for j, spec in enumerate(model.schema):
        if spec.is_numeric:
            x = model.values[j]
            cols.append(x[rng.integers(x.size, size=n)] + model.bandwidths[j] * rng.standard_normal(n))
        else:
            cols.append(rng.choice(len(spec.categories), size=n, p=model.frequencies[j]).astype(np.int64))
    return Inventory(model.schema, cols)


@dataclass(frozen=True)
class SmoteConfig:
    k: int = 5
    n_new: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise DataError("k must be at least 1")
        if self.n_new < 0:
            raise DataError("n_new must be non-negative")


def _smote_distances(source: Inventory) -> np.ndarray:
    """Pairwise SMOTE-NC squared distances between source rows."""
    num = source.schema.numeric_indices()
    X = source.numeric_matrix()
    Z = (X - X.mean(axis=0)) / (np.array([sample_sd(X[:, c]) for c in range(X.shape[1])]) + EPS)
    d2 = np.zeros((source.n_rows, source.n_rows))
    for c in range(Z.shape[1]):
        d2 += (Z[:, None, c] - Z[None, :, c]) ** 2
    cat = [j for j in range(source.d) if j not in num]
    if cat:
        penalty = float(np.median([sample_sd(Z[:, c]) for c in range(Z.shape[1])]))
        for j in cat:
            col = source.column(j)
            d2 = d2 + penalty**2 * (col[:, None] != col[None, :])
    return d2


def smote_generate(source: Inventory, cfg: SmoteConfig, return_pairs: bool = False):
    """Interpolate new rows between source rows and their nearest neighbours.

    Each new row picks a base row uniformly, one of its ``k`` nearest
    neighbours uniformly, and a single ``lam ~ U[0, 1]``; numeric cells become
    ``base + lam * (neighbour - base)``.  Categorical cells take the majority
    label among the ``k`` neighbours, preferring the base row's label on ties.

    With ``return_pairs`` also returns ``(base_idx, neighbour_idx, lam)`` arrays.
    """
    n = source.n_rows
    if source.has_missing():
        raise DataError("SMOTE source contains missing cells")
    num = source.schema.numeric_indices()
    if not num:
        raise DataError("SMOTE needs at least one numeric column")
    if cfg.k >= n:
        raise DataError(f"k={cfg.k} must be smaller than the number of source rows ({n})")
    d2 = _smote_distances(source)
    np.fill_diagonal(d2, np.inf)
    neighbours = np.argsort(d2, axis=1, kind="stable")[:, : cfg.k]

    rng = np.random.default_rng(cfg.seed)
    base = rng.integers(n, size=cfg.n_new)
    pick = neighbours[base, rng.integers(cfg.k, size=cfg.n_new)]
    lam = rng.random(cfg.n_new)

    cols = []
    for j, spec in enumerate(source.schema):
        col = source.column(j)
        if spec.is_numeric:
            a, b = col[base], col[pick]
            # rounding must not push a point off its segment
            cols.append(np.clip(a + lam * (b - a), np.minimum(a, b), np.maximum(a, b)))
            continue
        out = np.empty(cfg.n_new, dtype=np.int64)
        for r, b in enumerate(base):
            counts = np.bincount(col[neighbours[b]], minlength=len(spec.categories))
            top = np.flatnonzero(counts == counts.max())
            out[r] = col[b] if col[b] in top else top[0]
        cols.append(out)
    result = Inventory(source.schema, cols)
    if return_pairs:
        return result, (base, pick, lam)
    return result
