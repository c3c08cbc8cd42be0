"""Plausibility-threshold selection and controlled mixing with observed rows."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._stats import round_half_away
from .generator import Candidate
from .schema import CATEGORICAL, DataError, FeatureSpec, Inventory, SchemaError

OBSERVED, SYNTHETIC = "observed", "synthetic"
SOURCE_COLUMN = "__source"


@dataclass(frozen=True)
class SelectionConfig:
    tau: float | None = None
    top_q: float | None = None
    alpha: float = 0.0
    seed: int = 0
    subsample: str = "rank"

    def __post_init__(self):
        if self.tau is not None and self.top_q is not None:
            raise DataError("give either tau or top_q, not both")
        if self.tau is None and self.top_q is None:
            object.__setattr__(self, "top_q", 0.5)
        if self.top_q is not None and not 0.0 < self.top_q <= 1.0:
            raise DataError("top_q must lie in (0, 1]")
        if not 0.0 <= self.alpha < 1.0:
            raise DataError("alpha must lie in [0, 1)")
        if self.subsample not in ("rank", "random"):
            raise DataError("subsample must be 'rank' or 'random'")

    def apply(self, pool: Sequence[Candidate]) -> list[Candidate]:
        if self.tau is not None:
            return select(pool, self.tau)
        return select_top_quantile(pool, self.top_q)


def select(pool: Sequence[Candidate], tau: float) -> list[Candidate]:
    """Keep candidates with ``log_plausibility >= tau``, in pool order."""
    return [c for c in pool if c.log_plausibility >= tau]


def _rank(pool: Sequence[Candidate]) -> list[int]:
    # highest score first, lower pool position wins ties
    return sorted(range(len(pool)), key=lambda k: (-pool[k].log_plausibility, k))


def select_top_quantile(pool: Sequence[Candidate], q: float) -> list[Candidate]:
    """Keep the ``ceil(q * N)`` best-scoring candidates, returned in pool order."""
    if not pool:
        raise DataError("cannot select from an empty pool")
    if not 0.0 < q <= 1.0:
        raise DataError("q must lie in (0, 1]")
    keep = sorted(_rank(pool)[: math.ceil(q * len(pool))])
    return [pool[k] for k in keep]


def synthetic_target(n_observed: int, alpha: float) -> int:
    """Synthetic row count ``s`` such that ``s / (n + s)`` is closest to ``alpha``."""
    if not 0.0 <= alpha < 1.0:
        raise DataError("alpha must lie in [0, 1)")
    return round_half_away(alpha * n_observed / (1.0 - alpha))


@dataclass(frozen=True)
class MixedCorpus:
    rows: Inventory
    source: tuple[str, ...]
    candidate_ids: tuple[int | None, ...]
    alpha: float

    @property
    def n_observed(self) -> int:
        return self.source.count(OBSERVED)

    @property
    def n_synthetic(self) -> int:
        return self.source.count(SYNTHETIC)

    @property
    def realized_alpha(self) -> float:
        return self.n_synthetic / len(self.source) if self.source else 0.0

    def with_source_column(self) -> Inventory:
        spec = FeatureSpec(SOURCE_COLUMN, CATEGORICAL, categories=(OBSERVED, SYNTHETIC))
        codes = np.array([0 if s == OBSERVED else 1 for s in self.source], dtype=np.int64)
        return self.rows.append_columns([spec], [codes])

    def observed(self) -> Inventory:
        return self.rows.take([k for k, s in enumerate(self.source) if s == OBSERVED])

    def metadata(self) -> dict:
        return {
            "alpha": self.alpha,
            "realized_alpha": self.realized_alpha,
            "n_observed": self.n_observed,
            "n_synthetic": self.n_synthetic,
            "synthetic_rows": {
                str(k): cid for k, cid in enumerate(self.candidate_ids) if self.source[k] == SYNTHETIC
            },
        }


def mix(observed: Inventory, accepted: Sequence[Candidate], alpha: float, seed: int = 0,
        subsample: str = "rank") -> MixedCorpus:
    """Append accepted synthetic rows so they make up a fraction ``alpha`` of the corpus.

    When more rows are accepted than needed, the best-scoring ones are kept
    (``subsample="random"`` draws them uniformly with ``seed`` instead).
    """
    n = observed.n_rows
    s = synthetic_target(n, alpha)
    if len(accepted) < s:
        raise DataError(f"alpha={alpha} needs {s} synthetic rows but only {len(accepted)} were accepted "
                        f"(short by {s - len(accepted)})")
    if subsample == "rank":
        chosen = sorted(_rank(accepted)[:s])
    elif subsample == "random":
        chosen = sorted(np.random.default_rng(seed).choice(len(accepted), size=s, replace=False).tolist())
    else:
        raise DataError("subsample must be 'rank' or 'random'")
    picked = [accepted[k] for k in chosen]
    try:
        synth = Inventory.from_rows(observed.schema, [c.row for c in picked])
    except DataError as exc:
        raise SchemaError(f"accepted rows do not match the observed schema: {exc}") from exc
    rows = observed.concat(synth)
    source = (OBSERVED,) * n + (SYNTHETIC,) * s
    ids = (None,) * n + tuple(c.metadata.get("index", k) for k, c in zip(chosen, picked))
    return MixedCorpus(rows, source, ids, alpha)
