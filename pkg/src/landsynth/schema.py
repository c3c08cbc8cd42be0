"""Tabular data model: feature schemas, inventories, CSV/JSON I/O and validation.

Cells are plain Python values: ``float`` for numeric cells, ``str`` for
category labels and ``None`` (:data:`MISSING`) for missing cells.  Internally
an :class:`Inventory` stores one read-only numpy array per column: float64
with NaN marking missing numeric cells, and int64 category codes with ``-1``
marking missing categorical cells.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

NUMERIC = "numeric"
CATEGORICAL = "categorical"
ORDINAL = "ordinal"
KINDS = (NUMERIC, CATEGORICAL, ORDINAL)

MISSING = None
MISSING_TOKENS = ("", "NA")


class DataError(ValueError):
    """Raised when data violates a schema or an operation's precondition."""


class SchemaError(DataError):
    """Raised for malformed schemas or schema mismatches."""


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    kind: str = NUMERIC
    unit: str = ""
    allow_missing: bool = False
    categories: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "categories", tuple(str(c) for c in self.categories))
        if not isinstance(self.name, str) or not self.name:
            raise SchemaError("feature name must be a non-empty string")
        if self.kind not in KINDS:
            raise SchemaError(f"feature {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == NUMERIC:
            if self.categories:
                raise SchemaError(f"numeric feature {self.name!r} cannot list categories")
        else:
            if not self.categories:
                raise SchemaError(f"feature {self.name!r} needs at least one category")
            if len(set(self.categories)) != len(self.categories):
                raise SchemaError(f"feature {self.name!r} has duplicate category labels")

    @property
    def is_numeric(self) -> bool:
        return self.kind == NUMERIC

    def code_of(self, label: str) -> int:
        try:
            return self.categories.index(label)
        except ValueError:
            raise DataError(f"unknown category {label!r} for feature {self.name!r}") from None

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "unit": self.unit,
            "allow_missing": self.allow_missing,
            "categories": list(self.categories),
        }


@dataclass(frozen=True)
class FeatureSchema:
    features: tuple[FeatureSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(self.features))
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise SchemaError(f"duplicate feature names in {names}")

    def __len__(self) -> int:
        return len(self.features)

    def __iter__(self):
        return iter(self.features)

    def __getitem__(self, key: int | str) -> FeatureSpec:
        if isinstance(key, str):
            return self.features[self.index(key)]
        return self.features[key]

    @property
    def names(self) -> list[str]:
        return [f.name for f in self.features]

    def index(self, name: str) -> int:
        for i, f in enumerate(self.features):
            if f.name == name:
                return i
        raise SchemaError(f"no feature named {name!r}")

    def numeric_indices(self) -> list[int]:
        return [i for i, f in enumerate(self.features) if f.is_numeric]

    def replace(self, name: str, spec: FeatureSpec) -> "FeatureSchema":
        i = self.index(name)
        feats = list(self.features)
        feats[i] = spec
        return FeatureSchema(tuple(feats))

    def to_dict(self) -> dict:
        return {"features": [f.to_dict() for f in self.features]}

    @classmethod
    def from_dict(cls, doc: dict) -> "FeatureSchema":
        try:
            feats = [
                FeatureSpec(
                    name=f["name"],
                    kind=f.get("kind", NUMERIC),
                    unit=f.get("unit", ""),
                    allow_missing=bool(f.get("allow_missing", False)),
                    categories=tuple(f.get("categories", ())),
                )
                for f in doc["features"]
            ]
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"malformed schema document: {exc}") from exc
        return cls(tuple(feats))


def load_schema(path: str | Path) -> FeatureSchema:
    with open(path, encoding="utf-8") as fh:
        return FeatureSchema.from_dict(json.load(fh))


def save_schema(schema: FeatureSchema, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(schema.to_dict(), fh, indent=2)
        fh.write("\n")


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


class Inventory:
    """Immutable table of rows conforming to a :class:`FeatureSchema`.

    Build one with :meth:`from_rows` (cell values) or :meth:`from_columns`
    (encoded arrays). Both validate every invariant.
    """

    __slots__ = ("schema", "_columns")

    def __init__(self, schema: FeatureSchema, columns: Sequence[np.ndarray]):
        if len(columns) != len(schema):
            raise DataError(f"expected {len(schema)} columns, got {len(columns)}")
        cols = []
        n = None
        for spec, col in zip(schema, columns):
            col = np.asarray(col)
            if col.ndim != 1:
                raise DataError(f"column {spec.name!r} must be one-dimensional")
            if n is None:
                n = col.shape[0]
            elif col.shape[0] != n:
                raise DataError("columns have unequal lengths")
            if spec.is_numeric:
                col = col.astype(np.float64)
                missing = np.isnan(col)
                if np.isinf(col).any():
                    raise DataError(f"column {spec.name!r} contains non-finite values")
            else:
                if col.size and not np.issubdtype(col.dtype, np.integer):
                    raise DataError(f"column {spec.name!r} must hold integer category codes")
                col = col.astype(np.int64)
                if ((col < -1) | (col >= len(spec.categories))).any():
                    raise DataError(f"column {spec.name!r} holds an out-of-range category code")
                missing = col == -1
            if missing.any() and not spec.allow_missing:
                raise DataError(f"missing value in non-nullable column {spec.name!r}")
            cols.append(_readonly(col))
        object.__setattr__(self, "schema", schema)
        object.__setattr__(self, "_columns", tuple(cols))

    def __setattr__(self, key, value):
        raise AttributeError("Inventory is immutable")

    @classmethod
    def from_columns(cls, schema: FeatureSchema, columns: Sequence[np.ndarray]) -> "Inventory":
        return cls(schema, columns)

    @classmethod
    def from_rows(cls, schema: FeatureSchema, rows: Iterable[Sequence]) -> "Inventory":
        rows = [tuple(r) for r in rows]
        d = len(schema)
        for i, r in enumerate(rows):
            if len(r) != d:
                raise DataError(f"row {i} has {len(r)} cells, expected {d}")
        cols = []
        for j, spec in enumerate(schema):
            if spec.is_numeric:
                col = np.empty(len(rows), dtype=np.float64)
                for i, r in enumerate(rows):
                    v = r[j]
                    if v is MISSING:
                        col[i] = np.nan
                    elif isinstance(v, (str, bool)):
                        raise DataError(f"row {i}, column {spec.name!r}: expected a number, got {v!r}")
                    else:
                        v = float(v)
                        if not math.isfinite(v):
                            raise DataError(f"row {i}, column {spec.name!r}: non-finite number")
                        col[i] = v
            else:
                col = np.empty(len(rows), dtype=np.int64)
                for i, r in enumerate(rows):
                    v = r[j]
                    col[i] = -1 if v is MISSING else spec.code_of(str(v))
            cols.append(col)
        return cls(schema, cols)

    @classmethod
    def empty(cls, schema: FeatureSchema) -> "Inventory":
        return cls(schema, [np.empty(0, np.float64 if f.is_numeric else np.int64) for f in schema])

    # -- access -------------------------------------------------------------
    @property
    def n_rows(self) -> int:
        return 0 if not self._columns else int(self._columns[0].shape[0])

    def __len__(self) -> int:
        return self.n_rows

    @property
    def d(self) -> int:
        return len(self.schema)

    def column(self, key: int | str) -> np.ndarray:
        """Encoded column: float64 (NaN = missing) or int64 codes (-1 = missing)."""
        idx = self.schema.index(key) if isinstance(key, str) else key
        return self._columns[idx]

    @property
    def columns(self) -> tuple[np.ndarray, ...]:
        return self._columns

    def missing_mask(self, key: int | str) -> np.ndarray:
        idx = self.schema.index(key) if isinstance(key, str) else key
        col = self._columns[idx]
        return np.isnan(col) if self.schema[idx].is_numeric else col == -1

    def has_missing(self) -> bool:
        return any(self.missing_mask(j).any() for j in range(self.d))

    def cell(self, i: int, j: int | str):
        j = self.schema.index(j) if isinstance(j, str) else j
        spec = self.schema[j]
        v = self._columns[j][i]
        if spec.is_numeric:
            return MISSING if np.isnan(v) else float(v)
        return MISSING if v < 0 else spec.categories[v]

    def row(self, i: int) -> tuple:
        return tuple(self.cell(i, j) for j in range(self.d))

    def rows(self) -> list[tuple]:
        return [self.row(i) for i in range(self.n_rows)]

    def numeric_matrix(self, names: Sequence[str] | None = None) -> np.ndarray:
        """Stack numeric columns (all of them by default) into an ``(n, k)`` array."""
        idx = self.schema.numeric_indices() if names is None else [self.schema.index(n) for n in names]
        if not idx:
            return np.empty((self.n_rows, 0))
        return np.column_stack([self._columns[j] for j in idx])

    # -- derivation ---------------------------------------------------------
    def take(self, indices: Sequence[int]) -> "Inventory":
        idx = np.asarray(indices, dtype=np.int64)
        return Inventory(self.schema, [c[idx] for c in self._columns])

    def with_column(self, name: str, spec: FeatureSpec, values: np.ndarray) -> "Inventory":
        """Return a copy where column ``name`` is replaced by ``values`` under ``spec``."""
        j = self.schema.index(name)
        cols = list(self._columns)
        cols[j] = values
        return Inventory(self.schema.replace(name, spec), cols)

    def append_columns(self, specs: Sequence[FeatureSpec], values: Sequence[np.ndarray]) -> "Inventory":
        schema = FeatureSchema(self.schema.features + tuple(specs))
        return Inventory(schema, list(self._columns) + list(values))

    def drop_columns(self, names: Sequence[str]) -> "Inventory":
        keep = [j for j, f in enumerate(self.schema) if f.name not in set(names)]
        schema = FeatureSchema(tuple(self.schema[j] for j in keep))
        return Inventory(schema, [self._columns[j] for j in keep])

    def concat(self, other: "Inventory") -> "Inventory":
        if other.schema != self.schema:
            raise SchemaError("cannot concatenate inventories with different schemas")
        return Inventory(self.schema, [np.concatenate([a, b]) for a, b in zip(self._columns, other._columns)])

    def fingerprint(self) -> str:
        h = hashlib.sha256(json.dumps(self.schema.to_dict(), sort_keys=True).encode())
        for col in self._columns:
            h.update(np.ascontiguousarray(col).tobytes())
        return h.hexdigest()

    def equals(self, other: "Inventory") -> bool:
        if self.schema != other.schema or self.n_rows != other.n_rows:
            return False
        for spec, a, b in zip(self.schema, self._columns, other._columns):
            if spec.is_numeric:
                if not np.array_equal(a, b, equal_nan=True):
                    return False
            elif not np.array_equal(a, b):
                return False
        return True

    def __eq__(self, other):
        return isinstance(other, Inventory) and self.equals(other)

    __hash__ = None

    def __repr__(self) -> str:
        return f"Inventory(n_rows={self.n_rows}, features={self.schema.names})"


# -- CSV I/O -----------------------------------------------------------------

def _parse_number(text: str) -> float | None:
    try:
        v = float(text)
    except ValueError:
        return None
    return v if math.isfinite(v) else None


def _read_table(path: str | Path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        body = [r for r in reader if r]
    return header, body


def _parse_cell(spec: FeatureSpec, text: str):
    if text in MISSING_TOKENS:
        return MISSING
    if spec.is_numeric:
        v = _parse_number(text)
        if v is None:
            raise DataError(f"column {spec.name!r}: cannot parse {text!r} as a finite number")
        return v
    if text not in spec.categories:
        raise DataError(f"column {spec.name!r}: unknown category {text!r}")
    return text


def load_csv(path: str | Path, schema: FeatureSchema, ignore_prefix: str | None = None) -> Inventory:
    """Parse a CSV whose header lists the schema's features in order.

    Columns whose names start with ``ignore_prefix`` (e.g. ``"__"`` for
    provenance columns) are dropped before the header check.
    """
    header, body = _read_table(path)
    if ignore_prefix:
        keep = [k for k, h in enumerate(header) if not h.startswith(ignore_prefix)]
        header = [header[k] for k in keep]
        body = [[r[k] for k in keep if k < len(r)] for r in body]
    if header != schema.names:
        raise SchemaError(f"{path}: header {header} does not match schema {schema.names}")
    rows = []
    for lineno, raw in enumerate(body, start=2):
        if len(raw) != len(schema):
            raise DataError(f"{path}:{lineno}: expected {len(schema)} fields, got {len(raw)}")
        try:
            rows.append(tuple(_parse_cell(spec, t) for spec, t in zip(schema, raw)))
        except DataError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from None
    try:
        return Inventory.from_rows(schema, rows)
    except DataError as exc:
        raise DataError(f"{path}: {exc}") from None


def format_number(v: float) -> str:
    return format(v, ".17g")


def format_cell(spec: FeatureSpec, v) -> str:
    if v is MISSING:
        return ""
    return format_number(v) if spec.is_numeric else str(v)


def save_csv(inv: Inventory, path: str | Path, extra: dict[str, Sequence[str]] | None = None) -> None:
    """Write ``inv`` as CSV; ``extra`` appends pre-formatted columns after the schema ones."""
    extra = extra or {}
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(inv.schema.names + list(extra))
        for i in range(inv.n_rows):
            cells = [format_cell(spec, inv.cell(i, j)) for j, spec in enumerate(inv.schema)]
            w.writerow(cells + [str(v[i]) for v in extra.values()])


def infer_schema(path: str | Path) -> FeatureSchema:
    header, body = _read_table(path)
    if len(set(header)) != len(header):
        raise SchemaError(f"{path}: duplicate header names")
    feats = []
    for j, name in enumerate(header):
        values = [r[j] for r in body if j < len(r) and r[j] not in MISSING_TOKENS]
        if all(_parse_number(v) is not None for v in values):
            feats.append(FeatureSpec(name, NUMERIC, allow_missing=True))
        else:
            feats.append(FeatureSpec(name, CATEGORICAL, allow_missing=True, categories=tuple(dict.fromkeys(values))))
    return FeatureSchema(tuple(feats))


# -- validation --------------------------------------------------------------

@dataclass(frozen=True)
class ValidationReport:
    duplicate_row_indices: list[int]
    type_violations: list[tuple[int, str, str]] = field(default_factory=list)
    missing_counts: dict[str, int] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.duplicate_row_indices and not self.type_violations

    def to_dict(self) -> dict:
        return {
            "duplicate_row_indices": list(self.duplicate_row_indices),
            "type_violations": [list(v) for v in self.type_violations],
            "missing_counts": dict(self.missing_counts),
        }


def _duplicates(keys: Sequence) -> list[int]:
    seen: set = set()
    dups = []
    for i, k in enumerate(keys):
        if k in seen:
            dups.append(i)
        else:
            seen.add(k)
    return dups


def _row_key(inv: Inventory, i: int) -> tuple:
    # NaN != NaN, so key missing cells explicitly.
    return tuple(("<missing>",) if v is MISSING else v for v in inv.row(i))


def validate(inv: Inventory) -> ValidationReport:
    """Report duplicate rows and per-column missing counts. Never raises."""
    keys = [_row_key(inv, i) for i in range(inv.n_rows)]
    missing = {f.name: int(inv.missing_mask(j).sum()) for j, f in enumerate(inv.schema)}
    return ValidationReport(_duplicates(keys), [], missing)


def scan_csv(path: str | Path, schema: FeatureSchema) -> ValidationReport:
    """Like :func:`validate`, but on a raw CSV: type problems are collected, not raised.

    Row indices are zero-based data rows (the header is not counted).
    """
    header, body = _read_table(path)
    if header != schema.names:
        raise SchemaError(f"{path}: header {header} does not match schema {schema.names}")
    violations = []
    missing = {f.name: 0 for f in schema}
    for i, raw in enumerate(body):
        if len(raw) != len(schema):
            violations.append((i, "*", f"expected {len(schema)} fields, got {len(raw)}"))
            continue
        for spec, text in zip(schema, raw):
            if text in MISSING_TOKENS:
                missing[spec.name] += 1
                if not spec.allow_missing:
                    violations.append((i, spec.name, "missing value in non-nullable column"))
                continue
            try:
                _parse_cell(spec, text)
            except DataError as exc:
                violations.append((i, spec.name, str(exc)))
    keys = [tuple(None if t in MISSING_TOKENS else t for t in r) for r in body]
    return ValidationReport(_duplicates(keys), violations, missing)


def dedupe(inv: Inventory) -> Inventory:
    dups = set(validate(inv).duplicate_row_indices)
    return inv.take([i for i in range(inv.n_rows) if i not in dups])
