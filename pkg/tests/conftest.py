import numpy as np
import pytest

from landsynth.schema import CATEGORICAL, NUMERIC, FeatureSchema, FeatureSpec, Inventory

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def mixed_schema():
    return FeatureSchema((
        FeatureSpec("slope", NUMERIC, unit="deg", allow_missing=True),
        FeatureSpec("soil", CATEGORICAL, allow_missing=True, categories=("clay", "sand")),
        FeatureSpec("area", NUMERIC, unit="m2"),
    ))


@pytest.fixture
def mixed_inventory(mixed_schema):
    return Inventory.from_rows(mixed_schema, [
        (12.5, "clay", 100.0),
        (None, "sand", 250.5),
        (30.25, None, 1e-3),
        (0.1 + 0.2, "clay", 7.0),
        (-4.0, "sand", 123456.789),
    ])


def numeric_inventory(columns: dict[str, np.ndarray]) -> Inventory:
    schema = FeatureSchema(tuple(FeatureSpec(n, NUMERIC) for n in columns))
    return Inventory(schema, list(columns.values()))


@pytest.fixture
def gaussian_pair():
    rng = np.random.default_rng(11)
    z = rng.multivariate_normal([0.0, 5.0], [[1.0, 0.6], [0.6, 2.0]], size=200)
    return numeric_inventory({"a": z[:, 0], "b": z[:, 1]})
