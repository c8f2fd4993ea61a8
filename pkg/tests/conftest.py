"""Shared fixtures: the census benchmark and small hand-checkable datasets."""
import pathlib
import sys

import numpy as np
import pytest

from rrkit.dataset import AttributeSchema, Dataset, load_csv, parse_schema_spec

DATA_DIR = pathlib.Path(__file__).resolve().parent.parent / "data"


@pytest.fixture(scope="session")
def adult() -> Dataset:
    spec = parse_schema_spec((DATA_DIR / "adult_schema.txt").read_text())
    data, _report = load_csv(DATA_DIR / "adult.csv", spec)
    return data


@pytest.fixture(scope="session")
def adult6() -> Dataset:
    """The census benchmark concatenated six times: same distribution, 6x records."""
    spec = parse_schema_spec((DATA_DIR / "adult_schema.txt").read_text())
    data, _report = load_csv(DATA_DIR / "adult.csv", spec, repeat=6)
    return data


@pytest.fixture()
def toy_pair() -> Dataset:
    """Ten records, two binary attributes: 4x(0,0), 2x(1,0), 4x(1,1).

    Small enough to trace every computation by hand; strongly dependent
    (the combination (0,1) never occurs).
    """
    schema = [
        AttributeSchema("left", ("a", "b")),
        AttributeSchema("right", ("x", "y")),
    ]
    rows = [(0, 0)] * 4 + [(1, 0)] * 2 + [(1, 1)] * 4
    return Dataset(schema, np.array(rows, dtype=np.int64))


@pytest.fixture()
def product_form() -> Dataset:
    """A dataset whose joint distribution factorizes exactly.

    Full factorial grid over sizes (2, 3) repeated 4 times: every marginal
    is uniform and the joint equals the product of marginals, so methods
    that assume independence are exact on it.
    """
    schema = [
        AttributeSchema("first", ("a", "b")),
        AttributeSchema("second", ("x", "y", "z")),
    ]
    grid = [(i, j) for i in range(2) for j in range(3)] * 4
    return Dataset(schema, np.array(grid, dtype=np.int64))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Replay the acceptance suite's guarantee lines after the run.

    The tests run under fd-level capture, so the per-guarantee PASS/FAIL
    lines would otherwise only surface for failures.
    """
    module = sys.modules.get("test_acceptance")
    records = getattr(module, "RECORDS", None)
    if not records:
        return
    terminalreporter.section("behavioral guarantees")
    for label, ok in records:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label}")
