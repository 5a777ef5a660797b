import json

import numpy as np
import pytest

from surrhet.data import ColumnSchema, write_csv
from surrhet.simulation import generate


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


@pytest.fixture
def setting1_small():
    """A fixed, modest setting-1 draw shared by data/estimator tests."""
    return generate(1, np.random.default_rng(99), n=800)


@pytest.fixture
def csv_factory(tmp_path):
    """Write a dataset (or raw text) to a temp CSV and return its path."""

    def _write(dataset=None, text=None, name="data.csv"):
        path = tmp_path / name
        if text is not None:
            path.write_text(text, encoding="utf-8")
        else:
            write_csv(dataset, path)
        return path

    return _write


@pytest.fixture
def schema_file(tmp_path):
    def _write(covariates=("x1", "x2", "x3", "x4", "x5", "x6"), name="schema.json", **overrides):
        payload = {
            "outcome": "y",
            "surrogate": "s",
            "group": "g",
            "covariates": list(covariates),
        }
        payload.update(overrides)
        path = tmp_path / name
        path.write_text(json.dumps(payload), encoding="utf-8")
        return path

    return _write


@pytest.fixture
def default_schema():
    return ColumnSchema("y", "s", "g", ("x1", "x2", "x3", "x4", "x5", "x6"))
