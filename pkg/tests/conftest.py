import numpy as np
import pytest

from driftml.data import Batch, Feature, Schema
from driftml.search import LibraryMember, ModelLibrary


@pytest.fixture
def numeric_schema():
    return Schema(
        features=(Feature("x1"), Feature("x2")),
        label_name="y",
        classes=("a", "b"),
    )


@pytest.fixture
def mixed_schema():
    return Schema(
        features=(Feature("a"), Feature("b", ("red", "green"))),
        label_name="y",
        classes=("0", "1"),
    )


def make_batch(schema, X, y, index=0):
    return Batch(schema, np.asarray(X, dtype=float), np.asarray(y, dtype=np.int64), index)


def stub_library(probas, y_true, metric="accuracy"):
    """Library of prediction-only members for selection tests."""
    from driftml.metrics import score

    schema = Schema(
        features=(Feature("x"),),
        label_name="y",
        classes=tuple(str(c) for c in range(int(np.asarray(probas[0]).shape[1]))),
    )
    y = np.asarray(y_true, dtype=np.int64)
    val = Batch(schema, np.zeros((y.size, 1)), y)
    members = tuple(
        LibraryMember(None, np.asarray(p, dtype=float), score(metric, y, np.asarray(p)))
        for p in probas
    )
    return ModelLibrary(members, val, val, metric)
