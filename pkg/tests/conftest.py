from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from egoflow.timegraph import TimeGraph


def random_records(rng, n_records, n_nodes, t_max=10_000, with_origin=True):
    """Raw (src, dst, ts[, origin]) tuples, duplicates and self-loops included."""
    src = rng.integers(0, n_nodes, size=n_records)
    dst = rng.integers(0, n_nodes, size=n_records)
    ts = rng.integers(0, t_max, size=n_records)
    if not with_origin:
        return list(zip(src.tolist(), dst.tolist(), ts.tolist()))
    origin = rng.choice(["s", "r", ""], size=n_records, p=[0.7, 0.2, 0.1])
    return list(zip(src.tolist(), dst.tolist(), ts.tolist(), origin.tolist()))


@pytest.fixture
def small_graph():
    records = [
        ("a", "b", 100, "s"),
        ("a", "c", 200, "r"),
        ("b", "c", 150, "s"),
        ("c", "a", 300, ""),
        ("b", "a", 400, "s"),
    ]
    return TimeGraph.from_records(records), records


@pytest.fixture
def rng():
    return np.random.default_rng(2024)
