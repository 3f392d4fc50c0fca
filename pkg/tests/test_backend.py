from __future__ import annotations

import os
import random
import subprocess
import sys

import pytest
from hypothesis import given, settings
from hypothesis import strategies as hst

from artifact import _pykernels as py

cy = pytest.importorskip("artifact._kernels")


edge_lists = hst.integers(1, 30).flatmap(lambda n: hst.tuples(
    hst.just(n), hst.integers(1, 3)).flatmap(lambda nr: hst.tuples(
        hst.just(nr[0]), hst.just(nr[1]),
        hst.lists(hst.tuples(hst.integers(0, nr[0] - 1), hst.integers(0, nr[1] - 1),
                             hst.integers(0, nr[0] - 1)), max_size=60))))


@settings(max_examples=150, deadline=None)
@given(edge_lists)
def test_fold_edges_agree(case):
    n, rank, edges = case
    a = py.fold_edges(n, rank, edges)
    b = cy.fold_edges(n, rank, edges)
    for x, y in zip(a, b):
        assert list(x) == list(y)


def test_read_all_agree():
    rng = random.Random(5)
    for rank in (1, 2, 3):
        for _ in range(20):
            n = rng.randint(1, 25)
            edges = [(rng.randrange(n), rng.randrange(rank), rng.randrange(n))
                     for _ in range(rng.randint(0, 3 * n))]
            root, out, inn = py.fold_edges(n, rank, edges)
            base = root[0]
            for maxlen in (0, 1, 4, 6):
                assert bytes(py.read_all(out, inn, rank, base, maxlen)) == \
                    bytes(cy.read_all(out, inn, rank, base, maxlen))


def test_env_forces_fallback():
    code = "from artifact._backend import BACKEND; print(BACKEND)"
    env = dict(os.environ, ARTIFACT_PURE_PYTHON="1")
    res = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert res.stdout.strip() == "python"
    env.pop("ARTIFACT_PURE_PYTHON")
    res = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert res.stdout.strip() == "compiled"
