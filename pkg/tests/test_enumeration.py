import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import primitive_count, primitive_vectors
from flatcount.enumeration import (HolonomyMultiset, enumerate_connections, enumerate_origami,
                                   same_holonomies, trace_separatrix)
from flatcount.errors import BudgetError, ModeError
from flatcount.sl2 import Mat2, act_on_surface
from flatcount.surface import catalog, random_origami


def test_torus_small(torus):
    ms = enumerate_connections(torus, 2)
    assert sorted(ms.holonomies()) == primitive_vectors(2)
    assert len(ms) == 8


def test_torus_below_systole(torus):
    assert len(enumerate_connections(torus, 0.5)) == 0


def test_lorigami_unit(lorigami):
    ms = enumerate_connections(lorigami, 1)
    assert ms.counter() == Counter({(1, 0): 3, (-1, 0): 3, (0, 1): 3, (0, -1): 3})


@pytest.mark.parametrize("L", [3, 7.5, 20])
def test_torus_matches_gcd_oracle(torus, L):
    ms = enumerate_connections(torus, L)
    assert sorted(ms.holonomies()) == primitive_vectors(L)


def test_entries_are_well_formed(lorigami):
    ms = enumerate_connections(lorigami, 8)
    assert np.all(ms.lengths <= 8)
    assert np.all(ms.lengths > 0)
    assert set(ms.start) | set(ms.end) == {0}
    c = ms.counter()
    assert all(c[(-x, -y)] == k for (x, y), k in c.items())


def test_sorted_output_is_canonical(lorigami):
    a = enumerate_connections(lorigami, 6)
    b = a.sorted()
    assert a.holonomies() == b.holonomies()


def test_threads_do_not_change_result(lorigami, monkeypatch):
    a = enumerate_connections(lorigami, 10, threads=1)
    b = enumerate_connections(lorigami, 10, threads=2)
    assert a.holonomies() == b.holonomies()
    assert list(a.start) == list(b.start) and list(a.sheet) == list(b.sheet)


def test_budget_cap(torus):
    with pytest.raises(BudgetError):
        enumerate_connections(torus, 1e6)
    with pytest.raises(BudgetError):
        enumerate_connections(torus, 20, max_connections=10)


def test_collapse(lorigami):
    ms = enumerate_connections(lorigami, 1, collapse=True)
    assert ms.collapsed and len(ms) == 4


def test_trace_torus_horizontal(torus):
    sc = trace_separatrix(torus, 0, 0, (1, 0), 5)
    assert sc.holonomy == (1, 0) and sc.length == 1


def test_trace_irrational_slope(torus):
    phi = (1 + math.sqrt(5)) / 2
    assert trace_separatrix(torus, 0, 0, (1.0, phi), 100) is None


def test_trace_lorigami_three_sheets(lorigami):
    hits = [trace_separatrix(lorigami, 0, s, (1, 0), 5) for s in range(3)]
    assert all(h is not None and h.holonomy == (1, 0) for h in hits)
    assert len({h.sheet for h in hits}) == 3


@pytest.mark.parametrize("name,L", [("torus", 10), ("torus", 50), ("L-origami", 5), ("L-origami", 30)])
def test_origami_oracle_agrees(name, L):
    s = catalog(name)
    a = enumerate_connections(s, L)
    b = enumerate_origami(s, L)
    assert a.counter() == b.counter()
    key = lambda m: sorted(zip(m.holonomies(), m.start.tolist(), m.end.tolist(), m.sheet.tolist()))
    assert key(a) == key(b)


def test_origami_oracle_lorigami_unit(lorigami):
    assert len(enumerate_origami(lorigami, 1)) == 12


def test_origami_oracle_rejects_float(octagon):
    with pytest.raises(ModeError):
        enumerate_origami(octagon, 3)


@settings(max_examples=10, deadline=None)
@given(n=st.integers(2, 6), seed=st.integers(0, 1000), L=st.floats(1, 9))
def test_random_origami_oracle_agrees(n, seed, L):
    s = random_origami(n, seed)
    assert enumerate_connections(s, L).counter() == enumerate_origami(s, L).counter()


def test_torus_density_200(torus):
    n = len(enumerate_connections(torus, 200))
    assert n == primitive_count(200)
    assert 1.87 <= n / 200 ** 2 <= 1.95


def test_triangulation_independence(octagon):
    s = act_on_surface(Mat2.g(0.4) @ Mat2.r(1.0), octagon)
    assert same_holonomies(enumerate_connections(s, 5), enumerate_connections(s, 5, delaunay=True), 1e-9)


def test_scaled_enumeration(lorigami):
    a = enumerate_connections(catalog("L-origami", normalize=True), 10 / math.sqrt(3))
    b = enumerate_connections(lorigami, 10).scaled(1 / math.sqrt(3))
    assert same_holonomies(a, b, 1e-9)


def test_same_holonomies_detects_difference():
    a = HolonomyMultiset.from_vectors([(1, 0), (1, 0)], 2)
    b = HolonomyMultiset.from_vectors([(1, 0), (1, 1e-3)], 2)
    assert not same_holonomies(a, b, 1e-6)
    assert same_holonomies(a, a, 0)
