import math

import pytest
from hypothesis import given, settings, strategies as st

from flatcount.delaunay import (delaunay_flips, delaunayize, flip, incircle, incircle_points,
                                max_incircle, systole)
from flatcount.enumeration import enumerate_connections, same_holonomies
from flatcount.errors import GeometryError
from flatcount.sl2 import Mat2, act_on_surface
from flatcount.surface import TranslationSurface, catalog, check, stratum, total_area


def test_incircle_points_signs():
    assert incircle_points((0, 0), (1, 0), (0, 1), (2, 2)) < 0
    assert incircle_points((0, 0), (1, 0), (0, 1), (0.5, 0.5)) > 0


def test_square_diagonal_is_cocircular(torus):
    assert abs(incircle(torus, (0, 2))) <= 1e-12
    for edge, _ in torus.edge_pairs():
        assert incircle(torus, edge) <= 1e-12


def test_degenerate_triangle_rejected():
    flat = TranslationSurface((((1.0, 0.0), (1.0, 0.0), (-2.0, 0.0)),
                               ((-1.0, 0.0), (-1.0, 0.0), (2.0, 0.0))), (3, 4, 5, 0, 1, 2))
    with pytest.raises(GeometryError):
        incircle(flat, (0, 0))


def test_torus_needs_no_flips(torus):
    assert delaunay_flips(torus)[1] == 0


def test_flip_is_an_involution_up_to_relabelling(lorigami):
    s = flip(lorigami, (0, 2))
    check(s)
    assert total_area(s) == total_area(lorigami)
    assert stratum(s) == stratum(lorigami)


@pytest.mark.parametrize("name", ["torus", "L-origami", "regular-octagon"])
@pytest.mark.parametrize("t", [0.5, 1.0, 2.0])
def test_delaunayize_distorted(name, t):
    s = act_on_surface(Mat2.g(t) @ Mat2.r(0.3), catalog(name))
    d, _ = delaunay_flips(s)
    assert max_incircle(d) <= 1e-9
    assert total_area(d) == pytest.approx(total_area(s), rel=1e-12)
    assert stratum(d) == stratum(s)
    assert delaunay_flips(d)[1] == 0


def test_delaunay_keeps_holonomies(octagon):
    s = act_on_surface(Mat2.g(0.5), octagon)
    a = enumerate_connections(s, 4.0)
    b = enumerate_connections(delaunayize(s), 4.0)
    assert same_holonomies(a, b, 1e-9)


@pytest.mark.parametrize("name,value", [("torus", 1.0), ("L-origami", 1.0)])
def test_systole_catalog(name, value):
    assert systole(catalog(name)) == pytest.approx(value, abs=1e-12)


def test_systole_flowed_torus(torus):
    assert abs(systole(act_on_surface(Mat2.g(1.0), torus)) - math.exp(-1)) <= 1e-9


@settings(max_examples=15, deadline=None)
@given(t=st.floats(0, 2.5), th=st.floats(0, math.pi))
def test_systole_of_flowed_torus_is_lattice_minimum(t, th):
    m = Mat2.g(t) @ Mat2.r(th)
    s = act_on_surface(m, catalog("torus"))
    n = 12
    best = min(math.hypot(*m.apply(p, q)) for p in range(-n, n + 1) for q in range(-n, n + 1)
               if (p or q) and math.gcd(p, q) == 1)
    assert systole(s) == pytest.approx(best, rel=1e-9)
