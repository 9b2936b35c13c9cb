import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from flatcount.enumeration import HolonomyMultiset, enumerate_connections, same_holonomies
from flatcount.errors import MatrixError
from flatcount.sl2 import Mat2, act_on_holonomies, act_on_surface, make_matrix
from flatcount.surface import catalog


def test_constructors():
    g = make_matrix("g", math.log(2))
    assert (g.a, g.b, g.c, g.d) == pytest.approx((2, 0, 0, 0.5))
    r = make_matrix("r", math.pi / 2)
    assert np.allclose(r.as_array(), [[0, -1], [1, 0]], atol=1e-12)
    assert make_matrix("g", 0) == Mat2.identity()
    for m in (g, r, Mat2.g(3.7), Mat2.r(2.1)):
        assert abs(m.det - 1) <= 1e-12


def test_raw_rejects_non_unimodular():
    with pytest.raises(MatrixError):
        make_matrix("raw", 1, 1, 0, 2)
    assert make_matrix("raw", 2, 1, 1, 1).is_integral()


@settings(max_examples=50)
@given(a=st.floats(-3, 3), b=st.floats(-3, 3), th=st.floats(0, 7))
def test_opnorm_matches_svd(a, b, th):
    m = Mat2.g(a) @ Mat2.r(th) @ Mat2.g(b)
    assert m.opnorm() == pytest.approx(np.linalg.norm(m.as_array(), 2), rel=1e-9)


def test_act_on_holonomies_basic():
    ms = HolonomyMultiset.from_vectors([(1, 1)], 5)
    img = act_on_holonomies(Mat2.g(math.log(2)), ms)
    assert (img.x[0], img.y[0]) == pytest.approx((2, 0.5))
    assert img.bound == pytest.approx(5 / 2)
    assert len(act_on_holonomies(Mat2.g(1), HolonomyMultiset.empty(3))) == 0


def test_rotation_by_pi_is_symmetry(lorigami):
    ms = enumerate_connections(lorigami, 6)
    assert same_holonomies(act_on_holonomies(Mat2.r(math.pi), ms), ms, 1e-9)


def test_integral_action_stays_exact(torus):
    s = act_on_surface(make_matrix("raw", 2, 1, 1, 1), torus)
    assert s.is_exact
    assert not act_on_surface(Mat2.r(0.1), torus).is_exact


def test_associativity(octagon):
    m1, m2 = Mat2.g(0.3) @ Mat2.r(0.4), Mat2.r(1.2) @ Mat2.g(-0.2)
    a = act_on_surface(m1, act_on_surface(m2, octagon))
    b = act_on_surface(m1 @ m2, octagon)
    assert same_holonomies(enumerate_connections(a, 5), enumerate_connections(b, 5), 1e-9)


def test_equivariance_flowed_lorigami(lorigami):
    m = Mat2.g(0.7) @ Mat2.r(0.2)
    base = enumerate_connections(lorigami, 10 * m.inverse().opnorm())
    image = act_on_holonomies(m, base).truncated(10)
    direct = enumerate_connections(act_on_surface(m, lorigami), 10)
    assert same_holonomies(image, direct, 1e-6)
