import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import circle_average_exact
from flatcount import counting as C
from flatcount.enumeration import HolonomyMultiset, enumerate_connections
from flatcount.errors import CertificateError
from flatcount.sl2 import Mat2
from flatcount.surface import catalog

vec = st.tuples(st.floats(-5, 5), st.floats(-5, 5))


def brute_NA(ms, A, R, diag=True):
    v = ms.holonomies()
    n = 0
    for i, z in enumerate(v):
        for j, w in enumerate(v):
            if not diag and i == j:
                continue
            nz = z[0] ** 2 + z[1] ** 2
            if nz <= R * R and w[0] ** 2 + w[1] ** 2 <= nz and C.virtual_area(z, w) <= A:
                n += 1
    return n


def test_virtual_area():
    assert C.virtual_area((1, 2), (3, 4)) == 2
    assert C.virtual_area((1, 0), (0, 1)) == 1
    assert C.virtual_area((2.5, 1), (2.5, 1)) == 0


@settings(max_examples=100)
@given(z=vec, w=vec, t=st.floats(-2, 2), th=st.floats(0, 7))
def test_virtual_area_invariance(z, w, t, th):
    m = Mat2.g(t) @ Mat2.r(th)
    assert C.virtual_area(m.apply(*z), m.apply(*w)) == pytest.approx(C.virtual_area(z, w), abs=1e-9)
    assert C.virtual_area(z, w) == C.virtual_area(w, z)


def test_count_N(torus_set):
    assert [C.count_N(torus_set, r) for r in (1, 2, 2.5)] == [4, 8, 16]
    with pytest.raises(CertificateError):
        C.count_N(torus_set, 31)


def test_count_pairs_NA_hand_values(torus_set):
    assert C.count_pairs_NA(torus_set, 1, 1) == 16
    assert C.count_pairs_NA(torus_set, 0.5, 1) == 8
    assert C.count_pairs_NA(torus_set, 1, 1.5) == 40
    assert C.count_pairs_Nstar(torus_set, 1, 2) == 24


def test_Nstar_edge_cases(torus_set):
    assert C.count_pairs_Nstar(HolonomyMultiset.empty(10), 1, 5) == 0
    assert C.count_pairs_Nstar(torus_set, 1, 1.5) == C.count_pairs_NA(torus_set, 1, 1.5)


@pytest.mark.parametrize("A,R", [(1, 10), (2.5, 7), (0.3, 9), (4, 6)])
def test_NA_brute_force_torus(torus_set, A, R):
    small = torus_set.truncated(R)
    assert C.count_pairs_NA(torus_set, A, R) == brute_NA(small, A, R)


@pytest.mark.parametrize("A,R", [(1, 6), (0.7, 5)])
def test_NA_brute_force_lorigami(A, R):
    # normalized wedges are integers / 3, so the closed boundary wedge = A is
    # exercised; the oracle works on the integer surface
    ms = enumerate_connections(catalog("L-origami", normalize=True), R)
    big = enumerate_connections(catalog("L-origami"), R * math.sqrt(3))
    k = math.sqrt(3)
    assert C.count_pairs_NA(ms, A, R) == brute_NA(big, 3 * A, R * k)
    assert C.count_pairs_NA(ms, A, R, include_diagonal=False) == brute_NA(big, 3 * A, R * k, diag=False)


def test_NA_monotone(torus_set):
    grid = [(A, R) for A in (0.3, 1, 2) for R in (2, 5, 9)]
    vals = {k: C.count_pairs_NA(torus_set, *k) for k in grid}
    for A, R in grid:
        for A2, R2 in grid:
            if A <= A2 and R <= R2:
                assert vals[(A, R)] <= vals[(A2, R2)]


def test_eval_hA():
    assert C.eval_hA((0, 0.75), (0.1, 0.1), 1) == 1
    assert C.eval_hA((0, 0.25), (0, 0), 1) == 0
    assert C.eval_hA((0.9, 0.8), (0, 0), 1) == 0
    assert C.eval_hA((1, 1), (2, 1), 1) == 1  # closed wedge boundary


def test_in_DA():
    assert C.in_DA((1.5, 0), (0, 0.5), 1, 1, 2)
    assert C.in_DA((1.5, 0), (0, 0.5), 1, 2, 1)
    assert not C.in_DA((0.5, 0), (0, 0.1), 1, 1, 2)
    assert not C.in_DA((1.5, 0), (0, 1), 1, 1, 2)


def test_locus_examples():
    assert C.locus_membership((0, 1.365), (0, 0.1), 1, 1) == C.LocusTag.E1
    assert C.locus_membership((0, 1.5), (0.5, 0), 1, 1) == C.LocusTag.M
    assert C.locus_membership((0.331, 2.718), (0, 0), 1, 1) == C.LocusTag.E3
    assert C.locus_membership((0.331, 2.718), (0, 0), 1, 1, certified=True) == C.LocusTag.E3
    assert C.locus_membership((0, 50), (0, 0), 1, 1) == C.LocusTag.NONE


def test_locus_e2_and_e4():
    # |w| just below |z| in the upper band
    assert C.locus_membership((0, 2.5), (0.1, 2.49), 1, 1) == C.LocusTag.E2
    t = 1.0
    z = Mat2.g(-t).apply(0.3, 0.6)
    w = Mat2.g(-t).apply(1.2, 0.58)
    assert math.hypot(*w) > math.hypot(*z)
    assert C.locus_membership(z, w, 1, t) == C.LocusTag.E4


def test_at_hA_examples():
    ca = C.At_hA_point((0, 0.75), (0, 0), 1, 0, 4096)
    assert abs(ca.value - 0.25) <= max(ca.refinement_error, 1 / 4096)
    assert C.At_hA_point((0, 3 * math.e), (0, 0), 1, 1).value == 0
    assert C.At_hA_point((0, 0.1), (0, 0), 1, 1).value == 0
    with pytest.raises(ValueError):
        C.At_hA_point((0, 1), (0, 0), 1, 0, 100)


@settings(max_examples=40, deadline=None)
@given(r=st.floats(0.3, 3), a=st.floats(0, 2 * math.pi), u=st.floats(-3, 3),
       v=st.floats(-1, 1), t=st.floats(0, 1.5))
def test_at_hA_matches_exact_arcs(r, a, u, v, t):
    z = (r * math.cos(a), r * math.sin(a))
    w = (u * math.cos(a) - v / r * math.sin(a), u * math.sin(a) + v / r * math.cos(a))
    ca = C.At_hA_point(z, w, 1, t, 4096)
    exact = circle_average_exact(z, w, 1, t)
    # every interval endpoint can shift the midpoint count by at most one node
    assert abs(ca.value - exact) <= 12 / 4096
    assert 0 <= ca.value <= 1 and ca.refinement_error >= 0


def test_pointwise_bound_exact_oracle():
    rng = np.random.default_rng(7)
    t = 3.0
    bound = math.atan(math.exp(-2 * t)) / math.pi
    for _ in range(2000):
        r = rng.uniform(math.exp(t) / 2, math.sqrt(2 * math.cosh(2 * t)))
        a = rng.uniform(0, 2 * math.pi)
        u, v = rng.uniform(-25, 25), rng.uniform(-1, 1) / r
        z = (r * math.cos(a), r * math.sin(a))
        w = (u * math.cos(a) - v * math.sin(a), u * math.sin(a) + v * math.cos(a))
        assert circle_average_exact(z, w, 1, t) <= bound * (1 + 1e-9)


def test_sv_transform_pairs(torus_sqrt2, torus_set):
    assert C.sv_transform_pairs(torus_sqrt2, C.HA(1), allow_truncated=True) == 20
    # the w-support of h_A reaches past sqrt(2): (1,1) also pairs with (+-2,+-1)
    assert C.sv_transform_pairs(torus_set, C.HA(1)) == 24
    with pytest.raises(CertificateError):
        C.sv_transform_pairs(torus_sqrt2, C.HA(1))
    assert C.sv_transform_pairs(HolonomyMultiset.empty(10), C.HA(1)) == 0
    assert C.sv_transform_pairs(torus_set, C.BallProduct(1, 1)) == 16
    both = C.HA(1) * C.BallProduct(1, 1)
    assert C.sv_transform_pairs(torus_set, both) == 4


def test_sv_integrand_at_zero(torus_sqrt2):
    assert C.sv_hA_at(torus_sqrt2, 1, Mat2.identity(), allow_truncated=True) == 20


def test_circle_average_periodicity(torus_set):
    vals = [C.sv_hA_at(torus_set, 1, Mat2.g(1) @ Mat2.r(th)) for th in (0.3, 0.3 + math.pi / 2)]
    assert vals[0] == vals[1]


def test_circle_average_certificate(torus_sqrt2):
    with pytest.raises(CertificateError):
        C.circle_average_sv(torus_sqrt2, 1, 1, 64)


@pytest.mark.parametrize("t", [0.0, 1.0, 2.0])
def test_fubini(torus_set, t):
    ca = C.circle_average_sv(torus_set, 1, t, 1024)
    ux, uy, mult = C._unique(torus_set)
    R = C.hA_support_radius(1, t)
    zi, wj = C.wedge_pairs(ux, uy, 1, zmax=R, wmax=R, exact=True)
    vals, _ = C.At_hA_pairs(ux[zi], uy[zi], ux[wj], uy[wj], 1, t, 1024)
    assert abs(ca.value - float(np.sum(mult[zi] * mult[wj] * vals))) <= 1e-9


@pytest.mark.parametrize("t", [1.0, 2.0, 3.0])
def test_decomposition_torus(torus_set, t):
    d = C.decomposition_terms(torus_set, 1, t, 4096)
    assert d.coverage_violations == 0
    assert abs(d.residual) <= d.budget()
    assert abs(d.residual) <= 4 * d.refine_err * math.pi * math.exp(2 * t) + 1e-9


def test_decomposition_empty():
    d = C.decomposition_terms(HolonomyMultiset.empty(100), 1, 1, 256)
    assert (d.m_t, d.e1, d.e2, d.e3, d.e4, d.lhs, d.residual) == (0, 0, 0, 0, 0, 0, 0)


def test_locus_partition_quasi_random():
    from scipy.stats import qmc

    t, A = 1.0, 1.0
    s = qmc.Sobol(4, seed=11).random(2 ** 12)
    et = math.exp(t)
    r = et / 2 + s[:, 0] * (math.sqrt(2 * math.cosh(2 * t)) - et / 2)
    a = 2 * math.pi * s[:, 1]
    u = (2 * s[:, 2] - 1) * C.hA_support_radius(A, t)
    v = (2 * s[:, 3] - 1) * A / r
    zx, zy = r * np.cos(a), r * np.sin(a)
    wx, wy = u * np.cos(a) - v * np.sin(a), u * np.sin(a) + v * np.cos(a)
    val, err = C.At_hA_pairs(zx, zy, wx, wy, A, t, 1024)
    zn2, wn2 = zx ** 2 + zy ** 2, wx ** 2 + wy ** 2
    masks = C._locus_masks(np.sqrt(zn2), zn2, np.sqrt(wn2), wn2,
                           C._wedge_ok(np.abs(zx * wy - zy * wx), A), val > 0, t)
    fired = sum(m.astype(int) for m in masks.values())
    chi = (np.sqrt(zn2) > et / 2) & (np.sqrt(zn2) < et) & (wn2 <= zn2)
    d = chi - math.pi * math.exp(2 * t) * val
    assert fired.max() <= 1
    assert not np.any((fired == 0) & (d != 0))


def test_near_degenerate_pair():
    assert C.near_degenerate_pair((0, 1), (0.5, 0.99), 1, eps_prime=0.02)
    assert C.near_degenerate_pair((0, 1), (0.99, 0), 1, eps_prime=0.02)
    assert not C.near_degenerate_pair((0, 0.75), (0, 0.5), 1, L_prime=1, eps_prime=0.01)
    assert not C.near_degenerate_pair((0, 1), (0.5, 0.99), 1, L=0.5, eps_prime=0.02)


def test_region_params():
    p = C.RegionParams(A=1, t=2, R=5)
    assert p.L_prime == 1
    with pytest.raises(ValueError):
        C.RegionParams(A=-1)
    with pytest.raises(ValueError):
        C.RegionParams(L_prime=0.7)
