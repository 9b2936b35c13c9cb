"""Counting functions, region indicators, Siegel-Veech sums and circle averages.

Conventions used throughout:

* pairs are ordered and drawn from the multiset with multiplicity; ``z = w``
  is allowed unless ``include_diagonal=False``;
* norm band inequalities are strict, wedge and trapezoid inequalities closed;
  the ``|w| <= |z|`` comparison is closed both in ``N_A`` and in ``D_A``;
* closed comparisons on floating data carry a relative slack of ``1e-9``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import CertificateError
from .sl2 import Mat2

REL = 1e-9
DEFAULT_THETA = 4096


@dataclass(frozen=True)
class RegionParams:
    """Parameters of the counting regions and of the exceptional pair set."""

    A: float = 1.0
    t: float = 0.0
    R: float = 1.0
    L: float = 1.0
    L_prime: float = 1.0
    eps_prime: float = 0.01
    eps_hat: float = 0.01

    def __post_init__(self):
        for name in ("A", "t", "R", "eps_prime", "eps_hat"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0 or (v == 0 and name != "t"):
                raise ValueError(f"{name} must be finite and positive, got {v}")
        if not math.isfinite(self.L):
            raise ValueError("L must be finite")
        if self.L_prime not in (0.5, 1.0):
            raise ValueError("L_prime must be 1/2 or 1")


# ---------------------------------------------------------------------------
# scalar predicates

def virtual_area(z, w) -> float:
    return abs(z[0] * w[1] - z[1] * w[0])


def _wedge_ok(wedge, A):
    return wedge <= A + REL * max(A, 1.0)


def _w_le_z(wn2, zn2, exact=False):
    if exact:
        return wn2 <= zn2
    return wn2 <= zn2 * (1 + REL)


def eval_hA(z, w, A: float) -> int:
    """Indicator of the fibered trapezoid."""
    zx, zy = z
    wx, wy = w
    ok = (0.5 <= zy <= 1.0 and abs(zx) <= zy and abs(wy) <= zy
          and _wedge_ok(virtual_area(z, w), A))
    return int(ok)


def _band(lo, hi):
    return (lo, hi) if lo <= hi else (hi, lo)


def in_DA(z, w, A: float, r1: float, r2: float) -> bool:
    """Membership in D_A(r1, r2): r_lo < |z| < r_hi, |w| <= |z|, |w ^ z| <= A."""
    lo, hi = _band(r1, r2)
    zn = math.hypot(z[0], z[1])
    zn2 = z[0] * z[0] + z[1] * z[1]
    wn2 = w[0] * w[0] + w[1] * w[1]
    return lo < zn < hi and bool(_w_le_z(wn2, zn2)) and bool(_wedge_ok(virtual_area(z, w), A))


def near_degenerate_pair(z, w, A: float, L: float = math.inf, L_prime: float = 1.0,
                         eps_prime: float = 0.01) -> bool:
    """Whether (z, w) satisfies one of the four near-boundary conditions that
    define the exceptional set of surfaces in the error-term estimate."""
    if L_prime not in (0.5, 1.0):
        raise ValueError("L_prime must be 1/2 or 1")
    if not eps_prime > 0:
        raise ValueError("eps_prime must be positive")
    if math.hypot(*z) > L or math.hypot(*w) > L:
        return False
    e = eps_prime
    zx, zy = z
    wx, wy = w
    if zy != 0 and 1 - e <= abs(wy) / abs(zy) <= 1 + e:
        return True
    if (1 - e) * A <= virtual_area(z, w) <= (1 + e) * A:
        return True
    if abs(zy - L_prime) < e:
        return True
    return (1 - e) * zy <= abs(zx) <= (1 + e) * zy


# ---------------------------------------------------------------------------
# support radii

def trapezoid_fiber_width(A: float) -> float:
    """Bound on |Re w| over the trapezoid: A/Im z + Im z maximised on [1/2, 1]."""
    return max(2 * A + 0.5, A + 1.0)


def hA_support_radius(A: float, t: float = 0.0) -> float:
    """Radius containing every z and w with h_A(g_t r_theta (z, w)) = 1 for some theta."""
    z_r = math.sqrt(2 * math.cosh(2 * t))
    X = trapezoid_fiber_width(A)
    w_r = math.sqrt(math.exp(2 * t) + X * X * math.exp(-2 * t))
    return max(z_r, w_r)


def required_radius(A: float, t: float) -> float:
    """Certified enumeration radius needed for circle averages at time t."""
    return max(math.sqrt(2) * math.exp(t), hA_support_radius(A, t))


def _certify(ms, radius: float, what: str):
    if radius > ms.bound * (1 + 1e-12):
        raise CertificateError(
            f"{what}: radius {radius:.6g} exceeds the certified radius {ms.bound:.6g}")


# ---------------------------------------------------------------------------
# pair search

def _unique(ms):
    """Distinct holonomy vectors with multiplicities."""
    if len(ms) == 0:
        dt = np.int64 if ms.exact else float
        return np.zeros(0, dt), np.zeros(0, dt), np.zeros(0, np.int64)
    xy = np.stack([ms.x, ms.y], axis=1)
    u, counts = np.unique(xy, axis=0, return_counts=True)
    return u[:, 0], u[:, 1], counts.astype(np.int64)


def wedge_pairs(x, y, A: float, *, zmin: float = 0.0, zmax: float = math.inf,
                wmax: float = math.inf, w_le_z: bool = False, exact: bool = False,
                chunk: int = 4096):
    """Index pairs (i, j) with |z_i ^ z_j| <= A and zmin <= |z_i| <= zmax,
    |z_j| <= wmax (and |z_j| <= |z_i| when ``w_le_z``).

    Candidate w are bucketed in dyadic norm shells; in a shell starting at
    radius r only directions within arcsin(A / (|z| r)) of +-z can qualify.
    """
    xf = np.asarray(x, dtype=float)
    yf = np.asarray(y, dtype=float)
    n = len(xf)
    empty = (np.zeros(0, np.int64), np.zeros(0, np.int64))
    if n == 0:
        return empty
    if exact:
        norm2 = np.asarray(x, np.int64) ** 2 + np.asarray(y, np.int64) ** 2
    else:
        norm2 = xf * xf + yf * yf
    norm = np.sqrt(norm2.astype(float))
    ang = np.arctan2(yf, xf)
    zsel = np.nonzero((norm >= zmin * (1 - REL)) & (norm <= zmax * (1 + REL)))[0]
    wsel = np.nonzero(norm <= wmax * (1 + REL))[0]
    if len(zsel) == 0 or len(wsel) == 0:
        return empty
    r0 = norm[wsel].min()
    shell = np.floor(np.log2(norm[wsel] / r0)).astype(np.int64)
    out_i, out_j = [], []
    for s in np.unique(shell):
        members = wsel[shell == s]
        r_lo = r0 * 2.0 ** s
        order = np.argsort(ang[members], kind="stable")
        members = members[order]
        a_sorted = ang[members]
        a2 = np.concatenate([a_sorted, a_sorted + 2 * np.pi])
        m2 = np.concatenate([members, members])
        zs = zsel
        if w_le_z:
            zs = zs[norm[zs] >= r_lo * (1 - REL)]
        for c0 in range(0, len(zs), chunk):
            zc = zs[c0:c0 + chunk]
            ratio = (A * (1 + REL) + 1e-300) / (norm[zc] * r_lo)
            full = ratio >= 1
            delta = np.arcsin(np.minimum(ratio, 1.0)) + 1e-12
            lo_list, hi_list, z_list = [], [], []
            if full.any():
                zf = zc[full]
                lo_list.append(np.zeros(len(zf), np.int64))
                hi_list.append(np.full(len(zf), len(members), np.int64))
                z_list.append(zf)
            part = ~full
            if part.any():
                zp = zc[part]
                d = delta[part]
                for shift in (0.0, np.pi):
                    centre = np.mod(ang[zp] + shift + np.pi, 2 * np.pi) - np.pi
                    lo_a = centre - d
                    lo_a = np.where(lo_a < -np.pi, lo_a + 2 * np.pi, lo_a)
                    lo = np.searchsorted(a2, lo_a, side="left")
                    hi = np.searchsorted(a2, lo_a + 2 * d, side="right")
                    hi = np.minimum(hi, lo + len(members))
                    lo_list.append(lo)
                    hi_list.append(hi)
                    z_list.append(zp)
            lo = np.concatenate(lo_list)
            hi = np.concatenate(hi_list)
            zz = np.concatenate(z_list)
            cnt = hi - lo
            tot = int(cnt.sum())
            if tot == 0:
                continue
            zi = np.repeat(zz, cnt)
            offs = np.arange(tot) - np.repeat(np.cumsum(cnt) - cnt, cnt)
            wj = m2[np.repeat(lo, cnt) + offs]
            if exact:
                xi = np.asarray(x, np.int64)
                yi = np.asarray(y, np.int64)
                wedge = np.abs(xi[zi] * yi[wj] - yi[zi] * xi[wj]).astype(float)
                ok = wedge <= A
            else:
                wedge = np.abs(xf[zi] * yf[wj] - yf[zi] * xf[wj])
                ok = _wedge_ok(wedge, A)
            if w_le_z:
                ok &= _w_le_z(norm2[wj], norm2[zi], exact)
            zi, wj = zi[ok], wj[ok]
            # the two angular windows can overlap for wide windows
            if part.any() and len(zi):
                key = np.unique(np.stack([zi, wj], axis=1), axis=0)
                zi, wj = key[:, 0], key[:, 1]
            out_i.append(zi)
            out_j.append(wj)
    if not out_i:
        return empty
    zi = np.concatenate(out_i)
    wj = np.concatenate(out_j)
    key = np.unique(np.stack([zi, wj], axis=1), axis=0)
    return key[:, 0], key[:, 1]


class PairIndex:
    """All pairs counted by N_A up to ``R_max``, sorted by |z|, so that
    N_A(R) for any R <= R_max is a binary search."""

    def __init__(self, ms, A: float, R_max: float, include_diagonal: bool = True):
        _certify(ms, R_max, "N_A")
        self.exact = ms.exact
        self.R_max = R_max
        ux, uy, mult = _unique(ms)
        zi, wj = wedge_pairs(ux, uy, A, zmax=R_max, wmax=R_max, w_le_z=True, exact=ms.exact)
        weight = mult[zi] * mult[wj]
        if not include_diagonal:
            same = zi == wj
            weight = np.where(same, mult[zi] * (mult[zi] - 1), weight)
        if ms.exact:
            key = ux[zi].astype(np.int64) ** 2 + uy[zi].astype(np.int64) ** 2
        else:
            key = np.hypot(ux[zi], uy[zi])
        order = np.argsort(key, kind="stable")
        self.key = key[order]
        self.cum = np.concatenate([[0], np.cumsum(weight[order])])
        self.n_pairs = int(self.cum[-1])

    def count(self, R: float) -> int:
        if R > self.R_max * (1 + 1e-12):
            raise CertificateError(f"N_A radius {R} exceeds index radius {self.R_max}")
        if self.exact:
            pos = np.searchsorted(self.key, R * R, side="right")
        else:
            pos = np.searchsorted(self.key, R, side="right")
        return int(self.cum[pos])


def count_N(ms, R: float) -> int:
    """Number of saddle connections of length at most R."""
    _certify(ms, R, "N")
    if ms.exact:
        return int(np.count_nonzero(ms.x.astype(np.int64) ** 2 + ms.y.astype(np.int64) ** 2 <= R * R))
    return int(np.count_nonzero(ms.lengths <= R))


def count_pairs_NA(ms, A: float, R: float, include_diagonal: bool = True) -> int:
    """#{(z, w): |z|, |w| <= R, |w| <= |z|, |z ^ w| <= A}."""
    return PairIndex(ms, A, R, include_diagonal).count(R)


def count_pairs_Nstar(ms, A: float, R: float, include_diagonal: bool = True) -> int:
    """N_A(R) - N_A(R/2)."""
    idx = PairIndex(ms, A, R, include_diagonal)
    return idx.count(R) - idx.count(R / 2)


# ---------------------------------------------------------------------------
# Siegel-Veech sums over region specs

class Region:
    """Pair region with vectorised indicator/weight ``__call__(zx, zy, wx, wy)``."""

    support_radius: float = math.inf

    def __call__(self, zx, zy, wx, wy):
        raise NotImplementedError

    def __mul__(self, other):
        return ProductRegion(self, other)


def _hA_mask(zx, zy, wx, wy, A):
    wedge = np.abs(zx * wy - zy * wx)
    return ((zy >= 0.5) & (zy <= 1.0) & (np.abs(zx) <= zy) & (np.abs(wy) <= zy)
            & _wedge_ok(wedge, A))


@dataclass
class HA(Region):
    A: float

    @property
    def support_radius(self):
        return hA_support_radius(self.A)

    def __call__(self, zx, zy, wx, wy):
        return _hA_mask(zx, zy, wx, wy, self.A).astype(float)


@dataclass
class DA(Region):
    A: float
    r1: float
    r2: float

    @property
    def support_radius(self):
        return max(self.r1, self.r2)

    def __call__(self, zx, zy, wx, wy):
        lo, hi = _band(self.r1, self.r2)
        zn2 = zx * zx + zy * zy
        zn = np.sqrt(zn2)
        return ((zn > lo) & (zn < hi) & _w_le_z(wx * wx + wy * wy, zn2)
                & _wedge_ok(np.abs(zx * wy - zy * wx), self.A)).astype(float)


@dataclass
class BallProduct(Region):
    R1: float
    R2: float

    @property
    def support_radius(self):
        return max(self.R1, self.R2)

    def __call__(self, zx, zy, wx, wy):
        return ((np.hypot(zx, zy) <= self.R1) & (np.hypot(wx, wy) <= self.R2)).astype(float)


@dataclass
class ProductRegion(Region):
    f: Region
    g: Region

    @property
    def support_radius(self):
        return min(self.f.support_radius, self.g.support_radius)

    def __call__(self, zx, zy, wx, wy):
        return self.f(zx, zy, wx, wy) * self.g(zx, zy, wx, wy)


@dataclass
class Weighted(Region):
    f: Region
    weight: float

    @property
    def support_radius(self):
        return self.f.support_radius

    def __call__(self, zx, zy, wx, wy):
        return self.weight * self.f(zx, zy, wx, wy)


def sv_transform(ms, f, allow_truncated: bool = False) -> float:
    """One-variable Siegel-Veech transform: sum of f(z) over the multiset."""
    if not allow_truncated:
        _certify(ms, getattr(f, "support_radius", math.inf), "Siegel-Veech support")
    return float(np.sum(f(np.asarray(ms.x, float), np.asarray(ms.y, float))))


def sv_transform_pairs(ms, f: Region, allow_truncated: bool = False, chunk: int = 2048) -> float:
    """Sum of f over all ordered pairs of entries, with multiplicity.

    ``allow_truncated`` sums over whatever the multiset holds even when the
    region's support reaches past its certified radius.
    """
    if not allow_truncated:
        _certify(ms, f.support_radius, "Siegel-Veech support")
    x = np.asarray(ms.x, float)
    y = np.asarray(ms.y, float)
    keep = np.hypot(x, y) <= f.support_radius * (1 + REL)
    x, y = x[keep], y[keep]
    total = 0.0
    for c0 in range(0, len(x), chunk):
        zx = x[c0:c0 + chunk, None]
        zy = y[c0:c0 + chunk, None]
        total += float(np.sum(f(zx, zy, x[None, :], y[None, :])))
    return total


# ---------------------------------------------------------------------------
# circle averages

@dataclass
class CircleAverage:
    t: float
    M_theta: int
    value: float
    refinement_error: float
    coarse_value: float = field(default=0.0, repr=False)


def theta_grid(M: int) -> np.ndarray:
    """Midpoint rule nodes on [0, 2pi)."""
    return (np.arange(M) + 0.5) * (2 * np.pi / M)


def _check_M(M: int):
    if M < 16 or M & (M - 1):
        raise ValueError(f"theta sample count must be a power of two >= 16, got {M}")


def _flow(x, y, c, s, et, emt):
    """Coordinates of g_t r_theta applied to (x, y)."""
    return et * (c * x - s * y), emt * (s * x + c * y)


def _pair_fractions(zx, zy, wx, wy, A, t, M, chunk=256):
    """Fraction of midpoint nodes theta with h_A(g_t r_theta (z, w)) = 1, for
    arrays of pairs, on the M grid and on the M/2 grid."""
    et, emt = math.exp(t), math.exp(-t)
    out = []
    for m in (M, M // 2):
        th = theta_grid(m)
        c = np.cos(th)[None, :]
        s = np.sin(th)[None, :]
        vals = np.empty(len(zx))
        for c0 in range(0, len(zx), chunk):
            sl = slice(c0, c0 + chunk)
            ax, ay = _flow(zx[sl, None], zy[sl, None], c, s, et, emt)
            bx, by = _flow(wx[sl, None], wy[sl, None], c, s, et, emt)
            vals[sl] = np.count_nonzero(_hA_mask(ax, ay, bx, by, A), axis=1) / m
        out.append(vals)
    return out[0], out[1]


def At_hA_point(z, w, A: float, t: float, M_theta: int = DEFAULT_THETA) -> CircleAverage:
    """Midpoint-rule circle average of h_A along g_t r_theta (z, w)."""
    _check_M(M_theta)
    fine, coarse = _pair_fractions(np.array([float(z[0])]), np.array([float(z[1])]),
                                   np.array([float(w[0])]), np.array([float(w[1])]),
                                   A, t, M_theta)
    return CircleAverage(t, M_theta, float(fine[0]), abs(float(fine[0] - coarse[0])), float(coarse[0]))


def At_hA_pairs(zx, zy, wx, wy, A: float, t: float, M_theta: int = DEFAULT_THETA):
    """Vectorised At_hA_point: (values, refinement errors) for arrays of pairs."""
    _check_M(M_theta)
    fine, coarse = _pair_fractions(np.asarray(zx, float), np.asarray(zy, float),
                                   np.asarray(wx, float), np.asarray(wy, float), A, t, M_theta)
    return fine, np.abs(fine - coarse)


def _hA_sum_at(x, y, A, c, s, et, emt):
    """Siegel-Veech sum of h_A over all ordered pairs after g_t r_theta."""
    ax, ay = _flow(x, y, c, s, et, emt)
    zs = np.nonzero((ay >= 0.5) & (ay <= 1.0) & (np.abs(ax) <= ay))[0]
    total = 0
    for i in zs:
        total += int(np.count_nonzero(_hA_mask(ax[i], ay[i], ax, ay, A)))
    return total


def circle_average_sv(ms, A: float, t: float, M_theta: int = DEFAULT_THETA) -> CircleAverage:
    """Average over theta of the h_A Siegel-Veech sum of g_t r_theta Lambda.

    Evaluated theta by theta (outer loop over the grid), independently of the
    pair-by-pair route used in :func:`decomposition_terms`.
    """
    _check_M(M_theta)
    radius = required_radius(A, t)
    _certify(ms, radius, "circle average")
    x = np.asarray(ms.x, float)
    y = np.asarray(ms.y, float)
    keep = np.hypot(x, y) <= hA_support_radius(A, t) * (1 + REL)
    x, y = x[keep], y[keep]
    et, emt = math.exp(t), math.exp(-t)
    vals = []
    for m in (M_theta, M_theta // 2):
        total = 0
        for th in theta_grid(m):
            total += _hA_sum_at(x, y, A, math.cos(th), math.sin(th), et, emt)
        vals.append(total / m)
    return CircleAverage(t, M_theta, vals[0], abs(vals[0] - vals[1]), vals[1])


def sv_hA_at(ms, A: float, m: Mat2, allow_truncated: bool = False) -> int:
    """h_A Siegel-Veech sum of M * Lambda (the circle-average integrand)."""
    from .sl2 import act_on_holonomies

    img = act_on_holonomies(m, ms)
    return int(sv_transform_pairs(img, HA(A), allow_truncated=allow_truncated))


# ---------------------------------------------------------------------------
# loci and the main/error decomposition

class LocusTag(str, Enum):
    M = "M"
    E1 = "E1"
    E2 = "E2"
    E3 = "E3"
    E4 = "E4"
    NONE = "NONE"


def _locus_masks(zn, zn2, wn, wn2, wedge_ok, at_positive, t, exact=False):
    """Independent evaluation of the five locus predicates."""
    et = math.exp(t)
    s = math.sqrt(math.cosh(2 * t) / 2)
    c = (1 + math.exp(-4 * t)) ** -0.5
    in_d = _w_le_z(wn2, zn2, exact) & wedge_ok
    upper = (zn > s) & (zn < et) & in_d
    return {
        LocusTag.M: upper & (wn < zn * c),
        LocusTag.E1: (zn > et / 2) & (zn < s) & in_d,
        LocusTag.E2: upper & (wn > zn * c),
        LocusTag.E3: at_positive & (zn > et),
        LocusTag.E4: at_positive & (zn > et / 2) & (zn < et) & ~_w_le_z(wn2, zn2, exact),
    }


def locus_membership(z, w, A: float, t: float, M_theta: int = DEFAULT_THETA,
                     certified: bool = False) -> LocusTag:
    """Locus of the pair (z, w) at time t.

    A_t h_A > 0 is decided by the quadrature value; with ``certified`` the
    value must exceed its refinement error instead.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    zn2 = z[0] * z[0] + z[1] * z[1]
    wn2 = w[0] * w[0] + w[1] * w[1]
    at = At_hA_point(z, w, A, t, M_theta)
    masks = _locus_masks(np.array([math.sqrt(zn2)]), np.array([zn2]),
                         np.array([math.sqrt(wn2)]), np.array([wn2]),
                         np.array([_wedge_ok(virtual_area(z, w), A)]),
                         np.array([at.value > (at.refinement_error if certified else 0)]), t)
    fired = [tag for tag, m in masks.items() if m[0]]
    if len(fired) > 1:
        raise AssertionError(f"pair {z}, {w} lies in several loci: {fired}")
    return fired[0] if fired else LocusTag.NONE


@dataclass
class Decomposition:
    t: float
    A: float
    M_theta: int
    N_star: int
    At_hA: float
    m_t: float
    e1: float
    e2: float
    e3: float
    e4: float
    lhs: float
    residual: float
    refine_err: float
    coverage_violations: int
    marginal_pairs: int
    n_pairs: int

    @property
    def error_terms(self):
        return (self.e1, self.e2, self.e3, self.e4)

    def budget(self) -> float:
        return math.pi * math.exp(2 * self.t) * self.refine_err + 1e-9 * max(1.0, abs(self.N_star))


def decomposition_terms(ms, A: float, t: float, M_theta: int = DEFAULT_THETA,
                        circle: CircleAverage | None = None) -> Decomposition:
    """Main and error terms of N*_A(e^t) - pi e^{2t} A_t h_A^SV, pair by pair.

    Every ordered pair that is in D_A(e^t/2, e^t) or has a positive circle
    average contributes d = chi_D - pi e^{2t} A_t h_A to the bucket of its
    locus.  Pairs with d != 0 and no locus are counted as coverage violations.
    """
    _check_M(M_theta)
    radius = max(required_radius(A, t), math.exp(t))
    _certify(ms, radius, "decomposition")
    et = math.exp(t)
    scale = math.pi * math.exp(2 * t)
    if circle is None:
        circle = circle_average_sv(ms, A, t, M_theta)
    n_star = count_pairs_Nstar(ms, A, et) if len(ms) else 0
    ux, uy, mult = _unique(ms)
    sums = {tag: 0.0 for tag in LocusTag}
    violations = marginal = n_pairs = 0
    refine = 0.0
    if len(ux):
        zi, wj = wedge_pairs(ux, uy, A, zmin=et / 2, zmax=hA_support_radius(A, t),
                             wmax=hA_support_radius(A, t), exact=ms.exact)
        weight = (mult[zi] * mult[wj]).astype(float)
        zx, zy = ux[zi].astype(float), uy[zi].astype(float)
        wx, wy = ux[wj].astype(float), uy[wj].astype(float)
        if ms.exact:
            zn2 = ux[zi].astype(np.int64) ** 2 + uy[zi].astype(np.int64) ** 2
            wn2 = ux[wj].astype(np.int64) ** 2 + uy[wj].astype(np.int64) ** 2
        else:
            zn2 = zx * zx + zy * zy
            wn2 = wx * wx + wy * wy
        zn, wn = np.sqrt(zn2.astype(float)), np.sqrt(wn2.astype(float))
        value, err = At_hA_pairs(zx, zy, wx, wy, A, t, M_theta)
        wedge_ok = np.ones(len(zi), bool)  # wedge_pairs already filtered on |z ^ w| <= A
        chi_d = (zn > et / 2) & (zn < et) & _w_le_z(wn2, zn2, ms.exact)
        d = chi_d.astype(float) - scale * value
        masks = _locus_masks(zn, zn2, wn, wn2, wedge_ok, value > 0, t, ms.exact)
        fired = sum(m.astype(np.int64) for m in masks.values())
        if np.any(fired > 1):
            raise AssertionError("a pair lies in several loci")
        for tag, m in masks.items():
            sums[tag] = float(np.sum(weight[m] * d[m]))
        untagged = (fired == 0) & (d != 0)
        violations = int(np.sum(weight[untagged]))
        marginal = int(np.sum(weight[(value > 0) & (value <= err)]))
        refine = float(np.sum(weight * err))
        n_pairs = int(np.sum(weight))
    lhs = n_star - scale * circle.value
    total = sums[LocusTag.M] + sum(sums[k] for k in (LocusTag.E1, LocusTag.E2, LocusTag.E3, LocusTag.E4))
    return Decomposition(
        t=t, A=A, M_theta=M_theta, N_star=n_star, At_hA=circle.value,
        m_t=sums[LocusTag.M], e1=sums[LocusTag.E1], e2=sums[LocusTag.E2],
        e3=sums[LocusTag.E3], e4=sums[LocusTag.E4], lhs=lhs, residual=lhs - total,
        refine_err=refine, coverage_violations=violations, marginal_pairs=marginal,
        n_pairs=n_pairs,
    )
