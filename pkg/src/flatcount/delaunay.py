"""Delaunay triangulations of translation surfaces by edge flips."""

from __future__ import annotations

from typing import NamedTuple

from .errors import BudgetError, GeometryError
from .surface import HolonomyVector, TranslationSurface, check, cross

FLIP_TOL = 1e-9


class EdgeRef(NamedTuple):
    triangle: int
    slot: int


def incircle_points(a, b, c, d):
    """Positive when ``d`` lies inside the circle through the CCW triangle a, b, c."""
    adx, ady = a[0] - d[0], a[1] - d[1]
    bdx, bdy = b[0] - d[0], b[1] - d[1]
    cdx, cdy = c[0] - d[0], c[1] - d[1]
    alift = adx * adx + ady * ady
    blift = bdx * bdx + bdy * bdy
    clift = cdx * cdx + cdy * cdy
    return (alift * (bdx * cdy - cdx * bdy)
            + blift * (cdx * ady - adx * cdy)
            + clift * (adx * bdy - bdx * ady))


def _quad(surface: TranslationSurface, t: int, k: int):
    """Develop the two triangles on either side of edge (t, k).

    P0 -> P1 is the edge as seen from ``t``, P2 the third vertex of ``t`` and P3
    the third vertex of the neighbour, all with P0 at the origin.
    """
    tp, kp = surface.partner(t, k)
    e = surface.triangles[t]
    f = surface.triangles[tp]
    p0 = (0, 0)
    p1 = (e[k][0], e[k][1])
    n = e[(k + 1) % 3]
    p2 = (p1[0] + n[0], p1[1] + n[1])
    m = f[(kp + 1) % 3]
    p3 = (m[0], m[1])
    return tp, kp, p0, p1, p2, p3


def incircle(surface: TranslationSurface, edge) -> float:
    t, k = edge
    tri = surface.triangles[t]
    if cross(tri[0], tri[1]) <= 0:
        raise GeometryError(f"triangle {t} is degenerate")
    tp, _, p0, p1, p2, p3 = _quad(surface, t, k)
    if cross(surface.triangles[tp][0], surface.triangles[tp][1]) <= 0:
        raise GeometryError(f"triangle {tp} is degenerate")
    return incircle_points(p0, p1, p2, p3)


def flip(surface: TranslationSurface, edge) -> TranslationSurface:
    """Replace the diagonal (t, k) of its quadrilateral by the other diagonal."""
    t, k = edge
    tp, kp, p0, p1, p2, p3 = _quad(surface, t, k)
    if tp == t:
        raise GeometryError(f"edge ({t},{k}) borders the same triangle twice")
    e = surface.triangles[t]
    f = surface.triangles[tp]
    diag = HolonomyVector(p2[0] - p3[0], p2[1] - p3[1])
    # new t = (P0, P3, P2), new t' = (P3, P1, P2)
    new_t = (f[(kp + 1) % 3], diag, e[(k + 2) % 3])
    new_tp = (f[(kp + 2) % 3], e[(k + 1) % 3], -diag)
    for tri in (new_t, new_tp):
        if cross(tri[0], tri[1]) <= 0:
            raise GeometryError(f"flip of edge ({t},{k}) would create a non-convex triangle")
    remap = {
        3 * tp + (kp + 1) % 3: 3 * t + 0,
        3 * t + (k + 2) % 3: 3 * t + 2,
        3 * tp + (kp + 2) % 3: 3 * tp + 0,
        3 * t + (k + 1) % 3: 3 * tp + 1,
    }
    old = surface.gluing
    gluing = list(old)
    for old_slot, new_slot in remap.items():
        partner = old[old_slot]
        gluing[new_slot] = remap.get(partner, partner)
    gluing[3 * t + 1] = 3 * tp + 2
    gluing[3 * tp + 2] = 3 * t + 1
    for old_slot, new_slot in remap.items():
        partner = old[old_slot]
        if partner not in remap:
            gluing[partner] = new_slot
    tris = list(surface.triangles)
    tris[t] = new_t
    tris[tp] = new_tp
    return TranslationSurface(tuple(tris), tuple(gluing), name=surface.name, mode=surface.mode)


def delaunay_flips(surface: TranslationSurface, tol: float = FLIP_TOL):
    """Flip until every edge is locally Delaunay; returns (surface, flip count).

    Edges are scanned in slot order and the scan restarts after each flip.
    Cocircular edges (|incircle| <= tol) are left alone.
    """
    check(surface)
    budget = 50 * surface.n_edges ** 2
    flips = 0
    while True:
        for (t, k), _ in surface.edge_pairs():
            if surface.partner(t, k)[0] == t:
                continue
            if incircle(surface, (t, k)) > tol:
                surface = flip(surface, (t, k))
                flips += 1
                if flips > budget:
                    raise BudgetError(f"Delaunay flips exceeded {budget}; numerical cycling?")
                break
        else:
            return surface, flips


def delaunayize(surface: TranslationSurface) -> TranslationSurface:
    return delaunay_flips(surface)[0]


def max_incircle(surface: TranslationSurface) -> float:
    return max(incircle(surface, a) for a, _ in surface.edge_pairs())


def systole(surface: TranslationSurface) -> float:
    """Length of the shortest saddle connection.

    The shortest Delaunay edge bounds it from above; everything below that
    bound is enumerated exhaustively.
    """
    from .enumeration import enumerate_connections

    dt = delaunayize(surface)
    d = min(v.norm() for tri in dt.triangles for v in tri)
    found = enumerate_connections(dt, d * (1 + 1e-9))
    return float(found.lengths.min())
