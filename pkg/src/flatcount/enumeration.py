"""Saddle connection enumeration.

The main routine :func:`enumerate_connections` runs a pruned sector search in
the developing map: from every triangle corner at a cone point, the triangle is
developed into the plane with the cone point at the origin and the set of
outgoing directions is carried across edges as an open sector.  Each developed
vertex strictly inside the current sector is a saddle connection endpoint; the
sector is split there and both halves continue.  A node is dropped once the
crossed edge lies entirely outside the disk of radius ``L``.

:func:`enumerate_origami` is an independent oracle for integer surfaces that
traces one straight line per primitive integer direction and sheet.
"""

from __future__ import annotations

import logging
import math
import os
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

import numpy as np
from numba import njit

from .errors import BudgetError, ModeError
from .surface import TOL, TWO_PI, HolonomyVector, TranslationSurface, check, corner_angle

log = logging.getLogger(__name__)

SAFETY_CAP = 1e4
MAX_CONNECTIONS = 20_000_000
MAX_CROSSINGS = 1_000_000


class SaddleConnection(NamedTuple):
    holonomy: HolonomyVector
    start: int
    end: int
    sheet: int

    @property
    def length(self) -> float:
        return self.holonomy.norm()


@dataclass(frozen=True, eq=False)
class HolonomyMultiset:
    """Holonomies of all saddle connections of length at most ``bound``.

    Stored column-wise; ``exact`` sets mean integer coordinates.  With
    ``collapsed`` set, coincident holonomy vectors were merged into one entry.
    """

    x: np.ndarray
    y: np.ndarray
    start: np.ndarray
    end: np.ndarray
    sheet: np.ndarray
    bound: float
    collapsed: bool = False
    exact: bool = False
    source: str = ""
    degenerate_sectors: int = field(default=0, compare=False)

    @classmethod
    def empty(cls, bound: float = math.inf, source: str = "") -> "HolonomyMultiset":
        z = np.zeros(0, dtype=np.int64)
        return cls(np.zeros(0), np.zeros(0), z, z.copy(), z.copy(), bound, source=source)

    @classmethod
    def from_vectors(cls, vectors, bound: float, *, exact: bool = False, source: str = "") -> "HolonomyMultiset":
        """Multiset of bare holonomies (start/end/sheet set to 0)."""
        arr = np.asarray(list(vectors), dtype=np.int64 if exact else float).reshape(-1, 2)
        z = np.zeros(len(arr), dtype=np.int64)
        return cls(arr[:, 0].copy(), arr[:, 1].copy(), z, z.copy(), z.copy(), bound,
                   exact=exact, source=source)

    def __len__(self) -> int:
        return len(self.x)

    def __iter__(self) -> Iterator[SaddleConnection]:
        for i in range(len(self)):
            yield self[i]

    def __getitem__(self, i: int) -> SaddleConnection:
        conv = int if self.exact else float
        return SaddleConnection(HolonomyVector(conv(self.x[i]), conv(self.y[i])),
                                int(self.start[i]), int(self.end[i]), int(self.sheet[i]))

    @property
    def lengths(self) -> np.ndarray:
        return np.hypot(self.x.astype(float), self.y.astype(float))

    def holonomies(self) -> list[tuple]:
        conv = int if self.exact else float
        return [(conv(a), conv(b)) for a, b in zip(self.x, self.y)]

    def counter(self) -> Counter:
        return Counter(self.holonomies())

    def _take(self, idx, **changes) -> "HolonomyMultiset":
        kw = dict(x=self.x[idx], y=self.y[idx], start=self.start[idx], end=self.end[idx],
                  sheet=self.sheet[idx], bound=self.bound, collapsed=self.collapsed,
                  exact=self.exact, source=self.source,
                  degenerate_sectors=self.degenerate_sectors)
        kw.update(changes)
        return HolonomyMultiset(**kw)

    def sorted(self) -> "HolonomyMultiset":
        """Canonical order: length, then angle in [0, 2pi), then start id."""
        ang = np.mod(np.arctan2(self.y.astype(float), self.x.astype(float)), TWO_PI)
        if self.exact:
            key = (self.x.astype(np.int64) ** 2 + self.y.astype(np.int64) ** 2)
        else:
            key = self.lengths
        idx = np.lexsort((self.sheet, self.end, self.start, ang, key))
        return self._take(idx)

    def truncated(self, radius: float) -> "HolonomyMultiset":
        if self.exact:
            keep = self.x.astype(np.int64) ** 2 + self.y.astype(np.int64) ** 2 <= radius * radius
        else:
            keep = self.lengths <= radius
        return self._take(np.nonzero(keep)[0], bound=min(self.bound, radius))

    def scaled(self, factor: float) -> "HolonomyMultiset":
        return self._take(slice(None), x=self.x * float(factor), y=self.y * float(factor),
                          bound=self.bound * abs(factor), exact=False)

    def collapse(self) -> "HolonomyMultiset":
        """Set mode: one entry per distinct holonomy vector."""
        seen = {}
        for i, key in enumerate(zip(self.x.tolist(), self.y.tolist())):
            seen.setdefault(key, i)
        idx = np.array(sorted(seen.values()), dtype=np.int64)
        return self._take(idx, collapsed=True)


def _empty_lists():
    return [], [], [], [], []


@njit(cache=True)
def _segment_within(px, py, qx, qy, L2):
    """Whether the segment P-Q meets the closed disk of squared radius L2."""
    dx = qx - px
    dy = qy - py
    tn = -(px * dx + py * dy)
    if tn <= 0:
        return px * px + py * py <= L2
    dd = dx * dx + dy * dy
    if tn >= dd:
        return qx * qx + qy * qy <= L2
    c = float(px * dy - py * dx)
    return c * c <= L2 * float(dd)


@njit(cache=True)
def _sheet_of(ux, uy, vx, vy, off):
    phi = math.atan2(float(ux * vy - uy * vx), float(ux * vx + uy * vy))
    return int(math.floor((off + phi) / TWO_PI + 1e-9))


@njit(cache=True)
def _search_corners(tx, ty, glue, cvert, offsets, corners, L2, exact, budget):
    """Sector search from each corner in ``corners``.

    Returns holonomy coordinates, start/end singularity ids, sheet indices and
    the count of numerically degenerate sectors that were skipped.
    """
    cap = 1024
    ox = np.empty(cap, tx.dtype)
    oy = np.empty(cap, tx.dtype)
    oint = np.empty((cap, 3), np.int64)
    n_out = 0
    degenerate = 0
    scap = 256
    s_int = np.empty((scap, 2), np.int64)
    s_co = np.empty((scap, 8), tx.dtype)
    for ci in range(corners.shape[0]):
        t0 = corners[ci, 0]
        i0 = corners[ci, 1]
        start_id = cvert[3 * t0 + i0]
        off = offsets[3 * t0 + i0]
        ux = tx[t0, i0]
        uy = ty[t0, i0]
        k0 = (i0 + 1) % 3
        qx0 = ux + tx[t0, k0]
        qy0 = uy + ty[t0, k0]
        if ux * ux + uy * uy <= L2:
            if n_out == cap:
                cap *= 2
                ox2 = np.empty(cap, tx.dtype); ox2[:n_out] = ox[:n_out]; ox = ox2
                oy2 = np.empty(cap, tx.dtype); oy2[:n_out] = oy[:n_out]; oy = oy2
                oi2 = np.empty((cap, 3), np.int64); oi2[:n_out] = oint[:n_out]; oint = oi2
            ox[n_out] = ux
            oy[n_out] = uy
            oint[n_out, 0] = start_id
            oint[n_out, 1] = cvert[3 * t0 + k0]
            oint[n_out, 2] = _sheet_of(ux, uy, ux, uy, off)
            n_out += 1
        if not _segment_within(ux, uy, qx0, qy0, L2):
            continue
        sp = 0
        s_int[0, 0] = t0
        s_int[0, 1] = k0
        s_co[0, 0] = ux; s_co[0, 1] = uy; s_co[0, 2] = qx0; s_co[0, 3] = qy0
        s_co[0, 4] = ux; s_co[0, 5] = uy; s_co[0, 6] = qx0; s_co[0, 7] = qy0
        sp = 1
        while sp > 0:
            sp -= 1
            t = s_int[sp, 0]
            k = s_int[sp, 1]
            px = s_co[sp, 0]; py = s_co[sp, 1]; qx = s_co[sp, 2]; qy = s_co[sp, 3]
            ax = s_co[sp, 4]; ay = s_co[sp, 5]; bx = s_co[sp, 6]; by = s_co[sp, 7]
            s = glue[3 * t + k]
            t2 = s // 3
            k2 = s - 3 * t2
            k1 = k2 + 1 if k2 < 2 else 0
            kk = k1 + 1 if k1 < 2 else 0
            vx = px + tx[t2, k1]
            vy = py + ty[t2, k1]
            ca = ax * vy - ay * vx
            cb = vx * by - vy * bx
            if exact:
                ta = 0.0
                tb = 0.0
            else:
                nv = math.sqrt(float(vx * vx + vy * vy))
                ta = TOL * math.sqrt(float(ax * ax + ay * ay)) * nv
                tb = TOL * math.sqrt(float(bx * bx + by * by)) * nv
            if sp + 2 >= scap:
                scap *= 2
                si2 = np.empty((scap, 2), np.int64); si2[:sp] = s_int[:sp]; s_int = si2
                sc2 = np.empty((scap, 8), tx.dtype); sc2[:sp] = s_co[:sp]; s_co = sc2
            if ca > ta and cb > tb:
                if vx * vx + vy * vy <= L2:
                    if n_out == cap:
                        cap *= 2
                        ox2 = np.empty(cap, tx.dtype); ox2[:n_out] = ox[:n_out]; ox = ox2
                        oy2 = np.empty(cap, tx.dtype); oy2[:n_out] = oy[:n_out]; oy = oy2
                        oi2 = np.empty((cap, 3), np.int64); oi2[:n_out] = oint[:n_out]; oint = oi2
                    ox[n_out] = vx
                    oy[n_out] = vy
                    oint[n_out, 0] = start_id
                    oint[n_out, 1] = cvert[3 * t2 + kk]
                    oint[n_out, 2] = _sheet_of(ux, uy, vx, vy, off)
                    n_out += 1
                    if n_out > budget:
                        return ox[:n_out], oy[:n_out], oint[:n_out], degenerate, True
                if _segment_within(px, py, vx, vy, L2):
                    s_int[sp, 0] = t2; s_int[sp, 1] = k1
                    s_co[sp, 0] = px; s_co[sp, 1] = py; s_co[sp, 2] = vx; s_co[sp, 3] = vy
                    s_co[sp, 4] = ax; s_co[sp, 5] = ay; s_co[sp, 6] = vx; s_co[sp, 7] = vy
                    sp += 1
                if _segment_within(vx, vy, qx, qy, L2):
                    s_int[sp, 0] = t2; s_int[sp, 1] = kk
                    s_co[sp, 0] = vx; s_co[sp, 1] = vy; s_co[sp, 2] = qx; s_co[sp, 3] = qy
                    s_co[sp, 4] = vx; s_co[sp, 5] = vy; s_co[sp, 6] = bx; s_co[sp, 7] = by
                    sp += 1
            elif cb <= tb and ca > ta:
                if _segment_within(px, py, vx, vy, L2):
                    s_int[sp, 0] = t2; s_int[sp, 1] = k1
                    s_co[sp, 0] = px; s_co[sp, 1] = py; s_co[sp, 2] = vx; s_co[sp, 3] = vy
                    s_co[sp, 4] = ax; s_co[sp, 5] = ay; s_co[sp, 6] = bx; s_co[sp, 7] = by
                    sp += 1
            elif ca <= ta and cb > tb:
                if _segment_within(vx, vy, qx, qy, L2):
                    s_int[sp, 0] = t2; s_int[sp, 1] = kk
                    s_co[sp, 0] = vx; s_co[sp, 1] = vy; s_co[sp, 2] = qx; s_co[sp, 3] = qy
                    s_co[sp, 4] = ax; s_co[sp, 5] = ay; s_co[sp, 6] = bx; s_co[sp, 7] = by
                    sp += 1
            else:
                degenerate += 1
    return ox[:n_out], oy[:n_out], oint[:n_out], degenerate, False


def _prepare(surface: TranslationSurface):
    tris = [tuple((v[0], v[1]) for v in tri) for tri in surface.triangles]
    n = 3 * surface.n_triangles
    cvert = [surface.corner_vertex(*divmod(c, 3)) for c in range(n)]
    offsets = [surface.corner_offset(*divmod(c, 3)) for c in range(n)]
    return tris, list(surface.gluing), cvert, offsets


def _kernel_args(surface: TranslationSurface):
    tris, glue, cvert, offsets = _prepare(surface)
    dtype = np.int64 if surface.is_exact else np.float64
    arr = np.array(tris, dtype=dtype)
    return (np.ascontiguousarray(arr[:, :, 0]), np.ascontiguousarray(arr[:, :, 1]),
            np.array(glue, dtype=np.int64), np.array(cvert, dtype=np.int64),
            np.array(offsets, dtype=np.float64))


def _worker(args):
    kargs, corners, L2, exact, budget = args
    return _search_corners(*kargs, corners, L2, exact, budget)


def resolve_threads(threads: int | None = None) -> int:
    env = os.environ.get("FLATCOUNT_THREADS")
    if env:
        return max(1, int(env))
    return max(1, threads or 1)


def enumerate_connections(surface: TranslationSurface, L: float, *, threads: int | None = None,
                          safety_cap: float = SAFETY_CAP, max_connections: int = MAX_CONNECTIONS,
                          delaunay: bool = False, collapse: bool = False) -> HolonomyMultiset:
    """All saddle connections of length at most ``L``, with multiplicity.

    ``delaunay=True`` runs the search on the Delaunay triangulation; singularity
    ids then refer to that triangulation.  Output is canonically sorted so that
    the result does not depend on the worker count.
    """
    if not L > 0:
        raise ValueError("L must be positive")
    check(surface)
    if L > safety_cap * surface.max_edge_length():
        raise BudgetError(f"L = {L} exceeds the safety cap of {safety_cap:g} edge lengths")
    if delaunay:
        from .delaunay import delaunayize

        surface = delaunayize(surface)
    kargs = _kernel_args(surface)
    exact = surface.is_exact
    L2 = float(L) * float(L)
    corners = np.array([(t, i) for t in range(surface.n_triangles) for i in range(3)], dtype=np.int64)
    n_workers = min(resolve_threads(threads), len(corners))
    jobs = [(kargs, corners[w::n_workers], L2, exact, max_connections) for w in range(n_workers)]
    if n_workers > 1:
        with ProcessPoolExecutor(n_workers) as pool:
            parts = list(pool.map(_worker, jobs))
    else:
        parts = [_worker(jobs[0])]
    if any(p[4] for p in parts) or sum(len(p[0]) for p in parts) > max_connections:
        raise BudgetError(f"more than {max_connections} saddle connections")
    degenerate = sum(p[3] for p in parts)
    if degenerate:
        log.warning("skipped %d numerically degenerate sectors", degenerate)
    ints = np.concatenate([p[2] for p in parts]) if parts else np.zeros((0, 3), np.int64)
    ms = HolonomyMultiset(
        x=np.concatenate([p[0] for p in parts]), y=np.concatenate([p[1] for p in parts]),
        start=ints[:, 0].copy(), end=ints[:, 1].copy(), sheet=ints[:, 2].copy(),
        bound=float(L), exact=exact, source=surface.name, degenerate_sectors=degenerate,
    ).sorted()
    return ms.collapse() if collapse else ms


# ---------------------------------------------------------------------------
# straight-line tracing

def _in_corner(tri, i, dx, dy) -> bool:
    """Direction d in the half-open corner sector [e_i, -e_{i+2})."""
    ux, uy = tri[i]
    wx, wy = tri[(i + 2) % 3]
    c1 = ux * dy - uy * dx
    if c1 < 0 or (c1 == 0 and ux * dx + uy * dy <= 0):
        return False
    return dx * (-wy) - dy * (-wx) > 0


def _trace(tris, glue, cvert, t, i, dx, dy, L, exact, max_crossings=MAX_CROSSINGS):
    """Follow the ray from corner (t, i) in direction d.  Returns
    ``(vx, vy, end_id)`` for the first singular vertex within ``L``, else None."""
    ux, uy = tris[t][i]
    dd = dx * dx + dy * dy
    nd = math.sqrt(dd)
    L2 = L * L

    def hit(vx, vy):
        c = dx * vy - dy * vx
        if exact:
            return c == 0 and dx * vx + dy * vy > 0
        return abs(c) / nd < TOL * math.hypot(vx, vy) and dx * vx + dy * vy > 0

    if hit(ux, uy):
        if ux * ux + uy * uy <= L2:
            return ux, uy, cvert[3 * t + (i + 1) % 3]
        return None
    k = (i + 1) % 3
    px, py = ux, uy
    ex, ey = tris[t][k]
    qx, qy = px + ex, py + ey
    for _ in range(max_crossings):
        # ray parameter where it meets the edge P-Q, as distance along the ray
        ex, ey = qx - px, qy - py
        num = px * ey - py * ex
        den = dx * ey - dy * ex
        if den == 0:
            return None
        if exact:
            if num * num * dd > L2 * den * den:
                return None
        elif (num / den) * nd > L:
            return None
        s = glue[3 * t + k]
        t2, k2 = divmod(s, 3)
        k1 = (k2 + 1) % 3
        kk = (k2 + 2) % 3
        vx = px + tris[t2][k1][0]
        vy = py + tris[t2][k1][1]
        if hit(vx, vy):
            if vx * vx + vy * vy <= L2:
                return vx, vy, cvert[3 * t2 + kk]
            return None
        if dx * vy - dy * vx > 0:
            t, k, qx, qy = t2, k1, vx, vy
        else:
            t, k, px, py = t2, kk, vx, vy
    raise BudgetError(f"more than {max_crossings} triangle crossings")


def _sheet_corners(surface: TranslationSurface, singularity: int, dx, dy):
    """Corners of ``singularity`` whose sector contains direction d, in sheet order."""
    from .surface import singularity_data

    sing = singularity_data(surface)[singularity]
    return [(t, i) for (t, i) in sing.corners if _in_corner(surface.triangles[t], i, dx, dy)]


def trace_separatrix(surface: TranslationSurface, singularity: int, sheet: int, direction,
                     L: float) -> SaddleConnection | None:
    """Saddle connection leaving ``singularity`` on the given sheet in
    ``direction``, if it ends within length ``L``."""
    dx, dy = direction
    if dx == 0 and dy == 0:
        raise ValueError("direction must be nonzero")
    if not surface.is_exact:
        dx, dy = float(dx), float(dy)
    corners = _sheet_corners(surface, singularity, dx, dy)
    if not 0 <= sheet < len(corners):
        raise ValueError(f"sheet {sheet} out of range (singularity has {len(corners)} sheets)")
    t, i = corners[sheet]
    tris, glue, cvert, _ = _prepare(surface)
    res = _trace(tris, glue, cvert, t, i, dx, dy, L, surface.is_exact)
    if res is None:
        return None
    vx, vy, end = res
    return SaddleConnection(HolonomyVector(vx, vy), singularity, end, sheet)


def primitive_directions(L: float):
    """Primitive integer vectors (p, q) with p^2 + q^2 <= L^2."""
    R = int(math.floor(L))
    L2 = L * L
    for p in range(-R, R + 1):
        for q in range(-R, R + 1):
            if (p or q) and p * p + q * q <= L2 and math.gcd(p, q) == 1:
                yield p, q


def enumerate_origami(surface: TranslationSurface, L: float) -> HolonomyMultiset:
    """Direction-by-direction exact enumeration for integer surfaces.

    Every vertex of an integer surface develops to an integer point, so a ray
    in primitive direction (p, q) can only end at multiples k(p, q).  Each
    separatrix in each primitive direction is traced with integer arithmetic.
    """
    if not surface.is_exact:
        raise ModeError("enumerate_origami needs an exact-integer surface")
    check(surface)
    tris, glue, cvert, offsets = _prepare(surface)
    corners = [(t, i) for t in range(surface.n_triangles) for i in range(3)]
    xs, ys, starts, ends, sheets = _empty_lists()
    for p, q in primitive_directions(L):
        for t, i in corners:
            if not _in_corner(tris[t], i, p, q):
                continue
            res = _trace(tris, glue, cvert, t, i, p, q, L, True)
            if res is None:
                continue
            vx, vy, end = res
            phi = math.atan2(tris[t][i][0] * q - tris[t][i][1] * p, tris[t][i][0] * p + tris[t][i][1] * q)
            xs.append(vx)
            ys.append(vy)
            starts.append(cvert[3 * t + i])
            ends.append(end)
            sheets.append(int(math.floor((offsets[3 * t + i] + phi) / TWO_PI + 1e-9)))
    return HolonomyMultiset(
        x=np.array(xs, dtype=np.int64), y=np.array(ys, dtype=np.int64),
        start=np.array(starts, dtype=np.int64), end=np.array(ends, dtype=np.int64),
        sheet=np.array(sheets, dtype=np.int64), bound=float(L), exact=True, source=surface.name,
    ).sorted()


def same_holonomies(a, b, tol: float = 1e-6) -> bool:
    """Whether two holonomy multisets agree entry by entry within ``tol``.

    Entries are matched greedily through a k-d tree, so near-equal vectors in
    different sort positions still pair up.
    """
    from scipy.spatial import cKDTree

    if len(a) != len(b):
        return False
    if len(a) == 0:
        return True
    pa = np.stack([np.asarray(a.x, float), np.asarray(a.y, float)], axis=1)
    pb = np.stack([np.asarray(b.x, float), np.asarray(b.y, float)], axis=1)
    tree = cKDTree(pb)
    used = np.zeros(len(pb), dtype=bool)
    for p, cand in zip(pa, tree.query_ball_point(pa, tol)):
        free = [j for j in cand if not used[j]]
        if not free:
            return False
        used[free[0]] = True
    return True
