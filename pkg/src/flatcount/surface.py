"""Triangulated translation surfaces: representation, validation, I/O and catalog.

A surface is a list of triangles, each stored as three directed edge vectors in
counterclockwise order, together with an involutive gluing of edge slots.  Slot
``3*t + k`` is edge ``k`` of triangle ``t``; edge ``k`` runs from vertex ``k`` to
vertex ``k+1`` so that vertex 0 sits at the origin, vertex 1 at ``e0`` and
vertex 2 at ``e0 + e1``.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .errors import CatalogError, GeometryError, InconsistencyError, ParseError, ToleranceError

TOL = 1e-9
ANGLE_TOL = 1e-6
TWO_PI = 2.0 * math.pi


class HolonomyVector(NamedTuple):
    x: float
    y: float

    def norm(self) -> float:
        return math.hypot(self.x, self.y)

    def __neg__(self) -> "HolonomyVector":
        return HolonomyVector(-self.x, -self.y)


def cross(u, v):
    return u[0] * v[1] - u[1] * v[0]


def dot(u, v):
    return u[0] * v[0] + u[1] * v[1]


@dataclass(frozen=True)
class Singularity:
    id: int
    corners: tuple  # (triangle, vertex slot) pairs in counterclockwise order
    cone_angle: float
    order: int

    @property
    def corner_count(self) -> int:
        return len(self.corners)


@dataclass(frozen=True)
class StratumSignature:
    genus: int
    orders: tuple

    def __str__(self) -> str:
        return f"H({', '.join(str(k) for k in self.orders)}) genus {self.genus}"


@dataclass(frozen=True)
class TranslationSurface:
    triangles: tuple
    gluing: tuple
    name: str = ""
    mode: str = "float"
    # square permutations (right, up) when built as an origami; informational
    origami: tuple | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.mode not in ("float", "int"):
            raise ValueError(f"unknown coordinate mode {self.mode!r}")

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_edges(self) -> int:
        return len(self.gluing) // 2

    @property
    def is_exact(self) -> bool:
        return self.mode == "int"

    def edge(self, t: int, k: int) -> HolonomyVector:
        return self.triangles[t][k]

    def partner(self, t: int, k: int) -> tuple[int, int]:
        s = self.gluing[3 * t + k]
        return divmod(s, 3)

    def edge_pairs(self) -> list[tuple[tuple[int, int], tuple[int, int]]]:
        """Each glued pair once, ordered by the smaller slot index."""
        out = []
        for s, p in enumerate(self.gluing):
            if s < p:
                out.append((divmod(s, 3), divmod(p, 3)))
        return out

    def vertex_positions(self, t: int):
        e0, e1, _ = self.triangles[t]
        return ((0, 0), (e0[0], e0[1]), (e0[0] + e1[0], e0[1] + e1[1]))

    def max_edge_length(self) -> float:
        return max(v.norm() for tri in self.triangles for v in tri)

    @cached_property
    def _vertex_data(self):
        return _walk_vertices(self)

    def corner_vertex(self, t: int, i: int) -> int:
        """Singularity id of vertex ``i`` of triangle ``t``."""
        return self._vertex_data[0][3 * t + i]

    def corner_offset(self, t: int, i: int) -> float:
        """Cumulative angle at which corner (t, i) starts, measured from the
        reference corner of its singularity."""
        return self._vertex_data[1][3 * t + i]

    def __repr__(self) -> str:
        label = self.name or "surface"
        return f"TranslationSurface({label!r}, {self.n_triangles} triangles, mode={self.mode})"


def corner_angle(surface: TranslationSurface, t: int, i: int) -> float:
    tri = surface.triangles[t]
    u = tri[i]
    w = tri[(i + 2) % 3]
    v = (-w[0], -w[1])
    return math.atan2(cross(u, v), dot(u, v))


def _walk_vertices(surface: TranslationSurface):
    """Group corners into vertex classes by walking counterclockwise around each
    vertex.  Returns (corner -> vertex id, corner -> cumulative start angle,
    list of corner cycles)."""
    n = 3 * surface.n_triangles
    vid = [-1] * n
    offset = [0.0] * n
    cycles = []
    for start in range(n):
        if vid[start] >= 0:
            continue
        cycle = []
        c = start
        acc = 0.0
        while vid[c] < 0:
            vid[c] = len(cycles)
            offset[c] = acc
            cycle.append(divmod(c, 3))
            t, i = divmod(c, 3)
            acc += corner_angle(surface, t, i)
            tp, kp = surface.partner(t, (i + 2) % 3)
            c = 3 * tp + kp
            if len(cycle) > n:
                raise GeometryError("corner walk does not close")
        if c != start:
            raise GeometryError(f"corner walk from slot {start} does not return to its start")
        cycles.append(cycle)
    return vid, offset, cycles


# ---------------------------------------------------------------------------
# validation

def validate(surface: TranslationSurface) -> list[str]:
    """List of violated invariants; empty when the surface is valid."""
    problems = []
    exact = surface.is_exact
    n = 3 * surface.n_triangles
    if surface.n_triangles == 0:
        return ["surface has no triangles"]
    if len(surface.gluing) != n:
        return [f"gluing has {len(surface.gluing)} slots, expected {n}"]
    for t, tri in enumerate(surface.triangles):
        if len(tri) != 3:
            problems.append(f"triangle {t}: expected 3 edge vectors, got {len(tri)}")
            continue
        sx = sum(v[0] for v in tri)
        sy = sum(v[1] for v in tri)
        scale = max(1.0, max(abs(c) for v in tri for c in v))
        if (exact and (sx != 0 or sy != 0)) or (not exact and math.hypot(sx, sy) > TOL * scale):
            problems.append(f"triangle {t}: edge vectors do not close (sum = ({sx}, {sy}))")
        area2 = cross(tri[0], tri[1])
        if area2 <= 0:
            problems.append(f"triangle {t}: negative area (signed area {area2 / 2})")
    for s, p in enumerate(surface.gluing):
        t, k = divmod(s, 3)
        if not 0 <= p < n:
            problems.append(f"edge ({t},{k}): gluing partner {p} out of range")
            continue
        if p == s:
            problems.append(f"edge ({t},{k}): gluing not fixed-point-free")
            continue
        if surface.gluing[p] != s:
            problems.append(f"edge ({t},{k}): gluing is not an involution")
            continue
        if s < p:
            tp, kp = divmod(p, 3)
            u, v = surface.triangles[t][k], surface.triangles[tp][kp]
            gap = (u[0] + v[0], u[1] + v[1])
            scale = max(1.0, math.hypot(u[0], u[1]))
            if (exact and gap != (0, 0)) or (not exact and math.hypot(*gap) > TOL * scale):
                problems.append(f"edges ({t},{k}) and ({tp},{kp}): opposite-vector violation")
    if not problems and total_area(surface) <= 0:
        problems.append("total area is not positive")
    return problems


def check(surface: TranslationSurface) -> TranslationSurface:
    problems = validate(surface)
    if problems:
        raise GeometryError("; ".join(problems))
    return surface


def total_area(surface: TranslationSurface) -> float:
    return sum(cross(tri[0], tri[1]) for tri in surface.triangles) / 2


# ---------------------------------------------------------------------------
# singularities and strata

def singularity_data(surface: TranslationSurface) -> list[Singularity]:
    _, _, cycles = surface._vertex_data
    out = []
    for vid, cycle in enumerate(cycles):
        angle = sum(corner_angle(surface, t, i) for t, i in cycle)
        k = round(angle / TWO_PI) - 1
        if k < 0 or abs(angle - TWO_PI * (k + 1)) > ANGLE_TOL:
            raise ToleranceError(
                f"singularity {vid}: cone angle {angle!r} is not a positive multiple of 2*pi"
            )
        # snapped so float drift cannot change the stratum
        out.append(Singularity(vid, tuple(cycle), TWO_PI * (k + 1), k))
    return out


def euler_characteristic(surface: TranslationSurface) -> int:
    v = len(surface._vertex_data[2])
    return v - surface.n_edges + surface.n_triangles


def stratum(surface: TranslationSurface) -> StratumSignature:
    chi = euler_characteristic(surface)
    if chi % 2:
        raise InconsistencyError(f"odd Euler characteristic {chi}")
    genus = (2 - chi) // 2
    orders = tuple(sorted((s.order for s in singularity_data(surface)), reverse=True))
    if sum(orders) != 2 * genus - 2:
        raise InconsistencyError(
            f"Gauss-Bonnet failure: orders {orders} sum to {sum(orders)}, expected {2 * genus - 2}"
        )
    return StratumSignature(genus, orders)


# ---------------------------------------------------------------------------
# construction helpers

def _as_vec(v, exact: bool) -> HolonomyVector:
    if exact:
        return HolonomyVector(int(v[0]), int(v[1]))
    return HolonomyVector(float(v[0]), float(v[1]))


def from_polygons(polygons: Sequence[Sequence], pairs: Sequence, *, name: str = "",
                  mode: str = "float", origami=None) -> TranslationSurface:
    """Build a surface from polygons given by CCW edge vectors.

    ``pairs`` lists glued edges ``((p, e), (p2, e2))`` once each.  Polygons with
    more than three sides are fan-split from their first vertex.
    """
    exact = mode == "int"
    triangles = []
    slot_of = {}  # (polygon, edge) -> triangle slot
    inner = []
    for p, poly in enumerate(polygons):
        m = len(poly)
        if m < 3:
            raise GeometryError(f"polygon {p}: needs at least 3 edges")
        vecs = [_as_vec(v, exact) for v in poly]
        if m == 3:
            base = len(triangles)
            triangles.append(tuple(vecs))
            for e in range(3):
                slot_of[(p, e)] = 3 * base + e
            continue
        verts = [(0, 0)]
        for v in vecs[:-1]:
            verts.append((verts[-1][0] + v[0], verts[-1][1] + v[1]))
        base = len(triangles)
        for j in range(1, m - 1):
            a, b = verts[j], verts[j + 1]
            tri = (
                HolonomyVector(a[0], a[1]) if j > 1 else vecs[0],
                vecs[j],
                HolonomyVector(-b[0], -b[1]) if j < m - 2 else vecs[m - 1],
            )
            triangles.append(tri)
        slot_of[(p, 0)] = 3 * base
        for j in range(1, m - 1):
            slot_of[(p, j)] = 3 * (base + j - 1) + 1
        slot_of[(p, m - 1)] = 3 * (base + m - 3) + 2
        for j in range(1, m - 2):
            inner.append((3 * (base + j - 1) + 2, 3 * (base + j) + 0))
    gluing = [-1] * (3 * len(triangles))
    for (a, b) in inner:
        gluing[a], gluing[b] = b, a
    for pair in pairs:
        (p, e), (q, f) = pair
        try:
            a, b = slot_of[(p, e)], slot_of[(q, f)]
        except KeyError as exc:
            raise GeometryError(f"gluing refers to missing edge {exc.args[0]}") from None
        for s in (a, b):
            if gluing[s] != -1:
                t, k = divmod(s, 3)
                raise GeometryError(f"edge ({t},{k}) glued twice")
        gluing[a], gluing[b] = b, a
    for s, g in enumerate(gluing):
        if g == -1:
            t, k = divmod(s, 3)
            raise GeometryError(f"edge ({t},{k}) is not glued")
    return TranslationSurface(tuple(triangles), tuple(gluing), name=name, mode=mode, origami=origami)


def origami(right: Sequence[int], up: Sequence[int], name: str = "origami") -> TranslationSurface:
    """Square-tiled surface: square ``i`` has square ``right[i]`` on its right and
    ``up[i]`` above it.  Each square is cut along its main diagonal into a lower
    triangle (bottom, right, diagonal) and an upper triangle (diagonal, top, left).
    """
    n = len(right)
    if sorted(right) != list(range(n)) or sorted(up) != list(range(n)):
        raise CatalogError("origami needs two permutations of range(n)")
    triangles = []
    for _ in range(n):
        triangles.append((HolonomyVector(1, 0), HolonomyVector(0, 1), HolonomyVector(-1, -1)))
        triangles.append((HolonomyVector(1, 1), HolonomyVector(-1, 0), HolonomyVector(0, -1)))
    gluing = [0] * (6 * n)

    def glue(a, b):
        gluing[a], gluing[b] = b, a

    for i in range(n):
        lo, hi = 2 * i, 2 * i + 1
        glue(3 * lo + 2, 3 * hi + 0)
        glue(3 * lo + 1, 3 * (2 * right[i] + 1) + 2)
        glue(3 * hi + 1, 3 * (2 * up[i]) + 0)
    return TranslationSurface(tuple(triangles), tuple(gluing), name=name, mode="int",
                              origami=(tuple(right), tuple(up)))


def scaled(surface: TranslationSurface, factor: float, name: str | None = None) -> TranslationSurface:
    tris = tuple(tuple(HolonomyVector(v[0] * factor, v[1] * factor) for v in tri)
                 for tri in surface.triangles)
    return TranslationSurface(tris, surface.gluing, name=surface.name if name is None else name,
                              mode="float")


def normalized(surface: TranslationSurface) -> TranslationSurface:
    """Uniformly rescaled copy of area one (always floating mode)."""
    return scaled(surface, 1.0 / math.sqrt(total_area(surface)), name=surface.name)


def _is_connected(right, up) -> bool:
    n = len(right)
    seen = {0}
    stack = [0]
    while stack:
        i = stack.pop()
        for j in (right[i], up[i]):
            if j not in seen:
                seen.add(j)
                stack.append(j)
    return len(seen) == n


def random_origami(n: int, seed: int = 0, retries: int = 1000) -> TranslationSurface:
    rng = np.random.default_rng(seed)
    for _ in range(retries):
        right = [int(i) for i in rng.permutation(n)]
        up = [int(i) for i in rng.permutation(n)]
        if _is_connected(right, up):
            return origami(right, up, name=f"random-origami({n}, {seed})")
    raise CatalogError(f"no connected origami with {n} squares after {retries} draws")


def regular_octagon() -> TranslationSurface:
    sides = [(math.cos(j * math.pi / 4), math.sin(j * math.pi / 4)) for j in range(8)]
    # close the polygon exactly: the last side is minus the sum of the others
    sx = sum(s[0] for s in sides[:-1])
    sy = sum(s[1] for s in sides[:-1])
    sides[-1] = (-sx, -sy)
    pairs = [((0, j), (0, j + 4)) for j in range(4)]
    return from_polygons([sides], pairs, name="regular-octagon", mode="float")


CATALOG_NAMES = ("torus", "L-origami", "regular-octagon", "random-origami")
_RANDOM_RE = re.compile(r"^random-origami\(\s*(\d+)\s*(?:,\s*(-?\d+)\s*)?\)$")


def catalog(name: str, normalize: bool = False, *, n: int | None = None,
            seed: int = 0) -> TranslationSurface:
    """Named test surfaces.

    ``name`` is one of ``torus``, ``L-origami``, ``regular-octagon`` or
    ``random-origami`` (with ``n``/``seed``, or spelled ``random-origami(n, seed)``).
    """
    m = _RANDOM_RE.match(name.strip())
    if m:
        n = int(m.group(1))
        seed = int(m.group(2) or 0)
        name = "random-origami"
    if name == "torus":
        surface = origami([0], [0], name="torus")
    elif name == "L-origami":
        surface = origami([1, 0, 2], [2, 1, 0], name="L-origami")
    elif name == "regular-octagon":
        surface = regular_octagon()
    elif name == "random-origami":
        if n is None or n < 1:
            raise CatalogError("random-origami needs a positive square count n")
        surface = random_origami(n, seed)
    else:
        raise CatalogError(f"unknown catalog surface {name!r}; known: {', '.join(CATALOG_NAMES)}")
    return normalized(surface) if normalize else surface


# ---------------------------------------------------------------------------
# file format

def surface_to_dict(surface: TranslationSurface) -> dict:
    return {
        "name": surface.name,
        "mode": surface.mode,
        "triangles": [[[v[0], v[1]] for v in tri] for tri in surface.triangles],
        "gluing": [[list(a), list(b)] for a, b in surface.edge_pairs()],
    }


def save_surface(surface: TranslationSurface, path) -> None:
    Path(path).write_text(json.dumps(surface_to_dict(surface), indent=1) + "\n")


def surface_from_dict(data: dict) -> TranslationSurface:
    if not isinstance(data, dict):
        raise ParseError("surface file must contain a JSON object")
    mode = data.get("mode", "float")
    if mode not in ("float", "int"):
        raise ParseError(f"mode must be 'float' or 'int', got {mode!r}")
    polys = data.get("triangles")
    pairs = data.get("gluing")
    if not isinstance(polys, list) or not isinstance(pairs, list):
        raise ParseError("surface needs 'triangles' and 'gluing' lists")
    for p, poly in enumerate(polys):
        if not isinstance(poly, list):
            raise ParseError(f"triangle {p}: expected a list of edge vectors")
        for v in poly:
            if not (isinstance(v, list) and len(v) == 2):
                raise ParseError(f"triangle {p}: edge vectors must be [x, y] pairs")
            for c in v:
                if isinstance(c, bool) or not isinstance(c, (int, float)):
                    raise ParseError(f"triangle {p}: non-numeric coordinate {c!r}")
                if mode == "int" and not isinstance(c, int):
                    raise ParseError(f"triangle {p}: integer mode requires integral literals, got {c!r}")
    parsed_pairs = []
    for entry in pairs:
        try:
            (t, e), (t2, e2) = entry
            parsed_pairs.append(((int(t), int(e)), (int(t2), int(e2))))
        except (TypeError, ValueError):
            raise ParseError(f"malformed gluing entry {entry!r}") from None
        if (t, e) == (t2, e2):
            raise GeometryError(f"edge ({t},{e}): gluing not fixed-point-free")
    return from_polygons(polys, parsed_pairs, name=str(data.get("name", "")), mode=mode)


def load_surface(path) -> TranslationSurface:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from None
    return check(surface_from_dict(data))
