"""SL(2,R) action on holonomy data and on surfaces."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import MatrixError
from .surface import HolonomyVector, TranslationSurface

DET_TOL = 1e-9


@dataclass(frozen=True)
class Mat2:
    """Row-major 2x2 real matrix ``[[a, b], [c, d]]``."""

    a: float
    b: float
    c: float
    d: float

    @classmethod
    def g(cls, t: float) -> "Mat2":
        """Diagonal flow ``diag(e^t, e^-t)``."""
        return cls(math.exp(t), 0.0, 0.0, math.exp(-t))

    @classmethod
    def r(cls, theta: float) -> "Mat2":
        c, s = math.cos(theta), math.sin(theta)
        return cls(c, -s, s, c)

    @classmethod
    def raw(cls, a, b, c, d) -> "Mat2":
        m = cls(a, b, c, d)
        if abs(m.det - 1.0) > DET_TOL:
            raise MatrixError(f"matrix ({a}, {b}, {c}, {d}) is not unimodular (det = {m.det!r})")
        return m

    @classmethod
    def identity(cls) -> "Mat2":
        return cls(1.0, 0.0, 0.0, 1.0)

    @property
    def det(self) -> float:
        return self.a * self.d - self.b * self.c

    def __matmul__(self, other: "Mat2") -> "Mat2":
        return Mat2(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )

    def inverse(self) -> "Mat2":
        det = self.det
        return Mat2(self.d / det, -self.b / det, -self.c / det, self.a / det)

    def opnorm(self) -> float:
        """Largest singular value, in closed form."""
        s = self.a ** 2 + self.b ** 2 + self.c ** 2 + self.d ** 2
        det = abs(self.det)
        return math.sqrt((s + math.sqrt(max(s * s - 4 * det * det, 0.0))) / 2)

    def apply(self, x, y):
        return self.a * x + self.b * y, self.c * x + self.d * y

    def is_integral(self) -> bool:
        return all(float(v).is_integer() for v in (self.a, self.b, self.c, self.d))

    def as_array(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]], dtype=float)


def make_matrix(kind: str, *params) -> Mat2:
    """``make_matrix("g", t)``, ``make_matrix("r", theta)`` or
    ``make_matrix("raw", a, b, c, d)``."""
    if kind == "g":
        return Mat2.g(*params)
    if kind == "r":
        return Mat2.r(*params)
    if kind == "raw":
        return Mat2.raw(*params)
    raise MatrixError(f"unknown matrix kind {kind!r}")


def act_on_holonomies(m: Mat2, holonomies):
    """Image multiset ``M * Lambda``; the certified radius shrinks to
    ``bound / ||M^-1||``."""
    from .enumeration import HolonomyMultiset

    x = np.asarray(holonomies.x, dtype=float)
    y = np.asarray(holonomies.y, dtype=float)
    nx, ny = m.apply(x, y)
    return HolonomyMultiset(
        x=nx, y=ny,
        start=holonomies.start, end=holonomies.end, sheet=holonomies.sheet,
        bound=holonomies.bound / m.inverse().opnorm(),
        collapsed=holonomies.collapsed, exact=False,
        source=holonomies.source,
    )


def act_on_surface(m: Mat2, surface: TranslationSurface) -> TranslationSurface:
    exact = surface.is_exact and m.is_integral()
    tris = []
    for tri in surface.triangles:
        new = []
        for v in tri:
            x, y = m.apply(v[0], v[1])
            new.append(HolonomyVector(int(round(x)), int(round(y))) if exact else HolonomyVector(x, y))
        tris.append(tuple(new))
    return TranslationSurface(tuple(tris), surface.gluing, name=surface.name,
                              mode="int" if exact else "float")
