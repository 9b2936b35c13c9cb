"""Experiment runners and report export."""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import stats

from . import counting as C
from .enumeration import HolonomyMultiset, enumerate_connections
from .errors import BudgetError
from .surface import TranslationSurface

GRANULARITY_FACTOR = 10.0
T_MAX_DEFAULT = 3.0
PRE_ASYMPTOTIC_T = 1.0

COUNT_COLUMNS = ["R", "N", "N_A", "N_star"]
CIRCLE_COLUMNS = ["t", "A", "M_theta", "At_hA", "refine_err", "c_siegel", "c_siegel_err",
                  "pre_asymptotic"]
DECOMP_COLUMNS = ["t", "A", "M_theta", "N_star", "At_hA", "m_t", "e1", "e2", "e3", "e4", "lhs",
                  "residual", "refine_err", "budget", "coverage_violations", "marginal_pairs",
                  "passed"]


@dataclass
class Table:
    """Uniform export shape: scalar metadata plus a table of rows."""

    kind: str
    meta: dict
    columns: list
    rows: list

    def column(self, name):
        i = self.columns.index(name)
        return [r[i] for r in self.rows]


# ---------------------------------------------------------------------------
# convergence study

@dataclass
class CountingReport:
    surface: str
    normalized: bool
    collapsed: bool
    include_diagonal: bool
    A: float
    radii: list
    counts_N: list
    counts_NA: list
    counts_Nstar: list
    c_direct: float
    c_direct_se: float
    kappa_hat: float | None
    kappa_se: float | None
    kappa_points: int
    c_siegel: float | None = None
    c_siegel_err: float | None = None
    t_used: float | None = None
    M_theta: int = C.DEFAULT_THETA
    seed: int | None = None
    runtime: float = field(default=0.0, compare=False)

    @property
    def kappa_estimable(self) -> bool:
        return self.kappa_hat is not None

    def residuals(self):
        return [n / r ** 2 - self.c_direct for r, n in zip(self.radii, self.counts_NA)]

    def table(self, include_runtime: bool = False) -> Table:
        meta = {k: getattr(self, k) for k in (
            "surface", "normalized", "collapsed", "include_diagonal", "A", "c_direct",
            "c_direct_se", "kappa_hat", "kappa_se", "kappa_points", "c_siegel", "c_siegel_err",
            "t_used", "M_theta", "seed")}
        if include_runtime:
            meta["runtime"] = self.runtime
        rows = [list(r) for r in zip(self.radii, self.counts_N, self.counts_NA, self.counts_Nstar)]
        return Table("convergence", meta, list(COUNT_COLUMNS), rows)


def radii_grid(R_max: float, grid_size: int) -> list:
    return [R_max * 2.0 ** (-j / 4) for j in range(grid_size)]


def fit_constant(radii, counts):
    """Least-squares constant through N_A(R)/R^2 over the top half of the grid."""
    n = (len(radii) + 1) // 2
    y = np.array([c / r ** 2 for r, c in zip(radii[:n], counts[:n])], dtype=float)
    c = float(y.mean())
    se = float(y.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return c, se


def fit_exponent(radii, counts, c):
    """Power-law exponent of |N_A(R)/R^2 - c|; residuals under the counting
    granularity guard are dropped.  Returns (kappa, se, points used)."""
    lr, lres = [], []
    for r, n in zip(radii, counts):
        res = abs(n / r ** 2 - c)
        if res >= GRANULARITY_FACTOR / r ** 2:
            lr.append(math.log(r))
            lres.append(math.log(res))
    if len(lr) < 3 or len(set(lr)) < 3:
        return None, None, len(lr)
    fit = stats.linregress(lr, lres)
    return float(-fit.slope), float(fit.stderr), len(lr)


def _holonomies(surface, radius, threads=None, collapse=False, max_connections=None):
    kw = {} if max_connections is None else {"max_connections": max_connections}
    return enumerate_connections(surface, radius, threads=threads, collapse=collapse, **kw)


def largest_feasible_t(A: float, radius: float, t_max: float = T_MAX_DEFAULT) -> float:
    """Largest t <= t_max whose circle average is certified by ``radius``."""
    if C.required_radius(A, 0.0) > radius:
        raise BudgetError(f"radius {radius} too small for any circle average")
    lo, hi = 0.0, t_max
    if C.required_radius(A, hi) <= radius:
        return hi
    for _ in range(60):
        mid = (lo + hi) / 2
        if C.required_radius(A, mid) <= radius:
            lo = mid
        else:
            hi = mid
    return lo


def run_convergence(surface: TranslationSurface | None, A: float, R_max: float,
                    grid_size: int = 17, *, threads=None, include_diagonal: bool = True,
                    collapse: bool = False, siegel: bool = False, t_siegel: float | None = None,
                    M_theta: int = C.DEFAULT_THETA, seed: int | None = None,
                    counts_fn: Callable[[float], int] | None = None,
                    max_connections=None) -> CountingReport:
    """Quadratic-growth study of N_A on a geometric radius grid.

    ``counts_fn`` replaces the enumeration with injected counts (testing hook).
    """
    start = time.perf_counter()
    radii = radii_grid(R_max, grid_size)
    name = surface.name if surface is not None else "synthetic"
    normalized = surface is not None and abs(_area(surface) - 1.0) < 1e-9
    c_siegel = c_err = t_used = None
    if counts_fn is not None:
        counts = [int(counts_fn(r)) for r in radii]
        counts_half = [int(counts_fn(r / 2)) for r in radii]
        counts_n = [0] * len(radii)
    else:
        ms = _holonomies(surface, R_max, threads, collapse, max_connections)
        idx = C.PairIndex(ms, A, R_max, include_diagonal)
        counts = [idx.count(r) for r in radii]
        counts_half = [idx.count(r / 2) for r in radii]
        counts_n = [C.count_N(ms, r) for r in radii]
        if siegel:
            t_used = t_siegel if t_siegel is not None else largest_feasible_t(A, R_max)
            est = run_siegel(ms, A, t_used, M_theta)
            c_siegel, c_err = est.value, est.refinement_error
    c, se = fit_constant(radii, counts)
    kappa, kse, npts = fit_exponent(radii, counts, c)
    return CountingReport(
        surface=name, normalized=normalized, collapsed=collapse,
        include_diagonal=include_diagonal, A=A, radii=radii, counts_N=counts_n,
        counts_NA=counts, counts_Nstar=[a - b for a, b in zip(counts, counts_half)],
        c_direct=c, c_direct_se=se, kappa_hat=kappa, kappa_se=kse, kappa_points=npts,
        c_siegel=c_siegel, c_siegel_err=c_err, t_used=t_used, M_theta=M_theta, seed=seed,
        runtime=time.perf_counter() - start,
    )


def _area(surface):
    from .surface import total_area
    return total_area(surface)


# ---------------------------------------------------------------------------
# Siegel-Veech route and decomposition

@dataclass
class SiegelEstimate:
    t: float
    A: float
    M_theta: int
    At_hA: float
    refine_err: float
    value: float
    refinement_error: float
    pre_asymptotic: bool

    def __float__(self):
        return self.value

    def table(self) -> Table:
        row = [self.t, self.A, self.M_theta, self.At_hA, self.refine_err, self.value,
               self.refinement_error, self.pre_asymptotic]
        return Table("circle-average", {}, list(CIRCLE_COLUMNS), [row])


def _as_multiset(source, radius, threads=None) -> HolonomyMultiset:
    if isinstance(source, HolonomyMultiset):
        return source
    return _holonomies(source, radius, threads)


def run_siegel(source, A: float, t: float, M_theta: int = C.DEFAULT_THETA,
               threads=None) -> SiegelEstimate:
    """(4/3) pi A_t h_A^SV; ``source`` is a surface or an enumerated multiset."""
    ms = _as_multiset(source, C.required_radius(A, t), threads)
    ca = C.circle_average_sv(ms, A, t, M_theta)
    k = 4 / 3 * math.pi
    return SiegelEstimate(t, A, M_theta, ca.value, ca.refinement_error, k * ca.value,
                          k * ca.refinement_error, t < PRE_ASYMPTOTIC_T)


@dataclass
class DecompositionCheck:
    passed: bool
    terms: C.Decomposition

    def table(self) -> Table:
        d = self.terms
        row = [d.t, d.A, d.M_theta, d.N_star, d.At_hA, d.m_t, d.e1, d.e2, d.e3, d.e4, d.lhs,
               d.residual, d.refine_err, d.budget(), d.coverage_violations, d.marginal_pairs,
               self.passed]
        return Table("decomposition", {}, list(DECOMP_COLUMNS), [row])


def run_decomposition_check(source, A: float, t: float, M_theta: int = C.DEFAULT_THETA,
                            threads=None) -> DecompositionCheck:
    radius = max(C.required_radius(A, t), math.exp(t))
    ms = _as_multiset(source, radius, threads)
    d = C.decomposition_terms(ms, A, t, M_theta)
    ok = abs(d.residual) <= d.budget() and d.coverage_violations == 0
    return DecompositionCheck(bool(ok), d)


# ---------------------------------------------------------------------------
# export

def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if not math.isfinite(v):
            return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
        s = format(v, ".17g")
        if not any(ch in s for ch in ".en"):
            s += ".0"
        return s
    return str(v)


def _parse(s: str):
    if s == "":
        return None
    if s in ("true", "false"):
        return s == "true"
    if s in ("nan", "inf", "-inf"):
        return float(s)
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def _json_value(v) -> str:
    if isinstance(v, bool) or v is None:
        return json.dumps(v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return _fmt(v) if math.isfinite(v) else "null"
    if isinstance(v, dict):
        return "{" + ", ".join(f"{json.dumps(k)}: {_json_value(x)}" for k, x in v.items()) + "}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_json_value(x) for x in v) + "]"
    return json.dumps(str(v))


def _to_table(report) -> Table:
    return report if isinstance(report, Table) else report.table()


def dumps(report, fmt: str = "json") -> str:
    tab = _to_table(report)
    if fmt == "csv":
        buf = io.StringIO()
        for k, v in tab.meta.items():
            buf.write(f"# {k}={_fmt(v)}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(tab.columns)
        for row in tab.rows:
            w.writerow([_fmt(v) for v in row])
        return buf.getvalue()
    if fmt == "json":
        rows = [dict(zip(tab.columns, r)) for r in tab.rows]
        lines = ["{",
                 f'  "kind": {json.dumps(tab.kind)},',
                 f'  "meta": {_json_value(tab.meta)},',
                 f'  "columns": {_json_value(tab.columns)},',
                 '  "rows": [']
        lines += [f"    {_json_value(r)}" + ("," if i < len(rows) - 1 else "")
                  for i, r in enumerate(rows)]
        lines += ["  ]", "}"]
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown format {fmt!r}")


def export(report, fmt: str, path=None) -> str:
    """Serialise a report as csv or json; writes ``path`` when given."""
    text = dumps(report, fmt)
    if path is not None:
        Path(path).write_text(text)
    return text


def loads(text: str, fmt: str, kind: str = "") -> Table:
    if fmt == "json":
        d = json.loads(text)
        cols = d["columns"]
        return Table(d["kind"], d["meta"], cols, [[r[c] for c in cols] for r in d["rows"]])
    meta, body = {}, []
    for line in text.splitlines():
        if line.startswith("# "):
            k, _, v = line[2:].partition("=")
            meta[k] = _parse(v)
        else:
            body.append(line)
    rows = list(csv.reader(body))
    return Table(kind, meta, rows[0], [[_parse(v) for v in r] for r in rows[1:]])


def load(path, fmt: str | None = None) -> Table:
    path = Path(path)
    fmt = fmt or path.suffix.lstrip(".")
    return loads(path.read_text(), fmt)


def schema_path() -> Path:
    return Path(__file__).with_name("schemas") / "report.schema.json"


def dyadic_identity(report: CountingReport, J: int) -> bool:
    """N_A(R_max) = N_A(R_max / 2^J) + sum_{j<J} N*_A(R_max / 2^j) on the grid."""
    radii = report.radii
    idx = {round(math.log2(radii[0] / r) * 4): i for i, r in enumerate(radii)}
    if 4 * J not in idx:
        raise ValueError(f"R_max/2^{J} is not on the grid")
    total = report.counts_NA[idx[4 * J]] + sum(report.counts_Nstar[idx[4 * j]] for j in range(J))
    return total == report.counts_NA[0]

