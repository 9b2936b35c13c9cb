"""Command line interface: ``flatcount <command> ...``.

Exit codes: 0 success, 1 check failure, 2 usage error, 3 budget or
certificate error.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys

from . import counting as C
from . import experiments as E
from .enumeration import enumerate_connections, enumerate_origami
from .errors import (BudgetError, CatalogError, CertificateError, FlatcountError, GeometryError,
                     InconsistencyError, MatrixError, ModeError, ParseError, ToleranceError)
from .sl2 import Mat2, act_on_surface
from .surface import (catalog, load_surface, singularity_data, stratum, total_area, validate)

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_BUDGET = 0, 1, 2, 3

ENUM_COLUMNS = ["x", "y", "length", "start_sing", "end_sing", "sheet", "collapsed"]


class UsageError(Exception):
    pass


def _surface_args(p):
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--surface", metavar="FILE", help="surface JSON file")
    src.add_argument("--catalog", metavar="NAME",
                     help="torus, L-origami, regular-octagon or random-origami")
    p.add_argument("--normalize", action="store_true", help="rescale to unit area")
    p.add_argument("--n", type=int, help="square count for random-origami")
    p.add_argument("--seed", type=int, default=0, help="seed for random-origami")
    p.add_argument("--gt", type=float, metavar="T", help="apply g_T")
    p.add_argument("--rot", type=float, metavar="THETA", help="apply r_THETA")
    p.add_argument("--mat", metavar="a,b,c,d", help="apply a unimodular matrix")
    p.add_argument("--threads", type=int, help="worker processes (FLATCOUNT_THREADS overrides)")
    p.add_argument("--output", metavar="PATH")
    p.add_argument("--format", choices=("csv", "json"), default="csv")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="flatcount",
                                 description="Saddle connection counting on translation surfaces.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a surface and print its stratum")
    _surface_args(p)

    p = sub.add_parser("enumerate", help="list saddle connections up to a length")
    _surface_args(p)
    p.add_argument("-L", "--length", type=float, required=True)
    p.add_argument("--oracle", choices=("sector", "origami"), default="sector")
    p.add_argument("--collapse", action="store_true", help="drop repeated holonomies")
    p.add_argument("--delaunay", action="store_true", help="search on the Delaunay triangulation")

    p = sub.add_parser("count", help="N, N_A and N*_A at one radius")
    _surface_args(p)
    p.add_argument("-A", type=float, default=1.0)
    p.add_argument("-R", type=float, required=True)
    p.add_argument("--exclude-diagonal", action="store_true")

    for name, helptext in (("circle-average", "circle average of the h_A transform"),
                           ("decompose", "main and error terms at time t")):
        p = sub.add_parser(name, help=helptext)
        _surface_args(p)
        p.add_argument("-A", type=float, default=1.0)
        p.add_argument("-t", type=float, required=True)
        p.add_argument("--theta-samples", type=int, default=C.DEFAULT_THETA)

    p = sub.add_parser("fit", help="convergence study of N_A(R)/R^2")
    _surface_args(p)
    p.add_argument("-A", type=float, default=1.0)
    p.add_argument("-R", type=float, required=True, help="largest radius")
    p.add_argument("--grid", type=int, default=17)
    p.add_argument("--siegel", action="store_true", help="also estimate the constant by circle averages")
    p.add_argument("-t", type=float, help="time for the circle-average estimate")
    p.add_argument("--theta-samples", type=int, default=C.DEFAULT_THETA)
    p.add_argument("--exclude-diagonal", action="store_true")
    p.add_argument("--timing", action="store_true", help="include runtime in the report")
    return ap


def _matrix(args):
    m = Mat2.identity()
    if args.mat:
        try:
            vals = [float(v) for v in args.mat.split(",")]
        except ValueError:
            raise UsageError(f"--mat expects four numbers, got {args.mat!r}")
        if len(vals) != 4:
            raise UsageError(f"--mat expects four numbers, got {args.mat!r}")
        m = Mat2.raw(*vals)
    if args.rot is not None:
        m = Mat2.r(args.rot) @ m
    if args.gt is not None:
        m = Mat2.g(args.gt) @ m
    return None if m == Mat2.identity() else m


def _load(args):
    if args.surface:
        surface = load_surface(args.surface)
        if args.normalize:
            from .surface import normalized
            surface = normalized(surface)
    else:
        surface = catalog(args.catalog, normalize=args.normalize, n=args.n, seed=args.seed)
    m = _matrix(args)
    return act_on_surface(m, surface) if m is not None else surface


def _emit(args, table):
    text = E.export(table, args.format, args.output)
    if args.output is None:
        sys.stdout.write(text)


def cmd_validate(args) -> int:
    if args.surface:
        from .surface import surface_from_dict
        import json
        try:
            with open(args.surface) as fh:
                surface = surface_from_dict(json.load(fh))
        except (OSError, ValueError) as exc:
            raise ParseError(str(exc))
    else:
        surface = catalog(args.catalog, normalize=args.normalize, n=args.n, seed=args.seed)
    problems = validate(surface)
    if problems:
        for msg in problems:
            print(f"invalid: {msg}")
        return EXIT_CHECK
    sig = stratum(surface)
    print(f"surface: {surface.name or '-'}")
    print(f"triangles: {surface.n_triangles}")
    print(f"area: {total_area(surface):.12g}")
    for s in singularity_data(surface):
        print(f"singularity {s.id}: cone angle {s.cone_angle / math.pi:.6g} pi, order {s.order}")
    print(f"genus: {sig.genus}")
    print(f"stratum: H({', '.join(str(k) for k in sig.orders)})")
    return EXIT_OK


def cmd_enumerate(args) -> int:
    surface = _load(args)
    if args.oracle == "origami":
        ms = enumerate_origami(surface, args.length)
        if args.collapse:
            ms = ms.collapse()
    else:
        ms = enumerate_connections(surface, args.length, threads=args.threads,
                                   collapse=args.collapse, delaunay=args.delaunay)
    rows = [[sc.holonomy[0], sc.holonomy[1], sc.length, sc.start, sc.end, sc.sheet, ms.collapsed]
            for sc in ms]
    meta = {"surface": surface.name, "L": float(args.length), "oracle": args.oracle,
            "count": len(ms)}
    _emit(args, E.Table("enumeration", meta, list(ENUM_COLUMNS), rows))
    return EXIT_OK


def cmd_count(args) -> int:
    surface = _load(args)
    ms = enumerate_connections(surface, args.R, threads=args.threads)
    idx = C.PairIndex(ms, args.A, args.R, not args.exclude_diagonal)
    n_a = idx.count(args.R)
    row = [args.R, C.count_N(ms, args.R), n_a, n_a - idx.count(args.R / 2)]
    meta = {"surface": surface.name, "A": args.A, "include_diagonal": not args.exclude_diagonal}
    _emit(args, E.Table("count", meta, list(E.COUNT_COLUMNS), [row]))
    return EXIT_OK


def cmd_circle_average(args) -> int:
    surface = _load(args)
    est = E.run_siegel(surface, args.A, args.t, args.theta_samples, threads=args.threads)
    tab = est.table()
    tab.meta["surface"] = surface.name
    _emit(args, tab)
    return EXIT_OK


def cmd_decompose(args) -> int:
    surface = _load(args)
    res = E.run_decomposition_check(surface, args.A, args.t, args.theta_samples,
                                    threads=args.threads)
    tab = res.table()
    tab.meta["surface"] = surface.name
    _emit(args, tab)
    return EXIT_OK if res.passed else EXIT_CHECK


def cmd_fit(args) -> int:
    surface = _load(args)
    rep = E.run_convergence(surface, args.A, args.R, args.grid, threads=args.threads,
                            include_diagonal=not args.exclude_diagonal, siegel=args.siegel,
                            t_siegel=args.t, M_theta=args.theta_samples, seed=args.seed)
    _emit(args, rep.table(include_runtime=args.timing))
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "enumerate": cmd_enumerate,
    "count": cmd_count,
    "circle-average": cmd_circle_average,
    "decompose": cmd_decompose,
    "fit": cmd_fit,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (BudgetError, CertificateError) as exc:
        print(f"flatcount: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (GeometryError, ToleranceError, InconsistencyError) as exc:
        print(f"flatcount: check failed: {exc}", file=sys.stderr)
        return EXIT_CHECK
    except (UsageError, ParseError, CatalogError, ModeError, MatrixError, ValueError,
            OSError) as exc:
        print(f"flatcount: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FlatcountError as exc:
        print(f"flatcount: {exc}", file=sys.stderr)
        return EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())
