"""Command-line interface: partitions, solve, scan, survey, check, harris.

Every randomized command records its seed in the output header, so a run
can be reproduced byte for byte; exit codes are 0 (ok), 2 (validation),
3 (capacity), 4 (no root found).
"""

from __future__ import annotations

import argparse
import json
import os
import secrets
import sys

from . import harris, hypermap, ncpart, percsim, szgen
from ._kernels import backend_name
from .errors import CapacityError, InvalidInputError

ENV_THREADS = "HYPERPERC_THREADS"

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_CAPACITY = 3
EXIT_NO_ROOT = 4


def _resolve_threads(args):
    if args.threads is not None:
        return args.threads
    env = os.environ.get(ENV_THREADS)
    return int(env) if env else None


def _resolve_seed(args):
    return args.seed if args.seed is not None else secrets.randbits(63)


def _parse_sizes(text):
    try:
        sizes = [int(x) for x in text.split(",") if x]
    except ValueError as exc:
        raise InvalidInputError(f"bad --sizes {text!r}") from exc
    if not sizes:
        raise InvalidInputError("--sizes is empty")
    return sizes


def _parse_grid(text):
    try:
        a, b, step = (float(x) for x in text.split(":"))
    except ValueError as exc:
        raise InvalidInputError(f"bad --param-grid {text!r}; use a:b:step") from exc
    if step <= 0 or b < a:
        raise InvalidInputError("--param-grid needs a <= b and step > 0")
    grid = []
    x = a
    while x <= b + 1e-12:
        grid.append(round(x, 12))
        x += step
    return grid


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise InvalidInputError(f"file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"invalid JSON in {path}: {exc}") from exc


def _load_lattice(spec):
    if spec in hypermap.BUILTIN_LATTICES:
        return hypermap.builtin(spec)
    return hypermap.lattice_from_json(_load_json(spec))


def _load_generator(spec):
    if spec in szgen.BUILTIN_GENERATORS:
        return szgen.BUILTIN_GENERATORS[spec]()
    return szgen.generator_from_json(_load_json(spec))


def _load_vectors(path, lattice):
    obj = _load_json(path)
    if isinstance(obj, dict) and "entries" in obj:
        v = ncpart.vector_from_json(obj)
        return {slot: v for slot in set(lattice.orbit_of_edge)}
    if isinstance(obj, list):
        return {i: ncpart.vector_from_json(item) for i, item in enumerate(obj)}
    raise InvalidInputError(
        "vectors file must be a probability-vector object or a list of them")


def _emit(args, header_lines, csv_header, csv_rows, json_obj):
    """Write csv (comment header + table) or pretty JSON to --out/stdout."""
    if args.format == "json":
        text = json.dumps(json_obj, indent=2, sort_keys=True) + "\n"
    else:
        lines = [f"# {line}" for line in header_lines]
        lines.append(",".join(csv_header))
        for row in csv_rows:
            lines.append(",".join(str(x) for x in row))
        text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _block_str(blocks):
    return "|".join("".join(str(j) for j in b) for b in blocks)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_partitions(args):
    parts = ncpart.enumerate_nc(args.k)
    rows = []
    jrows = []
    for i, pi in enumerate(parts):
        d = ncpart.dual(pi)
        rows.append((i, _block_str(pi.blocks), _block_str(d.blocks),
                     pi.n_blocks(), d.n_blocks()))
        jrows.append({"index": i, "blocks": [list(b) for b in pi.blocks],
                      "dual": [list(b) for b in d.blocks]})
    _emit(args, [f"hyperperc partitions k={args.k} count={len(parts)}"],
          ["index", "partition", "dual", "blocks", "dual_blocks"], rows,
          {"k": args.k, "count": len(parts), "partitions": jrows})
    return EXIT_OK


def cmd_solve(args):
    g = _load_generator(args.generator)
    cv = szgen.connection_vector(g)
    if g.k != 3:
        system = szgen.selfduality_system(g, cv)
        rows = [(_block_str(c.partition), _block_str(c.dual_partition),
                 " ".join(str(x) for x in c.poly.coeffs)) for c in system]
        _emit(args, [f"hyperperc solve generator={args.generator} k={g.k}",
                     "self-duality constraint system (convention-dependent "
                     "labelling for k != 3)"],
              ["partition", "dual_partition", "coeffs"], rows,
              {"k": g.k, "constraints": [
                  {"partition": [list(b) for b in c.partition],
                   "dual_partition": [list(b) for b in c.dual_partition],
                   "coeffs": [str(x) for x in c.poly.coeffs]}
                  for c in system]})
        return EXIT_OK
    report = szgen.critical_point(g)
    rows = [(r, lo, hi) for r, (lo, hi) in zip(report.roots, report.brackets)]
    _emit(args, [f"hyperperc solve generator={args.generator}",
                 f"status={report.status}",
                 "coeffs=" + " ".join(str(c) for c in report.coeffs)],
          ["root", "bracket_lo", "bracket_hi"], rows, report.as_dict())
    return EXIT_NO_ROOT if report.status == "no-root" else EXIT_OK


def cmd_scan(args):
    lattice = _load_lattice(args.lattice)
    seed = _resolve_seed(args)
    family = percsim.vector_family(lattice, args.family)
    sizes = _parse_sizes(args.sizes)
    grid = _parse_grid(args.param_grid)
    result = percsim.threshold_scan(
        lattice, family, sizes, grid, args.trials, seed,
        direction=args.direction, aspect=args.aspect, mode=args.mode,
        threads=_resolve_threads(args))
    header = [
        f"hyperperc scan lattice={args.lattice} family={args.family}",
        f"seed={seed} trials={args.trials} backend={backend_name()}",
    ]
    for size in sizes:
        cp = result.crossing_points[size]
        header.append(f"crossing_point L={size} "
                      f"{'none' if cp is None else cp}")
    rows = [(r.L, r.param, r.trials, r.hits, r.estimate, r.ci95)
            for r in result.rows]
    _emit(args, header, ["L", "param", "trials", "hits", "estimate", "ci95"],
          rows, {"seed": seed, "trials": args.trials,
                 "crossing_points": {str(k): v
                                     for k, v in result.crossing_points.items()},
                 "rows": result.as_rows()})
    return EXIT_OK


def cmd_survey(args):
    lattice = _load_lattice(args.lattice)
    seed = _resolve_seed(args)
    family = percsim.vector_family(lattice, args.family)
    window = percsim.Window(lattice, args.size, args.size, args.mode)
    result = percsim.cluster_survey(window, family(args.param), args.trials,
                                    seed, threads=_resolve_threads(args))
    radii = ([float(x) for x in args.radii.split(",")] if args.radii
             else sorted({1.0 * r for r in range(1, args.size // 2 + 1)}))
    tail = result.tail_rows(radii)
    rows = [(t["r"], t["count"], t["fraction"]) for t in tail]
    _emit(args, [f"hyperperc survey lattice={args.lattice} family={args.family} "
                 f"param={args.param} size={args.size}",
                 f"seed={seed} trials={args.trials} backend={backend_name()}"],
          ["r", "count", "fraction"], rows,
          {"seed": seed, "trials": args.trials, "tail": tail,
           "size_histogram": {str(k): v
                              for k, v in result.size_histogram.items()}})
    return EXIT_OK


def cmd_check(args):
    lattice = _load_lattice(args.lattice)
    vectors = _load_vectors(args.vectors, lattice)
    nondeg = all(ncpart.is_nondegenerate(v) for v in vectors.values())
    malleable = all(ncpart.is_malleable(v) for v in vectors.values())
    witness = hypermap.find_self_duality(lattice, vectors)
    obj = {
        "nondegenerate": nondeg,
        "malleable": malleable,
        "self_dual": witness is not None,
    }
    if witness is not None:
        obj["witness"] = witness.as_dict()
    rows = [(k, str(v).lower()) for k, v in obj.items() if k != "witness"]
    _emit(args, [f"hyperperc check lattice={args.lattice} vectors={args.vectors}"],
          ["property", "value"], rows, obj)
    return EXIT_OK


def cmd_harris(args):
    rows = []
    jrows = []
    if args.poset == "counterexample":
        m = harris.counterexample_measure(args.p0)
        a = harris.ProductUpset.explicit(m.poset, 1, {(0,), (1,)})
        b = harris.ProductUpset.explicit(m.poset, 1, {(0,), (2,)})
        for exponent in (1, None):
            rep = harris.harris_check(m, 1, a, b, exponent=exponent)
            rows.append((rep.exponent, rep.prob_a, rep.prob_b, rep.lhs,
                         rep.rhs, rep.holds))
            jrows.append(rep.as_dict())
        header = [f"hyperperc harris poset=counterexample p0={args.p0}",
                  "upsets A={x0,x1} B={x0,x2}"]
    else:
        m = harris.uniform_measure(harris.nc_poset(args.k))
        upsets = harris.enumerate_upsets(m.poset)
        prod = [harris.ProductUpset(1, members={(i,) for i in u}, _checked=True)
                for u in upsets]
        n_fail = 0
        for i, a in enumerate(prod):
            for b in prod[i:]:
                rep = harris.harris_check(m, 1, a, b)
                if not rep.holds:
                    n_fail += 1
                rows.append((rep.exponent, rep.prob_a, rep.prob_b, rep.lhs,
                             rep.rhs, rep.holds))
                jrows.append(rep.as_dict())
        header = [f"hyperperc harris poset=nc k={args.k} "
                  f"pairs={len(rows)} failures={n_fail}"]
    _emit(args, header,
          ["C", "prob_a", "prob_b", "lhs", "rhs", "holds"], rows,
          {"checks": jrows})
    return EXIT_OK


# ---------------------------------------------------------------------------

def _add_common(sp):
    sp.add_argument("--out", help="output path (default stdout)")
    sp.add_argument("--format", choices=("csv", "json"), default="csv")


def build_parser():
    p = argparse.ArgumentParser(
        prog="hyperperc",
        description="Hyperlattice percolation: partitions, critical "
                    "polynomials, Monte Carlo scans, self-duality checks.")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("partitions", help="list non-crossing partitions and duals")
    sp.add_argument("--k", type=int, required=True)
    _add_common(sp)
    sp.set_defaults(func=cmd_partitions)

    sp = sub.add_parser("solve", help="critical point of a 3-terminal generator")
    sp.add_argument("--generator", required=True,
                    help="builtin name (triangle, star, bond) or JSON file")
    _add_common(sp)
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("scan", help="crossing-probability threshold scan")
    sp.add_argument("--lattice", required=True,
                    help="builtin name (tri, tri-dual, tri-bond, hex-bond) "
                         "or lattice JSON file")
    sp.add_argument("--family", default="competition",
                    help="competition | topbottom | bond | uniform | top | "
                         "bottom | pair:i,j")
    sp.add_argument("--sizes", default="8,16,32")
    sp.add_argument("--param-grid", dest="param_grid", default="0.3:0.7:0.05")
    sp.add_argument("--trials", type=int, default=1000)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--threads", type=int)
    sp.add_argument("--direction", choices=("h", "v"), default="h")
    sp.add_argument("--aspect", type=float, default=None,
                    help="crossing rectangle aspect (default: full window)")
    sp.add_argument("--mode", choices=("open", "torus"), default="open")
    _add_common(sp)
    sp.set_defaults(func=cmd_scan)

    sp = sub.add_parser("survey", help="cluster size/radius survey")
    sp.add_argument("--lattice", required=True)
    sp.add_argument("--family", default="competition")
    sp.add_argument("--param", type=float, required=True)
    sp.add_argument("--size", type=int, default=32)
    sp.add_argument("--trials", type=int, default=1000)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--threads", type=int)
    sp.add_argument("--mode", choices=("open", "torus"), default="open")
    sp.add_argument("--radii", help="comma list of radii for the tail table")
    _add_common(sp)
    sp.set_defaults(func=cmd_survey)

    sp = sub.add_parser("check", help="validate vectors; report self-duality")
    sp.add_argument("--lattice", required=True)
    sp.add_argument("--vectors", required=True, help="vectors JSON file")
    _add_common(sp)
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("harris", help="correlation-inequality reports")
    sp.add_argument("--poset", choices=("nc", "counterexample"), default="nc")
    sp.add_argument("--k", type=int, default=3)
    sp.add_argument("--p0", type=float, default=0.2)
    _add_common(sp)
    sp.set_defaults(func=cmd_harris)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CapacityError as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except InvalidInputError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
