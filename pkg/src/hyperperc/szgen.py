"""Generators, exact connection vectors, and critical polynomials.

A k-generator is a finite graph with k distinguished terminal vertices;
substituting one into every hyperedge of a k-uniform hyperlattice turns
hyperedge states into bond (or site) percolation.  Enumerating all bond
states exactly gives per-partition connection polynomials; for three
terminals the self-duality condition "all connected" = "none connected"
is a single polynomial equation whose root in (0,1) is the predicted
critical point.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

from . import ncpart
from .errors import CapacityError, InvalidInputError

MAX_ENUM_STATES_LOG2 = 24


class Poly:
    """Univariate polynomial with exact rational coefficients."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs=()):
        cs = [Fraction(c) for c in coeffs]
        while cs and cs[-1] == 0:
            cs.pop()
        self.coeffs = tuple(cs)

    @classmethod
    def const(cls, c):
        return cls((c,))

    @classmethod
    def x(cls):
        return cls((0, 1))

    @property
    def degree(self):
        return len(self.coeffs) - 1 if self.coeffs else -1

    def is_zero(self):
        return not self.coeffs

    def __add__(self, other):
        other = other if isinstance(other, Poly) else Poly.const(other)
        n = max(len(self.coeffs), len(other.coeffs))
        a = list(self.coeffs) + [Fraction(0)] * (n - len(self.coeffs))
        b = list(other.coeffs) + [Fraction(0)] * (n - len(other.coeffs))
        return Poly(x + y for x, y in zip(a, b))

    __radd__ = __add__

    def __neg__(self):
        return Poly(-c for c in self.coeffs)

    def __sub__(self, other):
        other = other if isinstance(other, Poly) else Poly.const(other)
        return self + (-other)

    def __rsub__(self, other):
        return Poly.const(other) + (-self)

    def __mul__(self, other):
        other = other if isinstance(other, Poly) else Poly.const(other)
        if self.is_zero() or other.is_zero():
            return Poly()
        out = [Fraction(0)] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            if a:
                for j, b in enumerate(other.coeffs):
                    out[i + j] += a * b
        return Poly(out)

    __rmul__ = __mul__

    def __eq__(self, other):
        other = other if isinstance(other, Poly) else Poly.const(other)
        return self.coeffs == other.coeffs

    def __hash__(self):
        return hash(self.coeffs)

    def __call__(self, x):
        acc = 0 if isinstance(x, Fraction) else 0.0
        for c in reversed(self.coeffs):
            acc = acc * x + (c if isinstance(x, Fraction) else float(c))
        return acc

    def derivative(self):
        return Poly(i * c for i, c in enumerate(self.coeffs) if i >= 1)

    def __repr__(self):
        if self.is_zero():
            return "Poly(0)"
        terms = [f"{c}*p^{i}" if i else f"{c}" for i, c in enumerate(self.coeffs) if c]
        return "Poly(" + " + ".join(terms) + ")"


ZERO = Poly()
ONE = Poly.const(1)


def _check_unit_range(poly, what):
    for i in range(17):
        v = poly(i / 16)
        if v < -1e-9 or v > 1 + 1e-9:
            raise InvalidInputError(f"{what} leaves [0,1] at p={i / 16}: {v}")


@dataclass(frozen=True)
class Generator:
    """A finite graph with k distinguished terminals in cyclic outer order.

    In bond mode each bond carries an open-probability polynomial in the
    model parameter; in site mode bonds are fixed, terminals are always
    open, and each internal vertex carries an open-probability polynomial.
    Optional coordinates support substitution into a drawn hyperlattice.
    """

    terminals: tuple
    vertices: tuple
    bonds: tuple                      # ((u, v, Poly), ...)
    mode: str = "bond"
    site_probs: dict = field(default_factory=dict)
    coords: dict = field(default_factory=dict)

    def __post_init__(self):
        ids = set(self.vertices)
        if len(ids) != len(self.vertices):
            raise InvalidInputError("duplicate vertex ids")
        if len(set(self.terminals)) != len(self.terminals):
            raise InvalidInputError("terminals must be distinct")
        for t in self.terminals:
            if t not in ids:
                raise InvalidInputError(f"terminal {t!r} is not a vertex")
        if self.mode not in ("bond", "site"):
            raise InvalidInputError(f"unknown mode {self.mode!r}")
        for u, v, poly in self.bonds:
            if u not in ids or v not in ids:
                raise InvalidInputError(f"bond ({u!r},{v!r}) references missing vertex")
            _check_unit_range(poly, f"bond ({u!r},{v!r}) probability")
        for v, poly in self.site_probs.items():
            if v not in ids:
                raise InvalidInputError(f"site probability for missing vertex {v!r}")
            _check_unit_range(poly, f"site probability of {v!r}")
        # connected ground graph
        adj = {v: set() for v in self.vertices}
        for u, v, _ in self.bonds:
            adj[u].add(v)
            adj[v].add(u)
        seen = set()
        stack = [self.vertices[0]]
        while stack:
            v = stack.pop()
            if v in seen:
                continue
            seen.add(v)
            stack.extend(adj[v] - seen)
        if seen != ids:
            raise InvalidInputError("generator graph is not connected")

    @property
    def k(self):
        return len(self.terminals)

    def internals(self):
        return tuple(v for v in self.vertices if v not in self.terminals)


def triangle_generator():
    """Three terminals joined by a 3-cycle, each bond open at the parameter."""
    x = Poly.x()
    return Generator(
        terminals=("A", "B", "C"),
        vertices=("A", "B", "C"),
        bonds=(("A", "B", x), ("B", "C", x), ("C", "A", x)),
        coords={"A": (0.0, 0.0), "B": (1.0, 0.0), "C": (0.0, 1.0)},
    )


def star_generator():
    """Three terminals joined to a central vertex, each spoke at the parameter."""
    x = Poly.x()
    return Generator(
        terminals=("A", "B", "C"),
        vertices=("A", "B", "C", "O"),
        bonds=(("A", "O", x), ("B", "O", x), ("C", "O", x)),
        coords={"A": (0.0, 0.0), "B": (1.0, 0.0), "C": (0.0, 1.0),
                "O": (1 / 3, 1 / 3)},
    )


def bond_generator():
    """A single bond between two terminals."""
    return Generator(
        terminals=("A", "B"),
        vertices=("A", "B"),
        bonds=(("A", "B", Poly.x()),),
        coords={"A": (0.0, 0.0), "B": (1.0, 0.0)},
    )


BUILTIN_GENERATORS = {
    "triangle": triangle_generator,
    "star": star_generator,
    "bond": bond_generator,
}


class ConnectionVector:
    """Per-terminal-partition connection polynomials, exact and summing to 1."""

    def __init__(self, k, polys):
        self.k = k
        self.polys = {blocks: poly for blocks, poly in polys.items()
                      if not poly.is_zero()}
        total = Poly()
        for poly in self.polys.values():
            total = total + poly
        if total != ONE:
            raise InvalidInputError("connection polynomials do not sum to 1")

    def poly(self, blocks):
        key = tuple(sorted((tuple(sorted(b)) for b in blocks), key=lambda b: b[0]))
        return self.polys.get(key, ZERO)

    def support(self):
        return sorted(self.polys)

    def noncrossing_support(self):
        return all(ncpart.is_noncrossing(self.k, blocks) for blocks in self.polys)

    def evaluate(self, p):
        """The probability vector at parameter p; requires non-crossing support."""
        entries = {}
        for blocks, poly in self.polys.items():
            value = poly(p)
            if not ncpart.is_noncrossing(self.k, blocks):
                if abs(value) > 1e-15:
                    raise InvalidInputError(
                        f"crossing partition {blocks} has probability {value}")
                continue
            entries[ncpart.NCPartition(self.k, blocks)] = max(value, 0.0)
        return ncpart.ProbabilityVector(self.k, entries)


def _terminal_partition(k, terms, adj_pairs, index):
    """Canonical blocks of terminals connected through `adj_pairs` unions."""
    parent = list(range(len(index)))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for u, v in adj_pairs:
        ru, rv = find(index[u]), find(index[v])
        if ru != rv:
            parent[ru] = rv
    groups = {}
    for t_i, t in enumerate(terms):
        groups.setdefault(find(index[t]), []).append(t_i)
    return tuple(sorted((tuple(sorted(b)) for b in groups.values()),
                        key=lambda b: b[0]))


def connection_vector(g):
    """Exact distribution of the terminal partition by full state enumeration.

    Bond mode sums over all 2^|bonds| open sets; site mode over all
    2^|internals| open vertex sets with terminals always open.
    """
    index = {v: i for i, v in enumerate(g.vertices)}
    acc = {}

    def add(blocks, poly):
        acc[blocks] = acc.get(blocks, ZERO) + poly

    if g.mode == "bond":
        items = list(g.bonds)
        if len(items) > MAX_ENUM_STATES_LOG2:
            raise CapacityError(
                f"{len(items)} bonds exceed the 2^{MAX_ENUM_STATES_LOG2} state bound")

        def rec(i, weight, open_pairs):
            if weight.is_zero():
                return
            if i == len(items):
                add(_terminal_partition(g.k, g.terminals, open_pairs, index), weight)
                return
            u, v, poly = items[i]
            rec(i + 1, weight * poly, open_pairs + [(u, v)])
            rec(i + 1, weight * (ONE - poly), open_pairs)

        rec(0, ONE, [])
    else:
        internals = g.internals()
        if len(internals) > MAX_ENUM_STATES_LOG2:
            raise CapacityError(
                f"{len(internals)} internal vertices exceed the state bound")
        default = Poly.x()

        def rec(i, weight, open_set):
            if weight.is_zero():
                return
            if i == len(internals):
                pairs = [(u, v) for u, v, _ in g.bonds
                         if (u in open_set or u in g.terminals)
                         and (v in open_set or v in g.terminals)]
                add(_terminal_partition(g.k, g.terminals, pairs, index), weight)
                return
            v = internals[i]
            q = g.site_probs.get(v, default)
            rec(i + 1, weight * q, open_set | {v})
            rec(i + 1, weight * (ONE - q), open_set)

        rec(0, ONE, frozenset())

    return ConnectionVector(g.k, acc)


def _top_blocks(k):
    return (tuple(range(k)),)


def _bottom_blocks(k):
    return tuple((i,) for i in range(k))


@dataclass
class SelfDualityConstraint:
    partition: tuple        # blocks on the generator's terminals
    dual_partition: tuple   # matching blocks on the dual's terminals
    poly: Poly


def selfduality_system(g, cv=None):
    """All self-duality constraints P(pi) - P(sigma(pi)) for a k-generator.

    sigma sends pi to its dual partition relabelled by j -> j-1, the
    alignment that makes the three pair partitions fixed points when k=3
    (the dual triangle's first vertex sits opposite the first vertex).
    The relabelling for k > 3 is a convention; only the k=3 equation is
    convention-free.
    """
    cv = connection_vector(g) if cv is None else cv
    k = g.k
    seen = set()
    out = []
    for pi in ncpart.enumerate_nc(k):
        sigma = ncpart.rotate(ncpart.dual(pi), -1)
        if sigma == pi:
            continue
        key = frozenset((pi, sigma))
        if key in seen:
            continue
        seen.add(key)
        out.append(SelfDualityConstraint(
            partition=pi.blocks, dual_partition=sigma.blocks,
            poly=cv.poly(pi.blocks) - cv.poly(sigma.blocks)))
    return out


def selfdual_equation(g, cv=None):
    """For 3 terminals, the single polynomial P(all connected) - P(none).

    For k > 3 returns the full constraint list from `selfduality_system`.
    """
    cv = connection_vector(g) if cv is None else cv
    if g.k == 3:
        return cv.poly(_top_blocks(3)) - cv.poly(_bottom_blocks(3))
    return selfduality_system(g, cv)


@dataclass
class RootReport:
    status: str                 # "ok" | "no-root" | "identically-zero"
    coeffs: tuple               # exact coefficients of the equation
    brackets: list              # sign-change intervals found in (0, 1)
    roots: list                 # one refined root per bracket

    @property
    def root(self):
        return self.roots[0] if self.roots else None

    def as_dict(self):
        return {
            "status": self.status,
            "coeffs": [str(c) for c in self.coeffs],
            "coeffs_float": [float(c) for c in self.coeffs],
            "brackets": self.brackets,
            "roots": self.roots,
        }


def _refine_root(poly, lo, hi, tol=1e-12):
    flo = poly(lo)
    if flo == 0.0:
        return lo
    if poly(hi) == 0.0:
        return hi
    while hi - lo > tol / 4:
        mid = (lo + hi) / 2
        fm = poly(mid)
        if fm == 0.0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    # Newton polish inside the bracket
    x = (lo + hi) / 2
    dpoly = poly.derivative()
    for _ in range(4):
        d = dpoly(x)
        if d == 0.0:
            break
        step = poly(x) / d
        nx = x - step
        if not lo - tol <= nx <= hi + tol:
            break
        x = nx
    return x


def critical_point(g, grid=2048):
    """Roots of the self-duality equation in (0, 1).

    Sign changes are located on a uniform grid and each bracket is
    bisected to 1e-12 then Newton-polished.  All brackets are reported;
    no sign change yields a "no-root" report, not an exception.
    """
    if g.k != 3:
        raise InvalidInputError("single-equation critical point requires 3 terminals")
    f = selfdual_equation(g)
    if f.is_zero():
        return RootReport(status="identically-zero", coeffs=(), brackets=[], roots=[])
    xs = [i / grid for i in range(grid + 1)]
    vals = [f(x) for x in xs]
    brackets = []
    roots = []
    for i in range(grid):
        a, b = vals[i], vals[i + 1]
        if a == 0.0:
            if 0 < xs[i] < 1 and (not roots or abs(roots[-1] - xs[i]) > 1e-9):
                brackets.append((xs[i], xs[i]))
                roots.append(xs[i])
        elif (a > 0) != (b > 0):
            lo, hi = xs[i], xs[i + 1]
            root = _refine_root(f, lo, hi)
            if 0 < root < 1:
                brackets.append((lo, hi))
                roots.append(root)
    if not roots:
        return RootReport(status="no-root", coeffs=f.coeffs, brackets=[], roots=[])
    return RootReport(status="ok", coeffs=f.coeffs, brackets=brackets, roots=roots)


@dataclass
class RealizabilityCheck:
    name: str
    lhs: float
    rhs: float
    holds: bool


@dataclass
class RealizabilityReport:
    checks: list
    passes: bool    # all necessary conditions hold

    def failures(self):
        return [c for c in self.checks if not c.holds]

    def as_dict(self):
        return {"passes": self.passes,
                "checks": [dict(c.__dict__) for c in self.checks]}


def realizability_check(v):
    """Necessary positive-correlation conditions for bond/site realizability.

    Any failing inequality certifies the 3-terminal vector cannot arise
    from independent bonds or sites: pairwise-connection events would have
    to be positively correlated, and the product condition of Chayes-Lei
    would have to hold.
    """
    if v.k != 3:
        raise InvalidInputError("realizability check is defined for k = 3")
    names = "ABC"
    pair = {}
    for i, j in itertools.combinations(range(3), 2):
        pair[(i, j)] = v.prob(ncpart.NCPartition(3, [[i, j], [3 - i - j]]))
    p_top = v.prob(ncpart.top(3))
    p_bot = v.prob(ncpart.bottom(3))
    checks = []
    # connection events {x~y} and {y~z} must be positively correlated
    for (a, b), (c, d) in itertools.combinations(pair, 2):
        lhs = p_top
        rhs = (p_top + pair[(a, b)]) * (p_top + pair[(c, d)])
        checks.append(RealizabilityCheck(
            name=f"corr[{names[a]}{names[b]},{names[c]}{names[d]}]",
            lhs=lhs, rhs=rhs, holds=lhs >= rhs - 1e-12))
    # Chayes-Lei product conditions, one per singled-out pair
    combos = [((0, 1), (1, 2), (0, 2)), ((0, 2), (0, 1), (1, 2)),
              ((1, 2), (0, 1), (0, 2))]
    for single, other1, other2 in combos:
        lhs = p_top * p_bot
        rhs = pair[single] * (pair[other1] + pair[other2])
        checks.append(RealizabilityCheck(
            name=f"prod[{names[single[0]]}{names[single[1]]}]",
            lhs=lhs, rhs=rhs, holds=lhs >= rhs - 1e-12))
    return RealizabilityReport(checks=checks, passes=all(c.holds for c in checks))


# ---------------------------------------------------------------------------
# JSON file format
# ---------------------------------------------------------------------------

def _poly_from_json(obj):
    if isinstance(obj, (int, float, str)):
        return Poly.const(Fraction(obj))
    return Poly(Fraction(c) for c in obj)


def generator_from_json(obj):
    try:
        terminals = tuple(obj["terminals"])
        mode = obj.get("mode", "bond")
        raw_vertices = obj.get("vertices", [])
        vertices = []
        coords = {}
        site_probs = {}
        for item in raw_vertices:
            if isinstance(item, dict):
                vid = item["id"]
                vertices.append(vid)
                if "x" in item and "y" in item:
                    coords[vid] = (float(item["x"]), float(item["y"]))
                if "p" in item:
                    site_probs[vid] = _poly_from_json(item["p"])
            else:
                vertices.append(item)
        bonds = []
        for bond in obj.get("bonds", []):
            poly = _poly_from_json(bond["p"]) if "p" in bond else Poly.x()
            bonds.append((bond["u"], bond["v"], poly))
        for extra in terminals:
            if extra not in vertices:
                vertices.append(extra)
        for bond in bonds:
            for end in bond[:2]:
                if end not in vertices:
                    vertices.append(end)
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidInputError(f"malformed generator JSON: {exc}") from exc
    return Generator(terminals=terminals, vertices=tuple(vertices),
                     bonds=tuple(bonds), mode=mode, site_probs=site_probs,
                     coords=coords)


def generator_to_json(g):
    verts = []
    for v in g.vertices:
        item = {"id": v}
        if v in g.coords:
            item["x"], item["y"] = g.coords[v]
        if v in g.site_probs:
            item["p"] = [str(c) for c in g.site_probs[v].coeffs]
        verts.append(item)
    return {
        "terminals": list(g.terminals),
        "vertices": verts,
        "bonds": [{"u": u, "v": v, "p": [str(c) for c in poly.coeffs]}
                  for u, v, poly in g.bonds],
        "mode": g.mode,
    }


def connection_vector_to_json(cv):
    return {
        "k": cv.k,
        "polys": [{"blocks": [list(b) for b in blocks],
                   "coeffs": [str(c) for c in poly.coeffs],
                   "coeffs_float": [float(c) for c in poly.coeffs]}
                  for blocks, poly in sorted(cv.polys.items())],
    }
