"""Finite posets, product measures and correlation-inequality checks.

Products of posets with a likely greatest element satisfy a Harris-type
bound Pr(A∩B) >= (Pr(A)Pr(B))^C with C = ceil(2/p0), where p0 is the
greatest element's probability.  This module verifies that bound
numerically on explicit upsets and evaluates the derived union/sqrt-trick
constants, which shrink fast enough that they are computed exactly as
rationals.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import ncpart
from .errors import CapacityError, InvalidInputError

MAX_UPSET_ELEMENTS = 16
MAX_PRODUCT_TUPLES = 10 ** 7
MAX_DELTA_BITS = 2_000_000  # exact delta chains beyond this would stall


class FinitePoset:
    """A partial order on an indexed element set, held as a boolean matrix."""

    def __init__(self, elements, le):
        self.elements = tuple(elements)
        n = len(self.elements)
        le = np.asarray(le, dtype=bool)
        if le.shape != (n, n):
            raise InvalidInputError(f"order matrix must be {n}x{n}")
        if not le.diagonal().all():
            raise InvalidInputError("order is not reflexive")
        if (le & le.T & ~np.eye(n, dtype=bool)).any():
            raise InvalidInputError("order is not antisymmetric")
        implied = (le.astype(np.int64) @ le.astype(np.int64)) > 0
        if (implied & ~le).any():
            raise InvalidInputError("order is not transitive")
        self.le = le
        self.n = n
        below_all = le.all(axis=0)
        above_all = le.all(axis=1)
        self.greatest = int(np.argmax(below_all)) if below_all.any() else None
        self.least = int(np.argmax(above_all)) if above_all.any() else None

    @classmethod
    def from_relations(cls, elements, pairs):
        """Build from arbitrary (lower, upper) index pairs; closure is taken."""
        n = len(elements)
        le = np.eye(n, dtype=bool)
        for a, b in pairs:
            le[a, b] = True
        for _ in range(n):
            new = le | ((le.astype(np.int64) @ le.astype(np.int64)) > 0)
            if (new == le).all():
                break
            le = new
        return cls(elements, le)

    def reverse(self):
        """The order-dual poset; turns downset statements into upset ones."""
        return FinitePoset(self.elements, self.le.T)

    def index(self, element):
        return self.elements.index(element)

    def __repr__(self):
        return f"FinitePoset({self.n} elements)"


def nc_poset(k):
    """The NC(k) refinement poset as a FinitePoset over NCPartition elements."""
    parts = ncpart.enumerate_nc(k)
    n = len(parts)
    le = np.zeros((n, n), dtype=bool)
    for i, a in enumerate(parts):
        for j, b in enumerate(parts):
            le[i, j] = ncpart.refines(a, b)
    return FinitePoset(parts, le)


class PosetMeasure:
    """A probability measure on the elements of a FinitePoset."""

    def __init__(self, poset, probs):
        probs = np.asarray(probs, dtype=float)
        if probs.shape != (poset.n,):
            raise InvalidInputError("one probability per poset element required")
        if (probs < 0).any():
            raise InvalidInputError("negative probability")
        if abs(math.fsum(probs.tolist()) - 1.0) > 1e-12:
            raise InvalidInputError("probabilities do not sum to 1")
        self.poset = poset
        self.probs = probs

    def greatest_prob(self):
        if self.poset.greatest is None:
            raise InvalidInputError("poset has no greatest element")
        return float(self.probs[self.poset.greatest])

    def least_prob(self):
        if self.poset.least is None:
            raise InvalidInputError("poset has no least element")
        return float(self.probs[self.poset.least])


def uniform_measure(poset):
    return PosetMeasure(poset, np.full(poset.n, 1.0 / poset.n))


def counterexample_measure(p0):
    """Three elements, x0 greatest, x1 and x2 incomparable below it.

    With Pr(x0)=p0 and the rest split evenly, the upsets {x0,x1} and
    {x0,x2} have probability (1+p0)/2 each but intersect in {x0} alone,
    so the plain Harris bound (exponent 1) fails for small p0.
    """
    if not 0 < p0 < 1:
        raise InvalidInputError("p0 must lie in (0, 1)")
    poset = FinitePoset.from_relations(("x0", "x1", "x2"), [(1, 0), (2, 0)])
    return PosetMeasure(poset, [p0, (1 - p0) / 2, (1 - p0) / 2])


def enumerate_upsets(poset):
    """All up-closed subsets of the poset, as frozensets of element indices."""
    if poset.n > MAX_UPSET_ELEMENTS:
        raise CapacityError(
            f"upset enumeration supports at most {MAX_UPSET_ELEMENTS} elements")
    up_mask = [0] * poset.n
    for i in range(poset.n):
        for j in range(poset.n):
            if poset.le[i, j]:
                up_mask[i] |= 1 << j
    out = []
    for mask in range(1 << poset.n):
        ok = True
        m = mask
        while m:
            i = (m & -m).bit_length() - 1
            if up_mask[i] & ~mask:
                ok = False
                break
            m &= m - 1
        if ok:
            out.append(frozenset(i for i in range(poset.n) if mask >> i & 1))
    return out


class ProductUpset:
    """An upset in the n-fold product order, explicit or predicate-backed.

    Explicit members are tuples of element indices and are verified to be
    up-closed coordinatewise.
    """

    def __init__(self, n, members=None, predicate=None, _checked=False):
        if (members is None) == (predicate is None):
            raise InvalidInputError("provide exactly one of members or predicate")
        self.n = n
        self.members = frozenset(tuple(t) for t in members) if members is not None else None
        self.predicate = predicate
        self._checked = _checked

    @classmethod
    def explicit(cls, poset, n, members):
        out = cls(n, members=members)
        for t in out.members:
            if len(t) != n:
                raise InvalidInputError(f"tuple {t} does not have {n} coordinates")
            for i in range(n):
                for e in range(poset.n):
                    if poset.le[t[i], e]:
                        t2 = t[:i] + (e,) + t[i + 1:]
                        if t2 not in out.members:
                            raise InvalidInputError(
                                f"set is not up-closed: {t} in, {t2} out")
        out._checked = True
        return out

    def contains(self, t):
        if self.members is not None:
            return t in self.members
        return bool(self.predicate(t))

    def intersect(self, other):
        if self.n != other.n:
            raise InvalidInputError("powers differ")
        if self.members is not None and other.members is not None:
            return ProductUpset(self.n, members=self.members & other.members,
                                _checked=self._checked and other._checked)
        return ProductUpset(self.n, predicate=lambda t: self.contains(t) and other.contains(t))


def product_prob(measure, n, upset):
    """Exact probability of an upset under the n-fold product measure."""
    if upset.n != n:
        raise InvalidInputError("upset power does not match n")
    if upset.members is not None:
        return math.fsum(
            math.prod(measure.probs[i] for i in t) for t in upset.members)
    if measure.poset.n ** n > MAX_PRODUCT_TUPLES:
        raise CapacityError(
            f"{measure.poset.n}^{n} tuples exceed the exhaustive bound")
    return math.fsum(
        math.prod(measure.probs[i] for i in t)
        for t in itertools.product(range(measure.poset.n), repeat=n)
        if upset.predicate(t))


@dataclass
class HarrisReport:
    prob_a: float
    prob_b: float
    lhs: float
    rhs: float
    exponent: int
    p0: float
    holds: bool

    def as_dict(self):
        return dict(self.__dict__)


def harris_exponent(p0):
    if p0 <= 0:
        raise InvalidInputError("greatest element must have positive probability")
    return math.ceil(2 / p0)


def harris_check(measure, n, a, b, exponent=None):
    """Evaluate Pr(A∩B) >= (Pr(A)Pr(B))^C with C = ceil(2/p0).

    p0 is the probability of the poset's greatest element; pass
    `exponent` to probe other powers (e.g. the failing C=1).
    """
    p0 = measure.greatest_prob()
    c = harris_exponent(p0) if exponent is None else exponent
    pa = product_prob(measure, n, a)
    pb = product_prob(measure, n, b)
    lhs = product_prob(measure, n, a.intersect(b))
    rhs = (pa * pb) ** c
    return HarrisReport(prob_a=pa, prob_b=pb, lhs=lhs, rhs=rhs, exponent=c,
                        p0=p0, holds=lhs >= rhs - 1e-12)


def _chain_f(p0):
    c = harris_exponent(p0)

    def f(a, b):
        ab = a * b
        if (ab.numerator.bit_length() + ab.denominator.bit_length()) * c > MAX_DELTA_BITS:
            raise CapacityError("delta chain exceeds exact-arithmetic capacity")
        return ab ** c

    return f


def csr_delta(measure, k, eps):
    """The union bound constant for the k-fold square-root trick.

    delta is built by the chain delta_1 = eps, delta_j = F(delta_{j-1}, eps)
    with F(a,b) = (ab)^ceil(2/p0), p0 the least element's probability, and
    the result is delta_k / 2.  Exact rational arithmetic: the chain
    collapses below IEEE range after a few steps.
    """
    if not 0 < eps < 1:
        raise InvalidInputError("eps must lie in (0, 1)")
    if k < 1:
        raise InvalidInputError("k must be >= 1")
    p0 = measure.least_prob()
    if p0 <= 0:
        raise InvalidInputError("least element must have positive probability")
    f = _chain_f(p0)
    delta = Fraction(eps)
    for _ in range(2, k + 1):
        delta = f(delta, Fraction(eps))
    return delta / 2


def manyhold_delta(p0, n_events, eps):
    """Union bound constant forcing at least N of a family of upsets to hold.

    eps' = F(eps/N, eps), delta_1 = eps/N, delta_k = F(eps', delta_{k-1});
    returns delta_N, exactly.
    """
    if not 0 < p0 < 1 or not 0 < eps < 1:
        raise InvalidInputError("p0 and eps must lie in (0, 1)")
    if n_events < 1:
        raise InvalidInputError("N must be >= 1")
    f = _chain_f(p0)
    eps = Fraction(eps)
    eps_prime = f(eps / n_events, eps)
    delta = eps / n_events
    for _ in range(2, n_events + 1):
        delta = f(eps_prime, delta)
    return delta


def _up_close(poset, n, seeds):
    """Up-closure of a set of tuples in the n-fold product order."""
    above = [[e for e in range(poset.n) if poset.le[i, e]] for i in range(poset.n)]
    closed = set()
    stack = [tuple(t) for t in seeds]
    while stack:
        t = stack.pop()
        if t in closed:
            continue
        closed.add(t)
        for i in range(n):
            for e in above[t[i]]:
                if e != t[i]:
                    t2 = t[:i] + (e,) + t[i + 1:]
                    if t2 not in closed:
                        stack.append(t2)
    return closed


@dataclass
class StressReport:
    trials: int
    families_tested: int
    violations: int
    delta: float
    eps: float

    def as_dict(self):
        return dict(self.__dict__)


def sqrt_trick_stress(measure, k, eps, trials, seed, n=1):
    """Randomized check of the square-root trick.

    Draws k random upsets of P^n per trial; whenever their union has
    probability at least 1 - delta (delta from `csr_delta`), one of them
    must have probability at least 1 - eps.  Reports the number of
    families meeting the hypothesis and any violations (expected none).
    """
    if n > 3:
        raise CapacityError("stress test supports n <= 3")
    delta = csr_delta(measure, k, eps)
    rng = random.Random(seed)
    space = list(itertools.product(range(measure.poset.n), repeat=n))
    tested = 0
    violations = 0
    for _ in range(trials):
        families = []
        for _ in range(k):
            theta = rng.random()
            seeds = [t for t in space if rng.random() < theta]
            families.append(_up_close(measure.poset, n, seeds))
        union = frozenset().union(*families)
        p_union = product_prob(
            measure, n, ProductUpset(n, members=union, _checked=True))
        if p_union < 1 - delta:
            continue
        tested += 1
        best = max(
            product_prob(measure, n, ProductUpset(n, members=fam, _checked=True))
            for fam in families)
        if best < 1 - eps:
            violations += 1
    return StressReport(trials=trials, families_tested=tested,
                        violations=violations, delta=float(delta), eps=eps)
