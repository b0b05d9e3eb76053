"""Non-crossing partitions of a cyclic ground set and distributions over them.

A hyperedge with k incidences carries a state: a partition of {0,..,k-1}
(cyclic order) in which no two blocks interlace.  The dual state lives on
the k polygon edges, with edge j between vertices j and j+1 (mod k); this
convention is fixed globally, and `rotate` is provided for realignment.
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache

from .errors import CapacityError, InvalidInputError

MAX_ENUM_K = 12        # Catalan(12) = 208012, the direct-enumeration bound
MAX_UPSET_K = 4        # full materialized upset enumeration of the NC(k) poset
MAX_DOMINATION_K = 5   # NC(5) has 2342196 upsets; NC(6) more than 2^50
PROB_TOL = 1e-12


def _canonical(blocks):
    """Sort members within blocks and blocks by least member."""
    return tuple(sorted((tuple(sorted(b)) for b in blocks), key=lambda b: b[0]))


def _validate_partition(k, blocks):
    seen = set()
    for b in blocks:
        if len(b) == 0:
            raise InvalidInputError("empty block in partition")
        for j in b:
            if not (0 <= j < k):
                raise InvalidInputError(f"index {j} outside ground set of size {k}")
            if j in seen:
                raise InvalidInputError(f"index {j} appears in two blocks")
            seen.add(j)
    if len(seen) != k:
        raise InvalidInputError("blocks do not cover the ground set")


def is_noncrossing(k, blocks):
    """True iff no two distinct blocks interlace in the cyclic order.

    `blocks` must be a set partition of {0,..,k-1}; a malformed partition
    raises InvalidInputError.  Quadratic pairwise check: two blocks cross
    iff their merged members, walked in increasing order, switch block
    membership more than twice (for linearly ordered ground sets cyclic
    and linear crossings coincide).
    """
    _validate_partition(k, blocks)
    bl = [tuple(sorted(b)) for b in blocks]
    for b1, b2 in itertools.combinations(bl, 2):
        merged = sorted([(j, 0) for j in b1] + [(j, 1) for j in b2])
        switches = sum(1 for a, b in zip(merged, merged[1:]) if a[1] != b[1])
        if switches > 2:
            return False
    return True


class NCPartition:
    """A non-crossing partition in canonical form (hashable, comparable)."""

    __slots__ = ("k", "blocks", "_hash")

    def __init__(self, k, blocks):
        if k < 1:
            raise InvalidInputError("ground set must have at least one element")
        blocks = _canonical(blocks)
        if not is_noncrossing(k, blocks):
            raise InvalidInputError(f"partition {blocks} is crossing")
        self.k = k
        self.blocks = blocks
        self._hash = hash((k, blocks))

    def __eq__(self, other):
        return isinstance(other, NCPartition) and self.k == other.k and self.blocks == other.blocks

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"NCPartition({self.k}, {list(map(list, self.blocks))})"

    def block_of(self, j):
        for b in self.blocks:
            if j in b:
                return b
        raise InvalidInputError(f"index {j} not in ground set")

    def n_blocks(self):
        return len(self.blocks)


def top(k):
    """The single-block partition."""
    return NCPartition(k, [range(k)])


def bottom(k):
    """The all-singletons partition."""
    return NCPartition(k, [[j] for j in range(k)])


def _nc_linear(elems):
    """Yield non-crossing partitions of the ordered tuple `elems` as block lists."""
    if not elems:
        yield []
        return
    first = elems[0]
    rest = elems[1:]
    n = len(rest)
    for r in range(n + 1):
        for picks in itertools.combinations(range(n), r):
            block = [first] + [rest[i] for i in picks]
            # remaining elements split into independent gaps between picks
            bounds = [-1] + list(picks) + [n]
            segments = [rest[bounds[i] + 1:bounds[i + 1]] for i in range(len(bounds) - 1)]
            for combo in itertools.product(*(_nc_linear(seg) for seg in segments)):
                out = [block]
                for part in combo:
                    out.extend(part)
                yield out


@lru_cache(maxsize=None)
def enumerate_nc(k):
    """All non-crossing partitions of {0,..,k-1}, canonical, deterministic order.

    The count is the k-th Catalan number.  Bounded at k <= 12.
    """
    if not (1 <= k <= MAX_ENUM_K):
        raise CapacityError(f"enumerate_nc supports 1 <= k <= {MAX_ENUM_K}, got {k}")
    parts = tuple(NCPartition(k, bl) for bl in _nc_linear(tuple(range(k))))
    assert len(parts) == catalan(k)
    return parts


def catalan(k):
    return math.comb(2 * k, k) // (k + 1)


def rotate(pi, shift):
    """Image of pi under the index rotation j -> j + shift (mod k)."""
    k = pi.k
    return NCPartition(k, [[(j + shift) % k for j in b] for b in pi.blocks])


def dual(pi):
    """The dual partition on the k polygon edges (edge j between vertices j, j+1).

    Edges e and f fall in the same dual block iff no block of pi has a
    vertex strictly between them on each of the two arcs.  Components of
    that relation form the dual; |blocks(pi)| + |blocks(dual)| = k + 1.
    """
    k = pi.k
    if k == 1:
        return NCPartition(1, [[0]])
    # block label per vertex
    label = [0] * k
    for i, b in enumerate(pi.blocks):
        for j in b:
            label[j] = i
    parent = list(range(k))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for e in range(k):
        for f in range(e + 1, k):
            # arc1: vertices e+1..f ; arc2: the rest
            arc1 = {label[j] for j in range(e + 1, f + 1)}
            arc2 = {label[j % k] for j in range(f + 1, e + 1 + k)}
            if arc1 & arc2:
                continue  # separated by a common block
            ra, rb = find(e), find(f)
            if ra != rb:
                parent[ra] = rb
    groups = {}
    for e in range(k):
        groups.setdefault(find(e), []).append(e)
    return NCPartition(k, list(groups.values()))


def refines(pi, pi2):
    """True iff every block of pi is contained in some block of pi2 (pi <= pi2)."""
    if pi.k != pi2.k:
        raise InvalidInputError("refines requires equal ground-set sizes")
    label = {}
    for i, b in enumerate(pi2.blocks):
        for j in b:
            label[j] = i
    return all(len({label[j] for j in b}) == 1 for b in pi.blocks)


def joinings(pi):
    """All partitions reachable from pi by one joining operation.

    For each non-trivial block of the dual, merge every block of pi
    adjacent to it (block B is adjacent to dual block D iff B holds a
    vertex j with edge j-1 or j in D).  Results are deduplicated and all
    lie strictly above pi; the list is empty iff pi is the top partition.
    """
    k = pi.k
    d = dual(pi)
    out = []
    seen = set()
    for dblock in d.blocks:
        if len(dblock) < 2:
            continue
        eset = set(dblock)
        merged = []
        stay = []
        for b in pi.blocks:
            if any(((j - 1) % k) in eset or j in eset for j in b):
                merged.extend(b)
            else:
                stay.append(list(b))
        result = NCPartition(k, [merged] + stay)
        if result not in seen:
            seen.add(result)
            out.append(result)
    return out


# ---------------------------------------------------------------------------
# Probability vectors over NC(k)
# ---------------------------------------------------------------------------

class ProbabilityVector:
    """A distribution over the non-crossing partitions of a k-set.

    Missing partitions carry probability 0.  Entries must be non-negative
    and sum to 1 within 1e-12.
    """

    __slots__ = ("k", "entries")

    def __init__(self, k, entries):
        if k < 1:
            raise InvalidInputError("k must be >= 1")
        clean = {}
        for pi, p in dict(entries).items():
            if not isinstance(pi, NCPartition):
                raise InvalidInputError("keys must be NCPartition values")
            if pi.k != k:
                raise InvalidInputError(f"entry for k={pi.k} in a k={k} vector")
            p = float(p)
            if p < 0.0:
                raise InvalidInputError(f"negative probability {p} for {pi}")
            clean[pi] = p
        total = math.fsum(clean.values())
        if abs(total - 1.0) > PROB_TOL:
            raise InvalidInputError(f"entries sum to {total!r}, not 1")
        self.k = k
        self.entries = clean

    def prob(self, pi):
        return self.entries.get(pi, 0.0)

    def support(self):
        return [pi for pi, p in self.entries.items() if p > 0.0]

    def __eq__(self, other):
        if not isinstance(other, ProbabilityVector) or self.k != other.k:
            return NotImplemented
        keys = set(self.entries) | set(other.entries)
        return all(self.prob(x) == other.prob(x) for x in keys)

    def allclose(self, other, tol=PROB_TOL):
        if self.k != other.k:
            return False
        keys = set(self.entries) | set(other.entries)
        return all(abs(self.prob(x) - other.prob(x)) <= tol for x in keys)

    def __repr__(self):
        items = ", ".join(f"{pi!r}: {p}" for pi, p in sorted(
            self.entries.items(), key=lambda kv: kv[0].blocks))
        return f"ProbabilityVector({self.k}, {{{items}}})"


def dual_vector(v):
    """Transport each entry to the dual partition."""
    return ProbabilityVector(v.k, {dual(pi): p for pi, p in v.entries.items()})


def rotate_vector(v, shift):
    return ProbabilityVector(v.k, {rotate(pi, shift): p for pi, p in v.entries.items()})


def is_upset(k, parts):
    """True iff `parts` is up-closed in the refinement order on NC(k)."""
    pset = set(parts)
    for pi in pset:
        if pi.k != k:
            raise InvalidInputError("upset member with wrong ground-set size")
        for pi2 in enumerate_nc(k):
            if refines(pi, pi2) and pi2 not in pset:
                return False
    return True


def upset_prob(v, parts):
    """Total probability of an up-closed set of partitions."""
    if not is_upset(v.k, parts):
        raise InvalidInputError("set is not up-closed in the refinement order")
    return sum(v.prob(pi) for pi in set(parts))


@lru_cache(maxsize=None)
def nc_upsets(k):
    """All upsets of the NC(k) poset, each as a frozenset.

    Generated by depth-first inclusion decisions over a linear extension
    running from coarse to fine, so a partition may only enter once
    everything above it is in.  Bounded at k <= 4: NC(5) already has
    millions of upsets (every subset of a rank level is an antichain).
    """
    if not (1 <= k <= MAX_UPSET_K):
        raise CapacityError(f"upset enumeration supports k <= {MAX_UPSET_K}, got {k}")
    parts = sorted(enumerate_nc(k), key=lambda p: p.n_blocks())  # coarse first
    above = []  # indices (into `parts`) strictly above each element
    for i, pi in enumerate(parts):
        above.append([j for j in range(i) if parts[j] != pi and refines(pi, parts[j])])
    out = []
    chosen = [False] * len(parts)

    def rec(i):
        if i == len(parts):
            out.append(frozenset(parts[j] for j in range(len(parts)) if chosen[j]))
            return
        rec(i + 1)  # leave parts[i] out
        if all(chosen[j] for j in above[i]):
            chosen[i] = True
            rec(i + 1)
            chosen[i] = False

    rec(0)
    return tuple(out)


def dominates(q, p, strict=False):
    """Stochastic comparison: q(U) >= p(U) for every upset U of NC(k).

    With strict=True the inequality must be strict on every upset other
    than the empty set and the whole poset.  Checks every upset via a
    depth-first walk of the upset lattice (inclusion decisions over a
    coarse-to-fine linear extension, so every partial choice is itself an
    upset), pruning subtrees whose worst reachable margin already passes.
    Supported for k <= 5; NC(6) has more than 2^50 upsets.
    """
    if q.k != p.k:
        raise InvalidInputError("vectors have different ground-set sizes")
    k = q.k
    if k > MAX_DOMINATION_K:
        raise CapacityError(f"domination check supports k <= {MAX_DOMINATION_K}, got {k}")
    parts = sorted(enumerate_nc(k), key=lambda x: x.n_blocks())  # coarse first
    n = len(parts)
    delta = [q.prob(x) - p.prob(x) for x in parts]
    above = []
    for i, pi in enumerate(parts):
        above.append([j for j in range(i) if parts[j] != pi and refines(pi, parts[j])])
    # worst-case mass the remaining suffix could still subtract
    neg_tail = [0.0] * (n + 1)
    for i in range(n - 1, -1, -1):
        neg_tail[i] = neg_tail[i + 1] + min(delta[i], 0.0)
    chosen = [False] * n

    def subtree_ok(i, cur, size):
        # `cur` is the margin of the upset formed by the current choices;
        # declining everything from i on realizes exactly that upset.
        if strict:
            if cur + neg_tail[i] > 0.0:
                return True
            if 0 < size < n and not cur > 0.0:
                return False
        else:
            if cur + neg_tail[i] >= -PROB_TOL:
                return True
            if cur < -PROB_TOL:
                return False
        if i == n:
            return True
        if not subtree_ok(i + 1, cur, size):
            return False
        if all(chosen[j] for j in above[i]):
            chosen[i] = True
            ok = subtree_ok(i + 1, cur + delta[i], size + 1)
            chosen[i] = False
            if not ok:
                return False
        return True

    return subtree_ok(0, 0.0, 0)


def is_nondegenerate(v):
    """Positive mass on both the top and the bottom partition."""
    return v.prob(top(v.k)) > 0.0 and v.prob(bottom(v.k)) > 0.0


def is_malleable(v):
    """Non-degenerate and closed under joinings on the support."""
    if not is_nondegenerate(v):
        return False
    for pi in v.support():
        for pi2 in joinings(pi):
            if v.prob(pi2) <= 0.0:
                return False
    return True


# ---------------------------------------------------------------------------
# Stock vectors
# ---------------------------------------------------------------------------

def competition_vector(p):
    """Triangle-state law where bonds drawn i.i.d. at density p compete.

    Exactly one bond survives out of a pair (the clockwise-first wins), a
    full triple stands, so each pair partition gets p(1-p), the top p^3
    and the bottom (1-p)^3; these sum to 1 identically.
    """
    if not (0.0 <= p <= 1.0):
        raise InvalidInputError("p must lie in [0, 1]")
    pairs = [NCPartition(3, [[0, 1], [2]]), NCPartition(3, [[0, 2], [1]]),
             NCPartition(3, [[1, 2], [0]])]
    entries = {top(3): p ** 3, bottom(3): (1 - p) ** 3}
    for pi in pairs:
        entries[pi] = p * (1 - p)
    return ProbabilityVector(3, entries)


def uniform_vector(k):
    """Uniform law over NC(k); exactly self-dual since duality is a bijection."""
    parts = enumerate_nc(k)
    w = 1.0 / len(parts)
    return ProbabilityVector(k, {pi: w for pi in parts})


def point_mass(pi):
    return ProbabilityVector(pi.k, {pi: 1.0})


def top_bottom_vector(k, p_top):
    """Mass p_top on the single-block partition, the rest on singletons."""
    if not (0.0 <= p_top <= 1.0):
        raise InvalidInputError("p_top must lie in [0, 1]")
    return ProbabilityVector(k, {top(k): p_top, bottom(k): 1.0 - p_top})


# ---------------------------------------------------------------------------
# JSON text format
# ---------------------------------------------------------------------------

def vector_to_json(v):
    entries = [{"blocks": [list(b) for b in pi.blocks], "p": p}
               for pi, p in sorted(v.entries.items(), key=lambda kv: kv[0].blocks)]
    return {"k": v.k, "entries": entries}


def vector_from_json(obj):
    try:
        k = int(obj["k"])
        entries = {}
        for item in obj["entries"]:
            pi = NCPartition(k, item["blocks"])
            entries[pi] = entries.get(pi, 0.0) + float(item["p"])
    except (KeyError, TypeError) as exc:
        raise InvalidInputError(f"malformed probability-vector JSON: {exc}") from exc
    return ProbabilityVector(k, entries)
