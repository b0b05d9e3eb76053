"""Doubly periodic plane hyperlattices as 3-coloured cubic maps on a torus.

A hyperlattice is stored as its quotient by the translation lattice: a
cubic map whose faces are properly coloured black (vertices), grey
(hyperedges) and white (dual vertices).  Map corners sit at the two ends
of each vertex-hyperedge contact ("incidence"); the three edge kinds
black-grey, grey-white and black-white each contribute one edge per
incidence, and every corner meets one edge of each kind.  Edges crossing
the fundamental-domain boundary carry integer cell offsets, so faces can
be traced exactly and any wrap-around (non-contractible face) detected.

Taking the dual is a black/white label swap; self-duality witnesses are
found by propagating dart correspondences and then checking the induced
state-distribution match hyperedge by hyperedge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import ncpart
from .errors import EmbeddingError, InvalidInputError

BLACK, WHITE, GREY = 0, 1, 2
COLOR_NAMES = ("black", "white", "grey")


# ---------------------------------------------------------------------------
# geometry helpers
# ---------------------------------------------------------------------------

def _orient(a, b, c, eps):
    v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    if v > eps:
        return 1
    if v < -eps:
        return -1
    return 0


def _on_segment(a, b, p, eps):
    return (min(a[0], b[0]) - eps <= p[0] <= max(a[0], b[0]) + eps and
            min(a[1], b[1]) - eps <= p[1] <= max(a[1], b[1]) + eps)


def _same_point(p, q, eps):
    return abs(p[0] - q[0]) <= eps and abs(p[1] - q[1]) <= eps


def _segments_conflict(p1, p2, q1, q2, eps):
    """True if the segments meet anywhere except at shared endpoints."""
    shared = sum(1 for p in (p1, p2) for q in (q1, q2) if _same_point(p, q, eps))
    o1 = _orient(p1, p2, q1, eps)
    o2 = _orient(p1, p2, q2, eps)
    o3 = _orient(q1, q2, p1, eps)
    o4 = _orient(q1, q2, p2, eps)
    if o1 != o2 and o3 != o4 and 0 not in (o1, o2, o3, o4):
        return True  # proper crossing
    # collinear or endpoint-on-interior contacts
    for (a, b, p) in ((p1, p2, q1), (p1, p2, q2), (q1, q2, p1), (q1, q2, p2)):
        if _orient(a, b, p, eps) == 0 and _on_segment(a, b, p, eps):
            if not (_same_point(p, a, eps) or _same_point(p, b, eps)):
                return True
            if shared == 0:
                return True
    return False


def _point_in_polygon(p, poly, eps):
    """Strict interior test by ray casting; boundary points count as outside."""
    for a, b in zip(poly, poly[1:] + poly[:1]):
        if _orient(a, b, p, eps) == 0 and _on_segment(a, b, p, eps):
            return False
    inside = False
    x, y = p
    for a, b in zip(poly, poly[1:] + poly[:1]):
        (x1, y1), (x2, y2) = a, b
        if (y1 > y) != (y2 > y):
            xc = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if xc > x:
                inside = not inside
    return inside


def _signed_area(pts):
    return 0.5 * sum(x1 * y2 - x2 * y1
                     for (x1, y1), (x2, y2) in zip(pts, pts[1:] + pts[:1]))


# ---------------------------------------------------------------------------
# the map
# ---------------------------------------------------------------------------

@dataclass
class Face:
    color: int
    darts: list          # dart ids in boundary order (face on the left)
    shifts: list         # cell of each dart's tail relative to the face base
    anchor: tuple        # representative plane point
    source: tuple = None  # black: (vertex orbit, cell); grey: hyperedge index

    @property
    def degree(self):
        return len(self.darts)


class PeriodicMap:
    """A 3-coloured cubic torus map with geometry.

    Darts are directed edge sides: dart 2e runs tail->head of edge e and
    dart 2e+1 the reverse; `left_color[d]` names the face colour on the
    dart's left, and each corner has exactly one outgoing dart per colour,
    which is what face tracing follows.
    """

    def __init__(self, basis, n_corners, edge_tail, edge_head, edge_off,
                 left_color, grey_slot_darts, orbit_of_edge, orbit_labels=None):
        self.basis = np.asarray(basis, dtype=float)
        if self.basis.shape != (2, 2) or abs(np.linalg.det(self.basis)) < 1e-12:
            raise InvalidInputError("basis must be two independent 2-vectors")
        self.n_corners = int(n_corners)
        self.edge_tail = np.asarray(edge_tail, dtype=np.int64)
        self.edge_head = np.asarray(edge_head, dtype=np.int64)
        self.edge_off = np.asarray(edge_off, dtype=np.int64)
        self.left_color = np.asarray(left_color, dtype=np.int64)
        self.n_edges = len(self.edge_tail)
        self.n_darts = 2 * self.n_edges
        if self.left_color.shape != (self.n_darts,):
            raise InvalidInputError("one left colour per dart required")
        self.grey_slot_darts = [list(sd) for sd in grey_slot_darts]
        self.orbit_of_edge = list(orbit_of_edge)
        self.orbit_labels = list(orbit_labels) if orbit_labels is not None else [
            str(i) for i in range(1 + max(self.orbit_of_edge, default=-1))]
        self._wire()

    # dart primitives -------------------------------------------------------

    def alpha(self, d):
        return d ^ 1

    def tail(self, d):
        e = d >> 1
        return self.edge_tail[e] if d & 1 == 0 else self.edge_head[e]

    def head(self, d):
        return self.tail(d ^ 1)

    def off(self, d):
        e = d >> 1
        return self.edge_off[e] if d & 1 == 0 else -self.edge_off[e]

    def _wire(self):
        n, nd = self.n_corners, self.n_darts
        out = np.full((n, 3), -1, dtype=np.int64)
        degree = np.zeros(n, dtype=np.int64)
        for d in range(nd):
            t = self.tail(d)
            c = self.left_color[d]
            if out[t, c] != -1:
                raise InvalidInputError(
                    f"corner {t} has two outgoing {COLOR_NAMES[c]}-sided darts")
            out[t, c] = d
            degree[t] += 1
        if (degree != 3).any():
            raise InvalidInputError("map is not cubic")
        if (out < 0).any():
            raise InvalidInputError("some corner misses a face colour")
        self.out_dart = out
        # face tracing: follow the colour on the left
        nxt = np.empty(nd, dtype=np.int64)
        for d in range(nd):
            nxt[d] = out[self.head(d), self.left_color[d]]
        self.next_dart = nxt
        self.prev_dart = np.empty(nd, dtype=np.int64)
        self.prev_dart[nxt] = np.arange(nd)
        self.face_of = np.full(nd, -1, dtype=np.int64)
        self.shift_of = np.zeros((nd, 2), dtype=np.int64)
        self.faces = []
        for d0 in range(nd):
            if self.face_of[d0] != -1:
                continue
            fid = len(self.faces)
            darts, shifts = [], []
            cell = np.zeros(2, dtype=np.int64)
            d = d0
            while True:
                if self.face_of[d] != -1:
                    raise InvalidInputError("face tracing collided; bad colouring")
                self.face_of[d] = fid
                self.shift_of[d] = cell
                darts.append(d)
                shifts.append(tuple(cell))
                if self.left_color[d] != self.left_color[d0]:
                    raise InvalidInputError("face changes colour along boundary")
                cell = cell + self.off(d)
                d = int(self.next_dart[d])
                if d == d0:
                    break
            if cell.any():
                raise InvalidInputError(
                    "face winds around the torus; offsets inconsistent "
                    "(unbounded face in the plane)")
            self.faces.append(Face(color=int(self.left_color[d0]), darts=darts,
                                   shifts=shifts, anchor=(0.0, 0.0)))
        if self.n_corners - self.n_edges + len(self.faces) != 0:
            raise InvalidInputError(
                "Euler characteristic is not 0; not a torus map")
        self.black_faces = [i for i, f in enumerate(self.faces) if f.color == BLACK]
        self.white_faces = [i for i, f in enumerate(self.faces) if f.color == WHITE]
        self.grey_faces = [i for i, f in enumerate(self.faces) if f.color == GREY]
        for gf in self.grey_faces:
            if self.faces[gf].degree % 2 != 0:
                raise InvalidInputError("grey face of odd degree")
        if len(self.grey_slot_darts) != len(self.grey_faces):
            raise InvalidInputError("one slot list per grey face required")
        if len(self.orbit_of_edge) != len(self.grey_faces):
            raise InvalidInputError("one orbit slot per grey face required")
        # hyperedge index per grey face id, aligned with grey_slot_darts order
        self.grey_face_ids = []
        for h, slots in enumerate(self.grey_slot_darts):
            fids = {int(self.face_of[d]) for d in slots}
            if len(fids) != 1:
                raise InvalidInputError(f"slot darts of hyperedge {h} span faces {fids}")
            fid = fids.pop()
            if self.faces[fid].color != GREY:
                raise InvalidInputError(f"slot darts of hyperedge {h} are not grey-sided")
            if len(slots) * 2 != self.faces[fid].degree:
                raise InvalidInputError(f"hyperedge {h} has wrong slot count")
            self.grey_face_ids.append(fid)
        self.pos = None  # corner positions, filled by _set_geometry

    def _set_geometry(self, corner_pos, face_anchors, face_sources):
        self.pos = np.asarray(corner_pos, dtype=float)
        for f, anchor in zip(self.faces, face_anchors):
            f.anchor = tuple(anchor)
        for f, src in zip(self.faces, face_sources):
            f.source = src

    def cell_vec(self, cell):
        return np.asarray(cell, dtype=float) @ self.basis

    @property
    def arities(self):
        return [len(s) for s in self.grey_slot_darts]

    def n_orbits(self):
        return 1 + max(self.orbit_of_edge, default=-1)

    def stats(self):
        return {
            "corners": self.n_corners,
            "edges": self.n_edges,
            "faces": len(self.faces),
            "black": len(self.black_faces),
            "white": len(self.white_faces),
            "grey": len(self.grey_faces),
            "hyperedges": len(self.grey_slot_darts),
            "arities": self.arities,
        }


# ---------------------------------------------------------------------------
# construction from a drawn hypergraph
# ---------------------------------------------------------------------------

def build_from_hypergraph(basis, vertices, hyperedges, orbit_labels=None,
                          check_embedding=True):
    """Build the 3-coloured cubic map of a drawn periodic hypergraph.

    `vertices` is a sequence of (x, y) fundamental-domain coordinates;
    `hyperedges` a sequence of (orbit_slot, incidences) with incidences a
    cyclic counterclockwise list of (vertex index, dx, dy) — the vertex
    copy in cell (dx, dy).  Hyperedge polygons are the straight-line
    cycles through their lifted incidence points; they must be pairwise
    non-crossing and the quotient hypergraph connected.
    """
    basis = np.asarray(basis, dtype=float)
    if basis.shape != (2, 2) or abs(np.linalg.det(basis)) < 1e-12:
        raise InvalidInputError("basis must be two independent 2-vectors")
    coords = np.asarray(vertices, dtype=float)
    if coords.ndim != 2 or coords.shape[1] != 2 or len(coords) == 0:
        raise InvalidInputError("vertices must be a non-empty list of (x, y)")
    nv = len(coords)
    scale = max(np.abs(basis).max(), np.abs(coords).max() if coords.size else 1.0, 1.0)
    eps = 1e-9 * scale

    edges = []
    for orbit, incs in hyperedges:
        incs = [(int(v), int(dx), int(dy)) for v, dx, dy in incs]
        if not incs:
            raise InvalidInputError("hyperedge with no incidences")
        for v, dx, dy in incs:
            if not (0 <= v < nv):
                raise InvalidInputError(f"incidence references vertex {v}")
        pts = [tuple(coords[v] + np.array([dx, dy], float) @ basis)
               for v, dx, dy in incs]
        if len(incs) >= 3 and _signed_area(pts) < -eps * scale:
            raise InvalidInputError(
                "hyperedge incidences must be listed counterclockwise")
        edges.append((int(orbit), incs, pts))
    if not edges:
        raise InvalidInputError("at least one hyperedge required")

    # quotient connectivity (vertex orbits through hyperedges)
    parent = list(range(nv))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for _, incs, _ in edges:
        r0 = find(incs[0][0])
        for v, _, _ in incs[1:]:
            r = find(v)
            if r != r0:
                parent[r] = r0
    if len({find(v) for v in range(nv)}) != 1:
        raise InvalidInputError("quotient hypergraph is disconnected")

    if check_embedding:
        _check_embedding(basis, edges, eps)

    # global incidence indexing
    inc_index = {}
    inc_list = []   # (edge idx, slot, vertex, cell)
    for ei, (_, incs, _) in enumerate(edges):
        for t, (v, dx, dy) in enumerate(incs):
            inc_index[(ei, t)] = len(inc_list)
            inc_list.append((ei, t, v, (dx, dy)))
    n_inc = len(inc_list)

    # corners: 2i = start-side (+) corner of incidence i, 2i+1 = end-side (-)
    n_corners = 2 * n_inc
    edge_tail, edge_head, edge_off, left0, left1 = [], [], [], [], []

    def add_edge(tail, head, off, left_fwd, left_bwd):
        edge_tail.append(tail)
        edge_head.append(head)
        edge_off.append(off)
        left0.append(left_fwd)
        left1.append(left_bwd)

    # black-grey edges, one per incidence (edge index == incidence index)
    for i in range(n_inc):
        add_edge(2 * i + 1, 2 * i, (0, 0), GREY, BLACK)
    # grey-white edges: polygon side from incidence t to t+1
    for ei, (_, incs, _) in enumerate(edges):
        d = len(incs)
        for t in range(d):
            i, j = inc_index[(ei, t)], inc_index[(ei, (t + 1) % d)]
            add_edge(2 * i, 2 * j + 1, (0, 0), GREY, WHITE)
    # black-white edges from the angular order of wedges around each vertex copy
    wedges = {v: [] for v in range(nv)}
    for i, (ei, t, v, cell) in enumerate(inc_list):
        _, incs, pts = edges[ei]
        d = len(incs)
        here = np.array(pts[t])
        nxt = np.array(pts[(t + 1) % d])
        prv = np.array(pts[(t - 1) % d])
        vec = nxt - here
        if np.hypot(*vec) <= eps:
            vec = prv - here  # degenerate lobe; any deterministic ray will do
        angle = math.atan2(vec[1], vec[0])
        wedges[v].append((angle, ei, t, i, cell))
    for v in range(nv):
        ws = sorted(wedges[v])
        if not ws:
            raise InvalidInputError(f"vertex {v} has no incident hyperedge")
        m = len(ws)
        for j in range(m):
            _, _, _, i_cur, cell_cur = ws[j]
            _, _, _, i_nxt, cell_nxt = ws[(j + 1) % m]
            off = (cell_cur[0] - cell_nxt[0], cell_cur[1] - cell_nxt[1])
            add_edge(2 * i_cur + 1, 2 * i_nxt, off, BLACK, WHITE)

    left = []
    for lf, lb in zip(left0, left1):
        left.extend((lf, lb))
    grey_slot_darts = [[2 * inc_index[(ei, t)] for t in range(len(incs))]
                       for ei, (_, incs, _) in enumerate(edges)]
    m = PeriodicMap(basis, n_corners, edge_tail, edge_head, edge_off, left,
                    grey_slot_darts, [orbit for orbit, _, _ in edges],
                    orbit_labels)

    # geometry: corner positions near their incidence vertex, face anchors
    corner_pos = np.empty((n_corners, 2))
    for i, (ei, t, v, cell) in enumerate(inc_list):
        _, incs, pts = edges[ei]
        here = np.array(pts[t])
        centroid = np.mean(pts, axis=0)
        nudge = (centroid - here) * 0.2
        corner_pos[2 * i] = here + nudge
        corner_pos[2 * i + 1] = here + nudge
    anchors, sources = _derive_geometry(m, inc_list, coords, corner_pos, edges)
    m._set_geometry(corner_pos, anchors, sources)
    return m


def _derive_geometry(m, inc_list, coords, corner_pos, edges):
    """Anchors and identity per face: black = vertex copy, grey = hyperedge."""
    anchors = []
    sources = []
    for fid, face in enumerate(m.faces):
        if face.color == GREY:
            ds = [d for d in face.darts if (d >> 1) < len(inc_list) and d % 2 == 0]
            eis = {inc_list[d >> 1][0] for d in ds}
            if len(eis) != 1:
                raise InvalidInputError("grey face mixes hyperedges")
            ei = eis.pop()
            anchors.append(tuple(np.mean(edges[ei][2], axis=0)))
            sources.append(("hyperedge", ei))
        elif face.color == BLACK:
            ids = set()
            for d, shift in zip(face.darts, face.shifts):
                if (d >> 1) < len(inc_list) and d % 2 == 1:  # black side of a contact
                    i = d >> 1
                    _, _, v, cell = inc_list[i]
                    ids.add((v, (cell[0] + shift[0], cell[1] + shift[1])))
            if len(ids) != 1:
                raise InvalidInputError("black face does not surround one vertex copy")
            v, cell = ids.pop()
            anchors.append(tuple(coords[v] + m.cell_vec(cell)))
            sources.append(("vertex", v, cell))
        else:
            pts = [corner_pos[m.tail(d)] + m.cell_vec(s)
                   for d, s in zip(face.darts, face.shifts)]
            anchors.append(tuple(np.mean(pts, axis=0)))
            sources.append(("white",))
    return anchors, sources


def _check_embedding(basis, edges, eps):
    """Pairwise polygon checks: sides may meet only at shared vertices."""
    offs = [np.array([dx, dy]) for _, incs, _ in edges for _, dx, dy in incs]
    reach = int(max((np.abs(o).max() for o in offs), default=0)) + 1
    segs = []   # (edge idx, cell, p, q)
    polys = []  # (edge idx, cell, points)
    for ei, (_, incs, pts) in enumerate(edges):
        d = len(pts)
        for da in range(-reach, reach + 1):
            for db in range(-reach, reach + 1):
                shift = np.array([da, db], float) @ basis
                spts = [(p[0] + shift[0], p[1] + shift[1]) for p in pts]
                polys.append((ei, (da, db), spts))
                if d == 1:
                    continue
                for t in range(d if d > 2 else 1):
                    p, q = spts[t], spts[(t + 1) % d]
                    if not _same_point(p, q, eps):
                        segs.append((ei, (da, db), t, p, q))
    base_segs = [s for s in segs if s[1] == (0, 0)]
    for ei, cell, t, p, q in base_segs:
        for ej, cell2, t2, p2, q2 in segs:
            if (ej, cell2, t2) <= (ei, cell, t):
                continue
            same_poly = (ei, cell) == (ej, cell2)
            if same_poly:
                d = len(edges[ei][1])
                if t2 in ((t + 1) % d, (t - 1) % d, t):
                    continue  # adjacent sides share a vertex by construction
            if _segments_conflict(p, q, p2, q2, eps):
                raise EmbeddingError(
                    f"hyperedge sides cross: edge {ei} side {t} cell {cell} vs "
                    f"edge {ej} side {t2} cell {cell2}")
    # nesting: a polygon corner strictly inside another polygon
    base_polys = [pl for pl in polys if pl[1] == (0, 0)]
    for ei, cell, pts in base_polys:
        for ej, cell2, pts2 in polys:
            if (ei, cell) == (ej, cell2):
                continue
            if len(pts2) >= 3 and abs(_signed_area(pts2)) > eps:
                for p in pts:
                    if _point_in_polygon(p, pts2, eps):
                        raise EmbeddingError(
                            f"hyperedge {ei} lies inside hyperedge {ej} "
                            f"cell {cell2}; interiors overlap")


# ---------------------------------------------------------------------------
# dual, hyperview
# ---------------------------------------------------------------------------

def compute_dual(m):
    """Swap black and white; hyperedge slot t moves to the polygon side after t."""
    left = m.left_color.copy()
    left[left == BLACK] = 3
    left[left == WHITE] = BLACK
    left[left == 3] = WHITE
    new_slots = [[int(m.next_dart[d]) for d in slots] for slots in m.grey_slot_darts]
    dual = PeriodicMap(m.basis, m.n_corners, m.edge_tail, m.edge_head, m.edge_off,
                       left, new_slots, m.orbit_of_edge, m.orbit_labels)
    if m.pos is not None:
        anchors = [f.anchor for f in m.faces]
        sources = []
        for f in m.faces:
            if f.color == GREY:
                sources.append(f.source)
            else:
                sources.append(("white",) if f.color == BLACK else ("vertex-dual",))
        # faces are identical orbits traced in the same order
        dual._set_geometry(m.pos, anchors, sources)
    return dual


@dataclass
class HyperView:
    """The quotient hypergraph read off a map: black faces and grey faces."""
    vertices: list      # (black face id, anchor)
    hyperedges: list    # (grey face id, orbit slot, [(vertex index, (dx, dy)), ...])
    vertex_index: dict  # black face id -> position in `vertices`


def hyperview(m):
    vertex_index = {fid: i for i, fid in enumerate(m.black_faces)}
    vertices = [(fid, m.faces[fid].anchor) for fid in m.black_faces]
    hyperedges = []
    for h, slots in enumerate(m.grey_slot_darts):
        gf = m.grey_face_ids[h]
        base = None
        incs = []
        for t, d in enumerate(slots):
            s = np.array(m.shift_of[d])
            if base is None:
                base = s.copy()
            rd = m.alpha(d)
            bf = int(m.face_of[rd])
            if m.faces[bf].color != BLACK:
                raise InvalidInputError("slot dart not adjacent to a black face")
            cell = s + m.off(d) - m.shift_of[rd] - base
            incs.append((vertex_index[bf], (int(cell[0]), int(cell[1]))))
        hyperedges.append((gf, m.orbit_of_edge[h], incs))
    return HyperView(vertices=vertices, hyperedges=hyperedges,
                     vertex_index=vertex_index)


# ---------------------------------------------------------------------------
# isomorphism search
# ---------------------------------------------------------------------------

@dataclass
class Isomorphism:
    dart_map: np.ndarray   # dart of m1 -> dart of m2
    linear: np.ndarray     # 2x2 integer action on lattice coordinates
    orientation: int       # +1 orientation-preserving, -1 reversing
    color_policy: str      # "identity" or "swap"

    def as_dict(self):
        return {"linear": self.linear.tolist(), "orientation": self.orientation,
                "color_policy": self.color_policy}


def _propagate(m1, m2, d0, d1, orientation):
    """Extend d0 -> d1 to a full dart correspondence, or return None."""
    if m1.n_darts != m2.n_darts:
        return None
    psi = np.full(m1.n_darts, -1, dtype=np.int64)
    stack = [(d0, d1)]
    while stack:
        a, b = stack.pop()
        if psi[a] != -1:
            if psi[a] != b:
                return None
            continue
        if m1.left_color[a] != m2.left_color[b]:
            return None
        psi[a] = b
        stack.append((m1.alpha(a), m2.alpha(b)))
        if orientation == 1:
            stack.append((int(m1.next_dart[a]), int(m2.next_dart[b])))
        else:
            stack.append((int(m1.next_dart[a]), int(m2.prev_dart[b])))
    if (psi < 0).any() or len(set(psi.tolist())) != m1.n_darts:
        return None
    return psi


def _corner_cells(m):
    """Relative cells from a BFS spanning tree, plus the tree darts used."""
    cells = {0: np.zeros(2, dtype=np.int64)}
    parent_dart = {0: None}
    queue = [0]
    while queue:
        c = queue.pop()
        for color in range(3):
            d = int(m.out_dart[c, color])
            h = int(m.head(d))
            if h not in cells:
                cells[h] = cells[c] + m.off(d)
                parent_dart[h] = d
                queue.append(h)
    return cells, parent_dart


def _tree_walk(m, parent_dart, corner):
    """Dart path from corner 0 to `corner` along the spanning tree."""
    path = []
    c = corner
    while parent_dart[c] is not None:
        d = parent_dart[c]
        path.append(d)
        c = int(m.tail(d))
    path.reverse()
    return path


def _homology_action(m1, m2, psi, orientation):
    """The integer matrix sending cycle offsets of m1 to those of images."""
    cells, parent_dart = _corner_cells(m1)
    cands = []
    for d in range(m1.n_darts):
        cyc = cells[int(m1.tail(d))] + m1.off(d) - cells[int(m1.head(d))]
        if cyc.any():
            cands.append((d, cyc))
    v1 = None
    picked = []
    for d, cyc in cands:
        if v1 is None:
            v1, picked = cyc, [(d, cyc)]
        elif abs(v1[0] * cyc[1] - v1[1] * cyc[0]) > 0:
            picked.append((d, cyc))
            break
    if len(picked) != 2:
        raise InvalidInputError("could not find two independent torus cycles")
    vs = np.array([picked[0][1], picked[1][1]], dtype=float).T
    us = []
    sign = 1 if orientation == 1 else -1
    for d, _ in picked:
        walk = (_tree_walk(m1, parent_dart, int(m1.tail(d))) + [d]
                + [m1.alpha(x) for x in reversed(_tree_walk(m1, parent_dart,
                                                            int(m1.head(d))))])
        total = np.zeros(2, dtype=np.int64)
        for w in walk:
            total += sign * m2.off(int(psi[w]))
        us.append(total)
    t = np.array(us, dtype=float).T @ np.linalg.inv(vs)
    t_int = np.rint(t).astype(np.int64)
    if not np.allclose(t, t_int, atol=1e-9):
        raise InvalidInputError("isomorphism has a non-integer lattice action")
    if abs(round(np.linalg.det(t_int.astype(float)))) != 1:
        raise InvalidInputError("lattice action is not unimodular")
    return t_int


def find_map_isomorphisms(m1, m2, policy="identity"):
    """Yield all colour-respecting isomorphisms of two torus maps.

    `policy` is "identity" (black->black) or "swap" (black<->white); grey
    always maps to grey.  Both orientations are searched; every witness is
    determined by the image of one dart.
    """
    if policy == "swap":
        m2 = compute_dual(m2)  # swap against m2 = identity against its dual
    elif policy != "identity":
        raise InvalidInputError(f"unknown colour policy {policy!r}")
    if m1.n_darts != m2.n_darts:
        return
    d0 = 0
    want = int(m1.left_color[d0])
    for orientation in (1, -1):
        for d1 in range(m2.n_darts):
            if int(m2.left_color[d1]) != want:
                continue
            psi = _propagate(m1, m2, d0, d1, orientation)
            if psi is None:
                continue
            linear = _homology_action(m1, m2, psi, orientation)
            yield Isomorphism(dart_map=psi, linear=linear,
                              orientation=orientation, color_policy=policy)


def _slot_correspondence(m1, m2, psi, h):
    """Where hyperedge h's slots land: (hyperedge of m2, ground-set map)."""
    slots1 = m1.grey_slot_darts[h]
    img0 = int(psi[slots1[0]])
    h2 = None
    for hh, slots2 in enumerate(m2.grey_slot_darts):
        if img0 in slots2:
            h2 = hh
            break
    if h2 is None:
        return None
    slots2 = m2.grey_slot_darts[h2]
    pos = {d: t for t, d in enumerate(slots2)}
    rho = []
    for d in slots1:
        img = int(psi[d])
        if img not in pos:
            return None
        rho.append(pos[img])
    return h2, rho


def _map_partition(pi, rho):
    return ncpart.NCPartition(pi.k, [[rho[j] for j in b] for b in pi.blocks])


def find_self_duality(m, vectors, tol=1e-12):
    """A witness that the model equals its dual model, or None.

    `vectors` maps each orbit slot to its ProbabilityVector.  Every map
    isomorphism onto the dual is enumerated; a witness must transport each
    hyperedge's distribution onto the dual distribution of its image
    hyperedge (slot alignment: dual ground element t is the polygon side
    after vertex t).
    """
    _check_vectors(m, vectors)
    dual = compute_dual(m)
    dual_vecs = {orb: ncpart.dual_vector(v) for orb, v in vectors.items()}
    for iso in find_map_isomorphisms(m, dual, policy="identity"):
        ok = True
        for h in range(len(m.grey_slot_darts)):
            sc = _slot_correspondence(m, dual, iso.dart_map, h)
            if sc is None:
                ok = False
                break
            h2, rho = sc
            v_here = vectors[m.orbit_of_edge[h]]
            v_image = dual_vecs[dual.orbit_of_edge[h2]]
            for pi in ncpart.enumerate_nc(v_here.k):
                if abs(v_here.prob(pi) - v_image.prob(_map_partition(pi, rho))) > tol:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            return Isomorphism(dart_map=iso.dart_map, linear=iso.linear,
                               orientation=iso.orientation, color_policy="swap")
    return None


def _check_vectors(m, vectors):
    for h, slots in enumerate(m.grey_slot_darts):
        orb = m.orbit_of_edge[h]
        if orb not in vectors:
            raise InvalidInputError(f"no probability vector for orbit {orb}")
        if vectors[orb].k != len(slots):
            raise InvalidInputError(
                f"orbit {orb} vector has k={vectors[orb].k}, hyperedge has "
                f"{len(slots)} incidences")


# ---------------------------------------------------------------------------
# built-in lattices and generator substitution
# ---------------------------------------------------------------------------

def builtin(name):
    """Named lattices: tri, tri-dual, tri-bond, hex-bond."""
    from . import szgen
    if name == "tri":
        basis = [[1.0, 0.0], [0.5, math.sqrt(3) / 2]]
        return build_from_hypergraph(
            basis, [(0.0, 0.0)],
            [(0, [(0, 0, 0), (0, 1, 0), (0, 0, 1)])],
            orbit_labels=["triangle"])
    if name == "tri-dual":
        return compute_dual(builtin("tri"))
    if name == "tri-bond":
        return substitute_generator(builtin("tri"), szgen.triangle_generator())
    if name == "hex-bond":
        return substitute_generator(builtin("tri"), szgen.star_generator())
    raise InvalidInputError(f"unknown builtin lattice {name!r}")


BUILTIN_LATTICES = ("tri", "tri-dual", "tri-bond", "hex-bond")


def _generator_layout(g):
    """Coordinates for every generator vertex in terminal-reference space."""
    ref = {g.terminals[0]: (0.0, 0.0), g.terminals[1]: (1.0, 0.0),
           g.terminals[2]: (0.0, 1.0)}
    coords = dict(g.coords)
    for t, p in ref.items():
        coords.setdefault(t, p)
    internals = [v for v in g.vertices if v not in coords]
    c = (1 / 3, 1 / 3)
    for i, v in enumerate(internals):
        if len(internals) == 1:
            coords[v] = c
        else:
            ang = 2 * math.pi * i / len(internals)
            coords[v] = (c[0] + 0.15 * math.cos(ang), c[1] + 0.15 * math.sin(ang))
    return coords


def _check_planar_generator(g):
    import networkx as nx
    gr = nx.MultiGraph()
    gr.add_nodes_from(g.vertices)
    for u, v, _ in g.bonds:
        gr.add_edge(u, v)
    ok, _ = nx.check_planarity(gr)
    if not ok:
        raise InvalidInputError("generator graph is not planar")
    apex = object()
    for t in g.terminals:
        gr.add_edge(apex, t)
    ok, _ = nx.check_planarity(gr)
    if not ok:
        raise InvalidInputError("generator terminals do not share a face")


class SubstitutedMap(PeriodicMap):
    """A bond lattice produced by generator substitution.

    Every hyperedge is 2-uniform; `bond_polys[slot]` gives the bond's
    open-probability polynomial, so a parameter value yields the
    per-orbit probability vectors via `bond_vectors`.
    """

    bond_polys = ()

    def bond_vectors(self, p):
        out = {}
        for slot, poly in enumerate(self.bond_polys):
            out[slot] = ncpart.top_bottom_vector(2, float(poly(p)))
        return out


def substitute_generator(base, g):
    """Replace each hyperedge of a 3-uniform lattice by a generator copy.

    Terminal j of the generator is glued to incidence j of the hyperedge;
    internal vertices are placed by the affine map sending the reference
    terminals onto the hyperedge corners.  The result is the 2-uniform
    bond lattice, one orbit slot per (hyperedge, bond).
    """
    if g.mode != "bond":
        raise InvalidInputError("substitution requires a bond-mode generator")
    if g.k != 3:
        raise InvalidInputError("substitution requires a 3-terminal generator")
    _check_planar_generator(g)
    hv = hyperview(base)
    for _, _, incs in hv.hyperedges:
        if len(incs) != 3:
            raise InvalidInputError("base lattice must be 3-uniform")
    layout = _generator_layout(g)
    coords = [np.array(anchor) for _, anchor in hv.vertices]
    n_base = len(coords)
    new_vertices = [tuple(c) for c in coords]
    internal_ids = {}
    new_edges = []
    labels = []
    bond_polys = []
    ref = np.array([layout[t] for t in g.terminals], dtype=float)  # 3 x 2
    ref_m = np.hstack([ref, np.ones((3, 1))])
    for h, (_, _, incs) in enumerate(hv.hyperedges):
        tgt = np.array([coords[v] + np.asarray(cell, float) @ base.basis
                        for v, cell in incs])
        affine = np.linalg.solve(ref_m, tgt)  # maps (x, y, 1) -> plane

        def place(vid):
            p = np.array([layout[vid][0], layout[vid][1], 1.0])
            return tuple(p @ affine)

        vmap = {}
        for j, t in enumerate(g.terminals):
            vmap[t] = incs[j]
        for w in g.vertices:
            if w in vmap:
                continue
            internal_ids[(h, w)] = len(new_vertices)
            new_vertices.append(place(w))
            vmap[w] = (internal_ids[(h, w)], (0, 0))
        for bi, (u, v, poly) in enumerate(g.bonds):
            (iu, cu), (iv, cv) = vmap[u], vmap[v]
            slot = len(bond_polys)
            new_edges.append((slot, [(iu, cu[0], cu[1]), (iv, cv[0], cv[1])]))
            labels.append(f"h{h}:{u}-{v}")
            bond_polys.append(poly)
    built = build_from_hypergraph(base.basis, new_vertices, new_edges,
                                  orbit_labels=labels)
    built.__class__ = SubstitutedMap
    built.bond_polys = tuple(bond_polys)
    return built


# ---------------------------------------------------------------------------
# lattice file format
# ---------------------------------------------------------------------------

def lattice_from_json(obj):
    try:
        basis = obj["basis"]
        ids = [v["id"] for v in obj["vertices"]]
        index = {vid: i for i, vid in enumerate(ids)}
        if len(index) != len(ids):
            raise InvalidInputError("duplicate vertex ids")
        vertices = [(float(v["x"]), float(v["y"])) for v in obj["vertices"]]
        hyperedges = []
        for he in obj["hyperedges"]:
            incs = [(index[i["v"]], int(i.get("dx", 0)), int(i.get("dy", 0)))
                    for i in he["incidences"]]
            hyperedges.append((int(he.get("orbit", len(hyperedges))), incs))
    except (KeyError, TypeError) as exc:
        raise InvalidInputError(f"malformed lattice JSON: {exc}") from exc
    return build_from_hypergraph(basis, vertices, hyperedges)


def lattice_to_json(m):
    hv = hyperview(m)
    return {
        "basis": m.basis.tolist(),
        "vertices": [{"id": f"v{i}", "x": a[0], "y": a[1]}
                     for i, (_, a) in enumerate(hv.vertices)],
        "hyperedges": [
            {"orbit": orbit,
             "incidences": [{"v": f"v{v}", "dx": c[0], "dy": c[1]}
                            for v, c in incs]}
            for _, orbit, incs in hv.hyperedges],
    }
