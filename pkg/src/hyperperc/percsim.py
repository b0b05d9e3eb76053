"""Finite-window Monte Carlo for hyperlattice percolation models.

A window unrolls nx-by-ny fundamental cells of a lattice; hyperedges are
sampled independently by inverse CDF over each orbit's states (listed in
a fixed linear extension of the refinement order), using a counter-based
stream keyed by (seed, trial, edge instance), so every estimate is
reproducible under any parallel schedule.  Open-rectangle windows drop
hyperedges that leave the cell range; torus windows wrap them, which is
what configuration duality needs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels, hypermap, ncpart
from .errors import InvalidInputError, UnsupportedModeError

MIN_CELLS = 4


def wilson_halfwidth(hits, trials, z=1.96):
    """Half-width of the Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise InvalidInputError("trials must be positive")
    phat = hits / trials
    denom = 1.0 + z * z / trials
    return z * math.sqrt(phat * (1 - phat) / trials
                         + z * z / (4 * trials * trials)) / denom


@dataclass
class CrossingStats:
    trials: int
    hits: int
    seed: int

    @property
    def estimate(self):
        return self.hits / self.trials

    @property
    def ci95(self):
        return wilson_halfwidth(self.hits, self.trials)

    def as_dict(self):
        return {"trials": self.trials, "hits": self.hits, "seed": self.seed,
                "estimate": self.estimate, "ci95": self.ci95}


class Window:
    """An unrolled nx-by-ny block of cells of a periodic lattice.

    Rows are shear-compensated: row j uses cells (i + s_j, j) with the
    integer shift s_j chosen so the unrolled region fills an upright
    plane rectangle even for oblique bases (brick layout).  Local cell
    coordinates are (i, j) with 0 <= i < nx, 0 <= j < ny.
    """

    def __init__(self, lattice, nx, ny, mode="open"):
        if nx < MIN_CELLS or ny < MIN_CELLS:
            raise InvalidInputError(f"window needs at least {MIN_CELLS}x{MIN_CELLS} cells")
        if mode not in ("open", "torus"):
            raise InvalidInputError(f"unknown window mode {mode!r}")
        self.lattice = lattice
        self.nx, self.ny, self.mode = nx, ny, mode
        basis = np.asarray(lattice.basis, float)
        if abs(basis[0, 0]) < 1e-12:
            raise InvalidInputError("first basis vector needs a horizontal part")
        self._shear = [-int(math.floor(j * basis[1, 0] / basis[0, 0] + 0.5))
                       for j in range(ny)]
        hv = hypermap.hyperview(lattice)
        self.hv = hv
        self.n_vorbits = len(hv.vertices)
        self.n_horbits = len(hv.hyperedges)
        self.slot_of_h = [orbit for _, orbit, _ in hv.hyperedges]
        self.n_slots = lattice.n_orbits()
        self.slot_arity = {}
        for _, orbit, incs in hv.hyperedges:
            k = len(incs)
            if self.slot_arity.setdefault(orbit, k) != k:
                raise InvalidInputError(f"orbit {orbit} mixes hyperedge arities")
        ncells = nx * ny
        self.n_vertices = ncells * self.n_vorbits
        anchors = np.array([a for _, a in hv.vertices], dtype=float)
        cells = np.array([(i + self._shear[j], j)
                          for j in range(ny) for i in range(nx)], dtype=float)
        # vertex instance id = (j * nx + i) * n_vorbits + orbit
        self.positions = (np.repeat(cells @ basis, self.n_vorbits, axis=0)
                          + np.tile(anchors, (ncells, 1)))
        edge_gid, edge_h, edge_slot, inc_flat, inc_start = [], [], [], [], [0]
        for j in range(ny):
            for i in range(nx):
                cell_idx = j * nx + i
                for h, (_, orbit, incs) in enumerate(hv.hyperedges):
                    resolved = []
                    ok = True
                    for v, (dx, dy) in incs:
                        cell = self._resolve_cell(i + self._shear[j] + dx, j + dy)
                        if cell is None:
                            ok = False
                            break
                        resolved.append(cell * self.n_vorbits + v)
                    if not ok:
                        continue  # clipped in open mode
                    edge_gid.append(cell_idx * self.n_horbits + h)
                    edge_h.append(h)
                    edge_slot.append(orbit)
                    inc_flat.extend(resolved)
                    inc_start.append(len(inc_flat))
        self.edge_gid = np.asarray(edge_gid, dtype=np.uint64)
        self.edge_h = np.asarray(edge_h, dtype=np.int64)
        self.edge_slot = np.asarray(edge_slot, dtype=np.int64)
        self.inc_flat = np.asarray(inc_flat, dtype=np.int64)
        self.inc_start = np.asarray(inc_start, dtype=np.int64)
        self.n_edges = len(self.edge_gid)
        self.band = (max(abs(basis[0, 0]), abs(basis[1, 0])),
                     max(abs(basis[0, 1]), abs(basis[1, 1])))
        lo = self.positions.min(axis=0)
        hi = self.positions.max(axis=0)
        self.bounds = (lo[0], lo[1], hi[0], hi[1])

    def _resolve_cell(self, gi, gj):
        """Local cell index of the sheared-lattice cell (gi, gj), or None."""
        if self.mode == "torus":
            j = gj % self.ny
            i = (gi - self._shear[j]) % self.nx
            return j * self.nx + i
        j = gj
        if not (0 <= j < self.ny):
            return None
        i = gi - self._shear[j]
        if not (0 <= i < self.nx):
            return None
        return j * self.nx + i

    def vertex_id(self, orbit, i, j):
        return (j * self.nx + i) * self.n_vorbits + orbit

    def center_vertex(self, orbit=0):
        return self.vertex_id(orbit, self.nx // 2, self.ny // 2)

    def edge_incidences(self, pos):
        return self.inc_flat[self.inc_start[pos]:self.inc_start[pos + 1]]


def default_rect(window, aspect=None):
    """The margined crossing rectangle: everything one cell-width inside.

    With `aspect` set (width/height), the largest such rectangle of that
    shape, centered; with None the full margined region, which keeps
    finite-size bias of the crossing point small on oblique lattices.
    """
    x0, y0, x1, y1 = window.bounds
    bx, by = window.band
    ax0, ay0, ax1, ay1 = x0 + bx, y0 + by, x1 - bx, y1 - by
    w, h = ax1 - ax0, ay1 - ay0
    if w <= 0 or h <= 0:
        raise InvalidInputError("window too small for a margined rectangle")
    if aspect is None:
        return (ax0, ay0, ax1, ay1)
    if w / h > aspect:
        w = h * aspect
    else:
        h = w / aspect
    cx, cy = (ax0 + ax1) / 2, (ay0 + ay1) / 2
    return (cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2)


def _check_rect(window, rect):
    x0, y0, x1, y1 = rect
    wx0, wy0, wx1, wy1 = window.bounds
    bx, by = window.band
    if not (x0 < x1 and y0 < y1):
        raise InvalidInputError("rectangle is empty")
    if x0 < wx0 + bx - 1e-9 or y0 < wy0 + by - 1e-9 or \
            x1 > wx1 - bx + 1e-9 or y1 > wy1 - by + 1e-9:
        raise InvalidInputError(
            "rectangle must sit inside the window with one cell-width margin")


def _active_edges(window, rect):
    """Edges whose every incidence lies inside the rectangle."""
    x0, y0, x1, y1 = rect
    pos = window.positions
    ok_v = ((pos[:, 0] >= x0) & (pos[:, 0] <= x1)
            & (pos[:, 1] >= y0) & (pos[:, 1] <= y1))
    counts = window.inc_start[1:] - window.inc_start[:-1]
    good = np.minimum.reduceat(
        ok_v[window.inc_flat].astype(np.int64), window.inc_start[:-1])
    good[counts == 0] = 0
    return good.astype(bool)


def _terminal_sets(window, rect, direction):
    x0, y0, x1, y1 = rect
    bx, by = window.band
    pos = window.positions
    inside = ((pos[:, 0] >= x0) & (pos[:, 0] <= x1)
              & (pos[:, 1] >= y0) & (pos[:, 1] <= y1))
    if direction in ("h", "horizontal"):
        left = inside & (pos[:, 0] <= x0 + bx)
        right = inside & (pos[:, 0] >= x1 - bx)
    elif direction in ("v", "vertical"):
        left = inside & (pos[:, 1] <= y0 + by)
        right = inside & (pos[:, 1] >= y1 - by)
    else:
        raise InvalidInputError(f"unknown crossing direction {direction!r}")
    return np.where(left)[0].astype(np.int64), np.where(right)[0].astype(np.int64)


def _state_key(pi):
    # linear extension of refinement: finer partitions first
    return (pi.k - pi.n_blocks(), pi.blocks)


class CompiledModel:
    """Flat arrays binding a window to per-orbit probability vectors."""

    def __init__(self, window, vectors):
        self.window = window
        for slot, arity in window.slot_arity.items():
            if slot not in vectors:
                raise InvalidInputError(f"no probability vector for orbit {slot}")
            if vectors[slot].k != arity:
                raise InvalidInputError(
                    f"orbit {slot}: vector has k={vectors[slot].k}, "
                    f"hyperedges have {arity} incidences")
        self.vectors = vectors
        n_slots = window.n_slots
        self.states = []
        cdf_flat, cdf_start, n_states = [], [], []
        pair_flat, pair_start, row_start = [], [0], []
        row = 0
        for slot in range(n_slots):
            if slot not in vectors:   # orbit absent from this lattice
                self.states.append([])
                cdf_start.append(len(cdf_flat))
                n_states.append(0)
                row_start.append(row)
                continue
            v = vectors[slot]
            states = sorted(v.entries, key=_state_key)
            self.states.append(states)
            cdf_start.append(len(cdf_flat))
            acc = 0.0
            for pi in states:
                acc += v.entries[pi]
                cdf_flat.append(acc)
            n_states.append(len(states))
            row_start.append(row)
            for pi in states:
                for block in pi.blocks:
                    for a, b in zip(block, block[1:]):
                        pair_flat.append((a, b))
                pair_start.append(len(pair_flat))
                row += 1
        self.cdf_flat = np.asarray(cdf_flat, dtype=np.float64)
        self.cdf_start = np.asarray(cdf_start, dtype=np.int64)
        self.n_states = np.asarray(n_states, dtype=np.int64)
        self.row_start = np.asarray(row_start, dtype=np.int64)
        self.pair_flat = (np.asarray(pair_flat, dtype=np.int64).reshape(-1, 2)
                          if pair_flat else np.empty((0, 2), dtype=np.int64))
        self.pair_start = np.asarray(pair_start, dtype=np.int64)

    def state_indices(self, seed, trial, edge_mask=None):
        """The sampled state index of each (selected) edge for one trial."""
        w = self.window
        sel = np.arange(w.n_edges) if edge_mask is None else np.where(edge_mask)[0]
        u = _kernels._uniforms_numpy(np.uint64(seed), trial, w.edge_gid[sel])
        out = np.empty(len(sel), dtype=np.int64)
        for slot in np.unique(w.edge_slot[sel]):
            m = w.edge_slot[sel] == slot
            lo = self.cdf_start[slot]
            cdf = self.cdf_flat[lo:lo + self.n_states[slot]]
            idx = np.searchsorted(cdf, u[m], side="right")
            out[m] = np.minimum(idx, self.n_states[slot] - 1)
        return sel, out


@dataclass
class Configuration:
    """A sampled state per hyperedge instance of a window."""
    window: Window
    model: CompiledModel
    state_idx: np.ndarray   # per edge position in window.edge_gid order
    seed: int = 0
    trial: int = 0

    def partition(self, pos):
        slot = int(self.window.edge_slot[pos])
        return self.model.states[slot][int(self.state_idx[pos])]


def sample(window, vectors, seed, trial=0):
    """Draw one configuration; identical to what kernel trial `trial` sees."""
    model = vectors if isinstance(vectors, CompiledModel) else CompiledModel(window, vectors)
    _, idx = model.state_indices(seed, trial)
    return Configuration(window=window, model=model, state_idx=idx,
                         seed=seed, trial=trial)


def clusters(window, config, edge_mask=None):
    """Cluster labels (root-vertex ids) under union of all state blocks."""
    parent = np.arange(window.n_vertices)

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for pos in range(window.n_edges):
        if edge_mask is not None and not edge_mask[pos]:
            continue
        inc = window.edge_incidences(pos)
        for block in config.partition(pos).blocks:
            for a, b in zip(block, block[1:]):
                ra, rb = find(inc[a]), find(inc[b])
                if ra != rb:
                    parent[ra] = rb
    return np.array([find(v) for v in range(window.n_vertices)])


def crossing(window, config, rect, direction="h"):
    """Open path across `rect` using only hyperedges fully inside it."""
    _check_rect(window, rect)
    mask = _active_edges(window, rect)
    left, right = _terminal_sets(window, rect, direction)
    if len(left) == 0 or len(right) == 0:
        return False
    labels = clusters(window, config, edge_mask=mask)
    return bool(np.isin(labels[left], labels[right]).any())


def _run_with_threads(threads, fn):
    backend = _kernels.get_backend()
    if threads is None:
        return fn(backend)
    old = backend["get_threads"]()
    backend["set_threads"](int(threads))
    try:
        return fn(backend)
    finally:
        backend["set_threads"](old)


def estimate_crossing(window, vectors, rect, direction, trials, seed,
                      threads=None):
    """Monte Carlo crossing probability with per-trial derived streams."""
    if trials < 1:
        raise InvalidInputError("trials must be >= 1")
    _check_rect(window, rect)
    model = vectors if isinstance(vectors, CompiledModel) else CompiledModel(window, vectors)
    mask = _active_edges(window, rect)
    left, right = _terminal_sets(window, rect, direction)
    hits = np.zeros(trials, dtype=np.uint8)
    if len(left) and len(right):
        sel = np.where(mask)[0]
        inc_flat, inc_start = _subset_incidences(window, sel)

        def run(backend):
            backend["crossing_trials"](
                np.uint64(seed), trials, window.n_vertices,
                window.edge_gid[sel], window.edge_slot[sel],
                inc_flat, inc_start,
                model.cdf_flat, model.cdf_start, model.n_states,
                model.row_start, model.pair_flat, model.pair_start,
                left, right, hits)

        _run_with_threads(threads, run)
    return CrossingStats(trials=trials, hits=int(hits.sum()), seed=seed)


def _subset_incidences(window, sel):
    counts = window.inc_start[sel + 1] - window.inc_start[sel]
    total = int(counts.sum())
    local = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
    flat = window.inc_flat[np.repeat(window.inc_start[sel], counts) + local]
    starts = np.concatenate(([0], np.cumsum(counts))).astype(np.int64)
    return flat, starts


@dataclass
class SurveyResult:
    trials: int
    seed: int
    sizes: np.ndarray        # reference-cluster size per trial
    radii: np.ndarray        # reference-cluster plane radius per trial
    size_histogram: dict = field(default_factory=dict)

    def tail(self, r):
        """Fraction of trials whose reference cluster reaches distance r."""
        hits = int((self.radii >= r).sum())
        return hits / self.trials, wilson_halfwidth(hits, self.trials)

    def tail_rows(self, radii):
        rows = []
        for r in radii:
            frac, ci = self.tail(r)
            hits = int((self.radii >= r).sum())
            rows.append({"r": r, "count": hits, "fraction": frac, "ci95": ci})
        return rows


def cluster_survey(window, vectors, trials, seed, ref_orbit=0, threads=None):
    """Size and radius of the cluster of a central reference vertex."""
    if trials < 1:
        raise InvalidInputError("trials must be >= 1")
    model = vectors if isinstance(vectors, CompiledModel) else CompiledModel(window, vectors)
    ref = window.center_vertex(ref_orbit)
    sizes = np.zeros(trials, dtype=np.int64)
    radii = np.zeros(trials, dtype=np.float64)
    sel = np.arange(window.n_edges)

    def run(backend):
        backend["survey_trials"](
            np.uint64(seed), trials, window.n_vertices,
            window.edge_gid, window.edge_slot, window.inc_flat,
            window.inc_start, model.cdf_flat, model.cdf_start,
            model.n_states, model.row_start, model.pair_flat,
            model.pair_start, window.positions, ref, sizes, radii)

    _run_with_threads(threads, run)
    hist = {}
    for s in sizes.tolist():
        hist[s] = hist.get(s, 0) + 1
    return SurveyResult(trials=trials, seed=seed, sizes=sizes, radii=radii,
                        size_histogram=dict(sorted(hist.items())))


def dual_config(window, config):
    """The dual configuration on the dual lattice's torus window."""
    if window.mode != "torus":
        raise UnsupportedModeError("configuration duality needs a torus window")
    dual_lat = hypermap.compute_dual(window.lattice)
    dual_win = Window(dual_lat, window.nx, window.ny, "torus")
    dual_vectors = {slot: ncpart.dual_vector(v)
                    for slot, v in config.model.vectors.items()}
    dual_model = CompiledModel(dual_win, dual_vectors)
    if dual_win.n_edges != window.n_edges:
        raise InvalidInputError("dual window does not align with the window")
    idx = np.empty(window.n_edges, dtype=np.int64)
    lut = {}
    for slot in range(window.n_slots):
        if slot not in config.model.vectors:
            continue
        lut[slot] = {}
        dual_states = dual_model.states[slot]
        pos_of = {pi: i for i, pi in enumerate(dual_states)}
        for i, pi in enumerate(config.model.states[slot]):
            lut[slot][i] = pos_of[ncpart.dual(pi)]
    for pos in range(window.n_edges):
        slot = int(window.edge_slot[pos])
        idx[pos] = lut[slot][int(config.state_idx[pos])]
    return Configuration(window=dual_win, model=dual_model, state_idx=idx,
                         seed=config.seed, trial=config.trial)


# ---------------------------------------------------------------------------
# threshold scans
# ---------------------------------------------------------------------------

def _isotonic(y):
    """Pool-adjacent-violators; non-decreasing fit with equal weights."""
    vals = [float(v) for v in y]
    weights = [1.0] * len(vals)
    out_v, out_w = [], []
    for v, w in zip(vals, weights):
        out_v.append(v)
        out_w.append(w)
        while len(out_v) > 1 and out_v[-2] > out_v[-1]:
            v2, w2 = out_v.pop(), out_w.pop()
            v1, w1 = out_v.pop(), out_w.pop()
            out_v.append((v1 * w1 + v2 * w2) / (w1 + w2))
            out_w.append(w1 + w2)
    fit = []
    for v, w in zip(out_v, out_w):
        fit.extend([v] * int(round(w)))
    return fit


def crossing_point(params, estimates, level=0.5):
    """Monotone interpolation of the parameter where estimates cross level."""
    fit = _isotonic(estimates)
    if fit[0] > level or fit[-1] < level:
        return None
    for i in range(len(fit) - 1):
        lo, hi = fit[i], fit[i + 1]
        if lo <= level <= hi:
            if hi == lo:
                return (params[i] + params[i + 1]) / 2
            frac = (level - lo) / (hi - lo)
            return params[i] + frac * (params[i + 1] - params[i])
    return params[-1] if fit[-1] == level else None


@dataclass
class ScanRow:
    L: int
    param: float
    trials: int
    hits: int
    estimate: float
    ci95: float


@dataclass
class ScanResult:
    rows: list
    crossing_points: dict    # L -> parameter estimate (or None)
    seed: int

    def as_rows(self):
        return [dict(r.__dict__) for r in self.rows]


def _subseed(seed, a, b):
    with np.errstate(over="ignore"):
        s = _kernels._mix64(np.uint64(seed) + (np.uint64(a) + np.uint64(1))
                            * _kernels._GAMMA)
        s = _kernels._mix64(s + (np.uint64(b) + np.uint64(1)) * _kernels._GAMMA)
    return int(s)


def threshold_scan(lattice, family, sizes, grid, trials, seed,
                   direction="h", aspect=None, mode="open", threads=None):
    """Crossing probability over a parameter grid and window sizes.

    `family` maps a parameter to per-orbit vectors.  Each (size, point)
    runs `trials` trials on its own derived stream; per-size crossing
    points come from monotone interpolation of the estimates at 1/2.
    """
    rows = []
    points = {}
    for li, L in enumerate(sizes):
        window = Window(lattice, L, L, mode)
        rect = default_rect(window, aspect)
        ests = []
        for pi_, param in enumerate(grid):
            model = CompiledModel(window, family(param))
            stats = estimate_crossing(window, model, rect, direction, trials,
                                      _subseed(seed, li, pi_), threads=threads)
            rows.append(ScanRow(L=L, param=param, trials=trials,
                                hits=stats.hits, estimate=stats.estimate,
                                ci95=stats.ci95))
            ests.append(stats.estimate)
        points[L] = crossing_point(list(grid), ests)
    return ScanResult(rows=rows, crossing_points=points, seed=seed)


def vector_family(lattice, spec):
    """Named parameter families of per-orbit vectors for a lattice.

    "competition" (3-uniform), "topbottom"/"site" (mass p on top),
    "bond" (substituted lattices use their bond polynomials), "uniform",
    "top", "bottom" (parameter ignored), "pair:i,j" (point mass).
    """
    arity = {}
    for h, slots in enumerate(lattice.grey_slot_darts):
        arity[lattice.orbit_of_edge[h]] = len(slots)

    if spec == "competition":
        if any(k != 3 for k in arity.values()):
            raise InvalidInputError("competition family needs a 3-uniform lattice")
        return lambda p: {s: ncpart.competition_vector(p) for s in arity}
    if spec in ("topbottom", "site"):
        return lambda p: {s: ncpart.top_bottom_vector(k, p)
                          for s, k in arity.items()}
    if spec == "bond":
        if isinstance(lattice, hypermap.SubstitutedMap):
            return lattice.bond_vectors
        if any(k != 2 for k in arity.values()):
            raise InvalidInputError("bond family needs a 2-uniform lattice")
        return lambda p: {s: ncpart.top_bottom_vector(2, p) for s in arity}
    if spec == "uniform":
        return lambda p: {s: ncpart.uniform_vector(k) for s, k in arity.items()}
    if spec == "top":
        return lambda p: {s: ncpart.point_mass(ncpart.top(k))
                          for s, k in arity.items()}
    if spec == "bottom":
        return lambda p: {s: ncpart.point_mass(ncpart.bottom(k))
                          for s, k in arity.items()}
    if spec.startswith("pair:"):
        try:
            i, j = (int(x) for x in spec[5:].split(","))
        except ValueError as exc:
            raise InvalidInputError(f"bad pair spec {spec!r}") from exc

        def fam(p):
            out = {}
            for s, k in arity.items():
                if not (0 <= i < k and 0 <= j < k and i != j):
                    raise InvalidInputError(f"pair {i},{j} invalid for arity {k}")
                blocks = [[i, j]] + [[t] for t in range(k) if t not in (i, j)]
                out[s] = ncpart.point_mass(ncpart.NCPartition(k, blocks))
            return out

        return fam
    raise InvalidInputError(f"unknown vector family {spec!r}")
