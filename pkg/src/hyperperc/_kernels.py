"""Hot Monte Carlo kernels: counter-based sampling, union-find, crossings.

Two interchangeable backends produce bit-identical results:

* ``numba`` (default): per-trial @njit loops, parallel over trials.
* ``numpy``: vectorized sampling plus scipy connected-components labeling.

Select with the ``HYPERPERC_BACKEND`` environment variable ("numba" or
"numpy"), or programmatically via `set_backend`.  Every random number is
a pure function of (seed, trial, edge id), so results do not depend on
the backend, the thread count, or the execution order.
"""

from __future__ import annotations

import os

import numpy as np

from .errors import InvalidInputError

ENV_BACKEND = "HYPERPERC_BACKEND"

U64 = np.uint64
_GAMMA = U64(0x9E3779B97F4A7C15)
_M1 = U64(0xBF58476D1CE4E5B9)
_M2 = U64(0x94D049BB133111EB)
_ONE = U64(1)
_INV53 = 1.0 / 9007199254740992.0  # 2**-53


# ---------------------------------------------------------------------------
# scalar kernel source (njit-compiled below; also runnable as plain python)
# ---------------------------------------------------------------------------

def _mix64(x):
    # uint64 wraparound is intended; numpy warns on scalars, numba does not
    x = (x ^ (x >> U64(30))) * _M1
    x = (x ^ (x >> U64(27))) * _M2
    return x ^ (x >> U64(31))


def _edge_uniform(seed, trial, edge):
    with np.errstate(over="ignore"):
        s = _mix64(seed + (trial + _ONE) * _GAMMA)
        s = _mix64(s + (edge + _ONE) * _GAMMA)
    return np.float64(s >> U64(11)) * _INV53


def _find(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


# ---------------------------------------------------------------------------
# numpy backend (vectorized sampling + scipy connected components)
# ---------------------------------------------------------------------------

def _uniforms_numpy(seed, trial, edge_ids):
    e = edge_ids.astype(np.uint64)
    with np.errstate(over="ignore"):
        s = _mix64(U64(seed) + (U64(trial) + _ONE) * _GAMMA)
        u = _mix64(s + (e + _ONE) * _GAMMA)
    return (u >> U64(11)).astype(np.float64) * _INV53


def _states_numpy(seed, trial, edge_ids, edge_slot,
                  cdf_flat, cdf_start, n_states):
    u = _uniforms_numpy(seed, trial, edge_ids)
    out = np.empty(len(edge_ids), dtype=np.int64)
    for slot in np.unique(edge_slot):
        mask = edge_slot == slot
        cdf = cdf_flat[cdf_start[slot]:cdf_start[slot] + n_states[slot]]
        idx = np.searchsorted(cdf, u[mask], side="right")
        out[mask] = np.minimum(idx, n_states[slot] - 1)
    return out


def _union_pairs_numpy(states, edge_slot, inc_flat, inc_start, row_start,
                       pair_flat, pair_start):
    rows = row_start[edge_slot] + states
    counts = pair_start[rows + 1] - pair_start[rows]
    total = int(counts.sum())
    if total == 0:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    reps = np.repeat(np.arange(len(rows)), counts)
    local = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
    q = pair_start[rows][reps] + local
    base = inc_start[reps]
    return inc_flat[base + pair_flat[q, 0]], inc_flat[base + pair_flat[q, 1]]


def _labels_numpy(n_vertices, ua, ub):
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import connected_components
    g = coo_matrix((np.ones(len(ua), dtype=np.int8), (ua, ub)),
                   shape=(n_vertices, n_vertices))
    _, labels = connected_components(g, directed=False)
    return labels


def _crossing_trials_numpy(seed, trials, n_vertices,
                           edge_ids, edge_slot, inc_flat, inc_start,
                           cdf_flat, cdf_start, n_states, row_start,
                           pair_flat, pair_start, left_ids, right_ids, hits):
    for t in range(trials):
        states = _states_numpy(seed, t, edge_ids, edge_slot,
                               cdf_flat, cdf_start, n_states)
        ua, ub = _union_pairs_numpy(states, edge_slot, inc_flat, inc_start,
                                    row_start, pair_flat, pair_start)
        labels = _labels_numpy(n_vertices, ua, ub)
        hits[t] = 1 if np.isin(labels[left_ids], labels[right_ids]).any() else 0


def _survey_trials_numpy(seed, trials, n_vertices,
                         edge_ids, edge_slot, inc_flat, inc_start,
                         cdf_flat, cdf_start, n_states, row_start,
                         pair_flat, pair_start, positions, ref_vertex,
                         sizes, radii):
    for t in range(trials):
        states = _states_numpy(seed, t, edge_ids, edge_slot,
                               cdf_flat, cdf_start, n_states)
        ua, ub = _union_pairs_numpy(states, edge_slot, inc_flat, inc_start,
                                    row_start, pair_flat, pair_start)
        labels = _labels_numpy(n_vertices, ua, ub)
        mask = labels == labels[ref_vertex]
        sizes[t] = int(mask.sum())
        d = positions[mask] - positions[ref_vertex]
        radii[t] = float(np.sqrt((d * d).sum(axis=1)).max())


# ---------------------------------------------------------------------------
# backend selection
# ---------------------------------------------------------------------------

_BACKENDS = {}


def _build_numba():
    import numba

    mix = numba.njit(numba.uint64(numba.uint64), cache=True)(_mix64)

    @numba.njit(numba.float64(numba.uint64, numba.uint64, numba.uint64),
                cache=True)
    def edge_uniform(seed, trial, edge):
        s = mix(seed + (trial + _ONE) * _GAMMA)
        s = mix(s + (edge + _ONE) * _GAMMA)
        return np.float64(s >> U64(11)) * _INV53

    find = numba.njit(cache=True)(_find)

    @numba.njit(cache=True)
    def union_edges(seed, trial, parent, edge_ids, edge_slot, inc_flat,
                    inc_start, cdf_flat, cdf_start, n_states, row_start,
                    pair_flat, pair_start):
        for e in range(len(edge_ids)):
            u = edge_uniform(seed, trial, U64(edge_ids[e]))
            slot = edge_slot[e]
            base = cdf_start[slot]
            k = 0
            while k < n_states[slot] - 1 and u >= cdf_flat[base + k]:
                k += 1
            row = row_start[slot] + k
            ib = inc_start[e]
            for q in range(pair_start[row], pair_start[row + 1]):
                a = inc_flat[ib + pair_flat[q, 0]]
                b = inc_flat[ib + pair_flat[q, 1]]
                ra = find(parent, a)
                rb = find(parent, b)
                if ra != rb:
                    parent[ra] = rb

    @numba.njit(cache=True, parallel=True)
    def crossing_trials(seed, trials, n_vertices, edge_ids, edge_slot,
                        inc_flat, inc_start, cdf_flat, cdf_start, n_states,
                        row_start, pair_flat, pair_start, left_ids,
                        right_ids, hits):
        for t in numba.prange(trials):
            parent = np.arange(n_vertices)
            union_edges(seed, U64(t), parent, edge_ids, edge_slot, inc_flat,
                        inc_start, cdf_flat, cdf_start, n_states, row_start,
                        pair_flat, pair_start)
            mark = np.zeros(n_vertices, dtype=np.uint8)
            for i in range(len(left_ids)):
                mark[find(parent, left_ids[i])] = 1
            hit = 0
            for i in range(len(right_ids)):
                if mark[find(parent, right_ids[i])] == 1:
                    hit = 1
                    break
            hits[t] = hit

    @numba.njit(cache=True, parallel=True)
    def survey_trials(seed, trials, n_vertices, edge_ids, edge_slot,
                      inc_flat, inc_start, cdf_flat, cdf_start, n_states,
                      row_start, pair_flat, pair_start, positions,
                      ref_vertex, sizes, radii):
        for t in numba.prange(trials):
            parent = np.arange(n_vertices)
            union_edges(seed, U64(t), parent, edge_ids, edge_slot, inc_flat,
                        inc_start, cdf_flat, cdf_start, n_states, row_start,
                        pair_flat, pair_start)
            r0 = find(parent, ref_vertex)
            x0 = positions[ref_vertex, 0]
            y0 = positions[ref_vertex, 1]
            size = 0
            radius = 0.0
            for v in range(n_vertices):
                if find(parent, v) == r0:
                    size += 1
                    dx = positions[v, 0] - x0
                    dy = positions[v, 1] - y0
                    d = (dx * dx + dy * dy) ** 0.5
                    if d > radius:
                        radius = d
            sizes[t] = size
            radii[t] = radius

    def set_threads(n):
        # results never depend on the thread count; clamp to what exists
        numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))

    return {
        "name": "numba",
        "edge_uniform": edge_uniform,
        "crossing_trials": crossing_trials,
        "survey_trials": survey_trials,
        "set_threads": set_threads,
        "get_threads": lambda: numba.get_num_threads(),
    }


def _build_numpy():
    return {
        "name": "numpy",
        "edge_uniform": lambda s, t, e: _edge_uniform(U64(s), U64(t), U64(e)),
        "crossing_trials": _crossing_trials_numpy,
        "survey_trials": _survey_trials_numpy,
        "set_threads": lambda n: None,
        "get_threads": lambda: 1,
    }


def available_backends():
    out = ["numpy"]
    try:
        import numba  # noqa: F401
        out.insert(0, "numba")
    except ImportError:
        pass
    return out


def _normalize(name):
    name = (name or "").strip().lower()
    if name in ("", "default", "auto"):
        return "numba" if "numba" in available_backends() else "numpy"
    if name in ("numba", "jit"):
        return "numba"
    if name in ("numpy", "python", "nojit"):
        return "numpy"
    raise InvalidInputError(f"unknown backend {name!r}; use 'numba' or 'numpy'")


_active = None


def get_backend():
    """The active kernel namespace, honouring HYPERPERC_BACKEND on first use."""
    global _active
    if _active is None:
        set_backend(None)
    return _BACKENDS[_active]


def set_backend(name):
    """Activate a backend; None re-reads HYPERPERC_BACKEND (default numba)."""
    global _active
    if name is None:
        name = os.environ.get(ENV_BACKEND)
    name = _normalize(name)
    if name not in _BACKENDS:
        _BACKENDS[name] = _build_numba() if name == "numba" else _build_numpy()
    _active = name
    return _BACKENDS[_active]


def backend_name():
    return get_backend()["name"]
