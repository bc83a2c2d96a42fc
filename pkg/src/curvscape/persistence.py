"""Vietoris-Rips persistent homology in degrees 0 and 1 from a distance matrix.

Degree 0 is computed by union-find (the death vector equals the sorted MST
edge weights).  Degree 1 reduces the triangle boundary matrix over GF(2),
column by column in filtration order, with two standard optimizations:

* rows of negative edges (the union-find tree edges) are dropped from every
  column up front, which keeps columns short without changing the pairing;
* triangles are enumerated implicitly, grouped by filtration value, so no
  full 2-skeleton is ever materialized for large inputs.

``brute_force_diagram`` is a deliberately unoptimized, pure-Python reduction
of the explicit boundary matrix and serves as the testing oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _reduction
from .errors import DomainError, NumericalError, ResourceError

# Materialize the full triangle list below this count; stream value groups above.
MATERIALIZE_LIMIT = 4_000_000

# Default ceiling for the reduction working set, in stored int64 entries.
DEFAULT_ARENA_BUDGET = 128_000_000


@dataclass(frozen=True)
class DistanceMatrix:
    """Pairwise distances for m points, upper triangle in row-major order.

    ``entries[idx(i, j)]`` holds d(x_i, x_j) for i < j with
    ``idx(i, j) = i (2m - i - 1) / 2 + j - i - 1``; the diagonal is implicitly
    zero and symmetry holds by construction.
    """

    m: int
    entries: np.ndarray

    def __post_init__(self):
        entries = np.ascontiguousarray(np.asarray(self.entries, dtype=float))
        object.__setattr__(self, "entries", entries)
        if self.m < 2:
            raise DomainError(f"a distance matrix needs at least 2 points, got m={self.m}")
        expect = self.m * (self.m - 1) // 2
        if entries.shape != (expect,):
            raise DomainError(
                f"expected {expect} condensed entries for m={self.m}, got {entries.shape}"
            )
        if not np.all(np.isfinite(entries)) or np.any(entries < 0):
            raise DomainError("distances must be finite and non-negative")

    def index(self, i, j):
        if i > j:
            i, j = j, i
        if i == j or not (0 <= i < self.m and 0 <= j < self.m):
            raise DomainError(f"bad pair ({i}, {j}) for m={self.m}")
        return i * (2 * self.m - i - 1) // 2 + (j - i - 1)

    def distance(self, i, j):
        if i == j:
            return 0.0
        return float(self.entries[self.index(i, j)])

    def square(self):
        sq = np.zeros((self.m, self.m))
        iu, ju = np.triu_indices(self.m, k=1)
        sq[iu, ju] = self.entries
        sq[ju, iu] = self.entries
        return sq

    @classmethod
    def from_square(cls, arr):
        arr = np.asarray(arr, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise DomainError(f"expected a square matrix, got shape {arr.shape}")
        iu, ju = np.triu_indices(arr.shape[0], k=1)
        return cls(arr.shape[0], arr[iu, ju])


@dataclass(frozen=True)
class PersistenceDiagram:
    """Finite (birth, death) pairs of one homology degree, death > birth >= 0."""

    dim: int
    pairs: np.ndarray

    def __post_init__(self):
        pairs = np.asarray(self.pairs, dtype=float).reshape(-1, 2)
        object.__setattr__(self, "pairs", pairs)
        if pairs.size and (np.any(pairs[:, 1] <= pairs[:, 0]) or np.any(pairs < 0)):
            raise DomainError("diagram pairs must satisfy death > birth >= 0")

    def __len__(self):
        return self.pairs.shape[0]


@dataclass(frozen=True)
class DeathVector:
    """Degree-0 merge scales sorted in decreasing order (m - 1 finite values)."""

    deaths: np.ndarray

    def __post_init__(self):
        deaths = np.asarray(self.deaths, dtype=float)
        object.__setattr__(self, "deaths", deaths)
        if not np.all(np.isfinite(deaths)):
            raise DomainError("death vector entries must be finite")
        if np.any(np.diff(deaths) > 0):
            raise DomainError("death vector must be nonincreasing")


def _edge_filtration(d):
    """Edges in simplexwise order (value, then vertex-lexicographic).

    Returns (i, j, w) arrays sorted by that order plus the negative-edge mask
    from union-find, which is exactly the degree-0 pairing for this order.
    """
    iu, ju = np.triu_indices(d.m, k=1)
    order = np.lexsort((ju, iu, d.entries))
    ei = iu[order].astype(np.int64)
    ej = ju[order].astype(np.int64)
    ew = d.entries[order]
    negative = _reduction.kruskal_accept(ei, ej, d.m)
    return ei, ej, ew, negative, order


def h0_death_vector(d):
    """Death vector of reduced degree-0 VR persistence: sorted MST merge scales."""
    if d.m < 2:
        raise DomainError("degree-0 persistence needs at least 2 points")
    _, _, ew, negative, _ = _edge_filtration(d)
    merges = ew[negative]
    if merges.shape[0] != d.m - 1:
        raise NumericalError("union-find did not produce m - 1 merges")
    return DeathVector(merges[::-1].copy())


class _ReductionState:
    """Mutable arrays threaded through the chunked GF(2) reduction."""

    def __init__(self, n_rows, arena_budget):
        self.n_rows = n_rows
        self.arena_budget = arena_budget
        cap = min(max(4 * n_rows, 1024), arena_budget)
        self.arena_data = np.empty(cap, dtype=np.int64)
        self.arena_start = np.empty(n_rows + 1, dtype=np.int64)
        self.arena_len = np.empty(n_rows + 1, dtype=np.int64)
        self.pivot_owner = np.full(n_rows, -1, dtype=np.int64)
        self.state = np.zeros(3, dtype=np.int64)
        self.pair_rank = np.empty(n_rows, dtype=np.int64)
        self.pair_death = np.empty(n_rows, dtype=np.float64)
        self.work_a = np.empty(n_rows + 4, dtype=np.int64)
        self.work_b = np.empty(n_rows + 4, dtype=np.int64)

    def reduce(self, tri_data, tri_ptr, tri_val, edge_val, simplex_count):
        start = 0
        while True:
            status, nxt = _reduction.reduce_chunk(
                tri_data,
                tri_ptr,
                tri_val,
                start,
                edge_val,
                self.pivot_owner,
                self.arena_data,
                self.arena_start,
                self.arena_len,
                self.state,
                self.pair_rank,
                self.pair_death,
                self.work_a,
                self.work_b,
            )
            if status == _reduction.OK:
                return
            new_cap = 2 * self.arena_data.shape[0]
            if new_cap > self.arena_budget:
                raise ResourceError(
                    f"reduction working set exceeded the budget of "
                    f"{self.arena_budget} entries while processing "
                    f"{simplex_count} triangles"
                )
            grown = np.empty(new_cap, dtype=np.int64)
            grown[: self.arena_data.shape[0]] = self.arena_data
            self.arena_data = grown
            start = nxt

    def pairs(self, edge_val):
        n = int(self.state[2])
        births = edge_val[self.pair_rank[:n]]
        return births, self.pair_death[:n].copy()


def _columns_from_triples(ti, tj, tk, d, pos_rank):
    """CSR columns (positive-edge ranks, sorted) for the given triangles."""
    m = d.m
    e1 = pos_rank[ti * (2 * m - ti - 1) // 2 + (tj - ti - 1)]
    e2 = pos_rank[ti * (2 * m - ti - 1) // 2 + (tk - ti - 1)]
    e3 = pos_rank[tj * (2 * m - tj - 1) // 2 + (tk - tj - 1)]
    cols = np.stack([e1, e2, e3], axis=1)
    cols.sort(axis=1)
    keep = cols >= 0
    lens = keep.sum(axis=1)
    if lens.size and lens.min() == 0:
        raise NumericalError("triangle with three tree edges: union-find inconsistent")
    tri_ptr = np.zeros(len(lens) + 1, dtype=np.int64)
    np.cumsum(lens, out=tri_ptr[1:])
    tri_data = cols[keep].astype(np.int64)
    return tri_data, tri_ptr


def _materialized_triangles(d):
    """All triangles sorted by (value, lexicographic vertex triple)."""
    m = d.m
    parts = []
    for i in range(m - 2):
        j, k = np.triu_indices(m - i - 1, k=1)
        j = j + i + 1
        k = k + i + 1
        parts.append((np.full(j.shape, i, dtype=np.int64), j.astype(np.int64), k.astype(np.int64)))
    ti = np.concatenate([p[0] for p in parts])
    tj = np.concatenate([p[1] for p in parts])
    tk = np.concatenate([p[2] for p in parts])
    w = d.entries
    val = np.maximum(
        np.maximum(
            w[ti * (2 * m - ti - 1) // 2 + (tj - ti - 1)],
            w[ti * (2 * m - ti - 1) // 2 + (tk - ti - 1)],
        ),
        w[tj * (2 * m - tj - 1) // 2 + (tk - tj - 1)],
    )
    order = np.lexsort((tk, tj, ti, val))
    return ti[order], tj[order], tk[order], val[order]


def _streamed_value_groups(d, ei, ej, ew, chunk_triangles=1 << 18):
    """Yield (ti, tj, tk, val) chunks in filtration order without materializing.

    Edges are walked in filtration order grouped by equal value; the triangles
    of a group are those whose maximal edge value equals the group value,
    found by scanning common neighbors in the square matrix.
    """
    wsq = d.square()
    n_edges = ew.shape[0]
    buf_i, buf_j, buf_k, buf_v = [], [], [], []
    buffered = 0
    g = 0
    while g < n_edges:
        h = g
        while h + 1 < n_edges and ew[h + 1] == ew[g]:
            h += 1
        w = ew[g]
        tri = []
        for t in range(g, h + 1):
            i, j = int(ei[t]), int(ej[t])
            mask = (wsq[i] <= w) & (wsq[j] <= w)
            mask[i] = mask[j] = False
            ks = np.nonzero(mask)[0]
            if ks.size:
                a = np.minimum(np.minimum(i, j), ks)
                c = np.maximum(np.maximum(i, j), ks)
                b = i + j + ks - a - c
                tri.append((a, b, c))
        if tri:
            a = np.concatenate([t[0] for t in tri]).astype(np.int64)
            b = np.concatenate([t[1] for t in tri]).astype(np.int64)
            c = np.concatenate([t[2] for t in tri]).astype(np.int64)
            if h > g:
                # ties across edges: the same triangle may be found twice
                code = (a * d.m + b) * d.m + c
                _, first = np.unique(code, return_index=True)
                a, b, c = a[first], b[first], c[first]
            else:
                order = np.lexsort((c, b, a))
                a, b, c = a[order], b[order], c[order]
            # keep only triangles whose max value is exactly w (group membership)
            buf_i.append(a)
            buf_j.append(b)
            buf_k.append(c)
            buf_v.append(np.full(a.shape, w))
            buffered += a.shape[0]
            if buffered >= chunk_triangles:
                yield (
                    np.concatenate(buf_i),
                    np.concatenate(buf_j),
                    np.concatenate(buf_k),
                    np.concatenate(buf_v),
                )
                buf_i, buf_j, buf_k, buf_v = [], [], [], []
                buffered = 0
        g = h + 1
    if buffered:
        yield (
            np.concatenate(buf_i),
            np.concatenate(buf_j),
            np.concatenate(buf_k),
            np.concatenate(buf_v),
        )


def h1_diagram(d, *, arena_budget=DEFAULT_ARENA_BUDGET, force_streamed=False):
    """Degree-1 VR persistence pairs over the two-element field.

    The filtration value of an edge is its length and of a triangle its
    longest edge; simplices of equal value are ordered lexicographically.
    All deaths are finite because the full complex is a cone.  Raises
    ResourceError when the reduction working set would exceed ``arena_budget``
    int64 entries.

    Inputs with pairwise-distinct edge values (the generic case, and always
    the ordinal mode) take a fused single-pass kernel; tied values fall back
    to explicit value-group enumeration.
    """
    if d.m < 3:
        raise DomainError("degree-1 persistence needs at least 3 points")
    ei, ej, ew, negative, _ = _edge_filtration(d)
    positive = ~negative
    n_pos = int(positive.sum())
    # rank of each positive edge among positive edges, addressed by condensed id
    pos_rank = np.full(ew.shape[0], -1, dtype=np.int64)
    condensed_ids = ei * (2 * d.m - ei - 1) // 2 + (ej - ei - 1)
    pos_rank[condensed_ids[positive]] = np.arange(n_pos, dtype=np.int64)
    edge_val = ew[positive].copy()

    n_triangles = math.comb(d.m, 3)
    distinct = bool(np.all(np.diff(ew) > 0))
    if distinct and not force_streamed:
        state = _reduce_distinct(d, ei, ej, ew, negative, pos_rank, edge_val, arena_budget)
    else:
        state = _ReductionState(n_pos, arena_budget)
        if n_triangles <= MATERIALIZE_LIMIT and not force_streamed:
            ti, tj, tk, val = _materialized_triangles(d)
            tri_data, tri_ptr = _columns_from_triples(ti, tj, tk, d, pos_rank)
            state.reduce(tri_data, tri_ptr, val, edge_val, n_triangles)
        else:
            for ti, tj, tk, val in _streamed_value_groups(d, ei, ej, ew):
                tri_data, tri_ptr = _columns_from_triples(ti, tj, tk, d, pos_rank)
                state.reduce(tri_data, tri_ptr, val, edge_val, n_triangles)
    if np.any(state.pivot_owner < 0):
        raise NumericalError("reduction left unpaired 1-cycles; engine invariant broken")
    births, deaths = state.pairs(edge_val)
    pairs = np.stack([births, deaths], axis=1)
    order = np.lexsort((pairs[:, 1], pairs[:, 0]))
    return PersistenceDiagram(1, pairs[order])


def _reduce_distinct(d, ei, ej, ew, negative, pos_rank, edge_val, arena_budget):
    """Run the fused kernel; grow the column arena and retry on overflow."""
    m = d.m
    n_pos = edge_val.shape[0]
    rank_sq = np.full((m, m), ew.shape[0], dtype=np.int64)
    ranks = np.arange(ew.shape[0], dtype=np.int64)
    rank_sq[ei, ej] = ranks
    rank_sq[ej, ei] = ranks
    iu, ju = np.triu_indices(m, k=1)
    pos_sq = np.full((m, m), -1, dtype=np.int64)
    pos_sq[iu, ju] = pos_rank
    pos_sq[ju, iu] = pos_rank
    edge_pos = pos_sq[ei, ej].copy()

    state = _ReductionState(n_pos, arena_budget)
    while True:
        status = _reduction.reduce_all_distinct(
            ei,
            ej,
            edge_pos,
            ew,
            rank_sq,
            pos_sq,
            edge_val,
            state.pivot_owner,
            state.arena_data,
            state.arena_start,
            state.arena_len,
            state.state,
            state.pair_rank,
            state.pair_death,
            state.work_a,
            state.work_b,
        )
        if status == _reduction.OK:
            return state
        new_cap = 2 * state.arena_data.shape[0]
        if new_cap > arena_budget:
            raise ResourceError(
                f"reduction working set exceeded the budget of {arena_budget} "
                f"entries while processing {math.comb(m, 3)} triangles"
            )
        # not resumable: reset and rerun with a larger arena
        state = _ReductionState(n_pos, arena_budget)
        state.arena_data = np.empty(new_cap, dtype=np.int64)


# ---------------------------------------------------------------------------
# brute-force oracle


def brute_force_diagram(d, dim):
    """Standard unoptimized column reduction on the explicit boundary matrix.

    Same filtration and tie-break rule as the optimized engine; restricted to
    m <= 12 so the full 2-skeleton stays tiny.  Degenerate inputs with zero
    distances produce zero-persistence degree-0 pairs, which are dropped like
    every other zero-persistence pair.
    """
    if d.m > 12:
        raise DomainError(f"brute force is limited to m <= 12, got m={d.m}")
    if dim not in (0, 1):
        raise DomainError(f"brute force supports dim 0 and 1, got {dim}")
    m = d.m
    simplices = [((i,), 0.0) for i in range(m)]
    for i in range(m):
        for j in range(i + 1, m):
            simplices.append(((i, j), d.distance(i, j)))
    for i in range(m):
        for j in range(i + 1, m):
            for k in range(j + 1, m):
                val = max(d.distance(i, j), d.distance(i, k), d.distance(j, k))
                simplices.append(((i, j, k), val))
    simplices.sort(key=lambda s: (s[1], len(s[0]), s[0]))
    index_of = {verts: n for n, (verts, _) in enumerate(simplices)}

    columns = []
    for verts, _ in simplices:
        if len(verts) == 1:
            columns.append(set())
        elif len(verts) == 2:
            columns.append({index_of[(verts[0],)], index_of[(verts[1],)]})
        else:
            i, j, k = verts
            columns.append({index_of[(i, j)], index_of[(i, k)], index_of[(j, k)]})

    low_to_col = {}
    pairs = []
    for col_idx, col in enumerate(columns):
        while col:
            low = max(col)
            if low not in low_to_col:
                low_to_col[low] = col_idx
                pairs.append((low, col_idx))
                break
            col ^= columns[low_to_col[low]]

    out = []
    for low, col_idx in pairs:
        verts, birth = simplices[low]
        _, death = simplices[col_idx]
        if len(verts) - 1 == dim and death > birth:
            out.append((birth, death))
    out.sort()
    return PersistenceDiagram(dim, np.array(out, dtype=float).reshape(-1, 2))


# ---------------------------------------------------------------------------
# serialization


def write_distance_matrix_csv(path, d):
    """Distance matrix CSV: ``# m=<count>`` comment, then ``i,j,distance`` rows."""
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(f"# m={d.m}\n")
        fh.write("i,j,distance\n")
        iu, ju = np.triu_indices(d.m, k=1)
        for i, j, w in zip(iu, ju, d.entries):
            fh.write(f"{i},{j},{float(w)!r}\n")


def read_distance_matrix_csv(path):
    m = None
    rows = []
    with open(path, "r", encoding="ascii") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line.lstrip("# ").partition("=")
                if key.strip() == "m":
                    m = int(value)
                continue
            if line.startswith("i,"):
                continue
            i_str, j_str, w_str = line.split(",")
            rows.append((int(i_str), int(j_str), float(w_str)))
    if m is None:
        raise DomainError(f"{path}: missing '# m=<count>' comment line")
    entries = np.zeros(m * (m - 1) // 2)
    seen = np.zeros(entries.shape[0], dtype=bool)
    for i, j, w in rows:
        if not 0 <= i < j < m:
            raise DomainError(f"{path}: bad index pair ({i}, {j}) for m={m}")
        idx = i * (2 * m - i - 1) // 2 + (j - i - 1)
        entries[idx] = w
        seen[idx] = True
    if not seen.all():
        raise DomainError(f"{path}: {int((~seen).sum())} missing pairs for m={m}")
    return DistanceMatrix(m, entries)


def write_diagram_csv(path, *diagrams):
    """Diagram CSV with header ``dim,birth,death``, one row per pair."""
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("dim,birth,death\n")
        for diag in diagrams:
            for birth, death in diag.pairs:
                fh.write(f"{diag.dim},{float(birth)!r},{float(death)!r}\n")


def read_diagram_csv(path, dim):
    pairs = []
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().strip()
        if header != "dim,birth,death":
            raise DomainError(f"{path}: expected header 'dim,birth,death'")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            d_str, b_str, dth_str = line.split(",")
            if int(d_str) == dim:
                pairs.append((float(b_str), float(dth_str)))
    return PersistenceDiagram(dim, np.array(pairs, dtype=float).reshape(-1, 2))
