"""JIT-compiled kernels for the Vietoris-Rips persistence engine.

The degree-1 reduction and the union-find pass are the only hot loops in the
package; everything here works on flat integer/float arrays so numba can
compile it once and reuse the machine code across processes (cache=True).
"""

import numpy as np
from numba import njit

# Status codes returned by the reduction kernel.
OK = 0
ARENA_FULL = 1


@njit(cache=True)
def kruskal_accept(ei, ej, m):
    """Union-find over edges given in filtration order.

    Returns a boolean mask of the edges that merge two components (the
    negative edges of the degree-0 reduction, i.e. the MST for this order).
    """
    parent = np.arange(m, dtype=np.int64)
    accepted = np.zeros(ei.shape[0], dtype=np.bool_)
    merged = 0
    for t in range(ei.shape[0]):
        u = ei[t]
        while parent[u] != u:
            parent[u] = parent[parent[u]]
            u = parent[u]
        v = ej[t]
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        if u != v:
            parent[u] = v
            accepted[t] = True
            merged += 1
            if merged == m - 1:
                break
    return accepted


@njit(cache=True)
def reduce_chunk(
    tri_data,
    tri_ptr,
    tri_val,
    start_at,
    edge_val,
    pivot_owner,
    arena_data,
    arena_start,
    arena_len,
    state,
    pair_rank,
    pair_death,
    work_a,
    work_b,
):
    """Column reduction over GF(2) for one chunk of triangle columns.

    ``tri_data``/``tri_ptr`` hold the chunk's columns (row indices sorted
    ascending); rows are positive edges indexed by filtration rank.  Claimed
    pivot columns are appended to the arena; ``state`` carries
    (n_stored, arena_used, n_pairs) across calls.  Returns (status, t_next):
    ARENA_FULL means the caller must grow ``arena_data`` and resume at t_next.
    """
    n_stored = state[0]
    arena_used = state[1]
    n_pairs = state[2]
    for t in range(start_at, tri_ptr.shape[0] - 1):
        lo = tri_ptr[t]
        n = tri_ptr[t + 1] - lo
        for x in range(n):
            work_a[x] = tri_data[lo + x]
        cur = work_a
        other = work_b
        cur_n = n
        while cur_n > 0:
            low = cur[cur_n - 1]
            owner = pivot_owner[low]
            if owner < 0:
                if arena_used + cur_n > arena_data.shape[0]:
                    state[0] = n_stored
                    state[1] = arena_used
                    state[2] = n_pairs
                    return ARENA_FULL, t
                for x in range(cur_n):
                    arena_data[arena_used + x] = cur[x]
                arena_start[n_stored] = arena_used
                arena_len[n_stored] = cur_n
                arena_used += cur_n
                pivot_owner[low] = n_stored
                n_stored += 1
                if tri_val[t] > edge_val[low]:
                    pair_rank[n_pairs] = low
                    pair_death[n_pairs] = tri_val[t]
                    n_pairs += 1
                break
            # xor-merge cur with the owner's stored column
            os = arena_start[owner]
            on = arena_len[owner]
            ia = 0
            ib = 0
            k = 0
            while ia < cur_n and ib < on:
                va = cur[ia]
                vb = arena_data[os + ib]
                if va < vb:
                    other[k] = va
                    k += 1
                    ia += 1
                elif vb < va:
                    other[k] = vb
                    k += 1
                    ib += 1
                else:
                    ia += 1
                    ib += 1
            while ia < cur_n:
                other[k] = cur[ia]
                k += 1
                ia += 1
            while ib < on:
                other[k] = arena_data[os + ib]
                k += 1
                ib += 1
            tmp = cur
            cur = other
            other = tmp
            cur_n = k
    state[0] = n_stored
    state[1] = arena_used
    state[2] = n_pairs
    return OK, tri_ptr.shape[0] - 1


@njit(cache=True)
def reduce_all_distinct(
    edge_i,
    edge_j,
    edge_pos,
    edge_wval,
    rank_sq,
    pos_sq,
    pos_val,
    pivot_owner,
    arena_data,
    arena_start,
    arena_len,
    state,
    pair_rank,
    pair_death,
    work_a,
    work_b,
):
    """Fused enumeration + reduction for inputs with pairwise-distinct edge values.

    Walks edges in filtration order; the triangles decided by edge t (both
    other edges of smaller rank) are exactly its block in the simplexwise
    order, and ascending k enumerates them lexicographically.  Equivalent to
    materializing and sorting the 2-skeleton, but in one pass.  Returns OK or
    ARENA_FULL; on ARENA_FULL the caller must grow the arena and rerun from
    scratch (state is not resumable).
    """
    m = rank_sq.shape[0]
    n_edges = edge_i.shape[0]
    n_pos = pos_val.shape[0]
    n_stored = state[0]
    arena_used = state[1]
    n_pairs = state[2]
    # all positive edges of rank < frontier are claimed: any column whose
    # entries sit entirely below the frontier must reduce to zero
    frontier = 0
    while frontier < n_pos and pivot_owner[frontier] >= 0:
        frontier += 1
    for t in range(n_edges):
        i = edge_i[t]
        j = edge_j[t]
        p_ij = edge_pos[t]
        w_t = edge_wval[t]
        if 0 <= p_ij < frontier:
            continue  # every column of this block tops out below the frontier
        for k in range(m):
            if k == i or k == j:
                continue
            if rank_sq[i, k] >= t or rank_sq[j, k] >= t:
                continue
            # column of triangle {i, j, k}: positive-edge ranks, sorted ascending
            a = pos_sq[i, k]
            b = pos_sq[j, k]
            c = p_ij
            if a > b:
                a, b = b, a
            if b > c:
                b, c = c, b
            if a > b:
                a, b = b, a
            if c < frontier:
                continue  # includes the all-negative impossibility c == -1
            n = 0
            if a >= 0:
                work_a[n] = a
                n += 1
            if b >= 0:
                work_a[n] = b
                n += 1
            work_a[n] = c
            n += 1
            cur = work_a
            other = work_b
            cur_n = n
            while cur_n > 0:
                low = cur[cur_n - 1]
                if low < frontier:
                    break  # provably reduces to zero from here on
                owner = pivot_owner[low]
                if owner < 0:
                    if arena_used + cur_n > arena_data.shape[0]:
                        state[0] = n_stored
                        state[1] = arena_used
                        state[2] = n_pairs
                        return ARENA_FULL
                    for x in range(cur_n):
                        arena_data[arena_used + x] = cur[x]
                    arena_start[n_stored] = arena_used
                    arena_len[n_stored] = cur_n
                    arena_used += cur_n
                    pivot_owner[low] = n_stored
                    n_stored += 1
                    if w_t > pos_val[low]:
                        pair_rank[n_pairs] = low
                        pair_death[n_pairs] = w_t
                        n_pairs += 1
                    if low == frontier:
                        frontier += 1
                        while frontier < n_pos and pivot_owner[frontier] >= 0:
                            frontier += 1
                    break
                os = arena_start[owner]
                on = arena_len[owner]
                ia = 0
                ib = 0
                q = 0
                while ia < cur_n and ib < on:
                    va = cur[ia]
                    vb = arena_data[os + ib]
                    if va < vb:
                        other[q] = va
                        q += 1
                        ia += 1
                    elif vb < va:
                        other[q] = vb
                        q += 1
                        ib += 1
                    else:
                        ia += 1
                        ib += 1
                while ia < cur_n:
                    other[q] = cur[ia]
                    q += 1
                    ia += 1
                while ib < on:
                    other[q] = arena_data[os + ib]
                    q += 1
                    ib += 1
                tmp = cur
                cur = other
                other = tmp
                cur_n = q
    state[0] = n_stored
    state[1] = arena_used
    state[2] = n_pairs
    return OK
