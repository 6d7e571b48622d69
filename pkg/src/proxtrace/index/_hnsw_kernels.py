"""Compiled kernels for the HNSW backend.

Graph layout: one flat adjacency array for all nodes and layers.  Node i
owns a block of ``M0 + level_i * M`` neighbour slots starting at
``node_off[i]``: the first M0 slots are layer 0, then M slots per layer up
to the node's level.  Per-layer fill counts live in a flat ``counts`` array
at ``cnt_off[i] + layer``.

``state`` is a 4-element int64 array: entry point, top level, number of
inserted nodes, and the visited-epoch counter.  ``visited`` holds per-node
epoch stamps so the scratch array never needs clearing between searches.
"""

import numpy as np
from numba import njit

ENTRY = 0
TOP_LEVEL = 1
NUM_NODES = 2
EPOCH = 3


@njit(cache=True, inline="always")
def _d2(vectors, i, q):
    s = 0.0
    for j in range(q.shape[0]):
        t = vectors[i, j] - q[j]
        s += t * t
    return s


@njit(cache=True, inline="always")
def _slot_base(node_off, i, layer, M0, M):
    b = node_off[i]
    if layer > 0:
        b += M0 + (layer - 1) * M
    return b


@njit(cache=True)
def _better(d_a, id_a, d_b, id_b):
    """Lexicographic (distance, node id): is a strictly better than b?"""
    if d_a != d_b:
        return d_a < d_b
    return id_a < id_b


@njit(cache=True)
def _greedy_descent(vectors, q, ep, layer, neigh, counts, node_off, cnt_off,
                    M0, M):
    """Single-entry greedy walk on one layer (search width 1)."""
    cur = ep
    cur_d = _d2(vectors, cur, q)
    improved = True
    while improved:
        improved = False
        base = _slot_base(node_off, cur, layer, M0, M)
        c = counts[cnt_off[cur] + layer]
        for t in range(c):
            nb = neigh[base + t]
            d = _d2(vectors, nb, q)
            if _better(d, nb, cur_d, cur):
                cur = nb
                cur_d = d
                improved = True
    return cur, cur_d


@njit(cache=True)
def _search_layer(vectors, q, ep, ep_d, layer, ef, neigh, counts, node_off,
                  cnt_off, M0, M, visited, epoch):
    """Best-first expansion with a candidate pool of ef.

    Returns max-heap arrays (res_d, res_id) of the ef best nodes found plus
    the fill count.  The heap order is (distance, node id).
    """
    res_d = np.empty(ef, np.float64)
    res_id = np.empty(ef, np.int64)
    res_cnt = 0

    cap = 256
    cand_d = np.empty(cap, np.float64)
    cand_id = np.empty(cap, np.int64)
    cand_cnt = 0

    visited[ep] = epoch
    # push ep on both heaps
    cand_d[0] = ep_d
    cand_id[0] = ep
    cand_cnt = 1
    res_d[0] = ep_d
    res_id[0] = ep
    res_cnt = 1

    while cand_cnt > 0:
        # pop the best candidate (min-heap)
        c_d = cand_d[0]
        c_id = cand_id[0]
        cand_cnt -= 1
        cand_d[0] = cand_d[cand_cnt]
        cand_id[0] = cand_id[cand_cnt]
        pos = 0
        while True:
            child = 2 * pos + 1
            if child >= cand_cnt:
                break
            if child + 1 < cand_cnt and _better(cand_d[child + 1],
                                                cand_id[child + 1],
                                                cand_d[child], cand_id[child]):
                child += 1
            if _better(cand_d[child], cand_id[child], cand_d[pos], cand_id[pos]):
                cand_d[pos], cand_d[child] = cand_d[child], cand_d[pos]
                cand_id[pos], cand_id[child] = cand_id[child], cand_id[pos]
                pos = child
            else:
                break

        if res_cnt == ef and _better(res_d[0], res_id[0], c_d, c_id):
            break  # best remaining candidate is worse than the worst result

        base = _slot_base(node_off, c_id, layer, M0, M)
        c = counts[cnt_off[c_id] + layer]
        for t in range(c):
            nb = neigh[base + t]
            if visited[nb] == epoch:
                continue
            visited[nb] = epoch
            d = _d2(vectors, nb, q)
            if res_cnt == ef and not _better(d, nb, res_d[0], res_id[0]):
                continue
            # push on candidate min-heap (growing it if needed)
            if cand_cnt >= cap:
                new_cap = cap * 2
                nd = np.empty(new_cap, np.float64)
                ni = np.empty(new_cap, np.int64)
                for x in range(cap):
                    nd[x] = cand_d[x]
                    ni[x] = cand_id[x]
                cand_d = nd
                cand_id = ni
                cap = new_cap
            pos = cand_cnt
            cand_d[pos] = d
            cand_id[pos] = nb
            cand_cnt += 1
            while pos > 0:
                par = (pos - 1) // 2
                if _better(cand_d[pos], cand_id[pos], cand_d[par], cand_id[par]):
                    cand_d[pos], cand_d[par] = cand_d[par], cand_d[pos]
                    cand_id[pos], cand_id[par] = cand_id[par], cand_id[pos]
                    pos = par
                else:
                    break
            # push on result max-heap, evicting the worst when full
            if res_cnt < ef:
                pos = res_cnt
                res_d[pos] = d
                res_id[pos] = nb
                res_cnt += 1
                while pos > 0:
                    par = (pos - 1) // 2
                    if _better(res_d[par], res_id[par], res_d[pos], res_id[pos]):
                        res_d[pos], res_d[par] = res_d[par], res_d[pos]
                        res_id[pos], res_id[par] = res_id[par], res_id[pos]
                        pos = par
                    else:
                        break
            else:
                res_d[0] = d
                res_id[0] = nb
                pos = 0
                while True:
                    child = 2 * pos + 1
                    if child >= res_cnt:
                        break
                    if child + 1 < res_cnt and _better(res_d[child],
                                                       res_id[child],
                                                       res_d[child + 1],
                                                       res_id[child + 1]):
                        child += 1
                    if _better(res_d[pos], res_id[pos], res_d[child], res_id[child]):
                        res_d[pos], res_d[child] = res_d[child], res_d[pos]
                        res_id[pos], res_id[child] = res_id[child], res_id[pos]
                        pos = child
                    else:
                        break
    return res_d, res_id, res_cnt


@njit(cache=True)
def _sort_results(res_d, res_id, res_cnt):
    """Drain the max-heap into ascending (distance, id) order."""
    out_d = np.empty(res_cnt, np.float64)
    out_id = np.empty(res_cnt, np.int64)
    cnt = res_cnt
    for out in range(res_cnt - 1, -1, -1):
        out_d[out] = res_d[0]
        out_id[out] = res_id[0]
        cnt -= 1
        res_d[0] = res_d[cnt]
        res_id[0] = res_id[cnt]
        pos = 0
        while True:
            child = 2 * pos + 1
            if child >= cnt:
                break
            if child + 1 < cnt and _better(res_d[child], res_id[child],
                                           res_d[child + 1], res_id[child + 1]):
                child += 1
            if _better(res_d[pos], res_id[pos], res_d[child], res_id[child]):
                res_d[pos], res_d[child] = res_d[child], res_d[pos]
                res_id[pos], res_id[child] = res_id[child], res_id[pos]
                pos = child
            else:
                break
    return out_d, out_id


@njit(cache=True)
def _link(vectors, neigh, counts, node_off, cnt_off, M0, M, src, dst, layer):
    """Append dst to src's neighbour list; when the list is full, keep the
    cap closest under (distance, id) by dropping the single worst link."""
    cap = M0 if layer == 0 else M
    base = _slot_base(node_off, src, layer, M0, M)
    c = counts[cnt_off[src] + layer]
    if c < cap:
        neigh[base + c] = dst
        counts[cnt_off[src] + layer] = c + 1
        return
    worst = -1
    worst_d = -1.0
    worst_id = np.int64(-1)
    d_new = _d2(vectors, dst, vectors[src])
    for t in range(c):
        nb = neigh[base + t]
        d = _d2(vectors, nb, vectors[src])
        if worst == -1 or _better(worst_d, worst_id, d, nb):
            worst = t
            worst_d = d
            worst_id = nb
    if _better(d_new, dst, worst_d, worst_id):
        neigh[base + worst] = dst


@njit(cache=True)
def insert_range(vectors, levels, neigh, counts, node_off, cnt_off,
                 M, M0, ef_construction, state, visited, start, end):
    """Insert nodes start..end-1 (in order) into the graph.

    Each node greedily descends from the top layer to its own level with
    search width 1, then connects on every layer from its level down to 0
    using an ef_construction-wide search, taking the closest candidates up
    to the per-layer degree cap.
    """
    for i in range(start, end):
        lvl = levels[i]
        for l in range(lvl + 1):
            counts[cnt_off[i] + l] = 0
        if state[NUM_NODES] == 0:
            state[ENTRY] = i
            state[TOP_LEVEL] = lvl
            state[NUM_NODES] = 1
            continue

        q = vectors[i]
        ep = state[ENTRY]
        ep_d = _d2(vectors, ep, q)
        top = state[TOP_LEVEL]
        for layer in range(top, lvl, -1):
            ep, ep_d = _greedy_descent(vectors, q, ep, layer, neigh, counts,
                                       node_off, cnt_off, M0, M)
        start_layer = lvl if lvl < top else top
        for layer in range(start_layer, -1, -1):
            state[EPOCH] += 1
            res_d, res_id, res_cnt = _search_layer(
                vectors, q, ep, ep_d, layer, ef_construction, neigh, counts,
                node_off, cnt_off, M0, M, visited, state[EPOCH])
            srt_d, srt_id = _sort_results(res_d, res_id, res_cnt)
            cap = M0 if layer == 0 else M
            m_sel = cap if res_cnt > cap else res_cnt
            base_i = _slot_base(node_off, i, layer, M0, M)
            for t in range(m_sel):
                neigh[base_i + t] = srt_id[t]
            counts[cnt_off[i] + layer] = m_sel
            for t in range(m_sel):
                _link(vectors, neigh, counts, node_off, cnt_off, M0, M,
                      srt_id[t], i, layer)
            ep = srt_id[0]
            ep_d = srt_d[0]

        if lvl > state[TOP_LEVEL]:
            state[TOP_LEVEL] = lvl
            state[ENTRY] = i
        state[NUM_NODES] += 1


@njit(cache=True)
def search(vectors, q, k, ef, neigh, counts, node_off, cnt_off, M0, M,
           state, visited):
    """Greedy descent to layer 0 followed by a best-first expansion of
    width ef; returns the k best found, ascending by (distance, id)."""
    ep = state[ENTRY]
    ep_d = _d2(vectors, ep, q)
    for layer in range(state[TOP_LEVEL], 0, -1):
        ep, ep_d = _greedy_descent(vectors, q, ep, layer, neigh, counts,
                                   node_off, cnt_off, M0, M)
    state[EPOCH] += 1
    res_d, res_id, res_cnt = _search_layer(
        vectors, q, ep, ep_d, 0, ef, neigh, counts, node_off, cnt_off,
        M0, M, visited, state[EPOCH])
    srt_d, srt_id = _sort_results(res_d, res_id, res_cnt)
    n_out = k if res_cnt > k else res_cnt
    out_id = np.empty(n_out, np.int64)
    out_d = np.empty(n_out, np.float64)
    for t in range(n_out):
        out_id[t] = srt_id[t]
        out_d[t] = np.sqrt(srt_d[t])
    return out_id, out_d
