"""Compiled kernels for the KD-tree backend.

The tree is stored as flat arrays indexed by node id: the point row at each
node, left/right child ids (-1 for none) and the splitting dimension.  Node 0
is always the root.  All comparisons that could tie are resolved by ascending
item id so builds and queries are fully deterministic.
"""

import numpy as np
from numba import njit

NO_CHILD = -1


@njit(cache=True)
def _sort_segment(seg, coords, ids):
    """Order a segment of point rows by (coordinate, item id), ascending.

    Returns the sorted row array alongside the sorted coordinate array.
    argsort leaves tied coordinates in unspecified order, so runs of equal
    coordinates are re-sorted by id.
    """
    m = seg.shape[0]
    order = np.argsort(coords)
    i = 0
    while i < m:
        j = i + 1
        while j < m and coords[order[j]] == coords[order[i]]:
            j += 1
        if j - i > 1:
            for a in range(i + 1, j):
                key = order[a]
                key_id = ids[seg[key]]
                b = a - 1
                while b >= i and ids[seg[order[b]]] > key_id:
                    order[b + 1] = order[b]
                    b -= 1
                order[b + 1] = key
        i = j
    sorted_rows = np.empty(m, np.int64)
    sorted_coords = np.empty(m, np.float64)
    for i in range(m):
        sorted_rows[i] = seg[order[i]]
        sorted_coords[i] = coords[order[i]]
    return sorted_rows, sorted_coords


@njit(cache=True)
def build(points, ids):
    """Build the tree over all point rows by recursive median splitting.

    At each node the splitting dimension is depth mod K; the node takes the
    lower median under (coordinate, id) order, strictly smaller coordinates
    go left and everything else (including duplicates of the median key)
    goes right.
    """
    n, d = points.shape
    perm = np.arange(n)
    node_point = np.empty(n, np.int64)
    left = np.full(n, NO_CHILD, np.int64)
    right = np.full(n, NO_CHILD, np.int64)
    split_dim = np.empty(n, np.int64)

    stack = np.empty((n + 2, 5), np.int64)  # lo, hi, depth, parent, is_left
    stack[0, 0] = 0
    stack[0, 1] = n
    stack[0, 2] = 0
    stack[0, 3] = -1
    stack[0, 4] = 0
    sp = 1
    next_node = 0

    while sp > 0:
        sp -= 1
        lo = stack[sp, 0]
        hi = stack[sp, 1]
        depth = stack[sp, 2]
        parent = stack[sp, 3]
        is_left = stack[sp, 4]

        m = hi - lo
        dim = depth % d
        seg = perm[lo:hi]
        coords = np.empty(m, np.float64)
        for i in range(m):
            coords[i] = points[seg[i], dim]
        sorted_rows, sorted_coords = _sort_segment(seg, coords, ids)

        m0 = (m - 1) // 2
        key = sorted_coords[m0]
        s = np.searchsorted(sorted_coords, key)
        node_row = sorted_rows[m0]

        nid = next_node
        next_node += 1
        node_point[nid] = node_row
        split_dim[nid] = dim
        if parent >= 0:
            if is_left == 1:
                left[parent] = nid
            else:
                right[parent] = nid

        t = lo
        for i in range(s):
            perm[t] = sorted_rows[i]
            t += 1
        for i in range(s, m):
            if i != m0:
                perm[t] = sorted_rows[i]
                t += 1

        if s > 0:
            stack[sp, 0] = lo
            stack[sp, 1] = lo + s
            stack[sp, 2] = depth + 1
            stack[sp, 3] = nid
            stack[sp, 4] = 1
            sp += 1
        if m - s - 1 > 0:
            stack[sp, 0] = lo + s
            stack[sp, 1] = hi - 1
            stack[sp, 2] = depth + 1
            stack[sp, 3] = nid
            stack[sp, 4] = 0
            sp += 1

    return node_point, left, right, split_dim


@njit(cache=True)
def _worse(d_a, id_a, d_b, id_b):
    """Lexicographic (distance, id) comparison: is a worse than b?"""
    if d_a != d_b:
        return d_a > d_b
    return id_a > id_b


@njit(cache=True)
def _heap_sift_down(heap_d, heap_i, heap_p, cnt, start):
    root = start
    while True:
        child = 2 * root + 1
        if child >= cnt:
            break
        if child + 1 < cnt and _worse(heap_d[child + 1], heap_i[child + 1],
                                      heap_d[child], heap_i[child]):
            child += 1
        if _worse(heap_d[child], heap_i[child], heap_d[root], heap_i[root]):
            heap_d[root], heap_d[child] = heap_d[child], heap_d[root]
            heap_i[root], heap_i[child] = heap_i[child], heap_i[root]
            heap_p[root], heap_p[child] = heap_p[child], heap_p[root]
            root = child
        else:
            break


@njit(cache=True)
def _heap_push(heap_d, heap_i, heap_p, cnt, d, i, p):
    pos = cnt
    heap_d[pos] = d
    heap_i[pos] = i
    heap_p[pos] = p
    while pos > 0:
        par = (pos - 1) // 2
        if _worse(heap_d[pos], heap_i[pos], heap_d[par], heap_i[par]):
            heap_d[pos], heap_d[par] = heap_d[par], heap_d[pos]
            heap_i[pos], heap_i[par] = heap_i[par], heap_i[pos]
            heap_p[pos], heap_p[par] = heap_p[par], heap_p[pos]
            pos = par
        else:
            break
    return cnt + 1


@njit(cache=True)
def query(points, ids, node_point, left, right, split_dim, q, k, max_visits):
    """Exact branch-and-bound k-NN; returns (rows, distances, visits).

    Subtrees are pruned when the squared distance to the splitting plane
    exceeds the current k-th best (distance, id) bound.  With max_visits > 0
    the search stops early after that many node visits (approximate mode).
    """
    heap_d = np.full(k, np.inf)
    heap_i = np.full(k, np.int64(1) << 62, np.int64)
    heap_p = np.full(k, -1, np.int64)
    cnt = 0

    cap = 4096
    st_node = np.empty(cap, np.int64)
    st_pd = np.empty(cap, np.float64)
    sp = 0
    st_node[0] = 0
    st_pd[0] = 0.0
    sp = 1
    visits = 0
    dim_count = points.shape[1]

    while sp > 0:
        sp -= 1
        node = st_node[sp]
        pd = st_pd[sp]
        if cnt == k and _worse(pd, np.int64(-1), heap_d[0], heap_i[0]):
            continue
        while node != NO_CHILD:
            if max_visits > 0 and visits >= max_visits:
                return _finish(heap_d, heap_i, heap_p, cnt), visits
            visits += 1
            row = node_point[node]
            d2 = 0.0
            for j in range(dim_count):
                t = points[row, j] - q[j]
                d2 += t * t
            pid = ids[row]
            if cnt < k:
                cnt = _heap_push(heap_d, heap_i, heap_p, cnt, d2, pid, row)
            elif _worse(heap_d[0], heap_i[0], d2, pid):
                heap_d[0] = d2
                heap_i[0] = pid
                heap_p[0] = row
                _heap_sift_down(heap_d, heap_i, heap_p, cnt, 0)

            dim = split_dim[node]
            diff = q[dim] - points[row, dim]
            if diff < 0.0:
                near = left[node]
                far = right[node]
            else:
                near = right[node]
                far = left[node]
            fpd = diff * diff
            if far != NO_CHILD and (cnt < k or not _worse(fpd, np.int64(-1),
                                                          heap_d[0], heap_i[0])):
                if sp >= cap:
                    new_cap = cap * 2
                    new_node = np.empty(new_cap, np.int64)
                    new_pd = np.empty(new_cap, np.float64)
                    for i in range(cap):
                        new_node[i] = st_node[i]
                        new_pd[i] = st_pd[i]
                    st_node = new_node
                    st_pd = new_pd
                    cap = new_cap
                st_node[sp] = far
                st_pd[sp] = fpd
                sp += 1
            node = near

    return _finish(heap_d, heap_i, heap_p, cnt), visits


@njit(cache=True)
def _finish(heap_d, heap_i, heap_p, cnt):
    """Drain the max-heap into (rows, distances) sorted ascending."""
    rows = np.empty(cnt, np.int64)
    dists = np.empty(cnt, np.float64)
    for out in range(cnt - 1, -1, -1):
        rows[out] = heap_p[0]
        dists[out] = np.sqrt(heap_d[0])
        cnt -= 1
        heap_d[0] = heap_d[cnt]
        heap_i[0] = heap_i[cnt]
        heap_p[0] = heap_p[cnt]
        _heap_sift_down(heap_d, heap_i, heap_p, cnt, 0)
    return rows, dists
