"""Approximate k-NN with a hierarchical navigable small world graph.

Nodes are assigned a level l = floor(-ln(U(0,1)) * m_l) from a seeded
generator; every node lives on all layers up to its level, layer 0 holds
everything.  Insertion descends greedily (width 1) from the top layer to the
node's level, then connects on each layer downward using a wide
best-first search, linking to the closest candidates up to the degree cap
(max_neighbors per layer, twice that on layer 0).  Search follows the same
descent and returns the k best of a width-ef_search expansion at layer 0.

Fixed seed and insertion order give bit-identical graphs and result
sequences; there is no exactness guarantee.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import ValidationError
from . import _hnsw_kernels as K
from .base import IndexedItem, ItemStore, NearestNeighborIndex, check_query


class HnswIndex(NearestNeighborIndex):
    backend = "hnsw"

    def __init__(self, store: ItemStore, max_neighbors: int = 16,
                 ef_construction: int = 200, m_l: float | None = None,
                 seed: int = 0, _state=None):
        if max_neighbors < 1 or ef_construction < 1:
            raise ValidationError("max_neighbors and ef_construction must be >= 1")
        super().__init__(store)
        self.max_neighbors = int(max_neighbors)
        self.ef_construction = int(ef_construction)
        self.m_l = float(m_l) if m_l is not None else 1.0 / math.log(max_neighbors)
        if self.m_l <= 0:
            raise ValidationError("m_l must be positive")
        self.rng_seed = int(seed)
        self._rng = np.random.default_rng(np.uint64(seed))

        n = len(store)
        if _state is not None:
            (self.levels, self.neigh, self.counts, self.node_off,
             self.cnt_off, self.state) = _state
            self.visited = np.zeros(n, np.int64)
            self.state[K.EPOCH] = 0
            return

        self.levels = self._draw_levels(n)
        self.node_off, self.cnt_off, self.neigh, self.counts = \
            self._allocate(self.levels)
        self.state = np.array([-1, -1, 0, 0], np.int64)
        self.visited = np.zeros(n, np.int64)
        if n:
            K.insert_range(store.vectors, self.levels, self.neigh, self.counts,
                           self.node_off, self.cnt_off,
                           self.max_neighbors, 2 * self.max_neighbors,
                           self.ef_construction, self.state, self.visited,
                           0, n)

    # -- construction ------------------------------------------------------

    def _draw_levels(self, n: int) -> np.ndarray:
        u = self._rng.random(n)
        # 1-u lies in (0, 1], so the log is always finite
        return np.floor(-np.log1p(-u) * self.m_l).astype(np.int64)

    def _allocate(self, levels):
        M, M0 = self.max_neighbors, 2 * self.max_neighbors
        block = M0 + levels * M
        node_off = np.zeros(levels.shape[0], np.int64)
        np.cumsum(block[:-1], out=node_off[1:])
        cnt_off = np.zeros(levels.shape[0], np.int64)
        np.cumsum(levels[:-1] + 1, out=cnt_off[1:])
        neigh = np.zeros(int(block.sum()), np.int32)
        counts = np.zeros(int((levels + 1).sum()), np.int32)
        return node_off, cnt_off, neigh, counts

    def insert(self, item: IndexedItem) -> None:
        """Insert one more item; duplicate item ids are rejected."""
        vec = np.asarray(item.vector, dtype=np.float64)
        if len(self.store) and vec.shape != (self.store.dim,):
            raise ValidationError(
                f"item dimension {vec.shape} does not match index "
                f"dimension {self.store.dim}")
        if np.any(self.store.item_ids == item.item_id):
            raise ValidationError(f"duplicate item_id {item.item_id}")
        if len(self.store) == 0:
            store = ItemStore(
                np.array([item.item_id], np.int64),
                np.array([item.user_id], np.int64),
                np.array([item.timestep], np.int64),
                vec[None, :], self.store.representation)
        else:
            store = ItemStore(
                np.append(self.store.item_ids, np.int64(item.item_id)),
                np.append(self.store.user_ids, np.int64(item.user_id)),
                np.append(self.store.timesteps, np.int64(item.timestep)),
                np.vstack([self.store.vectors, vec[None, :]]),
                self.store.representation,
            )
        self.store = store
        lvl = int(self._draw_levels(1)[0])
        self.levels = np.append(self.levels, np.int64(lvl))
        self.node_off, self.cnt_off, self.neigh, self.counts = \
            self._extend(lvl)
        self.visited = np.append(self.visited, np.int64(0))
        i = len(store) - 1
        K.insert_range(store.vectors, self.levels, self.neigh, self.counts,
                       self.node_off, self.cnt_off,
                       self.max_neighbors, 2 * self.max_neighbors,
                       self.ef_construction, self.state, self.visited, i, i + 1)

    def _extend(self, lvl: int):
        M, M0 = self.max_neighbors, 2 * self.max_neighbors
        old_flat = self.neigh.shape[0]
        old_cnt = self.counts.shape[0]
        node_off = np.append(self.node_off, np.int64(old_flat))
        cnt_off = np.append(self.cnt_off, np.int64(old_cnt))
        neigh = np.concatenate([self.neigh, np.zeros(M0 + lvl * M, np.int32)])
        counts = np.concatenate([self.counts, np.zeros(lvl + 1, np.int32)])
        return node_off, cnt_off, neigh, counts

    # -- search ------------------------------------------------------------

    def query_rows(self, query, k: int, ef_search: int | None = None):
        if k < 1:
            raise ValidationError("k must be >= 1")
        if ef_search is None:
            ef_search = max(k, 100)
        if ef_search < k:
            raise ValidationError("ef_search must be >= k")
        q = check_query(self.store, query)
        if len(self.store) == 0:
            return np.empty(0, np.int64), np.empty(0, np.float64)
        rows, dists = K.search(self.store.vectors, q, k, int(ef_search),
                               self.neigh, self.counts, self.node_off,
                               self.cnt_off, 2 * self.max_neighbors,
                               self.max_neighbors, self.state, self.visited)
        # internal ties are broken by node id; re-sort so the public
        # contract (distance, item_id) holds regardless of insertion order
        order = np.lexsort((self.store.item_ids[rows], dists))
        return rows[order], dists[order]

    # -- introspection -----------------------------------------------------

    @property
    def entry_point(self) -> int:
        return int(self.state[K.ENTRY])

    @property
    def top_level(self) -> int:
        return int(self.state[K.TOP_LEVEL])

    def neighbors(self, node: int, layer: int) -> np.ndarray:
        """Adjacency list of a node at one layer (node row numbers)."""
        if layer > self.levels[node]:
            return np.empty(0, np.int32)
        M, M0 = self.max_neighbors, 2 * self.max_neighbors
        base = int(self.node_off[node]) + (0 if layer == 0 else M0 + (layer - 1) * M)
        c = int(self.counts[int(self.cnt_off[node]) + layer])
        return self.neigh[base:base + c].copy()

    def layer0_connected(self) -> bool:
        """Breadth-first reachability of every node from the entry point."""
        n = len(self.store)
        if n <= 1:
            return True
        seen = np.zeros(n, bool)
        frontier = [self.entry_point]
        seen[self.entry_point] = True
        reached = 1
        while frontier:
            nxt = []
            for node in frontier:
                for nb in self.neighbors(node, 0):
                    if not seen[nb]:
                        seen[nb] = True
                        reached += 1
                        nxt.append(int(nb))
            frontier = nxt
        return reached == n


def hnsw_insert(graph: HnswIndex, item: IndexedItem) -> HnswIndex:
    graph.insert(item)
    return graph


def hnsw_search(graph: HnswIndex, query, k: int, ef_search: int | None = None):
    if len(graph.store) == 0:
        raise ValidationError("cannot search an empty graph")
    return graph.query(query, k, ef_search=ef_search)
