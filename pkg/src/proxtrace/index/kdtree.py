"""Exact KD-tree k-NN backend.

Classic binary space partitioning: each node splits on one coordinate (the
discriminator, cycling with depth) at the median of the remaining points.
Search is branch-and-bound with hypersphere/hyperplane pruning and is exact:
it returns the same result sequence as the exhaustive scan, including the
ascending item-id tie-break.  An optional ``max_visits`` knob bounds the
number of visited nodes for approximate search; it is off by default.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..errors import ValidationError
from . import _kd_kernels
from .base import IndexedItem, ItemStore, NearestNeighborIndex, check_query


@dataclass(frozen=True)
class KdNode:
    """Read-only view of one tree node."""

    item: IndexedItem
    discriminator: int
    left: Optional["KdNode"]
    right: Optional["KdNode"]


class KdTreeIndex(NearestNeighborIndex):
    backend = "kd"

    def __init__(self, store: ItemStore, _state=None):
        if len(store) == 0:
            raise ValidationError("cannot build a KD-tree over an empty collection")
        super().__init__(store)
        if _state is None:
            _state = _kd_kernels.build(store.vectors, store.item_ids)
        self.node_point, self.node_left, self.node_right, self.node_dim = _state

    def query_rows(self, query, k: int, max_visits: int = 0):
        if k < 1:
            raise ValidationError("k must be >= 1")
        q = check_query(self.store, query)
        (rows, dists), self.last_visits = _kd_kernels.query(
            self.store.vectors, self.store.item_ids,
            self.node_point, self.node_left, self.node_right, self.node_dim,
            q, k, max_visits)
        return rows, dists

    # -- structure introspection -------------------------------------------

    @property
    def root(self) -> KdNode:
        return self._node_view(0)

    def _node_view(self, nid: int) -> Optional[KdNode]:
        if nid == _kd_kernels.NO_CHILD:
            return None
        return KdNode(
            item=self.store.item(int(self.node_point[nid])),
            discriminator=int(self.node_dim[nid]),
            left=self._node_view(int(self.node_left[nid])),
            right=self._node_view(int(self.node_right[nid])),
        )

    def height(self) -> int:
        """Number of levels from root to the deepest node."""
        depth = np.zeros(len(self.store), np.int64)
        out = 1
        # children always have larger node ids than their parent, so one
        # forward pass computes depths
        for nid in range(len(self.store)):
            for child in (int(self.node_left[nid]), int(self.node_right[nid])):
                if child != _kd_kernels.NO_CHILD:
                    depth[child] = depth[nid] + 1
                    if depth[child] + 1 > out:
                        out = int(depth[child]) + 1
        return out


def kd_build(items) -> KdTreeIndex:
    """Build a KD-tree over a collection of IndexedItems."""
    store = items if isinstance(items, ItemStore) else ItemStore.from_items(items)
    return KdTreeIndex(store)


def kd_knn(index: KdTreeIndex, query, k: int, max_visits: int = 0):
    """Exact k nearest neighbours (approximate when max_visits > 0)."""
    return index.query(query, k, max_visits=max_visits)
