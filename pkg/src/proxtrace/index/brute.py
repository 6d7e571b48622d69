"""Exhaustive exact k-NN scan: the correctness oracle and speed baseline."""

from __future__ import annotations

import numpy as np

from ..errors import ValidationError
from .base import ItemStore, NearestNeighborIndex, check_query


class BruteForceIndex(NearestNeighborIndex):
    """Scans every indexed vector for each query.

    Exact by construction; ties at equal distance are broken by ascending
    item id, so result sequences are fully deterministic.
    """

    backend = "brute"

    def query_rows(self, query, k: int):
        if k < 1:
            raise ValidationError("k must be >= 1")
        q = check_query(self.store, query)
        n = len(self.store)
        if n == 0:
            return np.empty(0, np.int64), np.empty(0, np.float64)
        diff = self.store.vectors - q
        # accumulate per coordinate in ascending order: bit-identical to the
        # kd/hnsw kernels' sequential loops, so cross-backend distances and
        # tie-breaks agree exactly
        d2 = np.zeros(diff.shape[0], np.float64)
        for j in range(diff.shape[1]):
            d2 += diff[:, j] * diff[:, j]
        if k < n:
            # everything tied with the k-th smallest distance stays in the
            # running so the (distance, item_id) tie-break is exact
            kth = np.partition(d2, k - 1)[k - 1]
            cand = np.nonzero(d2 <= kth)[0]
        else:
            cand = np.arange(n)
        order = np.lexsort((self.store.item_ids[cand], d2[cand]))[:k]
        rows = cand[order]
        return rows, np.sqrt(d2[rows])


def brute_force_knn(query, k: int, items) -> list:
    """One-shot exhaustive k-NN over a collection of IndexedItems."""
    store = items if isinstance(items, ItemStore) else ItemStore.from_items(items)
    if len(store) == 0:
        return []
    return list(BruteForceIndex(store).query(query, k))
