"""Shared types for the nearest-neighbour backends.

An index is homogeneous in one representation: either raw 4-d space-time
vectors or integer grid-cell vectors produced by the encoder.  Queries must
use the same representation the index was built with.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ..errors import DimensionMismatchError, ValidationError

RAW = "raw"
ENCODED = "encoded"


@dataclass(frozen=True)
class IndexedItem:
    """One indexed point: a user at a timestep."""

    item_id: int
    user_id: int
    timestep: int
    vector: np.ndarray


@dataclass(frozen=True)
class NeighborResult:
    """One retrieved neighbour; result lists are sorted ascending by
    (distance, item_id)."""

    item_id: int
    user_id: int
    timestep: int
    distance: float


class ItemStore:
    """Column-oriented storage of the indexed items.

    Keeps parallel arrays (item_ids, user_ids, timesteps, vectors) so the
    search kernels can run over contiguous memory.  Item ids must be unique.
    """

    def __init__(self, item_ids, user_ids, timesteps, vectors,
                 representation: str = RAW):
        self.item_ids = np.ascontiguousarray(item_ids, dtype=np.int64)
        self.user_ids = np.ascontiguousarray(user_ids, dtype=np.int64)
        self.timesteps = np.ascontiguousarray(timesteps, dtype=np.int64)
        self.vectors = np.ascontiguousarray(vectors, dtype=np.float64)
        if representation not in (RAW, ENCODED):
            raise ValidationError(f"unknown representation {representation!r}")
        self.representation = representation
        n = self.item_ids.shape[0]
        if not (self.user_ids.shape[0] == self.timesteps.shape[0] == n
                and self.vectors.ndim == 2 and self.vectors.shape[0] == n):
            raise ValidationError("item columns must have matching lengths")
        if n and np.unique(self.item_ids).shape[0] != n:
            raise ValidationError("item ids must be unique")
        if np.any(self.timesteps < 0):
            raise ValidationError("timesteps must be non-negative")
        if not np.all(np.isfinite(self.vectors)):
            raise ValidationError("item vectors must be finite")

    @classmethod
    def from_items(cls, items: Iterable[IndexedItem],
                   representation: str = RAW) -> "ItemStore":
        items = list(items)
        if not items:
            return cls(np.empty(0, np.int64), np.empty(0, np.int64),
                       np.empty(0, np.int64), np.empty((0, 0)), representation)
        vectors = np.stack([np.asarray(it.vector, dtype=np.float64)
                            for it in items])
        return cls(
            np.array([it.item_id for it in items], dtype=np.int64),
            np.array([it.user_id for it in items], dtype=np.int64),
            np.array([it.timestep for it in items], dtype=np.int64),
            vectors,
            representation,
        )

    def __len__(self) -> int:
        return self.item_ids.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def item(self, row: int) -> IndexedItem:
        return IndexedItem(int(self.item_ids[row]), int(self.user_ids[row]),
                           int(self.timesteps[row]), self.vectors[row])


def check_query(store: ItemStore, query) -> np.ndarray:
    """Validate a query vector against the store and return it as float64."""
    q = np.ascontiguousarray(query, dtype=np.float64)
    if q.ndim != 1 or q.shape[0] != store.dim:
        raise DimensionMismatchError(
            f"query dimension {q.shape} does not match index dimension "
            f"{store.dim}")
    if not np.all(np.isfinite(q)):
        raise ValidationError("query vector must be finite")
    return q


def results_from_rows(store: ItemStore, rows: np.ndarray,
                      distances: np.ndarray) -> list[NeighborResult]:
    return [
        NeighborResult(int(store.item_ids[r]), int(store.user_ids[r]),
                       int(store.timesteps[r]), float(d))
        for r, d in zip(rows, distances)
    ]


class NearestNeighborIndex:
    """Interface shared by the three backends."""

    backend: str = "?"

    def __init__(self, store: ItemStore):
        self.store = store

    def __len__(self) -> int:
        return len(self.store)

    @property
    def dim(self) -> int:
        return self.store.dim

    @property
    def representation(self) -> str:
        return self.store.representation

    def query_rows(self, query, k: int, **kwargs):
        """Return (rows, distances) arrays sorted ascending by
        (distance, item_id); rows index into the item store."""
        raise NotImplementedError

    def query(self, query, k: int, **kwargs) -> Sequence[NeighborResult]:
        rows, dists = self.query_rows(query, k, **kwargs)
        return results_from_rows(self.store, rows, dists)
