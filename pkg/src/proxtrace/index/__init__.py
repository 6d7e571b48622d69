"""Interchangeable nearest-neighbour backends behind one index interface."""

from .base import (
    ENCODED,
    RAW,
    IndexedItem,
    ItemStore,
    NearestNeighborIndex,
    NeighborResult,
)
from .brute import BruteForceIndex, brute_force_knn
from .hnsw import HnswIndex, hnsw_insert, hnsw_search
from .io import index_load, index_save
from .kdtree import KdNode, KdTreeIndex, kd_build, kd_knn

BACKENDS = {
    "brute": BruteForceIndex,
    "kd": KdTreeIndex,
    "hnsw": HnswIndex,
}

__all__ = [
    "BACKENDS",
    "ENCODED",
    "RAW",
    "BruteForceIndex",
    "HnswIndex",
    "IndexedItem",
    "ItemStore",
    "KdNode",
    "KdTreeIndex",
    "NearestNeighborIndex",
    "NeighborResult",
    "brute_force_knn",
    "hnsw_insert",
    "hnsw_search",
    "index_load",
    "index_save",
    "kd_build",
    "kd_knn",
]
