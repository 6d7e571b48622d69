"""Versioned binary persistence for the three index backends.

File layout (documented, version-checked on load):

    bytes 0..7    magic  b"PROXTIDX"
    bytes 8..11   format version, little-endian uint32 (currently 1)
    bytes 12..15  JSON header length, little-endian uint32
    ...           JSON header (utf-8): backend tag, representation tag,
                  dimension, item count, backend parameters and the ordered
                  list of array names that follow
    ...           the named arrays, each in ``numpy.save`` format, in
                  header order

A round-tripped index answers every query with an identical result
sequence.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from ..errors import FormatError
from .base import ENCODED, RAW, ItemStore
from .brute import BruteForceIndex
from .hnsw import HnswIndex
from .kdtree import KdTreeIndex

MAGIC = b"PROXTIDX"
VERSION = 1

_STORE_ARRAYS = ("item_ids", "user_ids", "timesteps", "vectors")


def _backend_state(index):
    if isinstance(index, BruteForceIndex):
        return {}, {}
    if isinstance(index, KdTreeIndex):
        return {}, {
            "node_point": index.node_point, "node_left": index.node_left,
            "node_right": index.node_right, "node_dim": index.node_dim,
        }
    if isinstance(index, HnswIndex):
        params = {
            "max_neighbors": index.max_neighbors,
            "ef_construction": index.ef_construction,
            "m_l": index.m_l,
            "rng_seed": index.rng_seed,
        }
        arrays = {
            "levels": index.levels, "neigh": index.neigh,
            "counts": index.counts, "node_off": index.node_off,
            "cnt_off": index.cnt_off, "state": index.state,
        }
        return params, arrays
    raise FormatError(f"cannot persist index of type {type(index).__name__}")


def index_save(index, path) -> None:
    params, arrays = _backend_state(index)
    store = index.store
    names = list(_STORE_ARRAYS) + list(arrays)
    header = {
        "backend": index.backend,
        "representation": store.representation,
        "dim": store.dim,
        "count": len(store),
        "params": params,
        "arrays": names,
    }
    blob = json.dumps(header).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(blob)))
        fh.write(blob)
        for name in _STORE_ARRAYS:
            np.save(fh, getattr(store, name), allow_pickle=False)
        for arr in arrays.values():
            np.save(fh, arr, allow_pickle=False)


def index_load(path):
    """Restore an index written by index_save.

    Raises FormatError for malformed or wrong-version files; I/O problems
    (missing file, permissions) surface as OSError.
    """
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise FormatError(f"{path}: not a proxtrace index file")
        head = fh.read(8)
        if len(head) != 8:
            raise FormatError(f"{path}: truncated header")
        version, hlen = struct.unpack("<II", head)
        if version != VERSION:
            raise FormatError(f"{path}: unsupported index format version {version}")
        try:
            header = json.loads(fh.read(hlen).decode())
            arrays = {}
            for name in header["arrays"]:
                arrays[name] = np.load(fh, allow_pickle=False)
        except (ValueError, KeyError, EOFError) as exc:
            raise FormatError(f"{path}: corrupt index payload: {exc}") from exc

    rep = header.get("representation")
    if rep not in (RAW, ENCODED):
        raise FormatError(f"{path}: unknown representation tag {rep!r}")
    try:
        store = ItemStore(arrays["item_ids"], arrays["user_ids"],
                          arrays["timesteps"], arrays["vectors"], rep)
    except Exception as exc:
        raise FormatError(f"{path}: inconsistent item arrays: {exc}") from exc
    if len(store) != header.get("count") or store.dim != header.get("dim"):
        raise FormatError(f"{path}: header does not match stored arrays")

    backend = header.get("backend")
    params = header.get("params", {})
    try:
        if backend == "brute":
            return BruteForceIndex(store)
        if backend == "kd":
            state = (arrays["node_point"], arrays["node_left"],
                     arrays["node_right"], arrays["node_dim"])
            return KdTreeIndex(store, _state=state)
        if backend == "hnsw":
            state = (arrays["levels"], arrays["neigh"], arrays["counts"],
                     arrays["node_off"], arrays["cnt_off"], arrays["state"])
            return HnswIndex(store, max_neighbors=params["max_neighbors"],
                             ef_construction=params["ef_construction"],
                             m_l=params["m_l"], seed=params["rng_seed"],
                             _state=state)
    except KeyError as exc:
        raise FormatError(f"{path}: missing backend arrays: {exc}") from exc
    raise FormatError(f"{path}: unknown backend tag {backend!r}")
