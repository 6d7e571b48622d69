"""End-to-end contact-tracing experiment.

Select a fraction of users as infected, issue one k-NN query per point of
each infected trajectory, aggregate the candidate lists by set union, score
recall against the contact ground truth, and time the queries.  Works over
raw space-time points or over privacy-encoded points (an index built on
grid cells, with queries encoded through the same model).
"""

from __future__ import annotations

import dataclasses
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .encoding import EncodingModel, encode_many, fit_encoding_model
from .errors import ValidationError
from .index import (
    BACKENDS,
    ENCODED,
    RAW,
    BruteForceIndex,
    HnswIndex,
    ItemStore,
    KdTreeIndex,
)
from .simulate import ContactGroundTruth, TrajectoryRecord

SWEEP_AXES = ("r", "p", "M", "infected_fraction")


@dataclass(frozen=True)
class EncodingParams:
    p: int = 16
    m_intervals: int = 128
    seed: int = 0

    def __post_init__(self):
        if self.p < 1 or self.m_intervals < 1:
            raise ValidationError("encoding p and M must be >= 1")


@dataclass(frozen=True)
class ExperimentConfig:
    backend: str = "kd"
    r_per_timestep: int = 100
    infected_fraction: float = 0.01
    encoding: EncodingParams | None = None
    k_final: int | None = None
    query_seed: int = 0
    evaluable_only: bool = True
    measure_speedup: bool = False
    speedup_queries: int = 50
    hnsw_max_neighbors: int = 16
    hnsw_ef_construction: int = 200
    hnsw_ef_search: int | None = None  # None: max(200, 2 * r)
    hnsw_seed: int = 0
    label: str = "dataset"

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ValidationError(f"unknown backend {self.backend!r}")
        if not 0.0 < self.infected_fraction <= 1.0:
            raise ValidationError("infected_fraction must be in (0, 1]")
        if self.r_per_timestep < 1:
            raise ValidationError("r_per_timestep must be >= 1")
        if self.k_final is not None and self.k_final < 1:
            raise ValidationError("k_final must be >= 1")

    def echo(self) -> dict:
        d = dataclasses.asdict(self)
        d["encoding"] = dataclasses.asdict(self.encoding) if self.encoding else None
        return d


@dataclass(frozen=True)
class UserTrace:
    user_id: int
    n_retrieved: int
    true_positives: int
    gt_size: int


@dataclass
class TraceResult:
    config: dict
    n_infected: int
    n_queries: int
    recall_micro: float
    recall_macro: float
    latency_mean_ms: float
    latency_median_ms: float
    end_to_end_mean_ms: float
    build_seconds: float
    total_wall_seconds: float
    speedup_vs_brute: float | None
    selection_truncated: bool
    per_user: list[UserTrace] = field(default_factory=list)

    def self_check(self) -> list[str]:
        """Internal consistency checks; returns a list of violations."""
        bad = []
        for name in ("recall_micro", "recall_macro"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                bad.append(f"{name}={v} outside [0, 1]")
        for ut in self.per_user:
            if ut.true_positives > ut.gt_size and ut.gt_size > 0:
                bad.append(f"user {ut.user_id}: more true positives than targets")
        if self.n_queries:
            accounted = self.latency_mean_ms / 1e3 * self.n_queries
            if accounted > self.total_wall_seconds * 1.001:
                bad.append("per-query time exceeds total wall time")
        return bad

    def non_timing_fingerprint(self) -> tuple:
        """Everything deterministic: recalls, counts and per-user traces."""
        return (self.n_infected, self.n_queries, self.recall_micro,
                self.recall_macro, tuple(self.per_user))


def flatten_records(records) -> ItemStore:
    """Stack trajectory points into an item store; item ids are assigned in
    (user id, timestep) order."""
    if not records:
        raise ValidationError("empty dataset")
    records = sorted(records, key=lambda r: r.user_id)
    counts = [r.points.shape[0] for r in records]
    total = sum(counts)
    user_ids = np.concatenate([
        np.full(c, r.user_id, np.int64) for c, r in zip(counts, records)])
    timesteps = np.concatenate([np.arange(c, dtype=np.int64) for c in counts])
    vectors = np.concatenate([r.points for r in records])
    return ItemStore(np.arange(total, dtype=np.int64), user_ids, timesteps,
                     vectors, RAW)


def build_index(records, config: ExperimentConfig):
    """Build the configured backend; returns (index, encoder, seconds)."""
    store = flatten_records(records)
    t0 = time.perf_counter()
    encoder = None
    if config.encoding is not None:
        encoder = fit_encoding_model(store.vectors, config.encoding.p,
                                     config.encoding.m_intervals,
                                     config.encoding.seed)
        cells = encode_many(store.vectors, encoder).astype(np.float64)
        store = ItemStore(store.item_ids, store.user_ids, store.timesteps,
                          cells, ENCODED)
    if config.backend == "kd":
        index = KdTreeIndex(store)
    elif config.backend == "hnsw":
        index = HnswIndex(store, max_neighbors=config.hnsw_max_neighbors,
                          ef_construction=config.hnsw_ef_construction,
                          seed=config.hnsw_seed)
    else:
        index = BruteForceIndex(store)
    return index, encoder, time.perf_counter() - t0


def select_infected(records, fraction: float, seed: int,
                    ground_truth: ContactGroundTruth | None = None,
                    evaluable_only: bool = True,
                    eligible=None):
    """Uniform sample of ceil(fraction * pool size) user ids without
    replacement; deterministic per seed.  With evaluable_only (the default)
    only users with non-empty ground truth are sampled, so every simulated
    query has targets."""
    if not records:
        raise ValidationError("empty dataset")
    if not 0.0 < fraction <= 1.0:
        raise ValidationError("fraction must be in (0, 1]")
    pool = sorted(eligible) if eligible is not None \
        else sorted(r.user_id for r in records)
    if evaluable_only and ground_truth is not None:
        with_gt = [u for u in pool if ground_truth.of(u)]
        if with_gt:
            pool = with_gt
    count = min(math.ceil(fraction * len(pool)), len(pool))
    rng = np.random.default_rng(np.uint64(seed))
    chosen = rng.choice(np.array(pool, dtype=np.int64), size=count,
                        replace=False)
    return sorted(int(u) for u in chosen)


def trace_one(index, record: TrajectoryRecord, r: int,
              encoder: EncodingModel | None = None,
              query_kwargs: dict | None = None,
              latencies: list | None = None) -> dict[int, float]:
    """Query the index once per trajectory point and union the results.

    Returns {user_id: minimum observed distance}; the infected user's own
    id is excluded.  Per-query index latencies (excluding encoding) are
    appended to ``latencies`` when given.
    """
    if r < 1:
        raise ValidationError("r must be >= 1")
    if (encoder is not None) != (index.representation == ENCODED):
        raise ValidationError(
            "query representation does not match the index: encoded indexes "
            "need an encoder, raw indexes must not have one")
    kwargs = query_kwargs or {}
    queries = record.points
    if encoder is not None:
        queries = encode_many(record.points, encoder).astype(np.float64)
    found: dict[int, float] = {}
    store = index.store
    for q in queries:
        t0 = time.perf_counter()
        rows, dists = index.query_rows(q, r, **kwargs)
        if latencies is not None:
            latencies.append(time.perf_counter() - t0)
        for row, d in zip(rows, dists):
            u = int(store.user_ids[row])
            if u not in found or d < found[u]:
                found[u] = float(d)
    found.pop(record.user_id, None)
    return found


def evaluate(records, ground_truth: ContactGroundTruth,
             config: ExperimentConfig, prebuilt=None,
             eligible=None) -> TraceResult:
    """Run the full experiment for one configuration.

    ``prebuilt`` may carry (index, encoder, build_seconds) to reuse an
    index across sweep points.  Recall is micro-averaged (pooled true
    positives over pooled ground-truth sizes); the macro average over users
    is also reported.
    """
    wall0 = time.perf_counter()
    if prebuilt is not None:
        index, encoder, build_seconds = prebuilt
    else:
        index, encoder, build_seconds = build_index(records, config)

    by_user = {r.user_id: r for r in records}
    infected = select_infected(records, config.infected_fraction,
                               config.query_seed, ground_truth,
                               config.evaluable_only, eligible)
    pool_size = len([u for u in by_user
                     if ground_truth.of(u)]) if config.evaluable_only else len(by_user)
    truncated = len(infected) < math.ceil(
        config.infected_fraction * max(pool_size, 1))

    kwargs = {}
    if config.backend == "hnsw":
        ef = config.hnsw_ef_search
        if ef is None:
            ef = max(200, 2 * config.r_per_timestep)
        kwargs["ef_search"] = max(ef, config.r_per_timestep)

    latencies: list[float] = []
    per_user = []
    pooled_tp = 0
    pooled_gt = 0
    macro = []
    e2e0 = time.perf_counter()
    for u in infected:
        found = trace_one(index, by_user[u], config.r_per_timestep, encoder,
                          kwargs, latencies)
        if config.k_final is not None and len(found) > config.k_final:
            keep = sorted(found.items(), key=lambda kv: (kv[1], kv[0]))
            found = dict(keep[:config.k_final])
        targets = ground_truth.of(u)
        tp = len(targets & found.keys())
        per_user.append(UserTrace(u, len(found), tp, len(targets)))
        if targets:
            pooled_tp += tp
            pooled_gt += len(targets)
            macro.append(tp / len(targets))
    e2e_seconds = time.perf_counter() - e2e0

    speedup = None
    if config.measure_speedup and config.backend != "brute":
        speedup = _speedup_vs_brute(index, encoder, by_user, infected,
                                    config, kwargs, latencies)

    n_q = len(latencies)
    lat = np.array(latencies) if latencies else np.zeros(1)
    return TraceResult(
        config=config.echo(),
        n_infected=len(infected),
        n_queries=n_q,
        recall_micro=pooled_tp / pooled_gt if pooled_gt else 0.0,
        recall_macro=float(np.mean(macro)) if macro else 0.0,
        latency_mean_ms=float(lat.mean() * 1e3),
        latency_median_ms=float(np.median(lat) * 1e3),
        end_to_end_mean_ms=(e2e_seconds / max(n_q, 1)) * 1e3,
        build_seconds=build_seconds,
        total_wall_seconds=time.perf_counter() - wall0,
        speedup_vs_brute=speedup,
        selection_truncated=truncated,
        per_user=per_user,
    )


def _speedup_vs_brute(index, encoder, by_user, infected, config, kwargs,
                      latencies):
    """Median brute-force latency over a query subsample divided by the
    backend's median over its full battery."""
    brute = BruteForceIndex(index.store)
    battery = []
    for u in infected:
        pts = by_user[u].points
        if encoder is not None:
            pts = encode_many(pts, encoder).astype(np.float64)
        battery.extend(pts)
        if len(battery) >= config.speedup_queries:
            break
    battery = battery[:config.speedup_queries]
    brute_lat = []
    for q in battery:
        t0 = time.perf_counter()
        brute.query_rows(q, config.r_per_timestep)
        brute_lat.append(time.perf_counter() - t0)
    backend_median = float(np.median(np.array(latencies)))
    if backend_median <= 0:
        return None
    return float(np.median(np.array(brute_lat))) / backend_median


def sweep(records, ground_truth: ContactGroundTruth,
          base_config: ExperimentConfig, axis: str, values,
          eligible=None):
    """Evaluate one configuration per value of the swept axis.

    The built index is reused for axes that do not change it (r and
    infected_fraction).  Per-point failures are recorded and the sweep
    continues; each element of the result is (value, TraceResult) or
    (value, error message).
    """
    if axis not in SWEEP_AXES:
        raise ValidationError(f"unknown sweep axis {axis!r}; "
                              f"expected one of {SWEEP_AXES}")
    values = list(values)
    if not values:
        raise ValidationError("sweep needs at least one value")
    if axis in ("p", "M") and base_config.encoding is None:
        raise ValidationError(f"axis {axis!r} requires an encoding config")

    reusable = axis in ("r", "infected_fraction")
    prebuilt = build_index(records, base_config) if reusable else None
    out = []
    for v in values:
        try:
            cfg = _apply_axis(base_config, axis, v)
            out.append((v, evaluate(records, ground_truth, cfg,
                                    prebuilt=prebuilt, eligible=eligible)))
        except Exception as exc:  # record, keep sweeping
            out.append((v, f"error: {exc}"))
    return out


def _apply_axis(cfg: ExperimentConfig, axis: str, value):
    if axis == "r":
        return dataclasses.replace(cfg, r_per_timestep=int(value))
    if axis == "infected_fraction":
        return dataclasses.replace(cfg, infected_fraction=float(value))
    if axis == "p":
        return dataclasses.replace(
            cfg, encoding=dataclasses.replace(cfg.encoding, p=int(value)))
    return dataclasses.replace(
        cfg, encoding=dataclasses.replace(cfg.encoding, m_intervals=int(value)))


# -- reporting -------------------------------------------------------------

TABLE_COLUMNS = ("dataset", "backend", "#infected", "p", "M", "r",
                 "time-ms", "recall")


def format_table(results) -> str:
    """Human-readable result table, one row per experiment."""
    rows = [TABLE_COLUMNS]
    for res in results:
        cfg = res.config
        enc = cfg.get("encoding")
        rows.append((
            str(cfg.get("label", "?")),
            ("PP-" if enc else "") + cfg["backend"],
            str(res.n_infected),
            str(enc["p"]) if enc else "-",
            str(enc["m_intervals"]) if enc else "-",
            str(cfg["r_per_timestep"]),
            f"{res.latency_mean_ms:.3f}",
            f"{res.recall_micro:.4f}",
        ))
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip()
             for row in rows]
    lines.insert(1, "-" * len(lines[0]))
    return "\n".join(lines) + "\n"


def results_tsv(results) -> str:
    """Long-format delimited text: one row per (configuration, metric)."""
    header = ["label", "backend", "encoded", "p", "M", "r",
              "infected_fraction", "metric", "value"]
    lines = ["\t".join(header)]
    metrics = ("recall_micro", "recall_macro", "n_infected", "n_queries",
               "latency_mean_ms", "latency_median_ms", "end_to_end_mean_ms",
               "build_seconds", "speedup_vs_brute")
    for res in results:
        cfg = res.config
        enc = cfg.get("encoding")
        prefix = [str(cfg.get("label", "?")), cfg["backend"],
                  "1" if enc else "0",
                  str(enc["p"]) if enc else "",
                  str(enc["m_intervals"]) if enc else "",
                  str(cfg["r_per_timestep"]),
                  repr(cfg["infected_fraction"])]
        for m in metrics:
            v = getattr(res, m)
            if v is None:
                continue
            lines.append("\t".join(prefix + [m, repr(v) if isinstance(v, float)
                                             else str(v)]))
    return "\n".join(lines) + "\n"
