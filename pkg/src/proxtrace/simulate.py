"""Synthetic dataset generation with contact ground truth.

Two families: random-walk agent trajectories (contacts arise whenever two
agents pass within a spatial epsilon at the same timestep) and single
check-in records surrounded by simulated ghost users (the ghosts inside the
inner radius are the retrieval targets, the annulus ghosts are distractors).

All randomness flows through numpy's PCG64 generator seeded explicitly, so
a fixed seed reproduces a dataset byte for byte on any platform.  The PRNG
identity is part of the file-format header.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
from scipy.spatial import cKDTree

from .errors import FormatError, SamplingError, ValidationError

DATASET_HEADER = "# proxtrace-dataset v1 prng=pcg64"
CONTACTS_HEADER = "# proxtrace-contacts v1"
SUMMARY_HEADER = "# proxtrace-summary v1"


@dataclass(frozen=True)
class TrajectoryRecord:
    """One user's ordered space-time points; t increases by 1 per step."""

    user_id: int
    points: np.ndarray  # (n_points, 4)


class ContactGroundTruth:
    """Symmetric, irreflexive map from user id to the ids that entered its
    contact neighbourhood."""

    def __init__(self, contacts=None):
        self.contacts: dict[int, set[int]] = {}
        if contacts:
            for u, vs in contacts.items():
                for v in vs:
                    self.add_pair(u, v)

    def add_pair(self, u: int, v: int) -> None:
        if u == v:
            raise ValidationError("self-contacts are not allowed")
        self.contacts.setdefault(u, set()).add(v)
        self.contacts.setdefault(v, set()).add(u)

    def of(self, user: int) -> frozenset:
        return frozenset(self.contacts.get(user, ()))

    def users_with_contacts(self) -> list[int]:
        return sorted(u for u, vs in self.contacts.items() if vs)

    def n_pairs(self) -> int:
        return sum(len(v) for v in self.contacts.values()) // 2

    def __eq__(self, other):
        return isinstance(other, ContactGroundTruth) and \
            self.contacts == other.contacts

    def validate(self) -> None:
        for u, vs in self.contacts.items():
            if u in vs:
                raise ValidationError(f"user {u} is its own contact")
            for v in vs:
                if u not in self.contacts.get(v, ()):
                    raise ValidationError(f"asymmetric contact pair ({u}, {v})")


@dataclass(frozen=True)
class WalkConfig:
    """Random-walk generator configuration.

    Agents start uniformly in a cube of edge ``box_edge`` and take
    independent U(-1, 1) increments per spatial axis for a per-agent number
    of steps drawn uniformly from [tau_min, tau_max]; positions are clamped
    to the cube (``reflect=True`` reflects off the walls instead).
    """

    n_agents: int
    box_edge: float = 100.0
    tau_min: int = 100
    tau_max: int = 200
    contact_epsilon: float = 1.0
    seed: int = 0
    reflect: bool = False

    def __post_init__(self):
        if self.n_agents < 1:
            raise ValidationError("n_agents must be >= 1")
        if self.box_edge <= 0:
            raise ValidationError("box_edge must be positive")
        if not (0 < self.tau_min <= self.tau_max):
            raise ValidationError("need 0 < tau_min <= tau_max")
        if not (0 < self.contact_epsilon < self.box_edge):
            raise ValidationError("need 0 < contact_epsilon < box_edge")


@dataclass(frozen=True)
class GhostConfig:
    """Check-in generator configuration.

    Every real user receives one check-in, ``inner_count`` ghost users
    uniformly inside the inner-radius ball around it (the ground-truth
    targets) and ``outer_count`` ghosts in the annulus up to the outer
    radius (distractors).  Real check-ins are kept more than
    2 * outer_radius apart so the clusters never overlap.
    """

    n_real_users: int
    inner_count: int = 30
    outer_count: int = 60
    inner_radius: float = 1.0
    outer_radius: float = 2.0
    seed: int = 0
    box_edge: float | None = None

    def __post_init__(self):
        if self.n_real_users < 1:
            raise ValidationError("n_real_users must be >= 1")
        if self.inner_count < 1 or self.outer_count < 1:
            raise ValidationError("ghost counts must be positive")
        if not (0 < self.inner_radius < self.outer_radius):
            raise ValidationError("need 0 < inner_radius < outer_radius")
        if self.box_edge is not None and self.box_edge <= 0:
            raise ValidationError("box_edge must be positive")

    def spatial_edge(self) -> float:
        if self.box_edge is not None:
            return self.box_edge
        # generous packing headroom for the minimum-separation constraint
        return max(10.0 * self.outer_radius,
                   5.0 * self.outer_radius * self.n_real_users ** (1.0 / 3.0))


@dataclass(frozen=True)
class DatasetSummary:
    n_users: int
    n_instances: int
    step_range: tuple[int, int]          # per-user steps, tau = points - 1
    grid_extent: tuple[tuple[float, float], ...]
    n_cells: int                         # unit cells over the x-y extent
    rho_users: float                     # users per unit cell
    rho_instances: float                 # instances per unit cell


def generate_walks(cfg: WalkConfig):
    """Simulate the agents and record every same-timestep contact pair.

    Returns (records, ground_truth); records are ordered by user id and the
    whole output is a pure function of the config.
    """
    rng = np.random.default_rng(np.uint64(cfg.seed))
    n = cfg.n_agents
    taus = rng.integers(cfg.tau_min, cfg.tau_max + 1, n)
    traj = np.empty((n, cfg.tau_max + 1, 3), dtype=np.float64)
    traj[:, 0] = rng.uniform(0.0, cfg.box_edge, (n, 3))
    for t in range(1, cfg.tau_max + 1):
        step = rng.uniform(-1.0, 1.0, (n, 3))
        pos = traj[:, t - 1] + step
        if cfg.reflect:
            pos = np.abs(pos)
            pos = cfg.box_edge - np.abs(cfg.box_edge - pos)
        traj[:, t] = np.clip(pos, 0.0, cfg.box_edge)

    ground_truth = ContactGroundTruth()
    for t in range(cfg.tau_max + 1):
        active = np.nonzero(taus >= t)[0]
        if active.shape[0] < 2:
            continue
        tree = cKDTree(traj[active, t])
        pairs = tree.query_pairs(cfg.contact_epsilon, output_type="ndarray")
        for a, b in active[pairs]:
            ground_truth.add_pair(int(a), int(b))

    records = []
    for u in range(n):
        m = int(taus[u]) + 1
        pts = np.empty((m, 4), dtype=np.float64)
        pts[:, :3] = traj[u, :m]
        pts[:, 3] = np.arange(m)
        records.append(TrajectoryRecord(user_id=u, points=pts))
    return records, ground_truth


def _sample_in_ball(rng, count, dim, r_lo, r_hi):
    """Uniform samples with r_lo < ||x|| <= r_hi by rejection from the cube."""
    out = np.empty((count, dim), dtype=np.float64)
    have = 0
    while have < count:
        batch = max(4 * (count - have), 128)
        cand = rng.uniform(-r_hi, r_hi, (batch, dim))
        norms = np.linalg.norm(cand, axis=1)
        good = cand[(norms > r_lo) & (norms <= r_hi)]
        take = min(good.shape[0], count - have)
        out[have:have + take] = good[:take]
        have += take
    return out


def generate_checkins(cfg: GhostConfig):
    """Place well-separated real check-ins and their ghost neighbourhoods.

    Real users occupy ids 0..n_real_users-1 and get strictly increasing
    timestamps spaced 2.5 * outer_radius apart; ghosts take the following id
    range, cluster by cluster.  The ground truth links each real user with
    exactly its inner-ball ghosts.
    """
    rng = np.random.default_rng(np.uint64(cfg.seed))
    n = cfg.n_real_users
    sep = 2.0 * cfg.outer_radius
    edge = cfg.spatial_edge()
    cell = sep
    occupied: dict[tuple[int, int, int], list[np.ndarray]] = {}
    real_xyz = np.empty((n, 3), dtype=np.float64)
    attempts = 0
    placed = 0
    budget = 10 * n
    while placed < n:
        if attempts >= budget:
            raise SamplingError(
                f"placed only {placed}/{n} users after {attempts} attempts; "
                "configuration too dense for the separation constraint")
        attempts += 1
        cand = rng.uniform(0.0, edge, 3)
        key = tuple((cand // cell).astype(np.int64))
        ok = True
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                for dz in (-1, 0, 1):
                    for other in occupied.get(
                            (key[0] + dx, key[1] + dy, key[2] + dz), ()):
                        if np.linalg.norm(other - cand) <= sep:
                            ok = False
        if not ok:
            continue
        occupied.setdefault(key, []).append(cand)
        real_xyz[placed] = cand
        placed += 1

    timestamps = np.arange(n, dtype=np.float64) * 2.5 * cfg.outer_radius
    inner = _sample_in_ball(rng, n * cfg.inner_count, 4, 0.0, cfg.inner_radius)
    outer = _sample_in_ball(rng, n * cfg.outer_count, 4,
                            cfg.inner_radius, cfg.outer_radius)

    records = []
    ground_truth = ContactGroundTruth()
    per_cluster = cfg.inner_count + cfg.outer_count
    for u in range(n):
        center = np.array([real_xyz[u, 0], real_xyz[u, 1], real_xyz[u, 2],
                           timestamps[u]])
        records.append(TrajectoryRecord(u, center[None, :].copy()))
    for u in range(n):
        center = records[u].points[0]
        base = n + u * per_cluster
        for g in range(cfg.inner_count):
            gid = base + g
            records.append(TrajectoryRecord(
                gid, (center + inner[u * cfg.inner_count + g])[None, :]))
            ground_truth.add_pair(u, gid)
        for g in range(cfg.outer_count):
            gid = base + cfg.inner_count + g
            records.append(TrajectoryRecord(
                gid, (center + outer[u * cfg.outer_count + g])[None, :]))
    return records, ground_truth


def summarize(records) -> DatasetSummary:
    """Dataset shape statistics, including both population-density
    conventions (users per unit x-y cell and instances per unit x-y cell)."""
    if not records:
        raise ValidationError("cannot summarize an empty dataset")
    counts = np.array([r.points.shape[0] for r in records])
    all_pts = np.concatenate([r.points for r in records])
    lo = all_pts[:, :3].min(axis=0)
    hi = all_pts[:, :3].max(axis=0)
    extent = tuple((float(a), float(b)) for a, b in zip(lo, hi))
    n_cells = max(1, math.ceil(hi[0] - lo[0])) * max(1, math.ceil(hi[1] - lo[1]))
    n_users = len(records)
    n_instances = int(counts.sum())
    return DatasetSummary(
        n_users=n_users,
        n_instances=n_instances,
        step_range=(int(counts.min()) - 1, int(counts.max()) - 1),
        grid_extent=extent,
        n_cells=n_cells,
        rho_users=n_users / n_cells,
        rho_instances=n_instances / n_cells,
    )


def summary_text(s: DatasetSummary) -> str:
    lines = [SUMMARY_HEADER,
             f"n_users: {s.n_users}",
             f"n_instances: {s.n_instances}",
             f"step_min: {s.step_range[0]}",
             f"step_max: {s.step_range[1]}"]
    for axis, (a, b) in zip("xyz", s.grid_extent):
        lines.append(f"extent_{axis}: {a:.6f} {b:.6f}")
    lines += [f"n_cells_xy: {s.n_cells}",
              f"rho_users_per_cell: {s.rho_users:.6f}",
              f"rho_instances_per_cell: {s.rho_instances:.6f}"]
    return "\n".join(lines) + "\n"


# -- persistence -----------------------------------------------------------


def save_dataset(records, path) -> None:
    """Delimited text, one point per row (user_id, x, y, z, t), ordered by
    user id then timestep; floats carry full round-trip precision."""
    records = sorted(records, key=lambda r: r.user_id)
    user_col = np.concatenate([
        np.full(r.points.shape[0], r.user_id, dtype=np.int64) for r in records])
    pts = np.concatenate([r.points for r in records])
    df = pd.DataFrame({
        "user_id": user_col,
        "x": pts[:, 0], "y": pts[:, 1], "z": pts[:, 2], "t": pts[:, 3],
    })
    with open(path, "w") as fh:
        fh.write(DATASET_HEADER + "\n")
        fh.write("# columns: user_id,x,y,z,t\n")
        df.to_csv(fh, header=False, index=False, float_format="%.17g")


def load_dataset(path) -> list[TrajectoryRecord]:
    path = Path(path)
    with open(path) as fh:
        first = fh.readline().rstrip("\n")
    if not first.startswith("# proxtrace-dataset v1"):
        raise FormatError(f"{path}: missing or unsupported dataset header")
    try:
        df = pd.read_csv(path, comment="#", header=None,
                         names=["user_id", "x", "y", "z", "t"],
                         dtype={"user_id": np.int64, "x": float, "y": float,
                                "z": float, "t": float},
                         float_precision="round_trip")
    except (ValueError, pd.errors.ParserError):
        _locate_bad_row(path)
        raise FormatError(f"{path}: malformed dataset file")
    if df.isna().any().any():
        _locate_bad_row(path)
        raise FormatError(f"{path}: malformed dataset file")
    pts = df[["x", "y", "z", "t"]].to_numpy()
    users = df["user_id"].to_numpy()
    records = []
    for u in np.unique(users):
        records.append(TrajectoryRecord(int(u), pts[users == u]))
    return records


def _locate_bad_row(path):
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split(",")
            if len(fields) != 5:
                raise FormatError(
                    f"{path}: line {lineno}: expected 5 fields, got {len(fields)}")
            try:
                int(fields[0])
                [float(f) for f in fields[1:]]
            except ValueError:
                raise FormatError(
                    f"{path}: line {lineno}: non-numeric value in {line!r}")


def save_ground_truth(gt: ContactGroundTruth, path) -> None:
    """One row per user: the user id followed by its contact ids."""
    with open(path, "w") as fh:
        fh.write(CONTACTS_HEADER + "\n")
        for u in sorted(gt.contacts):
            row = ",".join(str(v) for v in sorted(gt.contacts[u]))
            fh.write(f"{u},{row}\n" if row else f"{u}\n")


def load_ground_truth(path) -> ContactGroundTruth:
    gt = ContactGroundTruth()
    with open(path) as fh:
        first = fh.readline().rstrip("\n")
        if first != CONTACTS_HEADER:
            raise FormatError(f"{path}: missing or unsupported contacts header")
        for lineno, line in enumerate(fh, 2):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                ids = [int(f) for f in line.split(",")]
            except ValueError:
                raise FormatError(f"{path}: line {lineno}: non-integer id in "
                                  f"{line!r}")
            u = ids[0]
            for v in ids[1:]:
                gt.add_pair(u, v)
    return gt


@dataclass
class LoadedDataset:
    records: list = field(default_factory=list)
    ground_truth: ContactGroundTruth = field(default_factory=ContactGroundTruth)
    ground_truth_missing: bool = False


def default_ground_truth_path(dataset_path) -> Path:
    return Path(str(dataset_path) + ".gt")


def dataset_save(records, ground_truth: ContactGroundTruth, path,
                 gt_path=None) -> None:
    save_dataset(records, path)
    save_ground_truth(ground_truth,
                      gt_path or default_ground_truth_path(path))


def dataset_load(path, gt_path=None) -> LoadedDataset:
    """Load a dataset plus its ground truth.

    A missing ground-truth file is not an error: the result carries an
    empty ground truth and a warning flag instead.
    """
    records = load_dataset(path)
    gt_path = Path(gt_path) if gt_path else default_ground_truth_path(path)
    if not gt_path.exists():
        return LoadedDataset(records, ContactGroundTruth(), True)
    return LoadedDataset(records, load_ground_truth(gt_path), False)
