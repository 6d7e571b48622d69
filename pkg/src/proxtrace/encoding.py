"""Distance-preserving, privacy-oriented encoding of space-time points.

The pipeline has two stages: projection of each raw point onto a set of
random orthonormalized basis vectors, followed by quantization of the
projected coordinates onto a regular grid.  Only grid cell indices leave the
encoder, never the raw coordinates.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateDataError,
    DimensionMismatchError,
    FormatError,
    ValidationError,
)
from .geometry import as_coords

_MODEL_FORMAT = "proxtrace-encoding-model"
_MODEL_VERSION = 1


@dataclass(frozen=True)
class ProjectionBasis:
    """p random basis vectors over R^d, orthonormalized by Gram-Schmidt.

    When p > d full mutual orthogonality is impossible; vectors are then
    orthonormalized within consecutive blocks of d, so each block is an
    orthonormal set and the overall basis is overcomplete.
    """

    vectors: np.ndarray  # shape (p, d), row-major
    seed: int

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] < 1:
            raise ValidationError("basis must be a (p, d) matrix with p >= 1")
        v.setflags(write=False)
        object.__setattr__(self, "vectors", v)

    @property
    def p(self) -> int:
        return self.vectors.shape[0]

    @property
    def d(self) -> int:
        return self.vectors.shape[1]


@dataclass(frozen=True)
class GridSpec:
    """Regular quantization grid over the projected coordinate range.

    alpha/beta are the global minimum/maximum projected coordinates over all
    points and all components; the range is split into ``m_intervals``
    equal cells of width ``delta``.
    """

    alpha: float
    beta: float
    m_intervals: int

    def __post_init__(self):
        if self.m_intervals < 1:
            raise ValidationError("m_intervals must be >= 1")
        if not (math.isfinite(self.alpha) and math.isfinite(self.beta)):
            raise ValidationError("grid bounds must be finite")
        if not self.beta > self.alpha:
            raise DegenerateDataError(
                f"grid requires beta > alpha, got [{self.alpha}, {self.beta}]")

    @property
    def delta(self) -> float:
        return (self.beta - self.alpha) / self.m_intervals


@dataclass(frozen=True)
class EncodingModel:
    """Fitted projection basis plus quantization grid."""

    basis: ProjectionBasis
    grid: GridSpec

    @property
    def p(self) -> int:
        return self.basis.p


def build_basis(d: int, p: int, seed: int) -> ProjectionBasis:
    """Sample p standard-normal vectors in R^d and orthonormalize them.

    Deterministic for a fixed seed.  Gram-Schmidt runs within consecutive
    blocks of d vectors, which is full orthonormalization whenever p <= d.
    A vector that comes out numerically dependent (residual norm < 1e-12)
    is resampled.
    """
    if d < 1 or p < 1:
        raise ValidationError("d and p must be positive")
    rng = np.random.default_rng(np.uint64(seed))
    vectors = np.empty((p, d), dtype=np.float64)
    for i in range(p):
        block_start = (i // d) * d
        while True:
            v = rng.standard_normal(d)
            for j in range(block_start, i):
                v -= np.dot(v, vectors[j]) * vectors[j]
            norm = np.linalg.norm(v)
            if norm >= 1e-12:
                vectors[i] = v / norm
                break
    return ProjectionBasis(vectors=vectors, seed=int(seed))


def project(w, basis: ProjectionBasis) -> np.ndarray:
    """Project a raw point onto the basis: component i is the dot product
    of the point with basis vector i."""
    c = as_coords(w)
    if c.shape[0] != basis.d:
        raise DimensionMismatchError(
            f"point dimension {c.shape[0]} != basis dimension {basis.d}")
    return basis.vectors @ c


def project_many(points: np.ndarray, basis: ProjectionBasis) -> np.ndarray:
    """Vectorized projection of an (n, d) array to (n, p)."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != basis.d:
        raise DimensionMismatchError(
            f"expected an (n, {basis.d}) array, got shape {pts.shape}")
    return pts @ basis.vectors.T


def fit_grid(projected, m_intervals: int) -> GridSpec:
    """Fit grid bounds on a collection of projected vectors.

    alpha/beta are global over all points and all components.  A dataset
    with no spread (beta == alpha) cannot be gridded and is rejected.
    """
    if m_intervals < 1:
        raise ValidationError("m_intervals must be >= 1")
    arr = np.asarray(projected, dtype=np.float64)
    if arr.size == 0:
        raise ValidationError("cannot fit a grid on an empty dataset")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("projected dataset must be finite")
    alpha = float(arr.min())
    beta = float(arr.max())
    if beta == alpha:
        raise DegenerateDataError("all projected coordinates are identical")
    return GridSpec(alpha=alpha, beta=beta, m_intervals=int(m_intervals))


def quantize(x, grid: GridSpec) -> np.ndarray:
    """Map projected coordinates to integer cell indices.

    Each component maps to ceil((x - alpha) / delta) after clamping into
    [alpha, beta]; alpha itself lands in cell 0, every other in-range value
    in {1..M}.  Out-of-range values (e.g. drifting query points) are
    clamped rather than rejected.
    """
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValidationError("cannot quantize non-finite coordinates")
    clamped = np.clip(arr, grid.alpha, grid.beta)
    cells = np.ceil((clamped - grid.alpha) / grid.delta)
    np.clip(cells, 0, grid.m_intervals, out=cells)
    return cells.astype(np.int64)


def quantized_distance(a, b) -> float:
    """L2 distance between two cell-index vectors."""
    ca = np.asarray(a, dtype=np.float64)
    cb = np.asarray(b, dtype=np.float64)
    if ca.shape != cb.shape:
        raise DimensionMismatchError(
            f"encoded length mismatch: {ca.shape} vs {cb.shape}")
    diff = ca - cb
    return float(np.sqrt(np.sum(diff * diff)))


def distortion_bound(p: int, delta: float, epsilon: float) -> float:
    """Maximum factor by which quantization can magnify the distance of a
    pair of points spanning an epsilon-ball: sqrt(p) * delta / epsilon."""
    if p < 1 or delta <= 0 or epsilon <= 0:
        raise ValidationError("p, delta and epsilon must all be positive")
    return math.sqrt(p) * delta / epsilon


def encode(w, model: EncodingModel) -> np.ndarray:
    """Full pipeline: project, then quantize."""
    return quantize(project(w, model.basis), model.grid)


def encode_many(points: np.ndarray, model: EncodingModel) -> np.ndarray:
    """Vectorized encode of an (n, d) array to (n, p) integer cells."""
    return quantize(project_many(points, model.basis), model.grid)


def fit_encoding_model(points: np.ndarray, p: int, m_intervals: int,
                       seed: int) -> EncodingModel:
    """Build a basis, project the dataset and fit the grid on the projections."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise ValidationError("need a non-empty (n, d) dataset")
    basis = build_basis(pts.shape[1], p, seed)
    projected = project_many(pts, basis)
    grid = fit_grid(projected, m_intervals)
    return EncodingModel(basis=basis, grid=grid)


def save_model(model: EncodingModel, path) -> None:
    """Write the model to a JSON sidecar file.

    Floats are serialized via repr and round-trip exactly in IEEE double;
    integers round-trip bit-exact.
    """
    payload = {
        "format": _MODEL_FORMAT,
        "version": _MODEL_VERSION,
        "seed": model.basis.seed,
        "d": model.basis.d,
        "p": model.basis.p,
        "basis": [float(v) for v in model.basis.vectors.ravel()],
        "alpha": model.grid.alpha,
        "beta": model.grid.beta,
        "m_intervals": model.grid.m_intervals,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)
        fh.write("\n")


def load_model(path) -> EncodingModel:
    """Load a model written by save_model; version-checked."""
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not a valid encoding model file: {exc}") from exc
    if payload.get("format") != _MODEL_FORMAT:
        raise FormatError(f"{path}: unrecognized file format")
    if payload.get("version") != _MODEL_VERSION:
        raise FormatError(f"{path}: unsupported model version {payload.get('version')}")
    p, d = payload["p"], payload["d"]
    vectors = np.array(payload["basis"], dtype=np.float64).reshape(p, d)
    basis = ProjectionBasis(vectors=vectors, seed=int(payload["seed"]))
    grid = GridSpec(alpha=payload["alpha"], beta=payload["beta"],
                    m_intervals=int(payload["m_intervals"]))
    return EncodingModel(basis=basis, grid=grid)
