"""Space-time points, coordinate conversion and distance functions.

A space-time point is a 4-vector ``(x, y, z, t)``: three Cartesian spatial
coordinates plus one time coordinate.  All operations here are pure and the
types immutable, so everything is safe to call concurrently.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError, ValidationError

#: Number of coordinates of a space-time point (x, y, z, t).
SPACETIME_DIM = 4

#: Mean Earth radius in kilometres, used as the default conversion radius.
EARTH_RADIUS_KM = 6371.0


class DistanceMetric(enum.Enum):
    """Supported distance functions on space-time vectors."""

    EUCLIDEAN = "l2"
    CHEBYSHEV = "linf"


@dataclass(frozen=True)
class GeoPoint:
    """A geographic location with a timestamp.

    latitude/longitude are in degrees, timestamp in seconds since epoch.
    Construction outside the valid ranges is rejected.
    """

    latitude: float
    longitude: float
    timestamp: float

    def __post_init__(self):
        if not (math.isfinite(self.latitude) and math.isfinite(self.longitude)
                and math.isfinite(self.timestamp)):
            raise ValidationError("GeoPoint coordinates must be finite")
        if not -90.0 <= self.latitude <= 90.0:
            raise ValidationError(f"latitude {self.latitude} outside [-90, 90]")
        if not -180.0 <= self.longitude <= 180.0:
            raise ValidationError(f"longitude {self.longitude} outside [-180, 180]")
        if self.timestamp < 0:
            raise ValidationError(f"timestamp {self.timestamp} must be non-negative")


@dataclass(frozen=True)
class SpaceTimePoint:
    """An immutable point in R^4: (x, y, z, t), all components finite."""

    coords: np.ndarray = field()

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=np.float64)
        if c.shape != (SPACETIME_DIM,):
            raise DimensionMismatchError(
                f"space-time point must have exactly {SPACETIME_DIM} components, "
                f"got shape {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValidationError("space-time point components must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.coords, dtype=dtype)


def space_time_point(x, y, z, t, time_scale=1.0):
    """Build a SpaceTimePoint, scaling the time axis by ``time_scale``.

    The relative weight of the time axis against the spatial axes is a
    per-dataset choice; the default of 1.0 treats t as a raw fourth
    coordinate.
    """
    return SpaceTimePoint(np.array([x, y, z, t * time_scale], dtype=np.float64))


def as_coords(point) -> np.ndarray:
    """Accept a SpaceTimePoint or any array-like and return a float vector."""
    if isinstance(point, SpaceTimePoint):
        return point.coords
    c = np.asarray(point, dtype=np.float64)
    if c.ndim != 1:
        raise DimensionMismatchError(f"expected a 1-d vector, got shape {c.shape}")
    return c


def geo_to_cartesian(g: GeoPoint, earth_radius_km: float = EARTH_RADIUS_KM,
                     time_scale: float = 1.0) -> SpaceTimePoint:
    """Convert latitude/longitude/time to a Cartesian space-time point.

    Returns (R cos(lat) cos(lon), R cos(lat) sin(lon), R sin(lat), t); the
    spatial part lies on the sphere of radius ``earth_radius_km``.
    """
    if not (math.isfinite(earth_radius_km) and earth_radius_km > 0):
        raise ValidationError("earth_radius_km must be a positive finite number")
    lat = math.radians(g.latitude)
    lon = math.radians(g.longitude)
    x = earth_radius_km * math.cos(lat) * math.cos(lon)
    y = earth_radius_km * math.cos(lat) * math.sin(lon)
    z = earth_radius_km * math.sin(lat)
    return space_time_point(x, y, z, g.timestamp, time_scale=time_scale)


def distance(a, b, metric: DistanceMetric = DistanceMetric.EUCLIDEAN) -> float:
    """Distance between two equal-dimension vectors under the given metric."""
    ca = as_coords(a)
    cb = as_coords(b)
    if ca.shape != cb.shape:
        raise DimensionMismatchError(
            f"dimension mismatch: {ca.shape[0]} vs {cb.shape[0]}")
    diff = np.abs(ca - cb)
    if metric is DistanceMetric.EUCLIDEAN:
        return float(np.sqrt(np.sum(diff * diff)))
    if metric is DistanceMetric.CHEBYSHEV:
        return float(np.max(diff)) if diff.size else 0.0
    raise ValidationError(f"unknown metric {metric!r}")
