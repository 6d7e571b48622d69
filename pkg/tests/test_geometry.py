import math

import numpy as np
import pytest

from proxtrace.errors import DimensionMismatchError, ValidationError
from proxtrace.geometry import (
    EARTH_RADIUS_KM,
    DistanceMetric,
    GeoPoint,
    SpaceTimePoint,
    distance,
    geo_to_cartesian,
    space_time_point,
)


class TestGeoPoint:
    def test_valid_construction(self):
        g = GeoPoint(45.0, -120.0, 100.0)
        assert g.latitude == 45.0

    @pytest.mark.parametrize("lat,lon,t", [
        (90.5, 0, 0), (-91, 0, 0), (0, 180.5, 0), (0, -181, 0), (0, 0, -1),
    ])
    def test_out_of_range_rejected(self, lat, lon, t):
        with pytest.raises(ValidationError):
            GeoPoint(lat, lon, t)

    def test_non_finite_rejected(self):
        with pytest.raises(ValidationError):
            GeoPoint(float("nan"), 0, 0)


class TestGeoToCartesian:
    def test_equator_prime_meridian(self):
        p = geo_to_cartesian(GeoPoint(0, 0, 0))
        np.testing.assert_allclose(p.coords,
                                   [EARTH_RADIUS_KM, 0, 0, 0], atol=1e-9)

    def test_north_pole(self):
        p = geo_to_cartesian(GeoPoint(90, 0, 5))
        np.testing.assert_allclose(p.coords, [0, 0, 6371.0, 5],
                                   atol=1e-9)

    def test_unit_sphere_norm(self):
        # cos^2 + sin^2 = 1: the spatial part must land on the sphere
        p = geo_to_cartesian(GeoPoint(45, 45, 1), earth_radius_km=1.0)
        assert abs(np.linalg.norm(p.coords[:3]) - 1.0) <= 1e-9

    def test_surface_constraint_random(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            g = GeoPoint(rng.uniform(-90, 90), rng.uniform(-180, 180),
                         rng.uniform(0, 1e6))
            p = geo_to_cartesian(g)
            r = np.linalg.norm(p.coords[:3])
            assert abs(r - EARTH_RADIUS_KM) <= 1e-9 * EARTH_RADIUS_KM

    def test_radius_must_be_positive(self):
        with pytest.raises(ValidationError):
            geo_to_cartesian(GeoPoint(0, 0, 0), earth_radius_km=0.0)


class TestSpaceTimePoint:
    def test_dimension_is_four(self):
        with pytest.raises(ValidationError):
            SpaceTimePoint(np.zeros(3))

    def test_components_must_be_finite(self):
        with pytest.raises(ValidationError):
            space_time_point(1.0, 2.0, math.inf, 0.0)

    def test_time_scale(self):
        p = space_time_point(0, 0, 0, 10.0, time_scale=0.5)
        assert p.coords[3] == 5.0

    def test_coords_read_only(self):
        p = space_time_point(1, 2, 3, 4)
        with pytest.raises(ValueError):
            p.coords[0] = 9.0


class TestDistance:
    def test_identity(self):
        a = space_time_point(1, 2, 3, 4)
        assert distance(a, a, DistanceMetric.EUCLIDEAN) == 0.0

    def test_three_four_five(self):
        a = space_time_point(0, 0, 0, 0)
        b = space_time_point(3, 4, 0, 0)
        assert distance(a, b, DistanceMetric.EUCLIDEAN) == 5.0

    def test_chebyshev_max_component(self):
        a = space_time_point(0, 0, 0, 0)
        b = space_time_point(1, 2, 3, 4)
        assert distance(a, b, DistanceMetric.CHEBYSHEV) == 4.0

    def test_symmetry_exact(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            a = SpaceTimePoint(rng.normal(size=4))
            b = SpaceTimePoint(rng.normal(size=4))
            for metric in DistanceMetric:
                assert distance(a, b, metric) == distance(b, a, metric)

    def test_triangle_inequality(self):
        rng = np.random.default_rng(11)
        for _ in range(1000):
            a, b, c = (SpaceTimePoint(rng.normal(size=4)) for _ in range(3))
            dab = distance(a, b, DistanceMetric.EUCLIDEAN)
            dbc = distance(b, c, DistanceMetric.EUCLIDEAN)
            dac = distance(a, c, DistanceMetric.EUCLIDEAN)
            assert dac <= dab + dbc + 1e-9

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(DimensionMismatchError):
            distance(np.zeros(4), np.zeros(3))

    def test_zero_iff_equal(self):
        a = space_time_point(1, 2, 3, 4)
        b = space_time_point(1, 2, 3, 4 + 1e-12)
        assert distance(a, b, DistanceMetric.EUCLIDEAN) > 0
