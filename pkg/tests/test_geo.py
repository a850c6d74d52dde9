"""Local projection and clipped Voronoi tessellation of the tower grid."""

import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crowdcdr import geo
from crowdcdr.errors import ConfigurationError
from crowdcdr.geo import (
    build_tessellation,
    haversine_km,
    nearest_active_tower,
    project_local,
    tower_origin,
    unproject_local,
)
from crowdcdr.ingest import TowerSite

ORIGIN = (25.45, 81.85)


def tower(tid, dlat, dlon, active=True):
    """Tower offset from the reference origin by degrees."""
    return TowerSite(tid, ORIGIN[0] + dlat, ORIGIN[1] + dlon, active)


def contains(polygon: np.ndarray, point, slack=1e-9) -> bool:
    """Point-in-convex-polygon via cross products (vertices are CCW)."""
    x, y = point
    n = len(polygon)
    for i in range(n):
        ax, ay = polygon[i]
        bx, by = polygon[(i + 1) % n]
        if (bx - ax) * (y - ay) - (by - ay) * (x - ax) < -slack:
            return False
    return True


class TestProjection:
    def test_origin_maps_to_zero(self):
        assert project_local(*ORIGIN, *ORIGIN) == (0.0, 0.0)

    def test_hundredth_degree_north_is_about_1112_meters(self):
        x, y = project_local(ORIGIN[0] + 0.01, ORIGIN[1], *ORIGIN)
        assert x == 0.0
        assert y == pytest.approx(1.112, abs=0.001)

    def test_agrees_with_great_circle_within_a_tenth_percent(self):
        rng = random.Random(7)
        for _ in range(200):
            lat1 = ORIGIN[0] + rng.uniform(-0.05, 0.05)
            lon1 = ORIGIN[1] + rng.uniform(-0.05, 0.05)
            lat2 = ORIGIN[0] + rng.uniform(-0.05, 0.05)
            lon2 = ORIGIN[1] + rng.uniform(-0.05, 0.05)
            x1, y1 = project_local(lat1, lon1, *ORIGIN)
            x2, y2 = project_local(lat2, lon2, *ORIGIN)
            planar = math.hypot(x2 - x1, y2 - y1)
            arc = haversine_km(lat1, lon1, lat2, lon2)
            if arc > 0.1:
                assert abs(planar - arc) / arc < 1e-3

    def test_far_point_rejected(self):
        with pytest.raises(ValueError, match="outside supported range"):
            project_local(ORIGIN[0] + 1.0, ORIGIN[1], *ORIGIN)

    @given(
        st.floats(-0.2, 0.2),
        st.floats(-0.2, 0.2),
    )
    @settings(max_examples=50, deadline=None)
    def test_unproject_inverts_project(self, dlat, dlon):
        lat, lon = ORIGIN[0] + dlat, ORIGIN[1] + dlon
        x, y = project_local(lat, lon, *ORIGIN)
        lat2, lon2 = unproject_local(x, y, *ORIGIN)
        assert lat2 == pytest.approx(lat, abs=1e-9)
        assert lon2 == pytest.approx(lon, abs=1e-9)

    def test_origin_is_active_tower_centroid(self):
        towers = [
            tower(1, 0.00, 0.00),
            tower(2, 0.02, 0.04),
            tower(3, 0.50, 0.50, active=False),
        ]
        lat, lon = tower_origin(towers)
        assert lat == pytest.approx(ORIGIN[0] + 0.01)
        assert lon == pytest.approx(ORIGIN[1] + 0.02)

    def test_origin_requires_an_active_tower(self):
        with pytest.raises(ConfigurationError, match="no active towers"):
            tower_origin([tower(1, 0, 0, active=False)])


class TestTessellation:
    def test_single_tower_owns_whole_box(self):
        cells = build_tessellation([tower(1, 0, 0)], pad_km=2.0)
        assert len(cells) == 1
        assert cells[0].area == pytest.approx(16.0, rel=1e-9)

    def test_two_towers_split_along_perpendicular_bisector(self):
        towers = [tower(1, 0, 0), tower(2, 0.02, 0)]
        midline = project_local(ORIGIN[0] + 0.01, ORIGIN[1], *ORIGIN)[1]
        bbox = (-3.0, midline - 3.0, 3.0, midline + 3.0)
        cells = build_tessellation(towers, bbox=bbox, origin=ORIGIN)
        areas = {c.tower_id: c.area for c in cells}
        assert areas[1] == pytest.approx(18.0, rel=1e-9)
        assert areas[2] == pytest.approx(18.0, rel=1e-9)
        # The shared boundary is the horizontal midline between the towers.
        verts = [
            {(round(x, 9), round(y, 9)) for x, y in c.polygon} for c in cells
        ]
        shared = verts[0] & verts[1]
        assert len(shared) == 2
        assert all(y == pytest.approx(midline, abs=1e-9) for _, y in shared)
        assert sorted(x for x, _ in shared) == [-3.0, 3.0]

    def test_areas_sum_to_bounding_box(self):
        rng = random.Random(1)
        towers = [
            tower(i, rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05))
            for i in range(1, 41)
        ]
        bbox = (-8.0, -8.0, 8.0, 8.0)
        cells = build_tessellation(towers, bbox=bbox)
        total = sum(c.area for c in cells)
        assert total == pytest.approx(256.0, rel=1e-6)

    def test_cells_agree_with_nearest_tower_scan(self):
        rng = random.Random(2)
        towers = [
            tower(i, rng.uniform(-0.04, 0.04), rng.uniform(-0.04, 0.04))
            for i in range(1, 31)
        ]
        bbox = (-6.0, -6.0, 6.0, 6.0)
        origin = ORIGIN
        cells = build_tessellation(towers, bbox=bbox, origin=origin)
        polys = {c.tower_id: c.polygon for c in cells}
        for _ in range(10_000):
            p = (rng.uniform(-6, 6), rng.uniform(-6, 6))
            owner = nearest_active_tower(p, towers, origin=origin)
            assert contains(polys[owner], p)

    def test_deactivating_a_tower_reassigns_only_its_points(self):
        rng = random.Random(5)
        towers = [
            tower(i, rng.uniform(-0.04, 0.04), rng.uniform(-0.04, 0.04))
            for i in range(1, 21)
        ]
        origin = ORIGIN
        grid = [
            (x / 2.0, y / 2.0) for x in range(-10, 11) for y in range(-10, 11)
        ]
        before = {p: nearest_active_tower(p, towers, origin=origin) for p in grid}
        victim = before[grid[0]]
        reduced = [
            TowerSite(t.tower_id, t.latitude, t.longitude, t.tower_id != victim)
            for t in towers
        ]
        after = {p: nearest_active_tower(p, reduced, origin=origin) for p in grid}
        for p in grid:
            if before[p] != victim:
                assert after[p] == before[p]
            else:
                assert after[p] != victim

    def test_equidistant_point_goes_to_smaller_tower_id(self):
        towers = [tower(7, 0.02, 0), tower(4, -0.02, 0)]
        assert nearest_active_tower((0.0, 0.0), towers, origin=ORIGIN) == 4

    def test_rejects_duplicate_tower_coordinates(self):
        towers = [tower(1, 0, 0), tower(2, 0, 0)]
        with pytest.raises(ConfigurationError, match="duplicate"):
            build_tessellation(towers)

    def test_rejects_empty_active_set(self):
        with pytest.raises(ConfigurationError, match="no active towers"):
            build_tessellation([tower(1, 0, 0, active=False)])

    def test_rejects_degenerate_bounding_box(self):
        with pytest.raises(ConfigurationError, match="degenerate"):
            build_tessellation([tower(1, 0, 0)], bbox=(0, 0, 0, 5))

    def test_inactive_towers_get_no_cell(self):
        towers = [tower(1, 0, 0), tower(2, 0.02, 0, active=False)]
        cells = build_tessellation(towers, pad_km=1.0)
        assert [c.tower_id for c in cells] == [1]

    def test_polygon_rows_for_export(self):
        cells = build_tessellation([tower(1, 0, 0)], pad_km=2.0)
        rows = geo.cells_table(cells)
        assert len(rows) == 1
        tid, area, wkt = rows[0]
        assert tid == 1
        assert area == pytest.approx(16.0, rel=1e-9)
        assert wkt.startswith("POLYGON((") and wkt.endswith("))")
        first = wkt[len("POLYGON((") : -2].split(", ")[0]
        last = wkt[len("POLYGON((") : -2].split(", ")[-1]
        assert first == last
