"""
空间划分测试：点在多边形内、区域分配、六边形网格、多边形文件
"""

import json
import logging
import math

import numpy as np
import pytest

from src.zone_partitioner import (Zone, SpatialPartition, HexGridSpec, validate_zone, zone_area, zone_centroid,
                                  point_in_zone, points_in_zone, assign_zone, assign_zones, generate_hex_grid,
                                  triangulate, polygon_signed_area, load_partition,
                                  save_partition)
from src.exceptions import InvalidPolygonError, PartitionError, DataFileNotFoundError

from tests.conftest import square


def ray_cast(p, ring):
    """独立的偶奇规则射线法"""
    x, y = p
    inside = False
    for (x1, y1), (x2, y2) in zip(ring[:-1], ring[1:]):
        if (y1 > y) != (y2 > y) and x < x1 + (y - y1) * (x2 - x1) / (y2 - y1):
            inside = not inside
    return inside


def edge_distance(p, ring):
    best = math.inf
    for (x1, y1), (x2, y2) in zip(ring[:-1], ring[1:]):
        dx, dy = x2 - x1, y2 - y1
        t = max(0.0, min(1.0, ((p[0] - x1) * dx + (p[1] - y1) * dy) / (dx * dx + dy * dy)))
        best = min(best, math.hypot(x1 + t * dx - p[0], y1 + t * dy - p[1]))
    return best


def random_star_polygon(rng, n=12):
    angles = np.sort(rng.uniform(0, 2 * np.pi, n))
    radii = rng.uniform(0.3, 1.0, n)
    ring = [(float(r * np.cos(a)), float(r * np.sin(a))) for a, r in zip(angles, radii)]
    return Zone('star', tuple(ring + [ring[0]]))


class TestPointInZone:
    def test_centroid_inside(self, unit_square):
        assert point_in_zone(zone_centroid(unit_square), unit_square)
        assert zone_centroid(unit_square) == pytest.approx((0.5, 0.5))

    def test_outside(self, unit_square):
        assert not point_in_zone((2.0, 2.0), unit_square)

    def test_boundary_is_inside(self, unit_square):
        assert point_in_zone((1.0, 0.5), unit_square)
        assert point_in_zone((0.0, 0.0), unit_square)

    def test_random_twelve_gon_against_ray_casting(self):
        rng = np.random.default_rng(3)
        zone = random_star_polygon(rng)
        validate_zone(zone)
        pts = rng.uniform(-1.1, 1.1, size=(4000, 2))
        got = points_in_zone(pts[:, 0], pts[:, 1], zone)
        for p, hit in zip(pts, got):
            if edge_distance(p, zone.ring) > 1e-9:
                assert hit == ray_cast(p, zone.ring)


class TestValidation:
    def test_valid_square(self, unit_square):
        validate_zone(unit_square)
        assert zone_area(unit_square) == pytest.approx(1.0)

    @pytest.mark.parametrize('ring', [
        ((0, 0), (1, 0), (0, 0)),
        ((0, 0), (1, 0), (1, 1), (0, 1)),
        ((0, 0), (1, 0), (2, 0), (0, 0)),
        ((0, 0), (2, 2), (2, 0), (0, 1), (0, 0)),
        ((0, 0), (float('nan'), 0), (1, 1), (0, 0)),
    ])
    def test_invalid(self, ring):
        with pytest.raises(InvalidPolygonError):
            validate_zone(Zone('bad', tuple(ring)))

    def test_triangulation_preserves_area(self):
        l_shape = Zone('L', ((0, 0), (2, 0), (2, 1), (1, 1), (1, 2), (0, 2), (0, 0)))
        triangles = triangulate(l_shape.xy)
        assert sum(polygon_signed_area(t) for t in triangles) == pytest.approx(3.0)


class TestAssignment:
    def test_interior_point(self, nine_zone_partition):
        assert assign_zone((2.5, 0.5), nine_zone_partition) == 'Q3'

    def test_outside_all(self, nine_zone_partition):
        assert assign_zone((5.0, 5.0), nine_zone_partition) is None
        assert assign_zone((float('nan'), 0.5), nine_zone_partition) is None

    def test_shared_boundary_goes_to_smallest_id(self, nine_zone_partition):
        assert assign_zone((1.0, 0.5), nine_zone_partition) == 'Q1'
        assert assign_zone((1.0, 1.0), nine_zone_partition) == 'Q1'
        assert assign_zone((2.0, 2.0), nine_zone_partition) == 'Q5'

    def test_batch_equals_per_point(self, nine_zone_partition):
        rng = np.random.default_rng(0)
        pts = rng.uniform(-0.5, 3.5, size=(3000, 2))
        pts[:20] = np.round(pts[:20])
        pts[20, 0] = np.nan
        batch = assign_zones(pts, nine_zone_partition)
        assert list(batch) == [assign_zone(tuple(p), nine_zone_partition) for p in pts]


class TestHexGrid:
    def test_disjoint_cover(self):
        r = 1.0
        part = generate_hex_grid(HexGridSpec(r, (0.0, 0.0, 10 * r, 10 * r)))
        rng = np.random.default_rng(1)
        pts = rng.uniform(0.0, 10 * r, size=(10000, 2))
        hits = np.zeros(len(pts), dtype=int)
        for zone in part.zones:
            hits += points_in_zone(pts[:, 0], pts[:, 1], zone)
        assert (hits == 1).all()

    def test_deterministic(self):
        spec = HexGridSpec(250.0, (0.0, 0.0, 3000.0, 2000.0))
        assert generate_hex_grid(spec).zones == generate_hex_grid(spec).zones

    def test_regular_cell_area(self):
        r = 3.0
        part = generate_hex_grid(HexGridSpec(r, (0.0, 0.0, 30.0, 30.0)))
        for zone in part.zones:
            validate_zone(zone)
            assert abs(zone_area(zone) - 1.5 * math.sqrt(3.0) * r * r) < 1e-9
        assert all(z.zone_id.startswith('hex_') for z in part.zones)

    def test_radius_larger_than_box(self, caplog):
        with caplog.at_level(logging.WARNING):
            part = generate_hex_grid(HexGridSpec(100.0, (0.0, 0.0, 10.0, 10.0)))
        assert part.zone_ids == ['hex_0_0']
        assert assign_zone((5.0, 5.0), part) == 'hex_0_0'
        assert '单单元' in caplog.text

    def test_bad_radius(self):
        with pytest.raises(PartitionError):
            HexGridSpec(0.0, (0.0, 0.0, 1.0, 1.0))


class TestPartitionFiles:
    def test_round_trip(self, nine_zone_partition, tmp_path):
        path = save_partition(nine_zone_partition, tmp_path / 'q.json')
        loaded = load_partition(path)
        assert loaded.level == 'quarters'
        assert loaded.zone_ids == nine_zone_partition.zone_ids

    def test_overlap_rejected(self, tmp_path):
        part = SpatialPartition('x', (square('A', 0, 0), square('B', 0.5, 0)))
        path = save_partition(part, tmp_path / 'x.json')
        with pytest.raises(PartitionError):
            load_partition(path)

    def test_duplicate_id(self, tmp_path):
        path = tmp_path / 'dup.json'
        entry = square('A', 0, 0).to_dict()
        path.write_text(json.dumps([entry, entry]), encoding='utf-8')
        with pytest.raises(PartitionError):
            load_partition(path, check_overlap=False)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataFileNotFoundError):
            load_partition(tmp_path / 'none.json')
