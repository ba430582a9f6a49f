"""
空间特征测试：点计数、线长度、面积、区域特征表
"""

import numpy as np
import pytest

from src.spatial_features import (SpatialLayer, spatial_point_count, spatial_line_length, spatial_polygon_area,
                                  zone_feature_table, centroid_distances, load_layer, save_layer)
from src.zone_partitioner import SpatialPartition, Zone, points_in_zone, point_in_zone
from src.exceptions import GeometryKindError, FeatureError

from tests.test_zone_partitioner import random_star_polygon


def convex_hull(points):
    pts = sorted(map(tuple, points))

    def half(seq):
        out = []
        for p in seq:
            while len(out) >= 2 and ((out[-1][0] - out[-2][0]) * (p[1] - out[-2][1])
                                     - (out[-1][1] - out[-2][1]) * (p[0] - out[-2][0])) <= 0:
                out.pop()
            out.append(p)
        return out

    lower, upper = half(pts), half(reversed(pts))
    hull = lower[:-1] + upper[:-1]
    return [list(p) for p in hull + [hull[0]]]


class TestPointCount:
    def test_three_stops_in_one_zone(self, nine_zone_partition):
        layer = SpatialLayer('bus_stops', 'point', [[0.2, 0.2], [0.5, 0.7], [0.9, 0.1], [2.5, 2.5]])
        counts = spatial_point_count(layer, nine_zone_partition)
        assert counts['Q1'] == 3
        assert counts['Q9'] == 1
        assert sum(counts.values()) == 4

    def test_empty_layer(self, nine_zone_partition):
        counts = spatial_point_count(SpatialLayer('empty', 'point', []), nine_zone_partition)
        assert set(counts.values()) == {0}
        assert len(counts) == 9

    def test_exhaustive_scan(self, nine_zone_partition):
        rng = np.random.default_rng(8)
        pts = rng.uniform(-0.2, 3.2, size=(5000, 2))
        counts = spatial_point_count(SpatialLayer('p', 'point', pts.tolist()), nine_zone_partition)
        expected = {z: 0 for z in nine_zone_partition.zone_ids}
        for p in pts:
            for zone in nine_zone_partition.sorted_zones:
                if point_in_zone(p, zone):
                    expected[zone.zone_id] += 1
                    break
        assert counts == expected

    def test_wrong_kind(self, nine_zone_partition):
        with pytest.raises(GeometryKindError):
            spatial_point_count(SpatialLayer('lanes', 'line', [[[0, 0], [1, 1]]]), nine_zone_partition)


class TestLineLength:
    def test_segment_inside(self):
        part = SpatialPartition('x', (Zone('Z', ((0, 0), (20, 0), (20, 20), (0, 20), (0, 0))),))
        lengths = spatial_line_length(SpatialLayer('l', 'line', [[[2, 5], [12, 5]]]), part)
        assert lengths['Z'] == pytest.approx(10.0)

    def test_crossing_unit_square(self, unit_square):
        part = SpatialPartition('x', (unit_square,))
        lengths = spatial_line_length(SpatialLayer('l', 'line', [[[-0.5, 0.5], [1.5, 0.5]]]), part)
        assert lengths['U'] == pytest.approx(1.0)

    def test_split_across_zones(self, nine_zone_partition):
        layer = SpatialLayer('l', 'line', [[[0.0, 0.5], [3.0, 0.5]]])
        lengths = spatial_line_length(layer, nine_zone_partition)
        for zone_id in ('Q1', 'Q2', 'Q3'):
            assert lengths[zone_id] == pytest.approx(1.0)
        assert lengths['Q5'] == 0.0

    def test_shared_boundary_counted_once(self, nine_zone_partition):
        lengths = spatial_line_length(SpatialLayer('l', 'line', [[[1.0, 0.2], [1.0, 0.8]]]), nine_zone_partition)
        assert lengths['Q1'] == pytest.approx(0.6)
        assert sum(lengths.values()) == pytest.approx(0.6)

    def test_non_convex_zone(self):
        l_shape = Zone('L', ((0, 0), (2, 0), (2, 1), (1, 1), (1, 2), (0, 2), (0, 0)))
        part = SpatialPartition('x', (l_shape,))
        diagonal = spatial_line_length(SpatialLayer('l', 'line', [[[0.0, 0.0], [1.0, 1.0]]]), part)
        assert diagonal['L'] == pytest.approx(np.sqrt(2.0))
        notch = spatial_line_length(SpatialLayer('l', 'line', [[[0.5, 1.5], [1.5, 1.5]]]), part)
        assert notch['L'] == pytest.approx(0.5)

    def test_monte_carlo(self):
        rng = np.random.default_rng(9)
        zone = random_star_polygon(rng)
        part = SpatialPartition('x', (zone,))
        for _ in range(3):
            p, q = rng.uniform(-1.2, 1.2, size=(2, 2))
            length = float(np.hypot(*(q - p)))
            t = rng.random(200000)
            xs, ys = p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])
            estimate = points_in_zone(xs, ys, zone).mean() * length
            got = spatial_line_length(SpatialLayer('l', 'line', [[p.tolist(), q.tolist()]]), part)['star']
            assert abs(got - estimate) <= 0.005 * length


class TestPolygonArea:
    def test_identical_polygon(self, unit_square):
        part = SpatialPartition('x', (unit_square,))
        areas = spatial_polygon_area(SpatialLayer('a', 'polygon', [[list(p) for p in unit_square.ring]]), part)
        assert areas['U'] == pytest.approx(1.0)

    def test_disjoint(self, unit_square):
        part = SpatialPartition('x', (unit_square,))
        far = [[5, 5], [6, 5], [6, 6], [5, 6], [5, 5]]
        assert spatial_polygon_area(SpatialLayer('a', 'polygon', [far]), part)['U'] == 0.0

    def test_monte_carlo(self):
        rng = np.random.default_rng(10)
        zone = random_star_polygon(rng)
        part = SpatialPartition('x', (zone,))
        for _ in range(3):
            ring = convex_hull(rng.uniform(-1.0, 1.0, size=(8, 2)))
            poly = Zone('poly', tuple(map(tuple, ring)))
            xs, ys = rng.uniform(-1.0, 1.0, size=(2, 200000))
            both = points_in_zone(xs, ys, zone) & points_in_zone(xs, ys, poly)
            estimate = both.mean() * 4.0
            got = spatial_polygon_area(SpatialLayer('a', 'polygon', [ring]), part)['star']
            assert abs(got - estimate) <= 0.005 * 4.0


class TestFeatureTable:
    def test_columns_and_index(self, tiny_city):
        table = zone_feature_table(tiny_city.layers, tiny_city.partition)
        assert list(table.index) == tiny_city.partition.zone_ids
        assert list(table.columns) == ['bike_lanes_length_m', 'bus_stops_count', 'parks_area_m2', 'zone_area_m2']
        assert (table['bus_stops_count'] >= 1).all()
        assert table['zone_area_m2'].tolist() == pytest.approx([500.0 ** 2] * 4)

    def test_layer_round_trip(self, tiny_city, tmp_path):
        for layer in (lay for lay in tiny_city.layers if lay.elements):
            back = load_layer(save_layer(layer, tmp_path / f'{layer.name}.json'))
            assert back.geometry_kind == layer.geometry_kind
            assert np.allclose(np.asarray(back.elements[0], dtype=float), np.asarray(layer.elements[0], dtype=float))

    def test_invalid_element(self):
        with pytest.raises(FeatureError):
            SpatialLayer('a', 'polygon', [[[0, 0], [1, 0], [1, 1]]])

    def test_centroid_distances(self, nine_zone_partition):
        d = centroid_distances(nine_zone_partition)
        assert d[('Q1', 'Q1')] == 0.0
        assert d[('Q1', 'Q3')] == pytest.approx(2.0)
        assert len(d) == 81
