#!/usr/bin/env python3
"""
空间特征模块

本模块把空间图层（点 P / 线 L / 面 A）按区域汇总为时间不变的空间特征。
功能特点：
- 点图层：每个区域内的设施数量（闭边界规则 + 划分的并列规则）
- 线图层：区域内的线段总长度（米），共享边界上的线段按并列规则只计一次
- 面图层：与区域相交的面积总和（平方米）
- 区域自身面积、区域质心距离
- 图层文件 JSON 读写：{name, geometry_kind, elements}

设计原则：
- 区域先做耳切三角剖分，多边形对每个凸三角形裁剪后求和；线段在边界交点处切分后按中点归属
- 外包框预筛选，跳过不可能相交的区域

作者：微出行流量预测软件团队
版本：v1.0
许可：商业软件
"""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Any, List, Tuple, Union

import numpy as np
import pandas as pd

try:
    from .exceptions import GeometryKindError, FeatureError, DataFileNotFoundError
    from .log_manager import log_manager
    from .zone_partitioner import (SpatialPartition, assign_zones, clip_polygon_convex,
                                   polygon_signed_area, zone_area, zone_centroid)
except ImportError:
    from exceptions import GeometryKindError, FeatureError, DataFileNotFoundError
    from log_manager import log_manager
    from zone_partitioner import (SpatialPartition, assign_zones, clip_polygon_convex,
                                  polygon_signed_area, zone_area, zone_centroid)

__all__ = [
    'SpatialLayer', 'GEOMETRY_KINDS', 'load_layer', 'save_layer',
    'spatial_point_count', 'spatial_line_length', 'spatial_polygon_area',
    'zone_feature_table', 'centroid_distances',
]

logger = log_manager.get_logger('spatial_features')

GEOMETRY_KINDS = ('point', 'line', 'polygon')


@dataclass
class SpatialLayer:
    """空间图层：点为 [x, y]，线为顶点序列，面为闭合顶点环"""
    name: str
    geometry_kind: str
    elements: List[Any] = field(default_factory=list)

    def __post_init__(self):
        if self.geometry_kind not in GEOMETRY_KINDS:
            raise FeatureError(f"图层 {self.name} 的几何类型非法: {self.geometry_kind}",
                               {"layer": self.name, "geometry_kind": self.geometry_kind})
        for i, element in enumerate(self.elements):
            arr = np.asarray(element, dtype=float)
            if self.geometry_kind == 'point':
                ok = arr.shape == (2,)
            elif self.geometry_kind == 'line':
                ok = arr.ndim == 2 and arr.shape[1] == 2 and len(arr) >= 2
            else:
                ok = (arr.ndim == 2 and arr.shape[1] == 2 and len(arr) >= 4
                      and np.array_equal(arr[0], arr[-1]))
            if not ok or not np.isfinite(arr).all():
                raise FeatureError(f"图层 {self.name} 第 {i} 个元素不符合 {self.geometry_kind} 几何",
                                   {"layer": self.name, "element": i})

    def require(self, kind: str) -> None:
        if self.geometry_kind != kind:
            raise GeometryKindError(self.name, kind, self.geometry_kind)


def load_layer(path: Union[str, Path]) -> SpatialLayer:
    """读取图层 JSON 文件"""
    path = Path(path)
    if not path.exists():
        raise DataFileNotFoundError(str(path))
    with open(path, 'r', encoding='utf-8') as f:
        raw = json.load(f)
    return SpatialLayer(name=str(raw['name']), geometry_kind=str(raw['geometry_kind']),
                        elements=list(raw.get('elements', [])))


def save_layer(layer: SpatialLayer, path: Union[str, Path]) -> Path:
    """写出图层 JSON 文件"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {'name': layer.name, 'geometry_kind': layer.geometry_kind,
               'elements': [np.asarray(e, dtype=float).tolist() for e in layer.elements]}
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        json.dump(payload, f, ensure_ascii=False)
        f.write('\n')
    return path


def _bbox_overlap(a: Tuple[float, float, float, float], b: Tuple[float, float, float, float]) -> bool:
    return not (a[2] < b[0] or b[2] < a[0] or a[3] < b[1] or b[3] < a[1])


def spatial_point_count(layer: SpatialLayer, part: SpatialPartition) -> Dict[str, int]:
    """
    每个区域内的图层点数

    Raises:
        GeometryKindError: 图层不是点图层

    Examples:
        >>> spatial_point_count(bus_stops, quarters)["Q1"]
        3
    """
    layer.require('point')
    counts = {zone_id: 0 for zone_id in part.zone_ids}
    if not layer.elements:
        return counts
    assigned = assign_zones(np.asarray(layer.elements, dtype=float), part)
    for zone_id in assigned:
        if zone_id is not None:
            counts[zone_id] += 1
    return counts


def _split_parameters(p: np.ndarray, q: np.ndarray, ring: np.ndarray) -> List[float]:
    """线段 pq 与区域边界相交处的参数 t（含共线重叠段的端点投影）"""
    d = q - p
    dd = float(np.dot(d, d))
    ts = []
    for a, b in zip(ring[:-1], ring[1:]):
        e = b - a
        den = d[0] * e[1] - d[1] * e[0]
        w = a - p
        if den == 0:
            if w[0] * d[1] - w[1] * d[0] == 0 and dd > 0:
                ts += [float(np.dot(a - p, d)) / dd, float(np.dot(b - p, d)) / dd]
            continue
        t = (w[0] * e[1] - w[1] * e[0]) / den
        u = (w[0] * d[1] - w[1] * d[0]) / den
        if 0.0 <= u <= 1.0:
            ts.append(float(t))
    return ts


def spatial_line_length(layer: SpatialLayer, part: SpatialPartition) -> Dict[str, float]:
    """
    每个区域内线图层的长度（米）

    线段在与区域边界的交点处切开，每一小段按中点归属区域，
    落在共享边界上的小段归入 zone_id 最小的区域，与点分配规则一致。

    Raises:
        GeometryKindError: 图层不是线图层
    """
    layer.require('line')
    lengths = {zone_id: 0.0 for zone_id in part.zone_ids}
    midpoints, pieces = [], []
    for line in layer.elements:
        arr = np.asarray(line, dtype=float)
        for p, q in zip(arr[:-1], arr[1:]):
            length = math.hypot(*(q - p))
            if length == 0:
                continue
            seg_box = (min(p[0], q[0]), min(p[1], q[1]), max(p[0], q[0]), max(p[1], q[1]))
            ts = [0.0, 1.0]
            for zone in part.sorted_zones:
                if _bbox_overlap(seg_box, zone.bbox):
                    ts += _split_parameters(p, q, zone.xy)
            ts = np.unique(np.clip(ts, 0.0, 1.0))
            for t0, t1 in zip(ts[:-1], ts[1:]):
                if t1 > t0:
                    midpoints.append(p + (t0 + t1) / 2 * (q - p))
                    pieces.append((t1 - t0) * length)
    if not pieces:
        return lengths
    for zone_id, piece in zip(assign_zones(np.asarray(midpoints), part), pieces):
        if zone_id is not None:
            lengths[zone_id] += piece
    return lengths


def spatial_polygon_area(layer: SpatialLayer, part: SpatialPartition) -> Dict[str, float]:
    """
    每个区域与面图层多边形的相交面积总和（平方米）

    Raises:
        GeometryKindError: 图层不是面图层
    """
    layer.require('polygon')
    polygons = []
    for ring in layer.elements:
        arr = np.asarray(ring, dtype=float)[:-1]
        polygons.append((arr, (arr[:, 0].min(), arr[:, 1].min(), arr[:, 0].max(), arr[:, 1].max())))
    areas: Dict[str, float] = {}
    for zone in part.sorted_zones:
        total = 0.0
        for arr, box in polygons:
            if not _bbox_overlap(box, zone.bbox):
                continue
            for tri in zone.triangles:
                clipped = clip_polygon_convex(arr, tri)
                if len(clipped) >= 3:
                    total += abs(polygon_signed_area(clipped))
        areas[zone.zone_id] = total
    return areas


def zone_feature_table(layers: List[SpatialLayer], part: SpatialPartition) -> pd.DataFrame:
    """
    汇总全部图层的区域级空间特征

    列名：点图层 {name}_count，线图层 {name}_length_m，面图层 {name}_area_m2，以及 zone_area_m2。

    Returns:
        DataFrame: 以 zone_id 为索引（升序）
    """
    table = pd.DataFrame(index=pd.Index(part.zone_ids, name='zone_id'))
    for layer in sorted(layers, key=lambda lay: lay.name):
        if layer.geometry_kind == 'point':
            values = spatial_point_count(layer, part)
            column = f'{layer.name}_count'
        elif layer.geometry_kind == 'line':
            values = spatial_line_length(layer, part)
            column = f'{layer.name}_length_m'
        else:
            values = spatial_polygon_area(layer, part)
            column = f'{layer.name}_area_m2'
        table[column] = pd.Series(values, dtype=float)
    table['zone_area_m2'] = [zone_area(part.zone(z)) for z in part.zone_ids]
    logger.info("区域空间特征计算完成", level=part.level, zones=len(table), columns=table.shape[1])
    return table


def centroid_distances(part: SpatialPartition) -> Dict[Tuple[str, str], float]:
    """有序区域对的质心欧氏距离（米）"""
    centroids = {z: zone_centroid(part.zone(z)) for z in part.zone_ids}
    return {
        (a, b): math.hypot(centroids[a][0] - centroids[b][0], centroids[a][1] - centroids[b][1])
        for a in part.zone_ids for b in part.zone_ids
    }


if __name__ == "__main__":
    """
    命令行入口，用于计算区域空间特征表
    """
    import argparse

    try:
        from .zone_partitioner import load_partition
    except ImportError:
        from zone_partitioner import load_partition

    parser = argparse.ArgumentParser(description='空间特征工具')
    parser.add_argument('--zones', required=True, help='多边形 JSON 路径')
    parser.add_argument('--layers', nargs='+', required=True, help='图层 JSON 路径')
    args = parser.parse_args()

    partition = load_partition(args.zones)
    print(zone_feature_table([load_layer(p) for p in args.layers], partition).to_string())
