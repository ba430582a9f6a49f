#!/usr/bin/env python3
"""
空间划分模块

本模块用多边形划分表示空间层级（S_level），生成六边形网格，并把点分配到区域。
功能特点：
- 多边形区域加载/保存（JSON: [{zone_id, level, ring}]），加载时校验区域不变量
- 点在多边形内判定（闭多边形规则：边界算在内部）
- 批量点分配（向量化射线法 + x 排序预筛选），与逐点扫描结果一致
- 平顶正六边形网格生成，编号 hex_<col>_<row>
- 平面几何工具：鞋带面积、质心、耳切三角剖分、凸多边形裁剪、线段裁剪

设计原则：
- 划分构造后不可变，分配是纯函数
- 共享边界上的点分配给 zone_id 字典序最小的区域，保证跨平台确定性
- 不做拓扑修复：非法多边形在加载时带诊断信息拒收

作者：微出行流量预测软件团队
版本：v1.0
许可：商业软件
"""

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Dict, Any, Optional, List, Tuple, Union, Sequence

import numpy as np

try:
    from .exceptions import InvalidPolygonError, PartitionError, DataFileNotFoundError
    from .log_manager import log_manager
except ImportError:
    from exceptions import InvalidPolygonError, PartitionError, DataFileNotFoundError
    from log_manager import log_manager

__all__ = [
    'Zone', 'SpatialPartition', 'HexGridSpec', 'UNASSIGNED', 'EDGE_TOLERANCE',
    'point_in_zone', 'points_in_zone', 'assign_zone', 'assign_zones', 'generate_hex_grid',
    'load_partition', 'save_partition', 'validate_zone', 'zone_area', 'zone_centroid',
    'polygon_signed_area', 'triangulate', 'clip_polygon_convex',
    'overlap_samples',
]

logger = log_manager.get_logger('zone_partitioner')

UNASSIGNED = None
# 点到边的距离不超过该值即视为在边界上（米）
EDGE_TOLERANCE = 1e-9

Point = Tuple[float, float]


# ============== 平面几何工具 ==============

def polygon_signed_area(xy: np.ndarray) -> float:
    """鞋带公式求有向面积（逆时针为正）；xy 可以闭合也可以不闭合"""
    xy = np.asarray(xy, dtype=float)
    if len(xy) and np.array_equal(xy[0], xy[-1]):
        xy = xy[:-1]
    if len(xy) < 3:
        return 0.0
    x, y = xy[:, 0], xy[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _cross(o: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    return float((a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]))


def _on_segment(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> bool:
    return (min(a[0], b[0]) <= p[0] <= max(a[0], b[0])
            and min(a[1], b[1]) <= p[1] <= max(a[1], b[1]))


def _segments_intersect(p1, p2, p3, p4) -> bool:
    d1 = _cross(p3, p4, p1)
    d2 = _cross(p3, p4, p2)
    d3 = _cross(p1, p2, p3)
    d4 = _cross(p1, p2, p4)
    if ((d1 > 0 > d2) or (d1 < 0 < d2)) and ((d3 > 0 > d4) or (d3 < 0 < d4)):
        return True
    if d1 == 0 and _on_segment(p1, p3, p4):
        return True
    if d2 == 0 and _on_segment(p2, p3, p4):
        return True
    if d3 == 0 and _on_segment(p3, p1, p2):
        return True
    if d4 == 0 and _on_segment(p4, p1, p2):
        return True
    return False


def _point_in_triangle(p, a, b, c) -> bool:
    return _cross(a, b, p) >= 0 and _cross(b, c, p) >= 0 and _cross(c, a, p) >= 0


def triangulate(ring: np.ndarray) -> List[np.ndarray]:
    """
    耳切法三角剖分简单多边形

    Args:
        ring: 顶点环（可闭合）

    Returns:
        list[np.ndarray]: 逆时针三角形（每个 3x2）列表

    Raises:
        InvalidPolygonError: 找不到耳朵（多边形不是简单多边形）
    """
    pts = np.asarray(ring, dtype=float)
    if np.array_equal(pts[0], pts[-1]):
        pts = pts[:-1]
    if polygon_signed_area(pts) < 0:
        pts = pts[::-1]
    idx = list(range(len(pts)))
    triangles: List[np.ndarray] = []
    guard = 0
    while len(idx) > 3:
        ear_found = False
        n = len(idx)
        for k in range(n):
            i_prev, i_cur, i_next = idx[(k - 1) % n], idx[k], idx[(k + 1) % n]
            a, b, c = pts[i_prev], pts[i_cur], pts[i_next]
            turn = _cross(a, b, c)
            if turn < 0:
                continue
            if turn == 0:
                # 共线顶点直接移除
                idx.pop(k)
                ear_found = True
                break
            if any(_point_in_triangle(pts[j], a, b, c)
                   for j in idx if j not in (i_prev, i_cur, i_next)
                   and not (np.array_equal(pts[j], a) or np.array_equal(pts[j], b) or np.array_equal(pts[j], c))):
                continue
            triangles.append(np.array([a, b, c]))
            idx.pop(k)
            ear_found = True
            break
        guard += 1
        if not ear_found or guard > 10 * len(pts) + 10:
            raise InvalidPolygonError('?', '三角剖分失败，多边形不是简单多边形')
    if len(idx) == 3 and _cross(pts[idx[0]], pts[idx[1]], pts[idx[2]]) > 0:
        triangles.append(pts[idx])
    return triangles


def clip_polygon_convex(subject: np.ndarray, clip: np.ndarray) -> np.ndarray:
    """
    Sutherland-Hodgman 裁剪：任意简单多边形 subject 裁剪到凸多边形 clip

    Args:
        subject: 被裁剪多边形顶点（不闭合）
        clip: 凸裁剪多边形顶点（逆时针，不闭合）

    Returns:
        np.ndarray: 裁剪结果顶点（可能为空）
    """
    output = [np.asarray(p, dtype=float) for p in subject]
    clip = np.asarray(clip, dtype=float)
    m = len(clip)
    for i in range(m):
        a, b = clip[i], clip[(i + 1) % m]
        if not output:
            break
        inputs = output
        output = []
        prev = inputs[-1]
        prev_in = _cross(a, b, prev) >= 0
        for cur in inputs:
            cur_in = _cross(a, b, cur) >= 0
            if cur_in:
                if not prev_in:
                    output.append(_line_intersection(prev, cur, a, b))
                output.append(cur)
            elif prev_in:
                output.append(_line_intersection(prev, cur, a, b))
            prev, prev_in = cur, cur_in
    return np.array(output, dtype=float).reshape(-1, 2)


def _line_intersection(p1, p2, a, b) -> np.ndarray:
    d = p2 - p1
    e = b - a
    denom = d[0] * e[1] - d[1] * e[0]
    if denom == 0:
        return p1.copy()
    t = ((a[0] - p1[0]) * e[1] - (a[1] - p1[1]) * e[0]) / denom
    return p1 + t * d


# ============== 区域与划分 ==============

@dataclass(frozen=True)
class Zone:
    """一个空间单元：闭合顶点环表示的简单多边形"""
    zone_id: str
    ring: Tuple[Point, ...]
    level: str = ''

    @cached_property
    def xy(self) -> np.ndarray:
        return np.asarray(self.ring, dtype=float)

    @cached_property
    def signed_area(self) -> float:
        return polygon_signed_area(self.xy)

    @cached_property
    def bbox(self) -> Tuple[float, float, float, float]:
        return (float(self.xy[:, 0].min()), float(self.xy[:, 1].min()),
                float(self.xy[:, 0].max()), float(self.xy[:, 1].max()))

    @cached_property
    def triangles(self) -> List[np.ndarray]:
        try:
            return triangulate(self.xy)
        except InvalidPolygonError:
            raise InvalidPolygonError(self.zone_id, '三角剖分失败')

    def to_dict(self) -> Dict[str, Any]:
        return {'zone_id': self.zone_id, 'level': self.level, 'ring': [list(p) for p in self.ring]}


@dataclass(frozen=True)
class SpatialPartition:
    """一个空间层级的区域集合"""
    level: str
    zones: Tuple[Zone, ...] = field(default_factory=tuple)

    @cached_property
    def sorted_zones(self) -> Tuple[Zone, ...]:
        return tuple(sorted(self.zones, key=lambda z: z.zone_id))

    @cached_property
    def zone_ids(self) -> List[str]:
        return [z.zone_id for z in self.sorted_zones]

    @cached_property
    def _index(self) -> Dict[str, Zone]:
        return {z.zone_id: z for z in self.zones}

    def zone(self, zone_id: str) -> Zone:
        return self._index[zone_id]

    def __len__(self) -> int:
        return len(self.zones)


@dataclass(frozen=True)
class HexGridSpec:
    """六边形网格参数：外接圆半径、原点、外包框 (min_x, min_y, max_x, max_y)"""
    circumradius_m: float
    bounding_box: Tuple[float, float, float, float]
    origin: Optional[Point] = None

    def __post_init__(self):
        if not (self.circumradius_m > 0 and math.isfinite(self.circumradius_m)):
            raise PartitionError(f"六边形外接圆半径必须为正数: {self.circumradius_m}",
                                 {"circumradius_m": self.circumradius_m})
        min_x, min_y, max_x, max_y = self.bounding_box
        if not (max_x > min_x and max_y > min_y):
            raise PartitionError(f"外包框退化: {self.bounding_box}", {"bounding_box": list(self.bounding_box)})


def validate_zone(zone: Zone) -> None:
    """
    校验区域不变量

    Raises:
        InvalidPolygonError: 未闭合 / 顶点不足 / 坐标非有限 / 零面积 / 自相交
    """
    xy = zone.xy
    if xy.ndim != 2 or xy.shape[1] != 2:
        raise InvalidPolygonError(zone.zone_id, '顶点必须是 [x, y] 对')
    if len(xy) < 4:
        raise InvalidPolygonError(zone.zone_id, f'顶点环至少需要 4 个顶点，当前 {len(xy)}')
    if not np.isfinite(xy).all():
        raise InvalidPolygonError(zone.zone_id, '坐标含非有限值')
    if not np.array_equal(xy[0], xy[-1]):
        raise InvalidPolygonError(zone.zone_id, '顶点环未闭合（首顶点需在末尾重复）')
    if zone.signed_area == 0 or not math.isfinite(zone.signed_area):
        raise InvalidPolygonError(zone.zone_id, '有向面积为 0')
    n = len(xy) - 1
    for i in range(n):
        for j in range(i + 1, n):
            if j == i + 1 or (i == 0 and j == n - 1):
                continue
            if _segments_intersect(xy[i], xy[i + 1], xy[j], xy[j + 1]):
                raise InvalidPolygonError(zone.zone_id, f'边 {i} 与边 {j} 相交')


def zone_area(zone: Zone) -> float:
    """区域面积（平方米）"""
    return abs(zone.signed_area)


def zone_centroid(zone: Zone) -> Point:
    """多边形质心"""
    xy = zone.xy[:-1] if np.array_equal(zone.xy[0], zone.xy[-1]) else zone.xy
    x, y = xy[:, 0], xy[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    a = zone.signed_area
    return (float(np.sum((x + xn) * cross) / (6.0 * a)), float(np.sum((y + yn) * cross) / (6.0 * a)))


# ============== 点在多边形内 ==============

def points_in_zone(xs: np.ndarray, ys: np.ndarray, zone: Zone) -> np.ndarray:
    """
    向量化闭多边形判定：射线法 + 边界容差检测

    Args:
        xs, ys: 点坐标数组
        zone: 区域

    Returns:
        np.ndarray: 布尔数组
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    inside = np.zeros(xs.shape, dtype=bool)
    on_edge = np.zeros(xs.shape, dtype=bool)
    xy = zone.xy
    for i in range(len(xy) - 1):
        x1, y1 = xy[i]
        x2, y2 = xy[i + 1]
        dx, dy = x2 - x1, y2 - y1
        seg_len2 = dx * dx + dy * dy
        # 点到线段距离
        t = np.clip(((xs - x1) * dx + (ys - y1) * dy) / seg_len2, 0.0, 1.0) if seg_len2 > 0 else 0.0
        px = x1 + t * dx - xs
        py = y1 + t * dy - ys
        on_edge |= (px * px + py * py) <= EDGE_TOLERANCE * EDGE_TOLERANCE
        # 半开区间规则计数穿越
        crosses = (y1 > ys) != (y2 > ys)
        if dy != 0:
            x_int = x1 + (ys - y1) * dx / dy
            inside ^= crosses & (xs < x_int)
    return inside | on_edge


def point_in_zone(p: Sequence[float], zone: Zone) -> bool:
    """
    点是否在区域内或边界上

    Examples:
        >>> point_in_zone((0.5, 0.5), unit_square)
        True
    """
    return bool(points_in_zone(np.array([p[0]]), np.array([p[1]]), zone)[0])


def assign_zone(p: Sequence[float], part: SpatialPartition) -> Optional[str]:
    """
    把单个点分配到唯一包含它的区域；共享边界取最小 zone_id；无区域包含时返回 UNASSIGNED
    """
    if not all(math.isfinite(v) for v in p):
        return UNASSIGNED
    for zone in part.sorted_zones:
        min_x, min_y, max_x, max_y = zone.bbox
        if (min_x - EDGE_TOLERANCE <= p[0] <= max_x + EDGE_TOLERANCE
                and min_y - EDGE_TOLERANCE <= p[1] <= max_y + EDGE_TOLERANCE
                and point_in_zone(p, zone)):
            return zone.zone_id
    return UNASSIGNED


def assign_zones(points: np.ndarray, part: SpatialPartition) -> np.ndarray:
    """
    批量分配：按 zone_id 升序处理区域，只给尚未分配的点赋值，结果与逐点 assign_zone 一致

    Args:
        points: (N, 2) 坐标数组，NaN 坐标得到 UNASSIGNED
        part: 空间划分

    Returns:
        np.ndarray: 长度 N 的 object 数组（zone_id 或 None）
    """
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    result = np.full(len(points), UNASSIGNED, dtype=object)
    finite = np.isfinite(points).all(axis=1)
    candidates = np.flatnonzero(finite)
    if len(candidates) == 0:
        return result
    order = candidates[np.argsort(points[candidates, 0], kind='stable')]
    sorted_x = points[order, 0]
    assigned = np.zeros(len(points), dtype=bool)
    for zone in part.sorted_zones:
        min_x, min_y, max_x, max_y = zone.bbox
        lo = np.searchsorted(sorted_x, min_x - EDGE_TOLERANCE, side='left')
        hi = np.searchsorted(sorted_x, max_x + EDGE_TOLERANCE, side='right')
        if hi <= lo:
            continue
        idx = order[lo:hi]
        idx = idx[~assigned[idx]]
        ys = points[idx, 1]
        idx = idx[(ys >= min_y - EDGE_TOLERANCE) & (ys <= max_y + EDGE_TOLERANCE)]
        if len(idx) == 0:
            continue
        hit = idx[points_in_zone(points[idx, 0], points[idx, 1], zone)]
        result[hit] = zone.zone_id
        assigned[hit] = True
    return result


# ============== 六边形网格 ==============

def _hexagon(cx: float, cy: float, r: float) -> Tuple[Point, ...]:
    ring = [(cx + r * math.cos(math.radians(60 * k)), cy + r * math.sin(math.radians(60 * k)))
            for k in range(6)]
    ring.append(ring[0])
    return tuple(ring)


def generate_hex_grid(spec: HexGridSpec, level: str = 'hex_grid') -> SpatialPartition:
    """
    生成铺满外包框的平顶正六边形网格

    列间距 1.5r，行间距 √3·r，奇数列上移 √3·r/2；与外包框相交（交集面积 > 0）的单元都保留。

    Args:
        spec: 网格参数
        level: 层级名

    Returns:
        SpatialPartition: 单元编号 hex_<col>_<row>
    """
    r = float(spec.circumradius_m)
    min_x, min_y, max_x, max_y = spec.bounding_box
    ox, oy = spec.origin if spec.origin is not None else (min_x, min_y)

    if r >= max(max_x - min_x, max_y - min_y):
        logger.warning("外接圆半径大于外包框，生成单单元退化网格",
                       circumradius_m=r, bounding_box=spec.bounding_box)
        cx, cy = (min_x + max_x) / 2.0, (min_y + max_y) / 2.0
        return SpatialPartition(level=level, zones=(Zone('hex_0_0', _hexagon(cx, cy, r), level),))

    col_step = 1.5 * r
    row_step = math.sqrt(3.0) * r
    box = np.array([[min_x, min_y], [max_x, min_y], [max_x, max_y], [min_x, max_y]])
    col_lo = math.floor((min_x - ox - r) / col_step)
    col_hi = math.ceil((max_x - ox + r) / col_step)
    row_lo = math.floor((min_y - oy - row_step) / row_step)
    row_hi = math.ceil((max_y - oy + row_step) / row_step)

    zones: List[Zone] = []
    for col in range(col_lo, col_hi + 1):
        cx = ox + col * col_step
        shift = row_step / 2.0 if col % 2 else 0.0
        for row in range(row_lo, row_hi + 1):
            cy = oy + row * row_step + shift
            if cx + r <= min_x or cx - r >= max_x or cy + row_step / 2 <= min_y or cy - row_step / 2 >= max_y:
                continue
            ring = _hexagon(cx, cy, r)
            clipped = clip_polygon_convex(np.asarray(ring[:-1]), box)
            if len(clipped) < 3 or abs(polygon_signed_area(clipped)) <= 0:
                continue
            zones.append(Zone(f'hex_{col}_{row}', ring, level))
    logger.info("六边形网格生成完成", cells=len(zones), circumradius_m=r)
    return SpatialPartition(level=level, zones=tuple(zones))


# ============== 文件读写 ==============

def overlap_samples(part: SpatialPartition, n_samples: int = 2000, seed: int = 0) -> int:
    """
    抽样检查区域内部互不相交：返回落在多个区域内的样本点数
    """
    if len(part) < 2:
        return 0
    rng = np.random.default_rng(seed)
    boxes = np.array([z.bbox for z in part.zones])
    lo = boxes[:, :2].min(axis=0)
    hi = boxes[:, 2:].max(axis=0)
    pts = rng.uniform(lo, hi, size=(n_samples, 2))
    counts = np.zeros(n_samples, dtype=int)
    for zone in part.zones:
        counts += points_in_zone(pts[:, 0], pts[:, 1], zone)
    return int((counts > 1).sum())


def load_partition(path: Union[str, Path], level: Optional[str] = None,
                   check_overlap: bool = True) -> SpatialPartition:
    """
    加载多边形 JSON 文件并校验

    Args:
        path: JSON 文件，数组 [{zone_id, level, ring: [[x, y], ...]}]
        level: 层级名，缺省取文件中第一个区域的 level
        check_overlap: 是否抽样检查区域互不相交

    Returns:
        SpatialPartition

    Raises:
        DataFileNotFoundError: 文件不存在
        InvalidPolygonError: 任一区域不满足不变量
        PartitionError: zone_id 重复、格式错误或区域相交
    """
    path = Path(path)
    if not path.exists():
        raise DataFileNotFoundError(str(path))
    with open(path, 'r', encoding='utf-8') as f:
        try:
            raw = json.load(f)
        except json.JSONDecodeError as e:
            raise PartitionError(f"多边形文件格式错误: {path} - {e}", {"file_path": str(path)})
    if not isinstance(raw, list):
        raise PartitionError(f"多边形文件顶层必须是数组: {path}", {"file_path": str(path)})

    zones: List[Zone] = []
    seen = set()
    for entry in raw:
        zone_id = str(entry.get('zone_id'))
        if zone_id in seen:
            raise PartitionError(f"zone_id 重复: {zone_id}", {"zone_id": zone_id})
        seen.add(zone_id)
        ring = tuple((float(x), float(y)) for x, y in entry.get('ring', []))
        zone = Zone(zone_id, ring, str(entry.get('level', level or '')))
        validate_zone(zone)
        zones.append(zone)

    level = level or (zones[0].level if zones else path.stem)
    part = SpatialPartition(level=level, zones=tuple(zones))
    if check_overlap:
        overlaps = overlap_samples(part)
        if overlaps:
            raise PartitionError(f"区域内部相交: {overlaps} 个抽样点落在多个区域中",
                                 {"file_path": str(path), "overlap_samples": overlaps})
    logger.info(f"空间划分加载完成: {path}", level=level, zones=len(zones))
    return part


def save_partition(part: SpatialPartition, path: Union[str, Path]) -> Path:
    """保存划分为多边形 JSON 文件"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = [z.to_dict() for z in part.zones]
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        json.dump(payload, f, ensure_ascii=False)
        f.write('\n')
    return path


if __name__ == "__main__":
    """
    命令行入口，用于生成六边形网格或检查多边形文件
    """
    import argparse

    parser = argparse.ArgumentParser(description='空间划分工具')
    subparsers = parser.add_subparsers(dest='action', help='可用操作')

    hex_parser = subparsers.add_parser('hex', help='生成六边形网格')
    hex_parser.add_argument('--bbox', nargs=4, type=float, required=True, help='min_x min_y max_x max_y')
    hex_parser.add_argument('--radius', type=float, default=250.0, help='外接圆半径（米）')
    hex_parser.add_argument('--output', required=True, help='输出 JSON 路径')

    check_parser = subparsers.add_parser('check', help='校验多边形文件')
    check_parser.add_argument('--path', required=True, help='多边形 JSON 路径')

    args = parser.parse_args()

    if args.action == 'hex':
        grid = generate_hex_grid(HexGridSpec(args.radius, tuple(args.bbox)))
        save_partition(grid, args.output)
        print(f"已生成 {len(grid)} 个六边形单元: {args.output}")
    elif args.action == 'check':
        loaded = load_partition(args.path)
        for z in loaded.sorted_zones:
            print(f"{z.zone_id}: area={zone_area(z):.3f}")
    else:
        parser.print_help()
