#!/usr/bin/env python3
"""
流量网络模块

本模块由已分配区域的行程构建随时间变化的加权有向流量图 G_t^s，
并计算节点、边、全图三个粒度的网络特征。
功能特点：
- 按时间尺度（小时/日/月）和空间层级聚合 OD 流量，边权为行程数
- 度中心性（全部/入/出）、节点强度（加权入度/出度）
- Brandes 介数中心性（节点/边，无权最短路）
- BFS 最短路跳数，不可达时使用哨兵值 n
- 单位容量 Edmonds-Karp 局部边连通度
- 平均度连通性、Fagiolo 有向聚类系数
- 以滞后一期的图为输入提取逐边网络特征（含 previous_count）
- 图报告与层级统计

设计原则：
- 图构造后不可变
- 自环计入边和强度，不参与路径类指标和聚类
- 遍历顺序固定（节点按 zone_id 排序），结果确定

作者：微出行流量预测软件团队
版本：v1.0
许可：商业软件
"""

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Any, Optional, List, Tuple, Union, Iterable

import numpy as np
import pandas as pd

try:
    from .exceptions import DegenerateGraphError, NodeLookupError, GraphDomainError
    from .log_manager import log_manager
    from .trip_ingestor import TripRecord, trips_to_frame, cadence_floor, cadence_offset
    from .zone_partitioner import SpatialPartition, assign_zones
except ImportError:
    from exceptions import DegenerateGraphError, NodeLookupError, GraphDomainError
    from log_manager import log_manager
    from trip_ingestor import TripRecord, trips_to_frame, cadence_floor, cadence_offset
    from zone_partitioner import SpatialPartition, assign_zones

__all__ = [
    'TimeBucket', 'FlowGraph', 'TEMPORAL_SCALES', 'NETWORK_FEATURE_COLUMNS',
    'assign_trips', 'aggregate_od', 'aggregate_od_with_report', 'bucket_range',
    'degree_centrality', 'node_strength', 'node_degrees', 'betweenness',
    'shortest_path_length', 'hop_matrix', 'edge_connectivity', 'average_degree_connectivity',
    'average_clustering', 'extract_network_features', 'graph_report', 'level_statistics',
]

logger = log_manager.get_logger('flow_network')

TEMPORAL_SCALES = ('hourly', 'daily', 'monthly')

Edge = Tuple[str, str]


@dataclass(frozen=True, order=True)
class TimeBucket:
    """时间桶：尺度 + 对齐到尺度边界的 UTC 起点"""
    scale: str
    start: pd.Timestamp

    def __post_init__(self):
        if self.scale not in TEMPORAL_SCALES:
            raise GraphDomainError(f"未知的时间尺度: {self.scale}", {"scale": self.scale})
        if cadence_floor(self.start, self.scale) != self.start:
            raise GraphDomainError(f"时间桶起点未对齐到 {self.scale} 边界: {self.start}",
                                   {"scale": self.scale, "start": str(self.start)})

    @classmethod
    def of(cls, ts: pd.Timestamp, scale: str) -> 'TimeBucket':
        """时间戳所在的时间桶"""
        ts = pd.Timestamp(ts)
        ts = ts.tz_localize('UTC') if ts.tzinfo is None else ts.tz_convert('UTC')
        return cls(scale, cadence_floor(ts, scale))

    @property
    def end(self) -> pd.Timestamp:
        return self.start + cadence_offset(self.scale)

    def shift(self, k: int) -> 'TimeBucket':
        """向后（k>0）或向前（k<0）移动 k 个桶"""
        return TimeBucket(self.scale, self.start + k * cadence_offset(self.scale))

    def __str__(self) -> str:
        return f"{self.scale}:{self.start.isoformat()}"


def bucket_range(first: TimeBucket, last: TimeBucket) -> List[TimeBucket]:
    """枚举 [first, last] 之间的连续时间桶"""
    if first.scale != last.scale:
        raise GraphDomainError("起止时间桶尺度不一致", {"first": str(first), "last": str(last)})
    buckets = []
    current = first
    while current.start <= last.start:
        buckets.append(current)
        current = current.shift(1)
    return buckets


@dataclass(frozen=True)
class FlowGraph:
    """
    某一时间桶、某一空间层级的加权有向流量图

    edges 只保存行程数 >= 1 的有序区域对；自环允许。
    """
    level: str
    bucket: Optional[TimeBucket]
    nodes: frozenset
    edges: Dict[Edge, int] = field(default_factory=dict, hash=False)

    @classmethod
    def from_edges(cls, edges: Dict[Edge, int], nodes: Optional[Iterable[str]] = None,
                   level: str = '', bucket: Optional[TimeBucket] = None) -> 'FlowGraph':
        """由边字典构造图；节点为边端点与显式给出节点的并集"""
        clean = {(str(o), str(d)): int(w) for (o, d), w in edges.items() if int(w) >= 1}
        node_set = {n for e in clean for n in e} | {str(n) for n in (nodes or [])}
        return cls(level=level, bucket=bucket, nodes=frozenset(node_set), edges=clean)

    @property
    def n(self) -> int:
        return len(self.nodes)

    @cached_property
    def node_list(self) -> List[str]:
        return sorted(self.nodes)

    @cached_property
    def index(self) -> Dict[str, int]:
        return {v: i for i, v in enumerate(self.node_list)}

    @cached_property
    def successors(self) -> List[List[int]]:
        """无自环的后继表（升序）"""
        succ = [set() for _ in self.node_list]
        for (o, d) in self.edges:
            if o != d:
                succ[self.index[o]].add(self.index[d])
        return [sorted(s) for s in succ]

    @cached_property
    def predecessors(self) -> List[List[int]]:
        """无自环的前驱表（升序）"""
        pred = [set() for _ in self.node_list]
        for (o, d) in self.edges:
            if o != d:
                pred[self.index[d]].add(self.index[o])
        return [sorted(s) for s in pred]

    @cached_property
    def adjacency(self) -> np.ndarray:
        """无自环的 0/1 邻接矩阵"""
        a = np.zeros((self.n, self.n), dtype=np.int64)
        for i, succ in enumerate(self.successors):
            a[i, succ] = 1
        return a

    def weight(self, o: str, d: str) -> int:
        return self.edges.get((o, d), 0)

    @property
    def total_weight(self) -> int:
        return int(sum(self.edges.values()))

    def _require(self, node: str) -> int:
        if node not in self.index:
            raise NodeLookupError(node)
        return self.index[node]


# ============== 聚合 ==============

def assign_trips(trips: Union[List[TripRecord], pd.DataFrame], part: SpatialPartition) -> pd.DataFrame:
    """
    为行程两端分配区域

    Args:
        trips: TripRecord 列表或 trips_to_frame 生成的表
        part: 空间划分

    Returns:
        DataFrame: 原列 + origin_zone, dest_zone（未分配为 None）
    """
    frame = trips if isinstance(trips, pd.DataFrame) else trips_to_frame(trips)
    frame = frame.copy()
    frame['origin_zone'] = assign_zones(frame[['origin_x', 'origin_y']].to_numpy(dtype=float), part)
    frame['dest_zone'] = assign_zones(frame[['dest_x', 'dest_y']].to_numpy(dtype=float), part)
    return frame


def _bucket_starts(starts: pd.Series, scale: str) -> pd.Series:
    """向量化计算 UTC 时间戳所在时间桶的起点"""
    if scale == 'hourly':
        return starts.dt.floor('h')
    days = starts.dt.floor('D')
    if scale == 'daily':
        return days
    return days - pd.to_timedelta(days.dt.day - 1, unit='D')


def aggregate_od_with_report(assigned: pd.DataFrame, scale: str,
                             level: str) -> Tuple[Dict[TimeBucket, FlowGraph], Dict[str, int]]:
    """
    按时间桶聚合 OD 流量，同时返回丢弃统计

    Args:
        assigned: assign_trips 的结果（start_ts, origin_zone, dest_zone）
        scale: 时间尺度
        level: 空间层级名

    Returns:
        (按时间桶排序的 {TimeBucket: FlowGraph}, {'trips', 'dropped_unassigned', 'aggregated'})
    """
    if scale not in TEMPORAL_SCALES:
        raise GraphDomainError(f"未知的时间尺度: {scale}", {"scale": scale})
    mask = assigned['origin_zone'].notna() & assigned['dest_zone'].notna()
    dropped = int((~mask).sum())
    used = assigned.loc[mask, ['start_ts', 'origin_zone', 'dest_zone']]
    if dropped:
        logger.warning("端点未分配的行程已丢弃", level=level, dropped=dropped)

    graphs: Dict[TimeBucket, FlowGraph] = {}
    if len(used):
        starts = pd.to_datetime(used['start_ts'], utc=True)
        keys = _bucket_starts(starts, scale)
        counts = (pd.DataFrame({'bucket': keys, 'o': used['origin_zone'].astype(str),
                                'd': used['dest_zone'].astype(str)})
                  .groupby(['bucket', 'o', 'd'], sort=True).size())
        for bucket_start, group in counts.groupby(level=0, sort=True):
            edges = {(o, d): int(w) for (_, o, d), w in group.items()}
            bucket = TimeBucket(scale, pd.Timestamp(bucket_start))
            graphs[bucket] = FlowGraph.from_edges(edges, level=level, bucket=bucket)
    report = {'trips': int(len(assigned)), 'dropped_unassigned': dropped, 'aggregated': int(len(used))}
    logger.info("OD 聚合完成", level=level, scale=scale, buckets=len(graphs), trips=report['aggregated'])
    return graphs, report


def aggregate_od(assigned: pd.DataFrame, scale: str, level: str) -> Dict[TimeBucket, FlowGraph]:
    """
    按时间桶聚合 OD 流量：每个桶的边为至少有 1 次行程的有序区域对，边权为行程数

    Examples:
        >>> graphs = aggregate_od(assign_trips(trips, quarters), 'daily', 'quarters')
    """
    return aggregate_od_with_report(assigned, scale, level)[0]


# ============== 节点指标 ==============

def degree_centrality(g: FlowGraph, direction: str = 'all') -> Dict[str, float]:
    """
    度中心性：不同邻居数（不含自身）/ (n-1)

    Args:
        g: 流量图
        direction: all / in / out

    Raises:
        DegenerateGraphError: n < 2
    """
    if g.n < 2:
        raise DegenerateGraphError('degree_centrality', g.n, 2)
    if direction not in ('all', 'in', 'out'):
        raise GraphDomainError(f"未知的方向: {direction}", {"direction": direction})
    scale = 1.0 / (g.n - 1)
    result = {}
    for i, v in enumerate(g.node_list):
        if direction == 'in':
            k = len(g.predecessors[i])
        elif direction == 'out':
            k = len(g.successors[i])
        else:
            k = len(set(g.predecessors[i]) | set(g.successors[i]))
        result[v] = k * scale
    return result


def node_strength(g: FlowGraph) -> Dict[str, Tuple[int, int]]:
    """节点强度 (strength_in, strength_out)：入边/出边权重和，自环两者都计入"""
    strength = {v: [0, 0] for v in g.node_list}
    for (o, d), w in g.edges.items():
        strength[d][0] += w
        strength[o][1] += w
    return {v: (s[0], s[1]) for v, s in strength.items()}


def node_degrees(g: FlowGraph) -> Dict[str, Tuple[int, int]]:
    """无权 (in_degree, out_degree)：入边/出边条数，自环各计一次"""
    degrees = {v: [0, 0] for v in g.node_list}
    for (o, d) in g.edges:
        degrees[d][0] += 1
        degrees[o][1] += 1
    return {v: (x[0], x[1]) for v, x in degrees.items()}


def _brandes(g: FlowGraph) -> Tuple[np.ndarray, Dict[Tuple[int, int], float]]:
    """Brandes 累积（未归一化）：返回节点介数数组和边介数字典"""
    n = g.n
    node_bc = np.zeros(n)
    edge_bc: Dict[Tuple[int, int], float] = {}
    for v, succ in enumerate(g.successors):
        for w in succ:
            edge_bc[(v, w)] = 0.0
    for s in range(n):
        stack = []
        preds: List[List[int]] = [[] for _ in range(n)]
        sigma = np.zeros(n)
        sigma[s] = 1.0
        dist = np.full(n, -1, dtype=np.int64)
        dist[s] = 0
        queue = deque([s])
        while queue:
            v = queue.popleft()
            stack.append(v)
            for w in g.successors[v]:
                if dist[w] < 0:
                    queue.append(w)
                    dist[w] = dist[v] + 1
                if dist[w] == dist[v] + 1:
                    sigma[w] += sigma[v]
                    preds[w].append(v)
        delta = np.zeros(n)
        while stack:
            w = stack.pop()
            for v in preds[w]:
                c = sigma[v] / sigma[w] * (1.0 + delta[w])
                edge_bc[(v, w)] += c
                delta[v] += c
            if w != s:
                node_bc[w] += delta[w]
    return node_bc, edge_bc


def betweenness(g: FlowGraph, target: str = 'nodes') -> Dict[Any, float]:
    """
    Brandes 介数中心性（无权最短路，自环忽略）

    节点值除以 (n-1)(n-2)，端点不计；边值除以 n(n-1)。
    n < 3 时节点介数全为 0，n < 2 时边介数全为 0。

    Args:
        g: 流量图
        target: nodes 或 edges

    Returns:
        dict: 节点 -> 值，或 (origin, dest) -> 值（包含全部边，自环为 0）
    """
    if target not in ('nodes', 'edges'):
        raise GraphDomainError(f"未知的介数目标: {target}", {"target": target})
    n = g.n
    node_bc, edge_bc = _brandes(g)
    if target == 'nodes':
        norm = 1.0 / ((n - 1) * (n - 2)) if n >= 3 else 0.0
        return {v: float(node_bc[i]) * norm for i, v in enumerate(g.node_list)}
    norm = 1.0 / (n * (n - 1)) if n >= 2 else 0.0
    result = {}
    for (o, d) in sorted(g.edges):
        if o == d:
            result[(o, d)] = 0.0
        else:
            result[(o, d)] = edge_bc[(g.index[o], g.index[d])] * norm
    return result


def _bfs_hops(g: FlowGraph, s: int) -> np.ndarray:
    dist = np.full(g.n, -1, dtype=np.int64)
    dist[s] = 0
    queue = deque([s])
    while queue:
        v = queue.popleft()
        for w in g.successors[v]:
            if dist[w] < 0:
                dist[w] = dist[v] + 1
                queue.append(w)
    return dist


def hop_matrix(g: FlowGraph) -> np.ndarray:
    """全源 BFS 跳数矩阵，不可达为 -1（行列顺序为 g.node_list）"""
    if g.n == 0:
        return np.zeros((0, 0), dtype=np.int64)
    return np.vstack([_bfs_hops(g, s) for s in range(g.n)])


def shortest_path_length(g: FlowGraph, s: str, t: str) -> Optional[int]:
    """
    有向 BFS 最短路跳数；s == t 为 0；不可达返回 None

    Raises:
        NodeLookupError: 节点不存在
    """
    si = g._require(s)
    ti = g._require(t)
    if si == ti:
        return 0
    hops = int(_bfs_hops(g, si)[ti])
    return hops if hops >= 0 else None


def _max_flow_unit(g: FlowGraph, s: int, t: int) -> int:
    """单位容量 Edmonds-Karp"""
    capacity: Dict[int, Dict[int, int]] = {v: {} for v in range(g.n)}
    for v, succ in enumerate(g.successors):
        for w in succ:
            capacity[v][w] = capacity[v].get(w, 0) + 1
            capacity[w].setdefault(v, 0)
    flow = 0
    while True:
        parent = {s: s}
        queue = deque([s])
        while queue and t not in parent:
            u = queue.popleft()
            for w in sorted(capacity[u]):
                if w not in parent and capacity[u][w] > 0:
                    parent[w] = u
                    queue.append(w)
        if t not in parent:
            return flow
        v = t
        while v != s:
            u = parent[v]
            capacity[u][v] -= 1
            capacity[v][u] += 1
            v = u
        flow += 1


def edge_connectivity(g: FlowGraph, s: str, t: str) -> int:
    """
    局部边连通度：断开 s 到 t 全部路径最少需要移除的边数（单位容量最大流）

    Raises:
        GraphDomainError: s == t
        NodeLookupError: 节点不存在
    """
    si = g._require(s)
    ti = g._require(t)
    if si == ti:
        raise GraphDomainError(f"源点与汇点相同: {s}", {"s": s, "t": t})
    return _max_flow_unit(g, si, ti)


# ============== 全图指标 ==============

def _total_degrees(g: FlowGraph) -> np.ndarray:
    return np.array([len(g.successors[i]) + len(g.predecessors[i]) for i in range(g.n)], dtype=np.int64)


def average_degree_connectivity(g: FlowGraph) -> Dict[int, float]:
    """
    平均度连通性：对每个出现的总度 k（入+出，无权，不含自环），
    度为 k 的节点其邻居（入邻居与出邻居并集）平均总度的均值；没有邻居的节点不计入
    """
    degrees = _total_degrees(g)
    per_k: Dict[int, List[float]] = {}
    for i in range(g.n):
        neighbors = sorted(set(g.successors[i]) | set(g.predecessors[i]))
        if not neighbors:
            continue
        per_k.setdefault(int(degrees[i]), []).append(float(np.mean(degrees[neighbors])))
    return {k: float(np.mean(v)) for k, v in sorted(per_k.items())}


def _clustering_values(g: FlowGraph) -> np.ndarray:
    if g.n == 0:
        return np.zeros(0)
    a = g.adjacency.astype(float)
    sym = a + a.T
    triangles = np.diag(sym @ sym @ sym) / 2.0
    d_tot = a.sum(axis=0) + a.sum(axis=1)
    d_bi = np.diag(a @ a)
    denom = d_tot * (d_tot - 1) - 2.0 * d_bi
    values = np.zeros(g.n)
    ok = (d_tot >= 2) & (denom > 0)
    values[ok] = triangles[ok] / denom[ok]
    return values


def average_clustering(g: FlowGraph) -> float:
    """Fagiolo 有向无权聚类系数的节点平均；总度 < 2 的节点记 0"""
    if g.n == 0:
        return 0.0
    return float(np.mean(_clustering_values(g)))


# ============== 特征提取 ==============

NODE_FEATURES = ('degree_centrality', 'in_degree_centrality', 'out_degree_centrality', 'betweenness',
                 'in_degree', 'out_degree', 'strength_in', 'strength_out')
EDGE_FEATURES = ('edge_present', 'edge_betweenness', 'edge_connectivity', 'connectivity_exact',
                 'shortest_path_length', 'unreachable')
GRAPH_FEATURES = ('num_nodes', 'num_edges', 'average_degree_connectivity', 'average_clustering')

NETWORK_FEATURE_COLUMNS: List[str] = (
    [f'orig_{f}' for f in NODE_FEATURES] + [f'dest_{f}' for f in NODE_FEATURES]
    + list(EDGE_FEATURES) + list(GRAPH_FEATURES) + ['previous_count']
)


def _node_table(g: FlowGraph) -> Dict[str, Dict[str, float]]:
    if g.n >= 2:
        dc_all = degree_centrality(g, 'all')
        dc_in = degree_centrality(g, 'in')
        dc_out = degree_centrality(g, 'out')
    else:
        dc_all = dc_in = dc_out = {v: 0.0 for v in g.node_list}
    bc = betweenness(g, 'nodes')
    strength = node_strength(g)
    degrees = node_degrees(g)
    return {
        v: {
            'degree_centrality': dc_all[v], 'in_degree_centrality': dc_in[v],
            'out_degree_centrality': dc_out[v], 'betweenness': bc[v],
            'in_degree': degrees[v][0], 'out_degree': degrees[v][1],
            'strength_in': strength[v][0], 'strength_out': strength[v][1],
        }
        for v in g.node_list
    }


def extract_network_features(g_prev: Optional[FlowGraph], edges_of_interest: List[Edge],
                             exact_max_nodes: int = 500) -> pd.DataFrame:
    """
    在滞后一期的图上提取逐边网络特征

    每条请求的边输出：起点节点特征（orig_）、终点节点特征（dest_）、边特征、全图特征和
    previous_count（g_prev 中该边的权重，缺失为 0）。
    不在 g_prev 中的节点特征为 0；g_prev 中不存在的边，边连通度与边介数为 0；
    最短路不可达或端点缺失时取哨兵值 n 并置 unreachable=1；
    节点数超过 exact_max_nodes 时边连通度改用 min(出度(s), 入度(t)) 上界并置 connectivity_exact=0。

    Args:
        g_prev: 上一时间桶的流量图（可为 None，视为空图）
        edges_of_interest: 请求的 (origin, dest) 列表
        exact_max_nodes: 精确计算边连通度的节点数上限

    Returns:
        DataFrame: 每条请求边一行，列为 NETWORK_FEATURE_COLUMNS
    """
    g = g_prev if g_prev is not None else FlowGraph.from_edges({})
    n = g.n
    nodes = _node_table(g) if n else {}
    zero_node = {f: 0.0 for f in NODE_FEATURES}
    edge_bc = betweenness(g, 'edges') if n else {}
    hops = hop_matrix(g)
    adc = average_degree_connectivity(g)
    graph_level = {
        'num_nodes': n,
        'num_edges': len(g.edges),
        'average_degree_connectivity': float(np.mean(list(adc.values()))) if adc else 0.0,
        'average_clustering': average_clustering(g),
    }
    exact = n <= exact_max_nodes

    rows = []
    connectivity_cache: Dict[Edge, int] = {}
    for (o, d) in edges_of_interest:
        row: Dict[str, Any] = {}
        for prefix, v in (('orig_', o), ('dest_', d)):
            for f, value in nodes.get(v, zero_node).items():
                row[prefix + f] = value
        present = (o, d) in g.edges
        row['edge_present'] = int(present)
        row['edge_betweenness'] = edge_bc.get((o, d), 0.0)
        both = o in g.index and d in g.index
        if o == d:
            row['edge_connectivity'] = 0
            row['connectivity_exact'] = 1
            row['shortest_path_length'] = 0 if both else n
            row['unreachable'] = 0 if both else 1
        else:
            if not both or not present:
                conn = 0
            elif exact:
                if (o, d) not in connectivity_cache:
                    connectivity_cache[(o, d)] = _max_flow_unit(g, g.index[o], g.index[d])
                conn = connectivity_cache[(o, d)]
            else:
                conn = min(len(g.successors[g.index[o]]), len(g.predecessors[g.index[d]]))
            row['edge_connectivity'] = conn
            row['connectivity_exact'] = int(exact)
            hop = int(hops[g.index[o], g.index[d]]) if both else -1
            row['shortest_path_length'] = hop if hop >= 0 else n
            row['unreachable'] = int(hop < 0)
        row.update(graph_level)
        row['previous_count'] = g.weight(o, d)
        rows.append(row)
    return pd.DataFrame(rows, columns=NETWORK_FEATURE_COLUMNS)


# ============== 报告 ==============

def graph_report(g: FlowGraph) -> Dict[str, Any]:
    """单个 (层级, 时间桶) 图的 JSON 报告"""
    adc = average_degree_connectivity(g)
    weights = list(g.edges.values())
    return {
        'level': g.level,
        'scale': g.bucket.scale if g.bucket else None,
        'bucket_start': g.bucket.start.isoformat() if g.bucket else None,
        'nodes': g.node_list,
        'edges': [[o, d, w] for (o, d), w in sorted(g.edges.items())],
        'num_nodes': g.n,
        'num_edges': len(g.edges),
        'total_weight': g.total_weight,
        'average_weight': float(np.mean(weights)) if weights else 0.0,
        'average_degree_connectivity': {str(k): v for k, v in adc.items()},
        'average_degree_connectivity_mean': float(np.mean(list(adc.values()))) if adc else 0.0,
        'average_clustering': average_clustering(g),
    }


def level_statistics(graphs: Dict[TimeBucket, FlowGraph]) -> Dict[str, Any]:
    """整个层级在全部时间桶上的汇总：并集节点数、并集边数、平均边权"""
    nodes = set()
    edges = set()
    weights: List[int] = []
    for g in graphs.values():
        nodes |= g.nodes
        edges |= set(g.edges)
        weights.extend(g.edges.values())
    return {
        'buckets': len(graphs),
        'nodes': len(nodes),
        'edges': len(edges),
        'total_trips': int(sum(weights)),
        'average_weight': float(np.mean(weights)) if weights else 0.0,
    }


if __name__ == "__main__":
    """
    命令行入口，用于对行程文件做 OD 聚合并打印层级统计
    """
    import argparse
    import json

    try:
        from .trip_ingestor import load_trips, clean_trips, CleaningPolicy
        from .zone_partitioner import load_partition
    except ImportError:
        from trip_ingestor import load_trips, clean_trips, CleaningPolicy
        from zone_partitioner import load_partition

    parser = argparse.ArgumentParser(description='流量网络工具')
    parser.add_argument('--trips', required=True, help='行程 CSV 路径')
    parser.add_argument('--zones', required=True, help='多边形 JSON 路径')
    parser.add_argument('--scale', default='daily', choices=list(TEMPORAL_SCALES), help='时间尺度')
    args = parser.parse_args()

    partition = load_partition(args.zones)
    kept = clean_trips(load_trips(args.trips), CleaningPolicy())
    built = aggregate_od(assign_trips(kept, partition), args.scale, partition.level)
    print(json.dumps(level_statistics(built), ensure_ascii=False, indent=2))
