#!/usr/bin/env python3
"""
特征矩阵生成模块

本模块把行程、空间划分、空间图层、协变量和节假日日历组装为 (起点, 终点, 时间桶)
粒度的特征矩阵，并在训练集上拟合插补与缩放。
功能特点：
- 时间特征：周末/节假日、星期/月份/小时独热、目标滞后与滚动均值、外生协变量、季节分量
- 空间特征：两端区域的图层汇总（orig_/dest_ 前缀）与质心距离
- 网络特征：滞后一期流量图上的逐边网络指标（含 previous_count）
- 行选择：当前桶有流量或在更早的桶出现过的区域对
- 插补：时间序列列先按边前向填充，再用训练集均值
- 缩放：训练集最小-最大缩放，不截断测试集越界值
- 矩阵 CSV + 分组 JSON 读写

设计原则：
- 时间截断之后的目标与协变量不影响训练行的任何取值
- 列顺序固定：空间块、时间块、网络块
- 多次运行结果逐字节一致

作者：微出行流量预测软件团队
版本：v1.0
许可：商业软件
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Any, List, Optional, Tuple, Union, Iterable, Mapping

import numpy as np
import pandas as pd

try:
    from .exceptions import AssemblyError, FeatureError, DataFileNotFoundError
    from .log_manager import log_manager
    from .utils import FileOperations
    from .performance_utils import ParallelProcessor
    from .trip_ingestor import CovariateSeries, HolidayCalendar, cadence_floor, cadence_offset
    from .zone_partitioner import SpatialPartition
    from .flow_network import (TimeBucket, NETWORK_FEATURE_COLUMNS, assign_trips, aggregate_od,
                               bucket_range, extract_network_features)
    from .spatial_features import SpatialLayer, zone_feature_table, centroid_distances
    from .seasonal_model import SEASONAL_COLUMNS, fit_seasonal, seasonal_frame
except ImportError:
    from exceptions import AssemblyError, FeatureError, DataFileNotFoundError
    from log_manager import log_manager
    from utils import FileOperations
    from performance_utils import ParallelProcessor
    from trip_ingestor import CovariateSeries, HolidayCalendar, cadence_floor, cadence_offset
    from zone_partitioner import SpatialPartition
    from flow_network import (TimeBucket, NETWORK_FEATURE_COLUMNS, assign_trips, aggregate_od,
                              bucket_range, extract_network_features)
    from spatial_features import SpatialLayer, zone_feature_table, centroid_distances
    from seasonal_model import SEASONAL_COLUMNS, fit_seasonal, seasonal_frame

__all__ = [
    'SPATIAL', 'TEMPORAL', 'NETWORK', 'FEATURE_GROUPS', 'KEY_COLUMNS',
    'FeatureMatrix', 'ScalerState',
    'calendar_features', 'calendar_columns', 'lag_features', 'lag_columns',
    'covariate_features', 'covariate_columns', 'select_row_keys', 'assemble_matrix',
    'fit_scaler', 'apply_scaler', 'inverse_scaler', 'impute',
    'save_matrix', 'load_matrix', 'build_feature_matrix',
]

logger = log_manager.get_logger('feature_generator')

SPATIAL = 'spatial'
TEMPORAL = 'temporal'
NETWORK = 'network'
FEATURE_GROUPS = (SPATIAL, TEMPORAL, NETWORK)
KEY_COLUMNS = ['orig', 'dest', 'bucket_start']

CADENCE_RANK = {'hourly': 0, 'daily': 1, 'weekly': 2, 'monthly': 3}
DEFAULT_WEEKEND = (4, 5)
BUCKET_FORMAT = '%Y-%m-%dT%H:%M:%SZ'


# ============== 数据结构 ==============

@dataclass
class FeatureMatrix:
    """
    特征矩阵

    frame 列：orig, dest, bucket_start, split, <特征列...>, target。
    groups 按列顺序记录每个特征列所属的组。
    """
    frame: pd.DataFrame
    groups: Dict[str, str]
    scale: str = 'daily'
    level: str = ''

    @property
    def feature_columns(self) -> List[str]:
        return list(self.groups)

    def columns_in(self, groups: Iterable[str]) -> List[str]:
        wanted = set(groups)
        return [c for c, g in self.groups.items() if g in wanted]

    @property
    def n_rows(self) -> int:
        return len(self.frame)

    @property
    def target(self) -> np.ndarray:
        return self.frame['target'].to_numpy(dtype=float)

    def features(self, columns: Optional[List[str]] = None) -> np.ndarray:
        return self.frame[columns if columns is not None else self.feature_columns].to_numpy(dtype=float)

    def train_mask(self) -> np.ndarray:
        return (self.frame['split'] == 'train').to_numpy()

    def with_frame(self, frame: pd.DataFrame) -> 'FeatureMatrix':
        return FeatureMatrix(frame=frame, groups=dict(self.groups), scale=self.scale, level=self.level)


@dataclass
class ScalerState:
    """训练集上学到的每列 (min, max) 以及插补用均值"""
    columns: List[str]
    minimum: Dict[str, float] = field(default_factory=dict)
    maximum: Dict[str, float] = field(default_factory=dict)
    fill: Dict[str, float] = field(default_factory=dict)
    ffill_columns: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {'columns': list(self.columns), 'minimum': dict(self.minimum), 'maximum': dict(self.maximum),
                'fill': dict(self.fill), 'ffill_columns': list(self.ffill_columns)}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ScalerState':
        return cls(columns=list(data['columns']), minimum=dict(data['minimum']), maximum=dict(data['maximum']),
                   fill=dict(data['fill']), ffill_columns=list(data.get('ffill_columns', [])))


# ============== 日历特征 ==============

def calendar_columns(scale: str) -> List[str]:
    columns = ['is_weekend', 'is_holiday'] + [f'dow_{d}' for d in range(7)] + [f'month_{m}' for m in range(1, 13)]
    if scale == 'hourly':
        columns += [f'hour_{h}' for h in range(24)]
    return columns


def calendar_features(bucket: TimeBucket, cal: Optional[HolidayCalendar],
                      weekend_days: Iterable[int] = DEFAULT_WEEKEND) -> Dict[str, float]:
    """
    时间桶的日历特征

    星期与周末按桶起点所在日期计算；月尺度桶内任一天为节假日即 is_holiday = 1。

    Args:
        bucket: 时间桶
        cal: 节假日日历（None 视为空日历）
        weekend_days: 周末的星期编号（周一=0），默认周五、周六

    Returns:
        Dict[str, float]: {is_weekend, is_holiday, dow_0..6, month_1..12, [hour_0..23]}

    Examples:
        >>> calendar_features(TimeBucket.of('2021-01-02', 'daily'), None)['is_weekend']
        1.0
    """
    start = bucket.start
    if cal is None:
        holiday = False
    elif bucket.scale == 'monthly':
        holiday = any(start.date() <= d < bucket.end.date() for d in cal.dates())
    else:
        holiday = cal.is_holiday(start)
    features = {'is_weekend': float(start.dayofweek in set(weekend_days)), 'is_holiday': float(holiday)}
    features.update({f'dow_{d}': float(start.dayofweek == d) for d in range(7)})
    features.update({f'month_{m}': float(start.month == m) for m in range(1, 13)})
    if bucket.scale == 'hourly':
        features.update({f'hour_{h}': float(start.hour == h) for h in range(24)})
    return features


# ============== 协变量与滞后特征 ==============

def covariate_columns(covariates: List[CovariateSeries]) -> List[str]:
    """协变量产生的列名（按协变量名排序；分类变量按词表展开）"""
    columns = []
    for cov in sorted(covariates, key=lambda c: c.name):
        base = f'prev_{cov.name}' if cov.kind == 'lag-only' else cov.name
        if cov.is_categorical:
            columns += [f'{base}_{category}' for category in cov.vocabulary]
        else:
            columns.append(base)
    return columns


def _covariate_values(cov: CovariateSeries, bucket: TimeBucket) -> List[Any]:
    if cov.kind == 'lag-only':
        key = cadence_floor(bucket.start, cov.cadence) - cadence_offset(cov.cadence)
        return [cov.get(key)]
    if CADENCE_RANK[cov.cadence] < CADENCE_RANK[bucket.scale]:
        keys = [k for k in cov.keys() if bucket.start <= k < bucket.end]
        return [cov.get(k) for k in keys]
    return [cov.get(cadence_floor(bucket.start, cov.cadence))]


def covariate_features(covariates: List[CovariateSeries], bucket: TimeBucket) -> Dict[str, float]:
    """
    时间桶的协变量特征

    lag-only 协变量取上一个协变量周期的值（键严格早于桶起点）；forecastable 协变量取桶本身，
    协变量比桶更细时取桶内均值。分类变量输出各类别占比。缺失为 NaN。
    """
    features: Dict[str, float] = {}
    for cov in sorted(covariates, key=lambda c: c.name):
        base = f'prev_{cov.name}' if cov.kind == 'lag-only' else cov.name
        values = [v for v in _covariate_values(cov, bucket) if v is not None]
        if cov.is_categorical:
            for category in cov.vocabulary:
                features[f'{base}_{category}'] = (float(np.mean([v == category for v in values]))
                                                  if values else np.nan)
        else:
            features[base] = float(np.mean(values)) if values else np.nan
    return features


def lag_columns(lags: Iterable[int], rolling_windows: Iterable[int] = (3, 7)) -> List[str]:
    """时间块中的目标滞后列（滞后 1 期的 previous_count 属于网络块）"""
    return ([f'lag_{k}_count' for k in sorted(set(lags)) if k >= 2]
            + [f'rolling_mean_{w}' for w in sorted(set(rolling_windows))])


def lag_features(history: Mapping[pd.Timestamp, float], covariates: List[CovariateSeries], bucket: TimeBucket,
                 lags: Iterable[int], rolling_windows: Iterable[int] = (3, 7)) -> Dict[str, float]:
    """
    单条边在某时间桶的滞后特征

    Args:
        history: 该边的目标序列 {桶起点: 行程数}；缺失的桶视为无历史
        covariates: 外生协变量
        bucket: 当前时间桶
        lags: 正整数滞后阶数
        rolling_windows: 滚动均值窗口（取最近 w 个桶，忽略缺失）

    Returns:
        Dict[str, float]: 滞后 1 期为 previous_count，其余为 lag_{k}_count；rolling_mean_{w}；
        协变量列。无历史时为 NaN。

    Examples:
        >>> hist = {TimeBucket.of(d, 'daily').start: v for d, v in
        ...         zip(['2021-01-01', '2021-01-02', '2021-01-03'], [2, 5, 9])}
        >>> lag_features(hist, [], TimeBucket.of('2021-01-04', 'daily'), [1])['previous_count']
        9.0
    """
    lags = sorted(set(int(k) for k in lags))
    if any(k < 1 for k in lags):
        raise FeatureError(f"滞后阶数必须为正整数: {lags}", {"lags": lags})

    def value_at(k: int) -> float:
        v = history.get(bucket.shift(-k).start)
        return np.nan if v is None else float(v)

    features: Dict[str, float] = {}
    for k in lags:
        features['previous_count' if k == 1 else f'lag_{k}_count'] = value_at(k)
    for w in sorted(set(rolling_windows)):
        window = np.array([value_at(k) for k in range(1, w + 1)])
        features[f'rolling_mean_{w}'] = float(np.nanmean(window)) if np.isfinite(window).any() else np.nan
    features.update(covariate_features(covariates, bucket))
    return features


# ============== 矩阵组装 ==============

def select_row_keys(target: pd.Series) -> pd.Series:
    """
    行选择：保留当前桶目标 > 0、或该区域对在更早的桶出现过的键

    Args:
        target: 以 (orig, dest, bucket_start) 为索引的候选目标

    Returns:
        pd.Series: 筛选并按 (bucket_start, orig, dest) 排序后的目标
    """
    frame = target.rename('target').reset_index()
    frame.columns = KEY_COLUMNS + ['target']
    frame = frame.sort_values(['bucket_start', 'orig', 'dest'], kind='mergesort').reset_index(drop=True)
    positive = frame['target'] > 0
    first_seen = frame.loc[positive].groupby(['orig', 'dest'])['bucket_start'].min().rename('first_seen')
    frame = frame.join(first_seen, on=['orig', 'dest'])
    keep = positive | (frame['first_seen'].notna() & (frame['bucket_start'] > frame['first_seen']))
    kept = frame.loc[keep]
    return kept.set_index(KEY_COLUMNS)['target']


def _require_keys(frame: pd.DataFrame, keys: pd.Index, what: str) -> pd.DataFrame:
    missing = keys.difference(frame.index)
    if len(missing):
        raise AssemblyError(missing[0], f"{what} 特征缺少该键")
    if frame.index.has_duplicates:
        raise AssemblyError(frame.index[frame.index.duplicated()][0], f"{what} 特征键重复")
    return frame.loc[keys]


def assemble_matrix(target: pd.Series, spatial: pd.DataFrame, temporal: pd.DataFrame, network: pd.DataFrame,
                    cutoff: Optional[pd.Timestamp] = None, scale: str = 'daily', level: str = '') -> FeatureMatrix:
    """
    组装特征矩阵

    Args:
        target: 候选键 (orig, dest, bucket_start) 上的目标（行程数）
        spatial: 以 (orig, dest) 为索引的空间特征
        temporal: 以 (orig, dest, bucket_start) 为索引的时间特征
        network: 以 (orig, dest, bucket_start) 为索引的网络特征
        cutoff: 时间截断点；桶起点早于它的行为 train，其余为 test（None 时全部为 train）
        scale: 时间尺度
        level: 空间层级名

    Returns:
        FeatureMatrix

    Raises:
        AssemblyError: 任一特征表缺少某个行键，错误信息包含该键
    """
    kept = select_row_keys(target)
    keys = kept.index
    pair_keys = pd.MultiIndex.from_arrays([keys.get_level_values(0), keys.get_level_values(1)])

    spatial_block = _require_keys(spatial, pair_keys, SPATIAL).set_axis(keys)
    temporal_block = _require_keys(temporal, keys, TEMPORAL).set_axis(keys)
    network_block = _require_keys(network, keys, NETWORK).set_axis(keys)

    blocks = [(SPATIAL, spatial_block), (TEMPORAL, temporal_block), (NETWORK, network_block)]
    groups: Dict[str, str] = {}
    for group, block in blocks:
        for column in block.columns:
            if column in groups:
                raise AssemblyError(column, f"列同时出现在 {groups[column]} 与 {group} 组")
            groups[column] = group

    frame = pd.concat([b for _, b in blocks], axis=1).reset_index()
    frame.columns = KEY_COLUMNS + list(groups)
    if cutoff is None:
        split = np.full(len(frame), 'train', dtype=object)
    else:
        split = np.where(frame['bucket_start'] < _utc(cutoff), 'train', 'test')
    frame.insert(3, 'split', split)
    frame['target'] = kept.to_numpy(dtype=float)
    frame[list(groups)] = frame[list(groups)].astype(float)
    logger.info("特征矩阵组装完成", level=level, scale=scale, rows=len(frame), columns=len(groups))
    return FeatureMatrix(frame=frame, groups=groups, scale=scale, level=level)


def _utc(ts: Union[str, pd.Timestamp]) -> pd.Timestamp:
    ts = pd.Timestamp(ts)
    return ts.tz_localize('UTC') if ts.tzinfo is None else ts.tz_convert('UTC')


# ============== 插补与缩放 ==============

def _forward_fill(frame: pd.DataFrame, columns: List[str]) -> pd.DataFrame:
    if not columns:
        return frame
    frame = frame.copy()
    ordered = frame.sort_values(['bucket_start', 'orig', 'dest'], kind='mergesort')
    filled = ordered.groupby(['orig', 'dest'], sort=False)[columns].ffill()
    frame.loc[filled.index, columns] = filled
    return frame


def fit_scaler(m: FeatureMatrix) -> ScalerState:
    """
    在训练行上拟合插补均值与最小-最大缩放参数

    时间块的列先按边前向填充（只使用更早的值），再计算训练均值；min/max 在插补后的训练行上计算。
    """
    columns = m.feature_columns
    ffill_columns = m.columns_in([TEMPORAL])
    frame = _forward_fill(m.frame, ffill_columns)
    train = frame.loc[m.train_mask(), columns]
    means = train.mean(axis=0, skipna=True).fillna(0.0)
    train = train.fillna(means)
    return ScalerState(
        columns=columns,
        minimum={c: float(train[c].min()) if len(train) else 0.0 for c in columns},
        maximum={c: float(train[c].max()) if len(train) else 0.0 for c in columns},
        fill={c: float(means[c]) for c in columns},
        ffill_columns=ffill_columns,
    )


def impute(state: ScalerState, m: FeatureMatrix) -> FeatureMatrix:
    """前向填充时间序列列，再用训练均值填补剩余缺失"""
    frame = _forward_fill(m.frame, state.ffill_columns)
    frame[state.columns] = frame[state.columns].fillna(pd.Series(state.fill))
    return m.with_frame(frame)


def apply_scaler(state: ScalerState, m: FeatureMatrix) -> FeatureMatrix:
    """
    插补后按 (x - min) / (max - min) 缩放；训练常数列全部为 0；测试越界值不截断
    """
    frame = impute(state, m).frame
    for c in state.columns:
        lo, hi = state.minimum[c], state.maximum[c]
        span = hi - lo
        frame[c] = (frame[c] - lo) / span if span > 0 else 0.0
    return m.with_frame(frame)


def inverse_scaler(state: ScalerState, m: FeatureMatrix) -> FeatureMatrix:
    """缩放的逆变换（常数列还原为训练常数）"""
    frame = m.frame.copy()
    for c in state.columns:
        lo, hi = state.minimum[c], state.maximum[c]
        frame[c] = frame[c] * (hi - lo) + lo
    return m.with_frame(frame)


# ============== 读写 ==============

def _groups_path(path: Path) -> Path:
    return path.with_name(path.name + '.groups.json')


def save_matrix(m: FeatureMatrix, path: Union[str, Path]) -> Path:
    """写出特征矩阵 CSV 与分组 JSON"""
    path = Path(path)
    frame = m.frame.copy()
    frame['bucket_start'] = frame['bucket_start'].dt.strftime(BUCKET_FORMAT)
    frame['target'] = frame['target'].astype(int)
    FileOperations.write_csv(frame[KEY_COLUMNS + ['split'] + m.feature_columns + ['target']], path)
    FileOperations.write_json({'scale': m.scale, 'level': m.level,
                               'columns': [[c, g] for c, g in m.groups.items()]}, _groups_path(path))
    return path


def load_matrix(path: Union[str, Path]) -> FeatureMatrix:
    """读取 save_matrix 写出的特征矩阵"""
    path = Path(path)
    if not path.exists():
        raise DataFileNotFoundError(str(path))
    meta = FileOperations.read_json(_groups_path(path))
    frame = pd.read_csv(path, dtype={'orig': str, 'dest': str, 'split': str})
    frame['bucket_start'] = pd.to_datetime(frame['bucket_start'], utc=True, format='ISO8601')
    groups = {c: g for c, g in meta['columns']}
    frame[list(groups)] = frame[list(groups)].astype(float)
    frame['target'] = frame['target'].astype(float)
    return FeatureMatrix(frame=frame, groups=groups, scale=meta['scale'], level=meta['level'])


# ============== 端到端构建 ==============

def _lag_block(keys: pd.DataFrame, counts: pd.DataFrame, lags: List[int],
               rolling_windows: List[int]) -> pd.DataFrame:
    """
    向量化滞后特征：keys/counts 带 pos 列（桶在连续序列中的序号），
    滞后到序列起点之前为 NaN，之后缺失的计数为 0
    """
    lookup = counts.set_index(['orig', 'dest', 'pos'])['w']
    needed = sorted(set([k for k in lags if k >= 2]) | set(range(1, max(rolling_windows, default=0) + 1)))
    shifted = {}
    for k in needed:
        pos = keys['pos'] - k
        idx = pd.MultiIndex.from_arrays([keys['orig'], keys['dest'], pos])
        values = lookup.reindex(idx).to_numpy(dtype=float)
        values = np.where(np.isnan(values), 0.0, values)
        shifted[k] = np.where(pos.to_numpy() < 0, np.nan, values)
    out = pd.DataFrame(index=keys.index)
    for k in sorted(set(lags)):
        if k >= 2:
            out[f'lag_{k}_count'] = shifted[k]
    for w in sorted(set(rolling_windows)):
        window = np.column_stack([shifted[k] for k in range(1, w + 1)])
        valid = np.isfinite(window)
        total = np.where(valid, window, 0.0).sum(axis=1)
        n = valid.sum(axis=1)
        out[f'rolling_mean_{w}'] = np.where(n > 0, total / np.maximum(n, 1), np.nan)
    return out


def build_feature_matrix(trips: pd.DataFrame, part: SpatialPartition, layers: List[SpatialLayer],
                         covariates: List[CovariateSeries], cal: Optional[HolidayCalendar], scale: str,
                         cutoff: Union[str, pd.Timestamp], lags: Iterable[int] = (1, 2, 7),
                         rolling_windows: Iterable[int] = (3, 7), weekend_days: Iterable[int] = DEFAULT_WEEKEND,
                         network_lag: int = 1, exact_max_nodes: int = 500,
                         seasonal_params: Optional[Dict[str, Any]] = None, jobs: int = 1) -> FeatureMatrix:
    """
    从清洗后的行程构建某个 (时间尺度, 空间层级) 的特征矩阵

    Args:
        trips: trips_to_frame 格式的行程表
        part: 空间划分
        layers: 空间图层
        covariates: 外生协变量
        cal: 节假日日历
        scale: 时间尺度
        cutoff: 时间截断点
        lags: 目标滞后阶数
        rolling_windows: 滚动均值窗口
        weekend_days: 周末星期编号
        network_lag: 网络特征所用图的滞后期数
        exact_max_nodes: 精确边连通度的节点数上限
        seasonal_params: fit_seasonal 的额外参数
        jobs: 网络特征并行数

    Returns:
        FeatureMatrix
    """
    lags = sorted(set(int(k) for k in lags))
    rolling_windows = sorted(set(int(w) for w in rolling_windows))
    cutoff = _utc(cutoff)
    if cadence_floor(cutoff, scale) != cutoff:
        logger.warning("截断点未对齐到时间桶边界，向下对齐，跨越截断点的桶归入测试集", scale=scale,
                       cutoff=cutoff.isoformat())
        cutoff = cadence_floor(cutoff, scale)

    graphs = aggregate_od(assign_trips(trips, part), scale, part.level)
    if not graphs:
        raise FeatureError("没有可聚合的行程", {"level": part.level, "scale": scale})
    buckets = bucket_range(min(graphs), max(graphs))
    position = {b: i for i, b in enumerate(buckets)}

    counts = pd.DataFrame(
        [(o, d, position[b], w) for b, g in graphs.items() for (o, d), w in g.edges.items()],
        columns=['orig', 'dest', 'pos', 'w'],
    )
    # 候选键：每个桶内有流量的边，加上此前出现过的边
    seen: set = set()
    rows: List[Tuple[str, str, int]] = []
    for b in buckets:
        g = graphs.get(b)
        current = set(g.edges) if g is not None else set()
        for o, d in sorted(seen | current):
            rows.append((o, d, position[b]))
        seen |= current
    keys = pd.DataFrame(rows, columns=['orig', 'dest', 'pos'])
    keys = keys.merge(counts, on=['orig', 'dest', 'pos'], how='left')
    keys['w'] = keys['w'].fillna(0).astype(int)
    keys['bucket_start'] = [buckets[p].start for p in keys['pos']]
    index = pd.MultiIndex.from_frame(keys[KEY_COLUMNS])
    target = pd.Series(keys['w'].to_numpy(), index=index)

    # 空间块
    table = zone_feature_table(layers, part)
    distances = centroid_distances(part)
    pairs = sorted(set(zip(keys['orig'], keys['dest'])))
    spatial = pd.DataFrame(
        [{**{f'orig_{c}': table.at[o, c] for c in table.columns},
          **{f'dest_{c}': table.at[d, c] for c in table.columns},
          'centroid_distance_m': distances[(o, d)]} for o, d in pairs],
        index=pd.MultiIndex.from_tuples(pairs),
    )

    # 时间块：逐桶共享的日历/协变量/季节 + 逐边滞后
    totals = pd.Series([graphs[b].total_weight if b in graphs else 0 for b in buckets],
                       index=pd.DatetimeIndex([b.start for b in buckets]), dtype=float)
    history = totals[totals.index < cutoff]
    seasonal = fit_seasonal(history, cal, cutoff, scale=scale, **(seasonal_params or {}))
    per_bucket = pd.DataFrame(
        [{**calendar_features(b, cal, weekend_days), **covariate_features(covariates, b)} for b in buckets],
        index=range(len(buckets)),
    )
    per_bucket = per_bucket.reindex(columns=calendar_columns(scale) + covariate_columns(covariates))
    season = seasonal_frame(model=seasonal, buckets=buckets).reset_index(drop=True)[SEASONAL_COLUMNS]
    lag_block = _lag_block(keys, counts, lags, rolling_windows)
    temporal = pd.concat([
        per_bucket.reindex(keys['pos'].to_numpy()).set_axis(keys.index),
        lag_block,
        season.reindex(keys['pos'].to_numpy()).set_axis(keys.index),
    ], axis=1)
    temporal.index = index

    # 网络块：每个桶使用滞后 network_lag 期的图
    bucket_keys = keys.groupby('pos', sort=True)

    def network_for(item: Tuple[int, pd.DataFrame]) -> pd.DataFrame:
        pos, group = item
        prev = graphs.get(buckets[pos].shift(-network_lag))
        edges = list(zip(group['orig'], group['dest']))
        block = extract_network_features(prev, edges, exact_max_nodes=exact_max_nodes)
        block.index = group.index
        return block

    blocks = ParallelProcessor(max_workers=jobs).map(network_for, list(bucket_keys))
    network = pd.concat(blocks).loc[keys.index, NETWORK_FEATURE_COLUMNS]
    network.index = index

    m = assemble_matrix(target, spatial, temporal, network, cutoff=cutoff, scale=scale, level=part.level)
    logger.info("特征矩阵构建完成", level=part.level, scale=scale, rows=m.n_rows,
                train_rows=int(m.train_mask().sum()), buckets=len(buckets))
    return m


if __name__ == "__main__":
    """
    命令行入口：打印特征矩阵摘要
    """
    import argparse

    parser = argparse.ArgumentParser(description='特征矩阵工具')
    parser.add_argument('matrix', help='特征矩阵 CSV 路径')
    args = parser.parse_args()

    loaded = load_matrix(args.matrix)
    print(f"尺度: {loaded.scale}  层级: {loaded.level}  行数: {loaded.n_rows}")
    for group_name in FEATURE_GROUPS:
        print(f"  {group_name}: {len(loaded.columns_in([group_name]))} 列")
    print(f"  训练行: {int(loaded.train_mask().sum())}")
