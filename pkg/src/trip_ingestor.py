#!/usr/bin/env python3
"""
数据接入模块

本模块负责把行程记录、外生协变量、节假日日历解析为统一的数据模型，
并执行异常行程清洗。
功能特点：
- 行程 CSV 解析（列映射、ISO-8601 时间戳、行级拒收并记录原因与行号）
- 时长由时间戳重新计算，输入中的时长列仅作参考
- 异常行程清洗：时长不在 [t_min, t_max] 或端点缺失的行程被移除，按原因计数
- 协变量宽表 + 清单文件解析（频率 cadence、可预测/仅滞后 kind、分类变量词表）
- 节假日文件解析
- 对应的写出函数（合成数据生成与往返校验使用）

设计原则：
- 纯函数，输入不可变，可在多线程中调用
- 拒收行只报告不中断运行；全部拒收时返回空数据集并给出警告
- 坐标为投影平面米制坐标，不做坐标转换

作者：微出行流量预测软件团队
版本：v1.0
许可：商业软件
"""

import math
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Dict, Any, Optional, List, Tuple, Union, Iterable

import numpy as np
import pandas as pd
import yaml

# 导入统一异常类
try:
    from .exceptions import DataFileNotFoundError, TripSchemaError, ManifestError, RowParseError, IngestError
    from .log_manager import log_manager
    from .performance_utils import ParallelProcessor
except ImportError:
    from exceptions import DataFileNotFoundError, TripSchemaError, ManifestError, RowParseError, IngestError
    from log_manager import log_manager
    from performance_utils import ParallelProcessor

__all__ = [
    'TripRecord', 'CleaningPolicy', 'CovariateSeries', 'HolidayCalendar',
    'IngestReport', 'CleaningReport', 'DEFAULT_SCHEMA', 'CADENCES', 'COVARIATE_KINDS',
    'load_trips', 'load_trip_files', 'clean_trips', 'clean_trips_with_report',
    'load_covariates', 'load_holidays', 'write_trips', 'write_covariates', 'write_holidays',
    'trips_to_frame', 'cadence_floor', 'cadence_offset',
]

logger = log_manager.get_logger('trip_ingestor')

# 必需列（逻辑名）
REQUIRED_COLUMNS = ('start_ts', 'end_ts', 'origin_x', 'origin_y', 'dest_x', 'dest_y')

DEFAULT_SCHEMA: Dict[str, str] = {
    'trip_id': 'trip_id',
    'start_ts': 'start_ts',
    'end_ts': 'end_ts',
    'origin_x': 'origin_x',
    'origin_y': 'origin_y',
    'dest_x': 'dest_x',
    'dest_y': 'dest_y',
    'duration_s': 'duration_s',
}

CADENCES = ('hourly', 'daily', 'weekly', 'monthly')
COVARIATE_KINDS = ('forecastable', 'lag-only')

# 拒收原因
REJECT_START_TS = 'unparseable_start_ts'
REJECT_END_TS = 'unparseable_end_ts'
REJECT_COORDINATE = 'unparseable_coordinate'
REJECT_END_BEFORE_START = 'end_before_start'

# 清洗原因
REMOVED_MISSING_ENDPOINT = 'missing_endpoint'
REMOVED_TOO_SHORT = 'too_short'
REMOVED_TOO_LONG = 'too_long'

TIMESTAMP_FORMAT = '%Y-%m-%dT%H:%M:%SZ'


@dataclass(frozen=True)
class TripRecord:
    """一次微出行行程；坐标为投影米制，缺失端点以 NaN 表示"""
    trip_id: str
    start_ts: pd.Timestamp
    end_ts: pd.Timestamp
    origin: Tuple[float, float]
    destination: Tuple[float, float]
    duration_s: int

    def has_endpoints(self) -> bool:
        """两个端点坐标是否完整"""
        return all(math.isfinite(v) for v in (*self.origin, *self.destination))


@dataclass(frozen=True)
class CleaningPolicy:
    """异常行程清洗策略：保留 t_min_s <= duration_s <= t_max_s"""
    t_min_s: int = 30
    t_max_s: int = 7200

    def __post_init__(self):
        if not (0 <= self.t_min_s < self.t_max_s):
            raise IngestError(
                f"清洗阈值非法: 必须满足 0 <= t_min_s < t_max_s，当前值 {self.t_min_s}, {self.t_max_s}",
                {"t_min_s": self.t_min_s, "t_max_s": self.t_max_s}
            )


@dataclass
class CovariateSeries:
    """
    外生协变量时间序列

    values 的键是按 cadence 对齐的 UTC 时间戳；缺失值不出现在键中。
    分类变量的 vocabulary 非空，值为类别字符串。
    所有取值都经过 get()，便于测试中追踪访问。
    """
    name: str
    cadence: str
    kind: str
    values: Dict[pd.Timestamp, Any] = field(default_factory=dict)
    vocabulary: Optional[List[str]] = None

    @property
    def is_categorical(self) -> bool:
        return bool(self.vocabulary)

    def keys(self) -> List[pd.Timestamp]:
        """按时间排序的键列表（只读取键，不读取值）"""
        return sorted(self.values)

    def get(self, key: pd.Timestamp, default: Any = None) -> Any:
        return self.values.get(key, default)

    def __len__(self) -> int:
        return len(self.values)


@dataclass
class HolidayCalendar:
    """节假日日历：日期到可选标签"""
    holidays: Dict[date, Optional[str]] = field(default_factory=dict)

    def is_holiday(self, day: Union[date, pd.Timestamp]) -> bool:
        if isinstance(day, pd.Timestamp):
            day = day.date()
        return day in self.holidays

    def label(self, day: Union[date, pd.Timestamp]) -> Optional[str]:
        if isinstance(day, pd.Timestamp):
            day = day.date()
        return self.holidays.get(day)

    def labels(self) -> List[str]:
        """去重排序后的标签列表（无标签记为 holiday）"""
        return sorted({lab or 'holiday' for lab in self.holidays.values()})

    def dates(self) -> List[date]:
        return sorted(self.holidays)

    def __len__(self) -> int:
        return len(self.holidays)


@dataclass
class IngestReport:
    """行程文件解析报告"""
    file_path: str
    rows_read: int = 0
    rows_accepted: int = 0
    rejects: Dict[str, List[int]] = field(default_factory=dict)

    def add_reject(self, reason: str, row_number: int) -> None:
        self.rejects.setdefault(reason, []).append(row_number)

    @property
    def rows_rejected(self) -> int:
        return sum(len(v) for v in self.rejects.values())

    def to_dict(self) -> Dict[str, Any]:
        return {
            'file_path': self.file_path,
            'rows_read': self.rows_read,
            'rows_accepted': self.rows_accepted,
            'rows_rejected': self.rows_rejected,
            'rejects': {k: {'count': len(v), 'rows': v} for k, v in sorted(self.rejects.items())},
        }


@dataclass
class CleaningReport:
    """异常行程清洗报告"""
    policy: CleaningPolicy
    input_count: int = 0
    retained_count: int = 0
    removed: Dict[str, int] = field(default_factory=lambda: {
        REMOVED_MISSING_ENDPOINT: 0, REMOVED_TOO_SHORT: 0, REMOVED_TOO_LONG: 0
    })

    def to_dict(self) -> Dict[str, Any]:
        return {
            'policy': {'t_min_s': self.policy.t_min_s, 't_max_s': self.policy.t_max_s},
            'input_count': self.input_count,
            'retained_count': self.retained_count,
            'removed': dict(sorted(self.removed.items())),
        }


# ============== 时间对齐工具 ==============

def cadence_floor(ts: pd.Timestamp, cadence: str) -> pd.Timestamp:
    """
    把时间戳向下对齐到 cadence 边界（周以周一为起点）

    Args:
        ts: UTC 时间戳
        cadence: hourly/daily/weekly/monthly

    Returns:
        pd.Timestamp: 对齐后的时间戳
    """
    if cadence == 'hourly':
        return ts.floor('h')
    if cadence == 'daily':
        return ts.floor('D')
    if cadence == 'weekly':
        day = ts.floor('D')
        return day - pd.Timedelta(days=day.dayofweek)
    if cadence == 'monthly':
        return pd.Timestamp(year=ts.year, month=ts.month, day=1, tz=ts.tz)
    raise ValueError(f"未知的 cadence: {cadence}")


def cadence_offset(cadence: str) -> pd.DateOffset:
    """返回一个 cadence 周期的偏移量"""
    return {
        'hourly': pd.DateOffset(hours=1),
        'daily': pd.DateOffset(days=1),
        'weekly': pd.DateOffset(weeks=1),
        'monthly': pd.DateOffset(months=1),
    }[cadence]


def _to_utc(ts: pd.Timestamp) -> pd.Timestamp:
    return ts.tz_localize('UTC') if ts.tzinfo is None else ts.tz_convert('UTC')


# ============== 行程 ==============

def _check_file(path: Union[str, Path]) -> Path:
    path = Path(path)
    if not path.exists():
        raise DataFileNotFoundError(str(path))
    return path


def _parse_timestamps(column: pd.Series) -> pd.Series:
    parsed = pd.to_datetime(column.where(column.str.strip() != ''), utc=True,
                            errors='coerce', format='ISO8601')
    return parsed.dt.floor('s')


def load_trips(path: Union[str, Path], schema: Optional[Dict[str, str]] = None,
               return_report: bool = False) -> Union[List[TripRecord], Tuple[List[TripRecord], IngestReport]]:
    """
    解析行程 CSV 文件

    Args:
        path: 行程文件路径（UTF-8 CSV，带表头）
        schema: 逻辑列名到文件列名的映射，缺省使用 DEFAULT_SCHEMA
        return_report: 是否同时返回 IngestReport

    Returns:
        list[TripRecord]，按文件顺序；return_report=True 时返回 (records, report)

    Raises:
        DataFileNotFoundError: 文件不存在
        TripSchemaError: 缺少必需列

    Examples:
        >>> trips = load_trips("data/run/input/trips.csv")
        >>> trips[0].duration_s
        612
    """
    path = _check_file(path)
    mapping = dict(DEFAULT_SCHEMA)
    mapping.update(schema or {})

    df = pd.read_csv(path, dtype=str, keep_default_na=False, encoding='utf-8')
    for logical in REQUIRED_COLUMNS:
        if mapping[logical] not in df.columns:
            raise TripSchemaError(mapping[logical], str(path))

    report = IngestReport(file_path=str(path), rows_read=len(df))
    row_numbers = np.arange(len(df)) + 2  # 表头占第 1 行

    start = _parse_timestamps(df[mapping['start_ts']])
    end = _parse_timestamps(df[mapping['end_ts']])

    # 空坐标视为端点缺失（交给清洗阶段），非空但无法解析的坐标拒收
    coords = {}
    bad_coord = np.zeros(len(df), dtype=bool)
    for logical in ('origin_x', 'origin_y', 'dest_x', 'dest_y'):
        raw = df[mapping[logical]].str.strip()
        numeric = pd.to_numeric(raw.where(raw != ''), errors='coerce')
        present = (raw != '').to_numpy()
        values = numeric.to_numpy(dtype=float)
        bad_coord |= present & ~np.isfinite(values)
        coords[logical] = values

    bad_start = start.isna().to_numpy()
    bad_end = end.isna().to_numpy() & ~bad_start
    valid_ts = ~(bad_start | end.isna().to_numpy())
    bad_coord &= valid_ts
    before = (end < start).to_numpy() & valid_ts & ~bad_coord

    for mask, reason in ((bad_start, REJECT_START_TS), (bad_end, REJECT_END_TS),
                         (bad_coord, REJECT_COORDINATE), (before, REJECT_END_BEFORE_START)):
        for row_number in row_numbers[mask]:
            report.add_reject(reason, int(row_number))

    accept = ~(bad_start | bad_end | bad_coord | before)
    if mapping.get('trip_id') in df.columns:
        ids = df[mapping['trip_id']].to_numpy()
    else:
        ids = np.array([f"row_{n}" for n in row_numbers])

    durations = (end - start).dt.total_seconds().fillna(0.0).to_numpy().astype(np.int64)

    records = [
        TripRecord(
            trip_id=str(ids[i]),
            start_ts=start.iat[i],
            end_ts=end.iat[i],
            origin=(float(coords['origin_x'][i]), float(coords['origin_y'][i])),
            destination=(float(coords['dest_x'][i]), float(coords['dest_y'][i])),
            duration_s=int(durations[i]),
        )
        for i in np.flatnonzero(accept)
    ]
    report.rows_accepted = len(records)

    if report.rows_rejected:
        logger.warning(f"行程文件存在拒收行: {path}", rejected=report.rows_rejected,
                       reasons={k: len(v) for k, v in sorted(report.rejects.items())})
    if report.rows_read and not records:
        logger.warning(f"行程文件所有行均被拒收，返回空数据集: {path}")
    logger.info(f"行程文件解析完成: {path}", accepted=report.rows_accepted, read=report.rows_read)

    if return_report:
        return records, report
    return records


def load_trip_files(paths: Iterable[Union[str, Path]], schema: Optional[Dict[str, str]] = None,
                    jobs: int = 1) -> Tuple[List[TripRecord], List[IngestReport]]:
    """
    并行解析多个行程文件，按输入顺序拼接

    Args:
        paths: 文件路径列表
        schema: 列映射
        jobs: 并行度上限

    Returns:
        (records, reports)
    """
    processor = ParallelProcessor(max_workers=jobs)
    results = processor.map(lambda p: load_trips(p, schema, return_report=True), list(paths))
    records: List[TripRecord] = []
    reports: List[IngestReport] = []
    for recs, rep in results:
        records.extend(recs)
        reports.append(rep)
    return records, reports


def clean_trips_with_report(trips: List[TripRecord],
                            policy: CleaningPolicy) -> Tuple[List[TripRecord], CleaningReport]:
    """
    异常行程清洗，同时返回按原因计数的报告

    原因判定顺序：端点缺失 > 过短 > 过长，每条被移除的行程只计入一个原因。

    Args:
        trips: 行程列表（不会被修改）
        policy: 清洗策略

    Returns:
        (保留的行程列表, CleaningReport)
    """
    report = CleaningReport(policy=policy, input_count=len(trips))
    retained: List[TripRecord] = []
    for trip in trips:
        if not trip.has_endpoints():
            report.removed[REMOVED_MISSING_ENDPOINT] += 1
        elif trip.duration_s < policy.t_min_s:
            report.removed[REMOVED_TOO_SHORT] += 1
        elif trip.duration_s > policy.t_max_s:
            report.removed[REMOVED_TOO_LONG] += 1
        else:
            retained.append(trip)
    report.retained_count = len(retained)
    removed_total = len(trips) - len(retained)
    if removed_total:
        logger.warning("异常行程已移除", removed=removed_total, **report.removed)
    return retained, report


def clean_trips(trips: List[TripRecord], policy: CleaningPolicy) -> List[TripRecord]:
    """
    异常行程清洗：保留 t_min_s <= duration_s <= t_max_s 且端点完整的行程，顺序不变

    Args:
        trips: 行程列表
        policy: 清洗策略

    Returns:
        list[TripRecord]: 保留的行程（原对象，不复制不修改）
    """
    return clean_trips_with_report(trips, policy)[0]


def trips_to_frame(trips: List[TripRecord]) -> pd.DataFrame:
    """
    行程列表转换为 DataFrame（向量化下游计算使用）

    Returns:
        DataFrame: trip_id, start_ts, end_ts, origin_x, origin_y, dest_x, dest_y, duration_s
    """
    if not trips:
        return pd.DataFrame({
            'trip_id': pd.Series(dtype=str),
            'start_ts': pd.Series(dtype='datetime64[ns, UTC]'),
            'end_ts': pd.Series(dtype='datetime64[ns, UTC]'),
            'origin_x': pd.Series(dtype=float), 'origin_y': pd.Series(dtype=float),
            'dest_x': pd.Series(dtype=float), 'dest_y': pd.Series(dtype=float),
            'duration_s': pd.Series(dtype=np.int64),
        })
    return pd.DataFrame({
        'trip_id': [t.trip_id for t in trips],
        'start_ts': pd.to_datetime([t.start_ts for t in trips], utc=True),
        'end_ts': pd.to_datetime([t.end_ts for t in trips], utc=True),
        'origin_x': [t.origin[0] for t in trips],
        'origin_y': [t.origin[1] for t in trips],
        'dest_x': [t.destination[0] for t in trips],
        'dest_y': [t.destination[1] for t in trips],
        'duration_s': np.array([t.duration_s for t in trips], dtype=np.int64),
    })


def write_trips(trips: List[TripRecord], path: Union[str, Path]) -> Path:
    """
    写出行程 CSV（ISO-8601 时间戳，坐标保留完整精度）

    Args:
        trips: 行程列表
        path: 目标路径

    Returns:
        Path: 写出的文件路径
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df = trips_to_frame(trips)
    df['start_ts'] = df['start_ts'].dt.strftime(TIMESTAMP_FORMAT)
    df['end_ts'] = df['end_ts'].dt.strftime(TIMESTAMP_FORMAT)
    df.to_csv(path, index=False, lineterminator='\n', encoding='utf-8')
    return path


# ============== 协变量 ==============

def _load_manifest(path: Path) -> Dict[str, Dict[str, Any]]:
    with open(path, 'r', encoding='utf-8') as f:
        manifest = yaml.safe_load(f) or {}
    if not isinstance(manifest, dict):
        raise ManifestError(str(path), '清单顶层必须是 列名: {cadence, kind} 映射')
    for column, spec in manifest.items():
        if not isinstance(spec, dict):
            raise ManifestError(str(column), '声明必须包含 cadence 和 kind')
        if spec.get('cadence') not in CADENCES:
            raise ManifestError(str(column), f"cadence 非法: {spec.get('cadence')}")
        if spec.get('kind') not in COVARIATE_KINDS:
            raise ManifestError(str(column), f"kind 非法: {spec.get('kind')}")
        vocab = spec.get('vocabulary')
        if vocab is not None and (not isinstance(vocab, list) or not vocab):
            raise ManifestError(str(column), 'vocabulary 必须是非空列表')
    return manifest


def load_covariates(path: Union[str, Path],
                    manifest_path: Optional[Union[str, Path]] = None) -> List[CovariateSeries]:
    """
    解析协变量宽表

    宽表包含 date 列（ISO-8601 日期，小时频率可带时间）和每个协变量一列；
    清单文件（缺省为同名 .manifest.yaml）声明每列的 cadence、kind 和可选 vocabulary。

    Args:
        path: 协变量 CSV 路径
        manifest_path: 清单文件路径

    Returns:
        list[CovariateSeries]: 每列一个序列，按列顺序；缺失值保留为缺失键

    Raises:
        DataFileNotFoundError: 文件不存在
        ManifestError: 列未声明、声明非法或声明的列不存在
        RowParseError: 日期无法解析、重复或与 cadence 不对齐（附行号）
    """
    path = _check_file(path)
    manifest_path = _check_file(manifest_path or path.with_suffix('.manifest.yaml'))
    manifest = _load_manifest(manifest_path)

    df = pd.read_csv(path, dtype=str, keep_default_na=False, encoding='utf-8')
    if 'date' not in df.columns:
        raise ManifestError('date', '协变量表缺少 date 列')
    columns = [c for c in df.columns if c != 'date']
    for column in columns:
        if column not in manifest:
            raise ManifestError(column, '列未在清单中声明')
    for column in manifest:
        if column not in columns:
            raise ManifestError(str(column), '清单声明的列在表中不存在')

    keys: List[pd.Timestamp] = []
    seen = set()
    for i, raw in enumerate(df['date'].tolist()):
        row_number = i + 2
        try:
            key = _to_utc(pd.Timestamp(raw.strip()))
        except (ValueError, TypeError):
            raise RowParseError(str(path), row_number, f"日期无法解析: {raw!r}")
        if key is pd.NaT or pd.isna(key):
            raise RowParseError(str(path), row_number, f"日期无法解析: {raw!r}")
        if key in seen:
            raise RowParseError(str(path), row_number, f"日期重复: {raw}")
        seen.add(key)
        keys.append(key)

    series_list: List[CovariateSeries] = []
    for column in columns:
        spec = manifest[column]
        vocab = spec.get('vocabulary')
        series = CovariateSeries(name=column, cadence=spec['cadence'], kind=spec['kind'],
                                 vocabulary=[str(v) for v in vocab] if vocab else None)
        for i, raw in enumerate(df[column].tolist()):
            raw = raw.strip()
            if raw == '':
                continue
            row_number = i + 2
            key = keys[i]
            if cadence_floor(key, series.cadence) != key:
                raise RowParseError(str(path), row_number,
                                    f"{column} 的日期 {key.isoformat()} 不符合 cadence {series.cadence}")
            if series.is_categorical:
                if raw not in series.vocabulary:
                    raise RowParseError(str(path), row_number, f"{column} 的类别不在词表中: {raw}")
                series.values[key] = raw
            else:
                try:
                    value = float(raw)
                except ValueError:
                    raise RowParseError(str(path), row_number, f"{column} 的数值无法解析: {raw!r}")
                series.values[key] = value
        series_list.append(series)

    logger.info(f"协变量解析完成: {path}", series=len(series_list))
    return series_list


def write_covariates(series_list: List[CovariateSeries], path: Union[str, Path],
                     manifest_path: Optional[Union[str, Path]] = None) -> Tuple[Path, Path]:
    """
    写出协变量宽表和清单文件（浮点以最短往返表示写出）

    Returns:
        (表路径, 清单路径)
    """
    path = Path(path)
    manifest_path = Path(manifest_path) if manifest_path else path.with_suffix('.manifest.yaml')
    path.parent.mkdir(parents=True, exist_ok=True)

    all_keys = sorted({k for s in series_list for k in s.values})
    has_time = any(k != k.floor('D') for k in all_keys)
    fmt = TIMESTAMP_FORMAT if has_time else '%Y-%m-%d'
    table = {'date': [k.strftime(fmt) for k in all_keys]}
    for series in series_list:
        column = []
        for k in all_keys:
            value = series.values.get(k)
            if value is None:
                column.append('')
            elif series.is_categorical:
                column.append(str(value))
            else:
                column.append(repr(float(value)))
        table[series.name] = column
    pd.DataFrame(table).to_csv(path, index=False, lineterminator='\n', encoding='utf-8')

    manifest = {}
    for series in series_list:
        entry: Dict[str, Any] = {'cadence': series.cadence, 'kind': series.kind}
        if series.is_categorical:
            entry['vocabulary'] = list(series.vocabulary)
        manifest[series.name] = entry
    with open(manifest_path, 'w', encoding='utf-8', newline='\n') as f:
        yaml.safe_dump(manifest, f, default_flow_style=False, allow_unicode=True, sort_keys=False)
    return path, manifest_path


# ============== 节假日 ==============

def load_holidays(path: Union[str, Path]) -> HolidayCalendar:
    """
    解析节假日文件：每行一个 ISO-8601 日期，可选制表符分隔的标签；空行和 # 开头的行忽略

    Raises:
        DataFileNotFoundError: 文件不存在
        RowParseError: 日期无法解析或重复
    """
    path = _check_file(path)
    calendar = HolidayCalendar()
    with open(path, 'r', encoding='utf-8') as f:
        for row_number, line in enumerate(f, start=1):
            line = line.rstrip('\n').rstrip('\r')
            if not line.strip() or line.lstrip().startswith('#'):
                continue
            parts = line.split('\t', 1)
            try:
                day = date.fromisoformat(parts[0].strip())
            except ValueError:
                raise RowParseError(str(path), row_number, f"日期无法解析: {parts[0]!r}")
            if day in calendar.holidays:
                raise RowParseError(str(path), row_number, f"日期重复: {day.isoformat()}")
            label = parts[1].strip() if len(parts) > 1 and parts[1].strip() else None
            calendar.holidays[day] = label
    logger.info(f"节假日解析完成: {path}", holidays=len(calendar))
    return calendar


def write_holidays(calendar: HolidayCalendar, path: Union[str, Path]) -> Path:
    """写出节假日文件（按日期排序）"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        for day in calendar.dates():
            label = calendar.holidays[day]
            f.write(f"{day.isoformat()}\t{label}\n" if label else f"{day.isoformat()}\n")
    return path


if __name__ == "__main__":
    """
    命令行入口，用于行程解析与清洗
    """
    import argparse
    import json

    parser = argparse.ArgumentParser(description='行程数据接入工具')
    subparsers = parser.add_subparsers(dest='action', help='可用操作')

    load_parser = subparsers.add_parser('load', help='解析并清洗行程文件')
    load_parser.add_argument('--trips', required=True, help='行程 CSV 路径')
    load_parser.add_argument('--t-min', type=int, default=30, help='最短时长（秒）')
    load_parser.add_argument('--t-max', type=int, default=7200, help='最长时长（秒）')

    cov_parser = subparsers.add_parser('covariates', help='解析协变量表')
    cov_parser.add_argument('--path', required=True, help='协变量 CSV 路径')
    cov_parser.add_argument('--manifest', help='清单文件路径')

    args = parser.parse_args()

    if args.action == 'load':
        records, ingest_report = load_trips(args.trips, return_report=True)
        kept, clean_report = clean_trips_with_report(records, CleaningPolicy(args.t_min, args.t_max))
        print(json.dumps({'ingest': ingest_report.to_dict(), 'cleaning': clean_report.to_dict()},
                         ensure_ascii=False, indent=2))
    elif args.action == 'covariates':
        for s in load_covariates(args.path, args.manifest):
            print(f"{s.name}: cadence={s.cadence}, kind={s.kind}, values={len(s)}")
    else:
        parser.print_help()
