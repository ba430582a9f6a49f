#!/usr/bin/env python3
"""
季节分解模块

本模块实现分段线性趋势 + 傅里叶季节项 + 节假日回归项的加法分解模型，
在城市总流量序列上拟合，并为任意时间桶生成季节特征。
功能特点：
- 分段线性趋势：变点均匀分布在拟合窗口内（默认 10 个）
- 周季节（3 阶）、年季节（10 阶）、日内季节（4 阶，仅小时尺度）傅里叶项
- 每个节假日标签一个指示回归项（月尺度为当月节假日天数占比）
- 岭回归联合求解（λ = 1e-3，截距不惩罚）
- 数据不足的季节项自动剔除并记录警告
- 模型可序列化为字典，供季节基线模型保存/加载

设计原则：
- 拟合窗口终点不晚于时间截断点
- 傅里叶相位按绝对日历时间计算，外推时保持对齐

作者：微出行流量预测软件团队
版本：v1.0
许可：商业软件
"""

from dataclasses import dataclass, field
from typing import Dict, Any, Optional, List

import numpy as np
import pandas as pd

try:
    from .exceptions import SeasonalFitError
    from .log_manager import log_manager
    from .trip_ingestor import HolidayCalendar, cadence_offset
    from .flow_network import TimeBucket
except ImportError:
    from exceptions import SeasonalFitError
    from log_manager import log_manager
    from trip_ingestor import HolidayCalendar, cadence_offset
    from flow_network import TimeBucket

__all__ = ['SeasonalModel', 'fit_seasonal', 'seasonal_features', 'seasonal_frame',
           'SEASONAL_COLUMNS', 'PERIODS_DAYS']

logger = log_manager.get_logger('seasonal_model')

PERIODS_DAYS = {'weekly': 7.0, 'yearly': 365.25, 'daily': 1.0}
BUCKET_DAYS = {'hourly': 1.0 / 24.0, 'daily': 1.0, 'monthly': 30.4375}
SEASONAL_COLUMNS = ['trend_component', 'weekly_component', 'yearly_component',
                    'daily_component', 'holiday_component', 'yhat']

_EPOCH = pd.Timestamp('1970-01-01', tz='UTC')


def _days_since_epoch(starts: pd.DatetimeIndex) -> np.ndarray:
    return np.asarray((starts - _EPOCH) / pd.Timedelta(days=1), dtype=float)


def _fourier(days: np.ndarray, period: float, order: int) -> np.ndarray:
    """sin/cos 傅里叶基，列顺序 sin_1..sin_K, cos_1..cos_K"""
    x = 2.0 * np.pi * days / period
    values = x[:, None] * np.arange(1, order + 1)
    return np.concatenate([np.sin(values), np.cos(values)], axis=1)


@dataclass
class SeasonalModel:
    """
    已拟合的季节分解模型

    coefficients 按设计矩阵列名保存；orders 中为 0 的季节项表示已剔除。
    """
    scale: str
    fit_start: pd.Timestamp
    fit_end: pd.Timestamp
    span_days: float
    changepoints: np.ndarray
    orders: Dict[str, int]
    holidays: Dict[str, List[str]]
    coefficients: Dict[str, float]
    ridge_lambda: float = 1e-3
    dropped_terms: List[str] = field(default_factory=list)

    @property
    def columns(self) -> List[str]:
        return list(self.coefficients)

    def design(self, starts: pd.DatetimeIndex) -> Dict[str, np.ndarray]:
        """按组返回设计矩阵块：trend / weekly / yearly / daily / holiday"""
        days = _days_since_epoch(starts)
        t = (days - _days_since_epoch(pd.DatetimeIndex([self.fit_start]))[0]) / self.span_days
        blocks = {
            'trend': np.column_stack([np.ones_like(t), t]
                                     + [np.maximum(t - s, 0.0) for s in self.changepoints]),
        }
        for term in ('weekly', 'yearly', 'daily'):
            order = self.orders.get(term, 0)
            blocks[term] = _fourier(days, PERIODS_DAYS[term], order) if order else np.zeros((len(t), 0))
        blocks['holiday'] = self._holiday_block(starts)
        return blocks

    def _holiday_block(self, starts: pd.DatetimeIndex) -> np.ndarray:
        labels = sorted(self.holidays)
        if not labels:
            return np.zeros((len(starts), 0))
        block = np.zeros((len(starts), len(labels)))
        step = cadence_offset(self.scale)
        for j, label in enumerate(labels):
            days = pd.DatetimeIndex(pd.to_datetime(self.holidays[label])).tz_localize('UTC')
            if self.scale != 'monthly':
                block[:, j] = starts.floor('D').isin(days).astype(float)
                continue
            for i, start in enumerate(starts):
                end = start + step
                block[i, j] = float(((days >= start) & (days < end)).sum()) / (end - start).days
        return block

    def components(self, starts: pd.DatetimeIndex) -> pd.DataFrame:
        """计算各分量和 yhat"""
        blocks = self.design(starts)
        coef = self._coef_blocks()
        out = {
            'trend_component': blocks['trend'] @ coef['trend'],
            'weekly_component': blocks['weekly'] @ coef['weekly'],
            'yearly_component': blocks['yearly'] @ coef['yearly'],
            'daily_component': blocks['daily'] @ coef['daily'],
            'holiday_component': blocks['holiday'] @ coef['holiday'],
        }
        frame = pd.DataFrame(out, index=starts)
        frame['yhat'] = frame[SEASONAL_COLUMNS[:-1]].sum(axis=1)
        return frame

    def _coef_blocks(self) -> Dict[str, np.ndarray]:
        names = self.columns
        values = np.array([self.coefficients[c] for c in names])
        blocks = {}
        for group in ('trend', 'weekly', 'yearly', 'daily', 'holiday'):
            mask = np.array([c.split(':', 1)[0] == group for c in names], dtype=bool)
            blocks[group] = values[mask]
        return blocks

    def to_dict(self) -> Dict[str, Any]:
        return {
            'scale': self.scale,
            'fit_start': self.fit_start.isoformat(),
            'fit_end': self.fit_end.isoformat(),
            'span_days': self.span_days,
            'changepoints': [float(s) for s in self.changepoints],
            'orders': dict(self.orders),
            'holidays': {k: list(v) for k, v in sorted(self.holidays.items())},
            'coefficients': {k: float(v) for k, v in self.coefficients.items()},
            'ridge_lambda': self.ridge_lambda,
            'dropped_terms': list(self.dropped_terms),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'SeasonalModel':
        return cls(
            scale=data['scale'],
            fit_start=pd.Timestamp(data['fit_start']),
            fit_end=pd.Timestamp(data['fit_end']),
            span_days=float(data['span_days']),
            changepoints=np.asarray(data['changepoints'], dtype=float),
            orders={k: int(v) for k, v in data['orders'].items()},
            holidays={k: list(v) for k, v in data['holidays'].items()},
            coefficients={k: float(v) for k, v in data['coefficients'].items()},
            ridge_lambda=float(data.get('ridge_lambda', 1e-3)),
            dropped_terms=list(data.get('dropped_terms', [])),
        )


def fit_seasonal(history: pd.Series, cal: Optional[HolidayCalendar], cutoff: pd.Timestamp,
                 scale: str = 'daily', n_changepoints: int = 10, weekly_order: int = 3,
                 yearly_order: int = 10, daily_order: int = 4, ridge_lambda: float = 1e-3) -> SeasonalModel:
    """
    在截断点之前的总流量序列上拟合季节分解模型

    Args:
        history: 以时间桶起点（UTC）为索引的总流量序列，全部早于 cutoff
        cal: 节假日日历（可为 None）
        cutoff: 时间截断点
        scale: 时间尺度
        n_changepoints: 变点个数
        weekly_order / yearly_order / daily_order: 各季节项傅里叶阶数
        ridge_lambda: 岭回归惩罚系数（截距不惩罚）

    Returns:
        SeasonalModel

    Raises:
        SeasonalFitError: 序列为空或包含截断点之后的数据
    """
    history = history.dropna().sort_index()
    if history.empty:
        raise SeasonalFitError('历史序列为空')
    starts = pd.DatetimeIndex(history.index)
    if starts.tz is None:
        starts = starts.tz_localize('UTC')
    cutoff = pd.Timestamp(cutoff)
    cutoff = cutoff.tz_localize('UTC') if cutoff.tzinfo is None else cutoff
    if (starts >= cutoff).any():
        raise SeasonalFitError(f'历史序列包含截断点 {cutoff.isoformat()} 之后的数据')

    fit_end = min(starts[-1] + cadence_offset(scale), cutoff)
    span_days = max((fit_end - starts[0]) / pd.Timedelta(days=1), 1e-9)
    bucket_days = BUCKET_DAYS[scale]

    orders = {'weekly': weekly_order, 'yearly': yearly_order, 'daily': daily_order if scale == 'hourly' else 0}
    required_span = {'weekly': 2 * PERIODS_DAYS['weekly'], 'yearly': PERIODS_DAYS['yearly'], 'daily': 2.0}
    dropped = []
    for term in ('weekly', 'yearly', 'daily'):
        if orders[term] == 0:
            if term == 'daily' and scale != 'hourly':
                continue
            dropped.append(term)
            continue
        if PERIODS_DAYS[term] < 2 * bucket_days:
            reason = '周期短于两个时间桶'
        elif span_days < required_span[term]:
            reason = f'数据跨度 {span_days:.1f} 天不足 {required_span[term]:.2f} 天'
        else:
            continue
        orders[term] = 0
        dropped.append(term)
        logger.warning(f"季节项已剔除: {term}", reason=reason, scale=scale)

    holidays: Dict[str, List[str]] = {}
    if cal is not None:
        for day in cal.dates():
            label = cal.label(day) or 'holiday'
            holidays.setdefault(label, []).append(day.isoformat())

    model = SeasonalModel(scale=scale, fit_start=starts[0], fit_end=fit_end, span_days=float(span_days),
                          changepoints=np.linspace(0.0, 1.0, n_changepoints + 2)[1:-1],
                          orders=orders, holidays=holidays, coefficients={}, ridge_lambda=ridge_lambda,
                          dropped_terms=dropped)
    blocks = model.design(starts)

    # 拟合窗口内从未出现的节假日标签不参与求解
    labels = sorted(holidays)
    active = [j for j, _ in enumerate(labels) if np.any(blocks['holiday'][:, j] != 0)] if labels else []
    model.holidays = {labels[j]: holidays[labels[j]] for j in active}
    blocks['holiday'] = blocks['holiday'][:, active] if labels else blocks['holiday']

    names = (['trend:intercept', 'trend:slope'] + [f'trend:delta_{j}' for j in range(n_changepoints)]
             + [f'weekly:{kind}_{k}' for kind in ('sin', 'cos') for k in range(1, orders['weekly'] + 1)]
             + [f'yearly:{kind}_{k}' for kind in ('sin', 'cos') for k in range(1, orders['yearly'] + 1)]
             + [f'daily:{kind}_{k}' for kind in ('sin', 'cos') for k in range(1, orders['daily'] + 1)]
             + [f'holiday:{label}' for label in sorted(model.holidays)])
    x = np.hstack([blocks['trend'], blocks['weekly'], blocks['yearly'], blocks['daily'], blocks['holiday']])
    y = history.to_numpy(dtype=float)

    penalty = np.full(x.shape[1], ridge_lambda)
    penalty[0] = 0.0
    gram = x.T @ x + np.diag(penalty)
    rhs = x.T @ y
    try:
        beta = np.linalg.solve(gram, rhs)
    except np.linalg.LinAlgError:
        beta = np.linalg.lstsq(gram, rhs, rcond=None)[0]
    if not np.all(np.isfinite(beta)):
        raise SeasonalFitError('岭回归求解得到非有限系数')

    model.coefficients = {name: float(b) for name, b in zip(names, beta)}
    logger.info("季节模型拟合完成", scale=scale, buckets=len(y), columns=len(names),
                dropped=",".join(dropped) or "none")
    return model


def seasonal_frame(model: SeasonalModel, buckets: List[TimeBucket]) -> pd.DataFrame:
    """批量计算时间桶的季节特征，索引为桶起点"""
    starts = pd.DatetimeIndex([b.start for b in buckets])
    return model.components(starts)


def seasonal_features(model: SeasonalModel, bucket: TimeBucket) -> Dict[str, float]:
    """
    计算单个时间桶的季节特征：trend/weekly/yearly/daily/holiday 分量与 yhat
    """
    row = seasonal_frame(model, [bucket]).iloc[0]
    return {column: float(row[column]) for column in SEASONAL_COLUMNS}


if __name__ == "__main__":
    """
    命令行入口：对 date,total 两列 CSV 拟合季节模型并打印分量
    """
    import argparse
    import json

    try:
        from .trip_ingestor import load_holidays
    except ImportError:
        from trip_ingestor import load_holidays

    parser = argparse.ArgumentParser(description='季节分解工具')
    parser.add_argument('series', help='CSV 文件，两列：时间桶起点, 总流量')
    parser.add_argument('--cutoff', required=True, help='时间截断点（ISO 8601）')
    parser.add_argument('--scale', default='daily', choices=['hourly', 'daily', 'monthly'])
    parser.add_argument('--holidays', help='节假日文件路径')
    args = parser.parse_args()

    raw = pd.read_csv(args.series)
    series = pd.Series(raw.iloc[:, 1].to_numpy(dtype=float),
                       index=pd.to_datetime(raw.iloc[:, 0], utc=True))
    calendar = load_holidays(args.holidays) if args.holidays else None
    fitted = fit_seasonal(series, calendar, pd.Timestamp(args.cutoff), scale=args.scale)
    print(json.dumps(fitted.to_dict(), ensure_ascii=False, indent=2))
