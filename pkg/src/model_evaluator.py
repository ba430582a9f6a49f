#!/usr/bin/env python3
"""
模型评估模块

本模块实现时间截断切分、误差指标、跨 (时间尺度, 空间层级) 的模型对比和七组特征消融。
功能特点：
- 时间截断：桶起点早于截断点为训练集，其余为测试集
- 指标：MAE、MSE、RMSE、MAPE（目标为 0 的行不计入 MAPE 并单独计数）
- 模型对比表：timeframe, geography, featurestypes, regressortype, regressor, mae, mape, mse, rmse
- 单个模型训练失败只记录为带 error 的行，不中断整个对比
- 消融：all / spatial / temporal / network / spatial+temporal / network+temporal / spatial+network
- 需求时间分布、相对提升摘要、定宽表格输出

设计原则：
- 缩放参数只在训练行上拟合
- 输出表按固定顺序排列，固定种子下逐字节可复现

作者：微出行流量预测软件团队
版本：v1.0
许可：商业软件
"""

from dataclasses import dataclass
from functools import partial
from typing import Dict, Any, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

try:
    from .exceptions import SplitError, AblationConfigError, ShapeMismatchError, handle_exception
    from .log_manager import log_manager
    from .dependencies import progress
    from .performance_utils import ParallelProcessor
    from .trip_ingestor import HolidayCalendar, cadence_floor
    from .feature_generator import (FeatureMatrix, ScalerState, SPATIAL, TEMPORAL, NETWORK, KEY_COLUMNS,
                                    fit_scaler, apply_scaler)
    from .model_zoo import ModelSpec, fit_model, predict, regressor_type
except ImportError:
    from exceptions import SplitError, AblationConfigError, ShapeMismatchError, handle_exception
    from log_manager import log_manager
    from dependencies import progress
    from performance_utils import ParallelProcessor
    from trip_ingestor import HolidayCalendar, cadence_floor
    from feature_generator import (FeatureMatrix, ScalerState, SPATIAL, TEMPORAL, NETWORK, KEY_COLUMNS,
                                   fit_scaler, apply_scaler)
    from model_zoo import ModelSpec, fit_model, predict, regressor_type

__all__ = [
    'CutoffSpec', 'MetricsReport', 'EvaluationResult', 'TABLE_COLUMNS', 'ABLATION_SUBSETS', 'SCALE_ORDER',
    'split', 'metrics', 'prepare_split', 'evaluate_model', 'score_fitted', 'result_row',
    'run_benchmark', 'run_ablation', 'select_best',
    'demand_profile', 'improvement_summary', 'format_table',
]

logger = log_manager.get_logger('model_evaluator')

TABLE_COLUMNS = ['timeframe', 'geography', 'featurestypes', 'regressortype', 'regressor',
                 'mae', 'mape', 'mse', 'rmse', 'n_rows', 'n_mape_excluded', 'error']
ABLATION_SUBSETS: List[Tuple[str, Tuple[str, ...]]] = [
    ('all', (SPATIAL, TEMPORAL, NETWORK)),
    ('spatial', (SPATIAL,)),
    ('temporal', (TEMPORAL,)),
    ('network', (NETWORK,)),
    ('spatial+temporal', (SPATIAL, TEMPORAL)),
    ('network+temporal', (NETWORK, TEMPORAL)),
    ('spatial+network', (SPATIAL, NETWORK)),
]
SCALE_ORDER = {'hourly': 0, 'daily': 1, 'monthly': 2}


@dataclass(frozen=True)
class CutoffSpec:
    """时间截断点（UTC）"""
    cutoff: pd.Timestamp

    @classmethod
    def parse(cls, value: Union[str, pd.Timestamp]) -> 'CutoffSpec':
        ts = pd.Timestamp(value)
        return cls(ts.tz_localize('UTC') if ts.tzinfo is None else ts.tz_convert('UTC'))

    def aligned(self, scale: str) -> pd.Timestamp:
        """向下对齐到时间尺度边界"""
        return cadence_floor(self.cutoff, scale)

    def __str__(self) -> str:
        return self.cutoff.isoformat()


@dataclass
class MetricsReport:
    """误差指标；没有非零目标时 mape 为 NaN"""
    mae: float
    mape: float
    mse: float
    rmse: float
    n_rows: int
    n_mape_excluded: int

    def to_dict(self) -> Dict[str, Any]:
        return {'mae': self.mae, 'mape': self.mape, 'mse': self.mse, 'rmse': self.rmse,
                'n_rows': self.n_rows, 'n_mape_excluded': self.n_mape_excluded}


@dataclass
class EvaluationResult:
    """单个模型在单个矩阵、单个列子集上的评估结果"""
    spec: ModelSpec
    metrics: Optional[MetricsReport]
    model: Any = None
    scaler: Optional[ScalerState] = None
    columns: Optional[List[str]] = None
    error: Optional[str] = None


# ============== 切分与指标 ==============

def split(m: FeatureMatrix, c: Union[CutoffSpec, str, pd.Timestamp]) -> Tuple[FeatureMatrix, FeatureMatrix]:
    """
    按时间截断切分，并把 split 标签写回矩阵

    截断点先向下对齐到矩阵的时间尺度边界。

    Raises:
        SplitError: 训练集或测试集为空
    """
    spec = c if isinstance(c, CutoffSpec) else CutoffSpec.parse(c)
    cutoff = spec.aligned(m.scale)
    is_train = (m.frame['bucket_start'] < cutoff).to_numpy()
    if not is_train.any():
        raise SplitError('train', str(cutoff))
    if is_train.all():
        raise SplitError('test', str(cutoff))
    m.frame['split'] = np.where(is_train, 'train', 'test')
    train = m.with_frame(m.frame.loc[is_train].reset_index(drop=True))
    test = m.with_frame(m.frame.loc[~is_train].reset_index(drop=True))
    return train, test


def metrics(y_true: np.ndarray, y_pred: np.ndarray) -> MetricsReport:
    """
    MAE / MSE / RMSE / MAPE

    Raises:
        ShapeMismatchError: 长度不一致或为空

    Examples:
        >>> metrics([1, 2, 3], [2, 3, 4]).rmse
        1.0
    """
    y_true = np.asarray(y_true, dtype=float).ravel()
    y_pred = np.asarray(y_pred, dtype=float).ravel()
    if len(y_true) != len(y_pred) or len(y_true) == 0:
        raise ShapeMismatchError(len(y_true), len(y_pred), what='长度')
    err = y_pred - y_true
    mse = float(np.mean(err ** 2))
    nonzero = y_true != 0
    mape = float(np.mean(np.abs(err[nonzero] / y_true[nonzero])) * 100.0) if nonzero.any() else float('nan')
    return MetricsReport(mae=float(np.mean(np.abs(err))), mape=mape, mse=mse, rmse=float(np.sqrt(mse)),
                         n_rows=int(len(y_true)), n_mape_excluded=int((~nonzero).sum()))


# ============== 单模型评估 ==============

def prepare_split(m: FeatureMatrix, cutoff: Union[CutoffSpec, str, pd.Timestamp],
                  state: Optional[ScalerState] = None) -> Tuple[FeatureMatrix, FeatureMatrix, ScalerState]:
    """
    切分并插补缩放，返回 (训练矩阵, 测试矩阵, 缩放状态)

    state 为 None 时在训练行上拟合；给定时直接复用（评估已保存的模型）。
    """
    cutoff = cutoff if isinstance(cutoff, CutoffSpec) else CutoffSpec.parse(cutoff)
    # 在整表上插补缩放，测试行的前向填充可以接上训练期的最后取值
    split(m, cutoff)
    state = state if state is not None else fit_scaler(m)
    scaled = apply_scaler(state, m)
    is_train = scaled.train_mask()
    train = scaled.with_frame(scaled.frame.loc[is_train].reset_index(drop=True))
    test = scaled.with_frame(scaled.frame.loc[~is_train].reset_index(drop=True))
    return train, test, state


def _test_predictions(model: Any, spec: ModelSpec, test: FeatureMatrix, columns: List[str]) -> np.ndarray:
    if spec.kind == 'seasonal':
        y_pred = predict(model, test.frame[KEY_COLUMNS])
    else:
        y_pred = predict(model, test.features(columns))
    if not np.all(np.isfinite(y_pred)):
        raise FloatingPointError('预测结果包含非有限值')
    return y_pred


def _failed(spec: ModelSpec, m: FeatureMatrix, columns: List[str], e: Exception) -> EvaluationResult:
    info = handle_exception(e)
    logger.warning("模型训练或评估失败，已记录为错误行", model=spec.name, level=m.level,
                   scale=m.scale, error=info.get('message', str(e)))
    return EvaluationResult(spec=spec, metrics=None, columns=list(columns),
                            error=f"{info.get('error_code', type(e).__name__)}: {info.get('message', e)}")


def evaluate_model(train: FeatureMatrix, test: FeatureMatrix, spec: ModelSpec, columns: List[str],
                   seed: int = 0, jobs: int = 1, cutoff: Optional[CutoffSpec] = None,
                   cal: Optional[HolidayCalendar] = None,
                   seasonal_params: Optional[Dict[str, Any]] = None) -> EvaluationResult:
    """
    在已缩放的训练/测试矩阵上训练并评估一个模型，只读取 columns 指定的列

    训练失败时返回带 error 的结果，不抛出异常。
    """
    try:
        if spec.kind == 'seasonal':
            model = fit_model(spec, np.empty((train.n_rows, 0)), train.target, seed=seed,
                              train_keys=train.frame[KEY_COLUMNS + ['target']], scale=train.scale,
                              cutoff=cutoff.aligned(train.scale) if cutoff else None, cal=cal,
                              seasonal_params=seasonal_params)
        else:
            model = fit_model(spec, train.features(columns), train.target, seed=seed, jobs=jobs)
        report = metrics(test.target, _test_predictions(model, spec, test, columns))
        return EvaluationResult(spec=spec, metrics=report, model=model, columns=list(columns))
    except Exception as e:
        return _failed(spec, train, columns, e)


def score_fitted(model: Any, spec: ModelSpec, test: FeatureMatrix,
                 columns: Optional[List[str]] = None) -> EvaluationResult:
    """在测试矩阵上评估一个已训练（通常从文件加载）的模型"""
    columns = list(columns if columns is not None else test.feature_columns)
    try:
        report = metrics(test.target, _test_predictions(model, spec, test, columns))
        return EvaluationResult(spec=spec, metrics=report, model=model, columns=columns)
    except Exception as e:
        return _failed(spec, test, columns, e)


def result_row(m: FeatureMatrix, features_label: str, result: EvaluationResult) -> Dict[str, Any]:
    row = {'timeframe': m.scale, 'geography': m.level, 'featurestypes': features_label,
           'regressortype': regressor_type(result.spec.kind), 'regressor': result.spec.name}
    if result.metrics is not None:
        row.update(result.metrics.to_dict())
        row['error'] = ''
    else:
        row.update({'mae': np.nan, 'mape': np.nan, 'mse': np.nan, 'rmse': np.nan,
                    'n_rows': 0, 'n_mape_excluded': 0, 'error': result.error})
    return row


def _ordered(matrices: Dict[Tuple[str, str], FeatureMatrix]) -> List[Tuple[str, str]]:
    return sorted(matrices, key=lambda key: (SCALE_ORDER.get(key[0], 99), key[0], key[1]))


# ============== 模型对比 ==============

def _run_cell(cell: Tuple[FeatureMatrix, FeatureMatrix, ModelSpec], seed: int, cutoff: CutoffSpec,
              cal: Optional[HolidayCalendar], seasonal_params: Optional[Dict[str, Any]]) -> EvaluationResult:
    """一个模型对比单元格；定义在模块顶层以便送入进程池"""
    train, test, model_spec = cell
    return evaluate_model(train, test, model_spec, train.feature_columns, seed=seed, jobs=1,
                          cutoff=cutoff, cal=cal, seasonal_params=seasonal_params)


def run_benchmark(matrices: Dict[Tuple[str, str], FeatureMatrix], grid: List[ModelSpec],
                  cutoff: Union[CutoffSpec, str, pd.Timestamp], seed: int = 0, jobs: int = 1,
                  cal: Optional[HolidayCalendar] = None, seasonal_params: Optional[Dict[str, Any]] = None,
                  return_results: bool = False):
    """
    在每个 (时间尺度, 空间层级) 的矩阵上评估模型网格

    Args:
        matrices: {(scale, level): FeatureMatrix}
        grid: 模型条目
        cutoff: 时间截断点
        seed: 随机种子
        jobs: 并行进程数（按单元格并行，结果顺序固定）
        cal: 节假日日历（季节基线使用）
        seasonal_params: 季节模型参数
        return_results: 同时返回 {(scale, level, name): EvaluationResult}

    Returns:
        DataFrame（TABLE_COLUMNS），或 (DataFrame, results)
    """
    spec = cutoff if isinstance(cutoff, CutoffSpec) else CutoffSpec.parse(cutoff)
    cells = []
    prepared = {}
    for key in _ordered(matrices):
        train, test, state = prepare_split(matrices[key], spec)
        prepared[key] = (train, test, state)
        cells += [(key, model_spec) for model_spec in grid]

    work = [(prepared[key][0], prepared[key][1], model_spec) for key, model_spec in cells]
    run_cell = partial(_run_cell, seed=seed, cutoff=spec, cal=cal, seasonal_params=seasonal_params)
    if jobs == 1:
        results = [run_cell(cell) for cell in progress(work, desc='benchmark', total=len(work))]
    else:
        results = ParallelProcessor(max_workers=jobs, use_processes=True).map(run_cell, work)
    for (key, _), result in zip(cells, results):
        result.scaler = prepared[key][2]

    rows = [result_row(prepared[key][0], 'all', result) for (key, _), result in zip(cells, results)]
    table = pd.DataFrame(rows, columns=TABLE_COLUMNS)
    logger.info("模型对比完成", cells=len(cells), failed=int((table['error'] != '').sum()))
    if return_results:
        return table, {(key[0], key[1], s.name): r for (key, s), r in zip(cells, results)}
    return table


def select_best(table: pd.DataFrame, include_baseline: bool = False) -> pd.DataFrame:
    """
    每个 (timeframe, geography) 的最优模型：测试 MAE 最小，并列时 RMSE 最小

    默认不考虑季节基线（它不使用特征列，无法做消融）。
    """
    ok = table[(table['error'] == '') & table['mae'].notna()]
    if not include_baseline:
        ok = ok[ok['regressortype'] != regressor_type('seasonal')]
    ok = ok.sort_values(['timeframe', 'geography', 'mae', 'rmse'], kind='mergesort')
    return ok.groupby(['timeframe', 'geography'], sort=False).head(1).reset_index(drop=True)


# ============== 特征组消融 ==============

def run_ablation(m: FeatureMatrix, spec: ModelSpec, cutoff: Union[CutoffSpec, str, pd.Timestamp],
                 seed: int = 0, jobs: int = 1) -> pd.DataFrame:
    """
    用同一个模型在七个特征组子集上训练评估

    jobs > 1 时七个子集在进程池中并行，结果与顺序执行一致。

    Raises:
        AblationConfigError: 某个特征组没有任何列
    """
    for group in (SPATIAL, TEMPORAL, NETWORK):
        if not m.columns_in([group]):
            raise AblationConfigError(group)
    cutoff_spec = cutoff if isinstance(cutoff, CutoffSpec) else CutoffSpec.parse(cutoff)
    train, test, _ = prepare_split(m, cutoff_spec)
    subsets = [m.feature_columns if label == 'all' else train.columns_in(groups)
               for label, groups in ABLATION_SUBSETS]
    evaluate = partial(evaluate_model, train, test, spec, seed=seed, jobs=1, cutoff=cutoff_spec)
    if jobs == 1:
        results = [evaluate(columns) for columns in subsets]
    else:
        results = ParallelProcessor(max_workers=jobs, use_processes=True).map(evaluate, subsets)
    rows = [result_row(train, label, result) for (label, _), result in zip(ABLATION_SUBSETS, results)]
    logger.info("特征组消融完成", level=m.level, scale=m.scale, model=spec.name)
    return pd.DataFrame(rows, columns=TABLE_COLUMNS)


# ============== 报告辅助 ==============

def demand_profile(trips: pd.DataFrame) -> Dict[str, Dict[int, int]]:
    """
    行程数按小时、星期（周一=0）和月份的分布

    Args:
        trips: 含 start_ts 列的行程表
    """
    starts = pd.to_datetime(trips['start_ts'], utc=True)
    return {
        'hour_of_day': {h: int(v) for h, v in starts.dt.hour.value_counts().reindex(range(24), fill_value=0).items()},
        'day_of_week': {d: int(v) for d, v in
                        starts.dt.dayofweek.value_counts().reindex(range(7), fill_value=0).items()},
        'month': {mo: int(v) for mo, v in starts.dt.month.value_counts().reindex(range(1, 13), fill_value=0).items()},
    }


def _relative(better: float, worse: float) -> float:
    return float((worse - better) / worse * 100.0) if worse and np.isfinite(worse) else float('nan')


def improvement_summary(table: pd.DataFrame, ablation: Optional[pd.DataFrame] = None) -> List[Dict[str, Any]]:
    """
    相对提升摘要（百分比）

    每个 (timeframe, geography)：最优模型（不含季节基线）相对次优模型、相对季节基线的 MAE/RMSE 降幅；
    有消融表时，各子集相对 all 的 MAE 变化。
    """
    summary = []
    ok = table[(table['error'] == '') & table['mae'].notna()]
    for (timeframe, geography), group in ok.groupby(['timeframe', 'geography'], sort=True):
        baseline = group[group['regressortype'] == regressor_type('seasonal')]
        ranked = group.drop(baseline.index).sort_values(['mae', 'rmse'], kind='mergesort')
        if ranked.empty:
            continue
        best = ranked.iloc[0]
        entry = {'timeframe': timeframe, 'geography': geography, 'best': best['regressor']}
        if len(ranked) > 1:
            runner = ranked.iloc[1]
            entry.update({'runner_up': runner['regressor'],
                          'mae_vs_runner_up_pct': _relative(best['mae'], runner['mae']),
                          'rmse_vs_runner_up_pct': _relative(best['rmse'], runner['rmse'])})
        if len(baseline):
            entry.update({'mae_vs_baseline_pct': _relative(best['mae'], baseline.iloc[0]['mae']),
                          'rmse_vs_baseline_pct': _relative(best['rmse'], baseline.iloc[0]['rmse'])})
        if ablation is not None:
            sub = ablation[(ablation['timeframe'] == timeframe) & (ablation['geography'] == geography)]
            full = sub[sub['featurestypes'] == 'all']
            if len(full) and pd.notna(full.iloc[0]['mae']):
                # 正值表示去掉其余特征组后 MAE 变大
                entry['ablation_mae_change_pct'] = {
                    row['featurestypes']: -_relative(row['mae'], full.iloc[0]['mae'])
                    if pd.notna(row['mae']) else float('nan')
                    for _, row in sub.iterrows() if row['featurestypes'] != 'all'
                }
        summary.append(entry)
    return summary


def format_table(table: pd.DataFrame, columns: Optional[List[str]] = None) -> str:
    """定宽表格文本（浮点保留 4 位有效小数）"""
    columns = columns or [c for c in TABLE_COLUMNS if c in table.columns and c != 'error']
    view = table[columns].copy()
    for c in view.columns:
        if pd.api.types.is_float_dtype(view[c]):
            view[c] = view[c].map(lambda v: 'nan' if pd.isna(v) else f'{v:.4f}')
    return view.to_string(index=False)


if __name__ == "__main__":
    """
    命令行入口：在单个特征矩阵上评估模型网格
    """
    import argparse

    try:
        from .feature_generator import load_matrix
        from .config_manager import config_manager
    except ImportError:
        from feature_generator import load_matrix
        from config_manager import config_manager

    parser = argparse.ArgumentParser(description='模型评估工具')
    parser.add_argument('matrix', help='特征矩阵 CSV 路径')
    parser.add_argument('--cutoff', default=config_manager.get_config('temporal.cutoff'))
    parser.add_argument('--seed', type=int, default=42)
    args = parser.parse_args()

    loaded = load_matrix(args.matrix)
    model_grid = [ModelSpec.from_dict(e) for e in config_manager.get_config('models.grid')]
    result_table = run_benchmark({(loaded.scale, loaded.level): loaded}, model_grid, args.cutoff, seed=args.seed)
    print(format_table(result_table))
