#!/usr/bin/env python3
"""
模型库模块

本模块汇总回归模型库：K 近邻、季节基线，以及按配置条目训练、统一预测、版本化保存/加载。
功能特点：
- K 近邻：分块矩阵乘法计算欧氏距离，距离并列时取训练行序号最小者
- 季节基线：城市总量季节模型的 yhat 按各边训练期流量占比分配到边
- 统一入口 fit_model / predict，按配置中的 kind 分派
- 模型 JSON 文件带 format_version，读取失败时不返回部分模型

作者：微出行流量预测软件团队
版本：v1.0
许可：商业软件
"""

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Any, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

try:
    from .exceptions import ModelFormatError, ModelParameterError, ShapeMismatchError
    from .log_manager import log_manager
    from .utils import to_jsonable
    from .trip_ingestor import HolidayCalendar
    from .seasonal_model import SeasonalModel, fit_seasonal
    from .linear_models import LinearModel, fit_ols, fit_ridge, fit_lasso, fit_elastic_net
    from .tree_models import RegressionTree, TreeEnsemble, fit_tree, fit_forest, fit_gbm
except ImportError:
    from exceptions import ModelFormatError, ModelParameterError, ShapeMismatchError
    from log_manager import log_manager
    from utils import to_jsonable
    from trip_ingestor import HolidayCalendar
    from seasonal_model import SeasonalModel, fit_seasonal
    from linear_models import LinearModel, fit_ols, fit_ridge, fit_lasso, fit_elastic_net
    from tree_models import RegressionTree, TreeEnsemble, fit_tree, fit_forest, fit_gbm

__all__ = ['ModelSpec', 'KnnModel', 'SeasonalBaseline', 'fit_knn', 'predict_knn', 'fit_seasonal_baseline',
           'fit_model', 'predict', 'save_model', 'load_model', 'regressor_type', 'FORMAT_VERSION']

logger = log_manager.get_logger('model_zoo')

FORMAT_VERSION = 1
KNN_CHUNK = 256


@dataclass
class ModelSpec:
    """模型网格中的一个条目：展示名、种类与超参数"""
    name: str
    kind: str
    params: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ModelSpec':
        return cls(name=str(data['name']), kind=str(data['kind']), params=dict(data.get('params') or {}))

    def to_dict(self) -> Dict[str, Any]:
        return {'name': self.name, 'kind': self.kind, 'params': dict(self.params)}


def regressor_type(kind: str) -> str:
    """比较表中的 regressortype 列"""
    return 'Time series' if kind == 'seasonal' else 'Classical ML'


# ============== K 近邻 ==============

@dataclass
class KnnModel:
    """K 近邻回归：保存训练矩阵与目标"""
    X: np.ndarray
    y: np.ndarray
    k: int

    @property
    def n_features(self) -> int:
        return int(self.X.shape[1])

    def neighbors(self, Q: np.ndarray) -> np.ndarray:
        """每个查询点的 k 个近邻训练行序号（按距离升序，并列取序号小者）"""
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        if Q.shape[1] != self.n_features:
            raise ShapeMismatchError(self.n_features, Q.shape[1])
        train_sq = np.einsum('ij,ij->i', self.X, self.X)
        result = np.empty((len(Q), self.k), dtype=np.int64)
        for start in range(0, len(Q), KNN_CHUNK):
            q = Q[start:start + KNN_CHUNK]
            d2 = np.einsum('ij,ij->i', q, q)[:, None] - 2.0 * q @ self.X.T + train_sq[None, :]
            np.maximum(d2, 0.0, out=d2)
            result[start:start + len(q)] = np.argsort(d2, axis=1, kind='stable')[:, :self.k]
        return result

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.y[self.neighbors(X)].mean(axis=1)

    def to_dict(self) -> Dict[str, Any]:
        return {'k': int(self.k), 'X': self.X.tolist(), 'y': self.y.tolist()}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'KnnModel':
        X = np.asarray(data['X'], dtype=float)
        return cls(X=X.reshape(len(X), -1) if X.size else X.reshape(0, 0),
                   y=np.asarray(data['y'], dtype=float), k=int(data['k']))


def fit_knn(X: np.ndarray, y: np.ndarray, k: int = 10) -> KnnModel:
    """
    K 近邻回归

    Raises:
        ModelParameterError: k < 1 或 k 超过训练行数
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] != len(y):
        raise ShapeMismatchError(X.shape[0], len(y), what='行数')
    if not 1 <= k <= len(y):
        raise ModelParameterError('k', k, f'必须满足 1 <= k <= 训练行数 {len(y)}')
    return KnnModel(X=X.copy(), y=y.copy(), k=int(k))


def predict_knn(model: KnnModel, x: np.ndarray) -> float:
    """单个查询点的预测：k 个最近训练行目标的均值"""
    return float(model.predict(np.asarray(x, dtype=float).reshape(1, -1))[0])


# ============== 季节基线 ==============

@dataclass
class SeasonalBaseline:
    """
    季节基线：边 (i, j) 在桶 t 的预测 = yhat(t) × share(i, j)

    share 为该边在训练期的流量占训练期总流量的比例；训练期未出现的边占比为 0。
    """
    model: SeasonalModel
    shares: Dict[Tuple[str, str], float]

    def predict(self, keys: pd.DataFrame) -> np.ndarray:
        if not isinstance(keys, pd.DataFrame) or not {'orig', 'dest', 'bucket_start'} <= set(keys.columns):
            raise ShapeMismatchError('orig, dest, bucket_start 三列', getattr(keys, 'shape', None), what='输入')
        starts = pd.DatetimeIndex(pd.to_datetime(keys['bucket_start'], utc=True))
        unique = starts.unique().sort_values()
        yhat = self.model.components(unique)['yhat'].reindex(starts).to_numpy()
        share = np.array([self.shares.get((o, d), 0.0) for o, d in zip(keys['orig'], keys['dest'])])
        return yhat * share

    def to_dict(self) -> Dict[str, Any]:
        return {'seasonal': self.model.to_dict(),
                'shares': [[o, d, float(s)] for (o, d), s in sorted(self.shares.items())]}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'SeasonalBaseline':
        return cls(model=SeasonalModel.from_dict(data['seasonal']),
                   shares={(o, d): float(s) for o, d, s in data['shares']})


def fit_seasonal_baseline(train: pd.DataFrame, scale: str, cutoff: Union[str, pd.Timestamp],
                          cal: Optional[HolidayCalendar] = None,
                          seasonal_params: Optional[Dict[str, Any]] = None) -> SeasonalBaseline:
    """
    在训练行（orig, dest, bucket_start, target）上拟合季节基线

    桶总量为训练行目标按桶求和；训练期内没有行的桶视为 0。
    """
    starts = pd.to_datetime(train['bucket_start'], utc=True)
    totals = train['target'].groupby(starts).sum().sort_index()
    if len(totals):
        full = pd.date_range(totals.index[0], totals.index[-1],
                             freq={'hourly': 'h', 'daily': 'D', 'monthly': 'MS'}[scale])
        totals = totals.reindex(full, fill_value=0.0)
    model = fit_seasonal(totals.astype(float), cal, pd.Timestamp(cutoff), scale=scale, **(seasonal_params or {}))
    flow = train.groupby(['orig', 'dest'])['target'].sum()
    grand = float(flow.sum())
    shares = {(str(o), str(d)): (float(w) / grand if grand > 0 else 0.0) for (o, d), w in flow.items()}
    return SeasonalBaseline(model=model, shares=shares)


# ============== 统一入口 ==============

def fit_model(spec: ModelSpec, X: np.ndarray, y: np.ndarray, seed: int = 0, jobs: int = 1,
              train_keys: Optional[pd.DataFrame] = None, scale: str = 'daily',
              cutoff: Optional[Union[str, pd.Timestamp]] = None, cal: Optional[HolidayCalendar] = None,
              seasonal_params: Optional[Dict[str, Any]] = None):
    """
    按模型条目训练

    Args:
        spec: 模型条目
        X: 训练特征
        y: 训练目标
        seed: 随机种子（森林、提升树）
        jobs: 并行数（森林）
        train_keys: 季节基线需要的训练行键与目标（orig, dest, bucket_start, target）
        scale / cutoff / cal / seasonal_params: 季节基线参数

    Returns:
        已训练模型
    """
    p = dict(spec.params)
    kind = spec.kind
    if kind == 'ols':
        return fit_ols(X, y)
    if kind == 'ridge':
        return fit_ridge(X, y, lam=float(p.get('lam', 1.0)))
    if kind == 'lasso':
        return fit_lasso(X, y, lam=float(p.get('lam', 0.01)))
    if kind == 'elastic_net':
        return fit_elastic_net(X, y, lam=float(p.get('lam', 0.01)), alpha=float(p.get('alpha', 0.5)))
    if kind == 'tree':
        return fit_tree(X, y, max_depth=p.get('max_depth'), min_samples_leaf=int(p.get('min_samples_leaf', 1)))
    if kind == 'forest':
        return fit_forest(X, y, n_trees=int(p.get('n_trees', 1000)), max_depth=p.get('max_depth'),
                          min_samples_leaf=int(p.get('min_samples_leaf', 1)),
                          feature_subsample=float(p.get('feature_subsample', 1.0 / 3.0)),
                          bootstrap=bool(p.get('bootstrap', True)), seed=seed, jobs=jobs)
    if kind == 'gbm':
        return fit_gbm(X, y, n_estimators=int(p.get('n_estimators', 2000)),
                       learning_rate=float(p.get('learning_rate', 0.1)), max_depth=p.get('max_depth', 5),
                       min_samples_leaf=int(p.get('min_samples_leaf', 1)), seed=seed,
                       subsample=float(p.get('subsample', 1.0)))
    if kind == 'knn':
        return fit_knn(X, y, k=int(p.get('k', 10)))
    if kind == 'seasonal':
        if train_keys is None or cutoff is None:
            raise ModelParameterError('train_keys', None, '季节基线需要训练行键和截断点')
        return fit_seasonal_baseline(train_keys, scale, cutoff, cal, seasonal_params)
    raise ModelParameterError('kind', kind, '未知的模型种类')


def predict(model: Any, X: Union[np.ndarray, pd.DataFrame]) -> np.ndarray:
    """
    统一预测入口（季节基线的 X 为行键表）

    Raises:
        ShapeMismatchError: 列数与训练时不一致
    """
    out = np.asarray(model.predict(X), dtype=float)
    if not np.all(np.isfinite(out)):
        logger.warning("预测结果包含非有限值", model=type(model).__name__)
    return out


# ============== 保存与加载 ==============

_KIND_OF = {LinearModel: 'linear', RegressionTree: 'tree', TreeEnsemble: 'ensemble', KnnModel: 'knn',
            SeasonalBaseline: 'seasonal'}
_CLASS_OF = {v: k for k, v in _KIND_OF.items()}


def save_model(model: Any, path: Union[str, Path], name: Optional[str] = None, seed: Optional[int] = None) -> Path:
    """
    保存模型为版本化 JSON（临时文件写完后原子替换）

    JSON 结构：{format_version, kind, name, seed, model}
    """
    kind = _KIND_OF.get(type(model))
    if kind is None:
        raise ModelParameterError('model', type(model).__name__, '不支持保存的模型类型')
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {'format_version': FORMAT_VERSION, 'kind': kind, 'name': name, 'seed': seed,
               'model': to_jsonable(model.to_dict())}
    tmp = path.with_suffix(path.suffix + '.tmp')
    with open(tmp, 'w', encoding='utf-8', newline='\n') as f:
        json.dump(payload, f, ensure_ascii=False)
        f.write('\n')
        f.flush()
        os.fsync(f.fileno())
    tmp.replace(path)
    return path


def load_model(path: Union[str, Path]) -> Any:
    """
    加载模型

    Raises:
        ModelFormatError: 文件缺失、损坏、版本不符或字段缺失
    """
    path = Path(path)
    if not path.exists():
        raise ModelFormatError(str(path), '文件不存在')
    try:
        with open(path, 'r', encoding='utf-8') as f:
            payload = json.load(f)
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise ModelFormatError(str(path), f'JSON 解析失败: {e}')
    if not isinstance(payload, dict) or payload.get('format_version') != FORMAT_VERSION:
        version = payload.get('format_version') if isinstance(payload, dict) else None
        raise ModelFormatError(str(path), f'不支持的 format_version: {version}')
    cls = _CLASS_OF.get(payload.get('kind'))
    if cls is None:
        raise ModelFormatError(str(path), f"未知的模型种类: {payload.get('kind')}")
    try:
        return cls.from_dict(payload['model'])
    except (KeyError, TypeError, ValueError) as e:
        raise ModelFormatError(str(path), f'模型字段缺失或非法: {e}')


if __name__ == "__main__":
    """
    命令行入口：查看模型文件摘要
    """
    import argparse

    parser = argparse.ArgumentParser(description='模型文件工具')
    parser.add_argument('model', help='模型 JSON 路径')
    args = parser.parse_args()

    loaded = load_model(args.model)
    print(f"类型: {type(loaded).__name__}")
    if isinstance(loaded, TreeEnsemble):
        print(f"  {loaded.kind}, {len(loaded.trees)} 棵树, base_score={loaded.base_score:.6g}")
    elif isinstance(loaded, LinearModel):
        print(f"  {loaded.penalty}, {loaded.n_features} 个系数, intercept={loaded.intercept:.6g}")
    elif isinstance(loaded, KnnModel):
        print(f"  k={loaded.k}, 训练行数 {len(loaded.y)}")
