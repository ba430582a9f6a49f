#!/usr/bin/env python3
"""
SHAP 解释模块

本模块为树模型计算精确的路径依赖 TreeSHAP 值，并汇总为特征/特征组重要性报告。
功能特点：
- tree_shap：单行递归算法（路径扩展 EXTEND / 回退 UNWIND），条件期望由叶节点覆盖数给出
- shap_values_batch：多行向量化版本，按叶路径多项式的精确求积计算，结果与逐行算法一致
- 集成：提升树乘以学习率，装袋取均值；base_value = base_score + 各树覆盖加权均值
- 线性模型：φ_j = β_j (x_j - mean_j)
- 重要性：样本上的平均 |φ|、特征组求和、Top-k 排名
- 输出：JSON 报告、Top-k CSV、逐行 JSON Lines

作者：微出行流量预测软件团队
版本：v1.0
许可：商业软件
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Any, List, Optional, Union

import jsonlines
import numpy as np
import pandas as pd

try:
    from .exceptions import MissingCoverError, ShapeMismatchError, ExplainError
    from .log_manager import log_manager
    from .utils import FileOperations, to_jsonable
    from .tree_models import RegressionTree, TreeEnsemble, LEAF, BAGGING
    from .linear_models import LinearModel
except ImportError:
    from exceptions import MissingCoverError, ShapeMismatchError, ExplainError
    from log_manager import log_manager
    from utils import FileOperations, to_jsonable
    from tree_models import RegressionTree, TreeEnsemble, LEAF, BAGGING
    from linear_models import LinearModel

__all__ = ['ShapVector', 'ImportanceReport', 'tree_shap', 'shap_values_batch', 'expected_value',
           'linear_attribution', 'importance', 'sample_rows',
           'write_importance_json', 'write_top_k_csv', 'write_shap_rows']

logger = log_manager.get_logger('shap_explainer')

Model = Union[TreeEnsemble, RegressionTree, LinearModel]


@dataclass
class ShapVector:
    """单行解释：phi 之和 + base_value = 模型预测"""
    phi: np.ndarray
    base_value: float

    @property
    def prediction(self) -> float:
        return float(self.phi.sum() + self.base_value)


@dataclass
class ImportanceReport:
    """特征重要性报告"""
    features: List[Dict[str, Any]]
    groups: Dict[str, float]
    top_k: List[Dict[str, Any]]
    base_value_mean: float
    n_rows: int
    extra: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {'base_value_mean': self.base_value_mean, 'n_rows': self.n_rows, 'features': self.features,
                'groups': self.groups, 'top_k': self.top_k, **self.extra}


def _as_ensemble(model: Union[TreeEnsemble, RegressionTree]) -> TreeEnsemble:
    if isinstance(model, RegressionTree):
        return TreeEnsemble(kind=BAGGING, trees=[model], n_features=model.n_features)
    return model


def _check_covers(ensemble: TreeEnsemble) -> None:
    for t, tree in enumerate(ensemble.trees):
        if tree.cover is None or len(tree.cover) != tree.n_nodes or np.any(tree.cover <= 0):
            raise MissingCoverError(t)


def _tree_expectation(tree: RegressionTree) -> float:
    leaves = tree.feature == LEAF
    return float((tree.cover[leaves] * tree.value[leaves]).sum() / tree.cover[0])


def expected_value(model: Union[TreeEnsemble, RegressionTree]) -> float:
    """集成在训练分布（叶覆盖数）下的期望输出"""
    ensemble = _as_ensemble(model)
    _check_covers(ensemble)
    return float(ensemble.base_score
                 + ensemble.tree_weight * sum(_tree_expectation(t) for t in ensemble.trees))


# ============== 逐行递归 TreeSHAP ==============

class _PathElement:
    __slots__ = ('feature', 'zero', 'one', 'weight')

    def __init__(self, feature: int, zero: float, one: float, weight: float):
        self.feature = feature
        self.zero = zero
        self.one = one
        self.weight = weight


def _extend(path: List[_PathElement], zero: float, one: float, feature: int) -> List[_PathElement]:
    path = [_PathElement(e.feature, e.zero, e.one, e.weight) for e in path]
    depth = len(path)
    path.append(_PathElement(feature, zero, one, 1.0 if depth == 0 else 0.0))
    for i in range(depth - 1, -1, -1):
        path[i + 1].weight += one * path[i].weight * (i + 1) / (depth + 1)
        path[i].weight = zero * path[i].weight * (depth - i) / (depth + 1)
    return path


def _unwind(path: List[_PathElement], index: int) -> List[_PathElement]:
    path = [_PathElement(e.feature, e.zero, e.one, e.weight) for e in path]
    depth = len(path) - 1
    one, zero = path[index].one, path[index].zero
    carry = path[depth].weight
    for i in range(depth - 1, -1, -1):
        if one != 0:
            tmp = path[i].weight
            path[i].weight = carry * (depth + 1) / ((i + 1) * one)
            carry = tmp - path[i].weight * zero * (depth - i) / (depth + 1)
        else:
            path[i].weight = path[i].weight * (depth + 1) / (zero * (depth - i))
    for i in range(index, depth):
        path[i].feature = path[i + 1].feature
        path[i].zero = path[i + 1].zero
        path[i].one = path[i + 1].one
    return path[:depth]


def _unwound_sum(path: List[_PathElement], index: int) -> float:
    depth = len(path) - 1
    one, zero = path[index].one, path[index].zero
    carry = path[depth].weight
    total = 0.0
    for i in range(depth - 1, -1, -1):
        if one != 0:
            tmp = carry * (depth + 1) / ((i + 1) * one)
            total += tmp
            carry = path[i].weight - tmp * zero * (depth - i) / (depth + 1)
        else:
            total += path[i].weight * (depth + 1) / (zero * (depth - i))
    return total


def _tree_shap_single(tree: RegressionTree, x: np.ndarray, phi: np.ndarray) -> None:
    def recurse(node: int, path: List[_PathElement], zero: float, one: float, feature: int) -> None:
        path = _extend(path, zero, one, feature)
        if tree.feature[node] == LEAF:
            for i in range(1, len(path)):
                w = _unwound_sum(path, i)
                phi[path[i].feature] += w * (path[i].one - path[i].zero) * tree.value[node]
            return
        f = int(tree.feature[node])
        left, right = int(tree.left[node]), int(tree.right[node])
        hot, cold = (left, right) if x[f] <= tree.threshold[node] else (right, left)
        zero_in, one_in = 1.0, 1.0
        for k in range(1, len(path)):
            if path[k].feature == f:
                zero_in, one_in = path[k].zero, path[k].one
                path = _unwind(path, k)
                break
        cover = tree.cover[node]
        recurse(hot, path, zero_in * tree.cover[hot] / cover, one_in, f)
        recurse(cold, path, zero_in * tree.cover[cold] / cover, 0.0, f)

    recurse(0, [], 1.0, 1.0, -1)


def tree_shap(model: Union[TreeEnsemble, RegressionTree], x: np.ndarray) -> ShapVector:
    """
    单行精确路径依赖 TreeSHAP

    Args:
        model: 树集成或单棵树
        x: 特征行

    Returns:
        ShapVector：phi 之和 + base_value = 模型对 x 的预测

    Raises:
        MissingCoverError: 某棵树缺少覆盖数
        ShapeMismatchError: 特征数不一致
    """
    ensemble = _as_ensemble(model)
    _check_covers(ensemble)
    x = np.asarray(x, dtype=float).ravel()
    if len(x) != ensemble.n_features:
        raise ShapeMismatchError(ensemble.n_features, len(x))
    phi = np.zeros(ensemble.n_features)
    for tree in ensemble.trees:
        _tree_shap_single(tree, x, phi)
    return ShapVector(phi=ensemble.tree_weight * phi, base_value=expected_value(ensemble))


# ============== 多行向量化 TreeSHAP ==============

def _leaf_paths(tree: RegressionTree):
    """枚举叶节点路径：[(叶序号, [(特征, 阈值, 是否左分支, 覆盖比例), ...])]"""
    out = []
    stack = [(0, [])]
    while stack:
        node, conds = stack.pop()
        if tree.feature[node] == LEAF:
            out.append((node, conds))
            continue
        f, thr, cover = int(tree.feature[node]), float(tree.threshold[node]), tree.cover[node]
        left, right = int(tree.left[node]), int(tree.right[node])
        stack.append((right, conds + [(f, thr, False, tree.cover[right] / cover)]))
        stack.append((left, conds + [(f, thr, True, tree.cover[left] / cover)]))
    return out


def _tree_shap_batch(tree: RegressionTree, X: np.ndarray, phi: np.ndarray) -> None:
    n = len(X)
    for leaf, conds in _leaf_paths(tree):
        if not conds:
            continue
        features = sorted({c[0] for c in conds})
        d = len(features)
        zero = np.ones(d)
        one = np.ones((n, d))
        for f, thr, is_left, frac in conds:
            j = features.index(f)
            zero[j] *= frac
            one[:, j] *= (X[:, f] <= thr) if is_left else (X[:, f] > thr)
        # Shapley 权重 = ∫_0^1 Π_{k≠j} (z_k + t (o_k - z_k)) dt，d-1 次多项式用高斯-勒让德精确求积
        nodes, weights = np.polynomial.legendre.leggauss(max(1, (d + 1) // 2))
        t = (nodes + 1.0) / 2.0
        w = weights / 2.0
        factors = zero[None, None, :] + t[None, :, None] * (one[:, None, :] - zero[None, None, :])
        total = factors.prod(axis=2)
        integral = (w[None, :, None] * total[:, :, None] / factors).sum(axis=1)
        contrib = tree.value[leaf] * (one - zero[None, :]) * integral
        phi[:, features] += contrib


def shap_values_batch(model: Union[TreeEnsemble, RegressionTree], X: np.ndarray) -> np.ndarray:
    """
    多行精确 TreeSHAP（与 tree_shap 逐行结果一致）

    Returns:
        np.ndarray: (行数, 特征数)
    """
    ensemble = _as_ensemble(model)
    _check_covers(ensemble)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != ensemble.n_features:
        raise ShapeMismatchError(ensemble.n_features, X.shape[1])
    phi = np.zeros_like(X)
    for tree in ensemble.trees:
        _tree_shap_batch(tree, X, phi)
    return ensemble.tree_weight * phi


# ============== 线性模型 ==============

def linear_attribution(model: LinearModel, X: np.ndarray, means: Optional[np.ndarray] = None) -> np.ndarray:
    """线性模型的精确归因 φ_j = β_j (x_j - mean_j)，mean 默认取训练列均值"""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.n_features:
        raise ShapeMismatchError(model.n_features, X.shape[1])
    if means is None:
        if model.x_mean is None:
            raise ExplainError("线性模型缺少训练列均值")
        means = model.x_mean
    return (X - np.asarray(means, dtype=float)[None, :]) * model.coefficients[None, :]


# ============== 重要性报告 ==============

def sample_rows(n_rows: int, size: int, seed: int) -> np.ndarray:
    """无放回抽样 min(size, n_rows) 行，返回升序行号"""
    rng = np.random.default_rng(seed)
    if size >= n_rows:
        return np.arange(n_rows)
    return np.sort(rng.choice(n_rows, size=size, replace=False))


def importance(model: Model, X: np.ndarray, groups: Dict[str, str], k: int = 10,
               return_values: bool = False):
    """
    样本上的特征重要性

    Args:
        model: 树模型或线性模型
        X: 样本行（列顺序与 groups 一致）
        groups: {列名: 特征组}，按列顺序
        k: Top-k 数量
        return_values: 同时返回逐行 phi 矩阵

    Returns:
        ImportanceReport（或 (ImportanceReport, phi)）
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if len(X) == 0:
        raise ExplainError("解释样本为空")
    names = list(groups)
    if X.shape[1] != len(names):
        raise ShapeMismatchError(len(names), X.shape[1])
    if isinstance(model, LinearModel):
        phi = linear_attribution(model, X)
        base = model.predict(X) - phi.sum(axis=1)
        method = 'linear'
    else:
        phi = shap_values_batch(model, X)
        base = np.full(len(X), expected_value(model))
        method = 'tree_shap'
    mean_abs = np.abs(phi).mean(axis=0)
    features = [{'name': c, 'group': groups[c], 'mean_abs_shap': float(v)} for c, v in zip(names, mean_abs)]
    group_totals: Dict[str, float] = {}
    for item in features:
        group_totals[item['group']] = group_totals.get(item['group'], 0.0) + item['mean_abs_shap']
    order = sorted(range(len(features)), key=lambda i: (-features[i]['mean_abs_shap'], i))
    top = [{'rank': r + 1, **features[i]} for r, i in enumerate(order[:k])]
    report = ImportanceReport(features=features, groups=group_totals, top_k=top,
                              base_value_mean=float(base.mean()), n_rows=int(len(X)),
                              extra={'method': method})
    logger.info("SHAP 重要性计算完成", rows=len(X), method=method,
                top=top[0]['name'] if top else '')
    return (report, phi) if return_values else report


def write_importance_json(report: ImportanceReport, path: Union[str, Path],
                          config_hash: Optional[str] = None) -> Path:
    payload = report.to_dict()
    if config_hash is not None:
        payload['config_hash'] = config_hash
    return FileOperations.write_json(payload, path)


def write_top_k_csv(report: ImportanceReport, path: Union[str, Path]) -> Path:
    """Top-k 作图数据：rank, name, group, mean_abs_shap"""
    frame = pd.DataFrame(report.top_k, columns=['rank', 'name', 'group', 'mean_abs_shap'])
    return FileOperations.write_csv(frame, path)


def write_shap_rows(phi: np.ndarray, names: List[str], keys: pd.DataFrame, base_value: float,
                    path: Union[str, Path]) -> Path:
    """逐行 SHAP 值写为 JSON Lines，每行 {orig, dest, bucket_start, base_value, phi: {列名: 值}}"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with jsonlines.open(path, mode='w') as writer:
        for i, (_, key) in enumerate(keys.iterrows()):
            writer.write(to_jsonable({
                'orig': key['orig'], 'dest': key['dest'], 'bucket_start': key['bucket_start'],
                'base_value': base_value, 'phi': dict(zip(names, phi[i])),
            }))
    return path


if __name__ == "__main__":
    """
    命令行入口：对模型和特征矩阵计算重要性
    """
    import argparse

    try:
        from .model_zoo import load_model
        from .feature_generator import load_matrix
    except ImportError:
        from model_zoo import load_model
        from feature_generator import load_matrix

    parser = argparse.ArgumentParser(description='SHAP 重要性工具')
    parser.add_argument('model', help='模型 JSON 路径')
    parser.add_argument('matrix', help='已缩放的特征矩阵 CSV 路径')
    parser.add_argument('--sample', type=int, default=2000)
    parser.add_argument('--top', type=int, default=10)
    parser.add_argument('--seed', type=int, default=42)
    args = parser.parse_args()

    fitted = load_model(args.model)
    matrix = load_matrix(args.matrix)
    rows = sample_rows(matrix.n_rows, args.sample, args.seed)
    result = importance(fitted, matrix.features()[rows], matrix.groups, k=args.top)
    for entry in result.top_k:
        print(f"{entry['rank']:>3}  {entry['name']:<40} {entry['group']:<9} {entry['mean_abs_shap']:.6g}")
