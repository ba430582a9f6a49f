#!/usr/bin/env python3
"""
树模型模块

本模块从零实现 CART 回归树、随机森林（装袋）与平方损失梯度提升树。
功能特点：
- CART：方差减少贪心分裂，候选阈值为相邻不同取值的中点
- 精确分裂搜索：每列取值预先编号（SplitIndex），节点内按编号计数求前缀和，不做直方图分箱
- 确定性并列规则：先取特征序号最小，再取阈值最小
- 随机森林：自助采样 + 每次分裂特征子采样，每棵树独立派生随机种子
- 梯度提升：base_score = 训练目标均值，逐阶段拟合残差并收缩，记录每阶段训练 RMSE
- 提前停止：连续 10 个阶段训练 RMSE 改善 < 1e-12
- 树以平行数组保存（特征、阈值、左右子节点、叶值、覆盖样本数），供预测和 TreeSHAP 共用

设计原则：
- 并行只改变执行顺序，不改变结果（每棵树的随机源只由 (seed, 树序号) 决定）
- 样本按 x <= threshold 进入左子树

作者：微出行流量预测软件团队
版本：v1.0
许可：商业软件
"""

from dataclasses import dataclass, field
from typing import Dict, Any, List, Optional, Tuple

import numpy as np

try:
    from .exceptions import ShapeMismatchError, ModelParameterError
    from .log_manager import log_manager
    from .performance_utils import ParallelProcessor
except ImportError:
    from exceptions import ShapeMismatchError, ModelParameterError
    from log_manager import log_manager
    from performance_utils import ParallelProcessor

__all__ = ['RegressionTree', 'TreeEnsemble', 'SplitIndex', 'fit_tree', 'fit_forest', 'fit_gbm',
           'best_split', 'BAGGING', 'BOOSTING', 'LEAF']

logger = log_manager.get_logger('tree_models')

LEAF = -1
BAGGING = 'bagging'
BOOSTING = 'boosting'
SPLIT_EPS = 1e-12
EARLY_STOP_ROUNDS = 10
EARLY_STOP_DELTA = 1e-12


@dataclass
class RegressionTree:
    """
    回归树：节点 0 为根；内部节点 feature >= 0，叶节点 feature = LEAF。

    cover 为落入该节点的训练样本数（自助采样的重复样本重复计数）。
    """
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    cover: Optional[np.ndarray]
    n_features: int
    max_depth: Optional[int] = None
    min_samples_leaf: int = 1

    @property
    def n_nodes(self) -> int:
        return int(len(self.feature))

    def is_leaf(self, node: int) -> bool:
        return self.feature[node] == LEAF

    @property
    def depth(self) -> int:
        depths = np.zeros(self.n_nodes, dtype=int)
        for node in range(self.n_nodes):
            if not self.is_leaf(node):
                depths[self.left[node]] = depths[node] + 1
                depths[self.right[node]] = depths[node] + 1
        return int(depths.max()) if self.n_nodes else 0

    def used_features(self) -> List[int]:
        return sorted({int(f) for f in self.feature if f != LEAF})

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features:
            raise ShapeMismatchError(self.n_features, X.shape[1])
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        while True:
            internal = self.feature[node] != LEAF
            if not internal.any():
                break
            at = node[internal]
            go_left = X[rows[internal], self.feature[at]] <= self.threshold[at]
            node[internal] = np.where(go_left, self.left[at], self.right[at])
        return self.value[node].astype(float)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'feature': [int(v) for v in self.feature],
            'threshold': [float(v) for v in self.threshold],
            'left': [int(v) for v in self.left],
            'right': [int(v) for v in self.right],
            'value': [float(v) for v in self.value],
            'cover': None if self.cover is None else [float(v) for v in self.cover],
            'n_features': int(self.n_features),
            'max_depth': self.max_depth,
            'min_samples_leaf': int(self.min_samples_leaf),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'RegressionTree':
        return cls(
            feature=np.asarray(data['feature'], dtype=np.int64),
            threshold=np.asarray(data['threshold'], dtype=float),
            left=np.asarray(data['left'], dtype=np.int64),
            right=np.asarray(data['right'], dtype=np.int64),
            value=np.asarray(data['value'], dtype=float),
            cover=None if data.get('cover') is None else np.asarray(data['cover'], dtype=float),
            n_features=int(data['n_features']),
            max_depth=data.get('max_depth'),
            min_samples_leaf=int(data.get('min_samples_leaf', 1)),
        )


@dataclass
class TreeEnsemble:
    """
    树集成

    boosting：预测 = base_score + learning_rate · Σ 树输出
    bagging：预测 = 树输出均值（base_score = 0）
    """
    kind: str
    trees: List[RegressionTree]
    n_features: int
    learning_rate: float = 1.0
    base_score: float = 0.0
    feature_subsample: float = 1.0
    seed: int = 0
    hyperparameters: Dict[str, Any] = field(default_factory=dict)
    train_rmse: List[float] = field(default_factory=list)

    @property
    def tree_weight(self) -> float:
        """单棵树输出在集成预测中的权重"""
        if self.kind == BOOSTING:
            return self.learning_rate
        return 1.0 / len(self.trees) if self.trees else 0.0

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features:
            raise ShapeMismatchError(self.n_features, X.shape[1])
        total = np.zeros(len(X))
        for tree in self.trees:
            total += tree.predict(X)
        return self.base_score + self.tree_weight * total

    def to_dict(self) -> Dict[str, Any]:
        return {
            'kind': self.kind,
            'n_features': int(self.n_features),
            'learning_rate': float(self.learning_rate),
            'base_score': float(self.base_score),
            'feature_subsample': float(self.feature_subsample),
            'seed': int(self.seed),
            'hyperparameters': dict(self.hyperparameters),
            'train_rmse': [float(v) for v in self.train_rmse],
            'trees': [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'TreeEnsemble':
        return cls(
            kind=data['kind'],
            trees=[RegressionTree.from_dict(t) for t in data['trees']],
            n_features=int(data['n_features']),
            learning_rate=float(data.get('learning_rate', 1.0)),
            base_score=float(data.get('base_score', 0.0)),
            feature_subsample=float(data.get('feature_subsample', 1.0)),
            seed=int(data.get('seed', 0)),
            hyperparameters=dict(data.get('hyperparameters', {})),
            train_rmse=[float(v) for v in data.get('train_rmse', [])],
        )


# ============== CART ==============

def best_split(X: np.ndarray, y: np.ndarray, features: List[int],
               min_samples_leaf: int = 1) -> Optional[Tuple[int, float, float]]:
    """
    精确最优分裂搜索

    Args:
        X: 节点内样本的特征
        y: 节点内样本的目标
        features: 候选特征（升序）
        min_samples_leaf: 子节点最少样本数

    Returns:
        (特征序号, 阈值, 平方误差减少量)；没有使误差严格减少的合法分裂时为 None
    """
    n = len(y)
    if n < 2 * min_samples_leaf or np.ptp(y) == 0:
        return None
    total = y.sum()
    parent = float(((y - total / n) ** 2).sum())
    eps = SPLIT_EPS * max(parent, np.finfo(float).tiny)
    best: Optional[Tuple[int, float, float]] = None
    n_left = np.arange(1, n)
    n_right = n - n_left
    for f in features:
        order = np.argsort(X[:, f], kind='stable')
        xs = X[order, f]
        ys = y[order]
        s_left = np.cumsum(ys)[:-1]
        s_right = total - s_left
        # 误差减少量 = s_l²/n_l + s_r²/n_r - s²/n
        gain = s_left ** 2 / n_left + s_right ** 2 / n_right - total ** 2 / n
        valid = (xs[:-1] < xs[1:]) & (n_left >= min_samples_leaf) & (n_right >= min_samples_leaf)
        if not valid.any():
            continue
        gain = np.where(valid, gain, -np.inf)
        top = gain.max()
        if top <= eps:
            continue
        if best is not None and top <= best[2] + eps:
            continue
        i = int(np.flatnonzero(gain >= top - eps)[0])
        best = (f, float((xs[i] + xs[i + 1]) / 2.0), float(top))
    return best


class SplitIndex:
    """
    按列离散化的特征编码，供整棵树（或整个集成）共享

    每列的不同取值升序编号，各列编号首尾相接成全局编号；
    节点内一次 bincount 即得到每个取值的样本数和目标和，按编号顺序累加就是按取值排序后的前缀和。
    """

    def __init__(self, X: np.ndarray):
        n, n_features = X.shape
        self.codes = np.empty((n, n_features), dtype=np.intp)
        values, owners = [], []
        offset = 0
        for f in range(n_features):
            uniq, inverse = np.unique(X[:, f], return_inverse=True)
            self.codes[:, f] = inverse.ravel() + offset
            values.append(uniq)
            owners.append(np.full(len(uniq), f, dtype=np.intp))
            offset += len(uniq)
        self.values = np.concatenate(values) if values else np.empty(0)
        self.feature_of = np.concatenate(owners) if owners else np.empty(0, dtype=np.intp)
        self.n_codes = offset
        self.n_features = n_features

    def best_split(self, rows: np.ndarray, y: np.ndarray, features: List[int],
                   min_samples_leaf: int = 1) -> Optional[Tuple[int, float, float]]:
        """
        与 best_split 相同的分裂和并列规则，只是把逐列排序换成编号计数

        Args:
            rows: 节点内样本的行号
            y: 节点内样本的目标（与 rows 对齐）
            features: 候选特征（升序）
            min_samples_leaf: 子节点最少样本数
        """
        n = len(y)
        if n < 2 * min_samples_leaf or np.ptp(y) == 0:
            return None
        total = y.sum()
        parent = float(((y - total / n) ** 2).sum())
        eps = SPLIT_EPS * max(parent, np.finfo(float).tiny)

        if len(features) == self.n_features:
            block = self.codes[rows]
        else:
            block = self.codes[np.ix_(rows, features)]
        flat = block.ravel()
        count = np.bincount(flat, minlength=self.n_codes)
        sums = np.bincount(flat, weights=np.repeat(y, block.shape[1]), minlength=self.n_codes)

        present = np.flatnonzero(count)
        if not len(present):
            return None
        owner = self.feature_of[present]
        xs = self.values[present]
        c, s = count[present], sums[present]
        starts = np.flatnonzero(np.r_[True, owner[1:] != owner[:-1]])
        segment = np.repeat(np.arange(len(starts)), np.diff(np.r_[starts, len(present)]))
        cum_n, cum_s = np.cumsum(c), np.cumsum(s)
        n_left = cum_n - (cum_n - c)[starts][segment]
        s_left = cum_s - (cum_s - s)[starts][segment]
        n_right = n - n_left
        s_right = total - s_left

        # 候选阈值位于同一列相邻两个不同取值之间
        same_next = np.r_[owner[1:] == owner[:-1], False]
        increasing = np.r_[xs[:-1] < xs[1:], False]
        valid = same_next & increasing & (n_left >= min_samples_leaf) & (n_right >= min_samples_leaf)
        with np.errstate(divide='ignore', invalid='ignore'):
            gain = s_left ** 2 / n_left + s_right ** 2 / n_right - total ** 2 / n
        gain = np.where(valid, gain, -np.inf)
        tops = np.maximum.reduceat(gain, starts)
        ends = np.r_[starts[1:], len(present)]

        best: Optional[Tuple[int, float, float]] = None
        for k in np.flatnonzero(tops > eps):
            top = tops[k]
            if best is not None and top <= best[2] + eps:
                continue
            lo, hi = starts[k], ends[k]
            i = lo + int(np.flatnonzero(gain[lo:hi] >= top - eps)[0])
            best = (int(owner[lo]), float((xs[i] + xs[i + 1]) / 2.0), float(top))
        return best


class _TreeBuilder:
    """按先序编号递归生长一棵树"""

    def __init__(self, X: np.ndarray, y: np.ndarray, max_depth: Optional[int], min_samples_leaf: int,
                 feature_subsample: float, rng: Optional[np.random.Generator],
                 index: Optional[SplitIndex] = None):
        self.X = X
        self.index = index if index is not None else SplitIndex(X)
        self.y = y
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.n_features = X.shape[1]
        self.n_candidates = max(1, int(round(feature_subsample * self.n_features)))
        self.rng = rng
        self.nodes: List[List[Any]] = []

    def _candidates(self) -> List[int]:
        if self.n_candidates >= self.n_features or self.rng is None:
            return list(range(self.n_features))
        return sorted(int(f) for f in self.rng.choice(self.n_features, self.n_candidates, replace=False))

    def grow(self, rows: np.ndarray, depth: int) -> int:
        node = len(self.nodes)
        ys = self.y[rows]
        self.nodes.append([LEAF, 0.0, LEAF, LEAF, float(ys.mean()), float(len(rows))])
        if self.max_depth is not None and depth >= self.max_depth:
            return node
        split = self.index.best_split(rows, ys, self._candidates(), self.min_samples_leaf)
        if split is None:
            return node
        f, threshold, _ = split
        go_left = self.X[rows, f] <= threshold
        self.nodes[node][0] = f
        self.nodes[node][1] = threshold
        self.nodes[node][2] = self.grow(rows[go_left], depth + 1)
        self.nodes[node][3] = self.grow(rows[~go_left], depth + 1)
        return node

    def build(self, rows: np.ndarray) -> RegressionTree:
        self.grow(rows, 0)
        arr = list(zip(*self.nodes))
        return RegressionTree(
            feature=np.asarray(arr[0], dtype=np.int64),
            threshold=np.asarray(arr[1], dtype=float),
            left=np.asarray(arr[2], dtype=np.int64),
            right=np.asarray(arr[3], dtype=np.int64),
            value=np.asarray(arr[4], dtype=float),
            cover=np.asarray(arr[5], dtype=float),
            n_features=self.n_features,
            max_depth=self.max_depth,
            min_samples_leaf=self.min_samples_leaf,
        )


def _check_tree_params(X: np.ndarray, y: np.ndarray, max_depth: Optional[int], min_samples_leaf: int):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if len(y) < 1:
        raise ModelParameterError('X', X.shape, '至少需要 1 行')
    if X.shape[0] != len(y):
        raise ShapeMismatchError(X.shape[0], len(y), what='行数')
    if max_depth is not None and max_depth < 0:
        raise ModelParameterError('max_depth', max_depth, '必须 >= 0')
    if min_samples_leaf < 1:
        raise ModelParameterError('min_samples_leaf', min_samples_leaf, '必须 >= 1')
    return X, y


def fit_tree(X: np.ndarray, y: np.ndarray, max_depth: Optional[int] = None,
             min_samples_leaf: int = 1) -> RegressionTree:
    """
    CART 回归树

    Examples:
        >>> tree = fit_tree([[0], [1], [2], [3]], [0, 0, 1, 1], max_depth=1)
        >>> float(tree.threshold[0])
        1.5
    """
    X, y = _check_tree_params(X, y, max_depth, min_samples_leaf)
    return _TreeBuilder(X, y, max_depth, min_samples_leaf, 1.0, None).build(np.arange(len(y)))


# ============== 随机森林 ==============

def fit_forest(X: np.ndarray, y: np.ndarray, n_trees: int = 1000, max_depth: Optional[int] = None,
               min_samples_leaf: int = 1, feature_subsample: float = 1.0 / 3.0, seed: int = 0,
               bootstrap: bool = True, jobs: int = 1) -> TreeEnsemble:
    """
    随机森林

    Args:
        X: 特征矩阵
        y: 目标
        n_trees: 树的数量
        max_depth: 最大深度（None 不限）
        min_samples_leaf: 叶节点最少样本数
        feature_subsample: 每次分裂的候选特征比例
        seed: 随机种子；第 t 棵树的随机源为 default_rng([seed, t])
        bootstrap: 是否自助采样
        jobs: 并行线程数（不影响结果）

    Returns:
        TreeEnsemble(kind='bagging')
    """
    if n_trees < 1:
        raise ModelParameterError('n_trees', n_trees, '必须 >= 1')
    if not 0.0 < feature_subsample <= 1.0:
        raise ModelParameterError('feature_subsample', feature_subsample, '必须在 (0, 1] 内')
    X, y = _check_tree_params(X, y, max_depth, min_samples_leaf)
    n = len(y)
    index = SplitIndex(X)

    def grow_one(t: int) -> RegressionTree:
        rng = np.random.default_rng([seed, t])
        rows = np.sort(rng.integers(0, n, size=n)) if bootstrap else np.arange(n)
        return _TreeBuilder(X, y, max_depth, min_samples_leaf, feature_subsample, rng, index).build(rows)

    trees = ParallelProcessor(max_workers=jobs).map(grow_one, list(range(n_trees)))
    logger.debug("随机森林训练完成", trees=n_trees, rows=n, features=X.shape[1])
    return TreeEnsemble(
        kind=BAGGING, trees=trees, n_features=X.shape[1], learning_rate=1.0, base_score=0.0,
        feature_subsample=feature_subsample, seed=seed,
        hyperparameters={'n_trees': n_trees, 'max_depth': max_depth, 'min_samples_leaf': min_samples_leaf,
                         'bootstrap': bootstrap},
    )


# ============== 梯度提升 ==============

def fit_gbm(X: np.ndarray, y: np.ndarray, n_estimators: int = 2000, learning_rate: float = 0.1,
            max_depth: Optional[int] = 5, min_samples_leaf: int = 1, seed: int = 0,
            subsample: float = 1.0) -> TreeEnsemble:
    """
    平方损失梯度提升

    Args:
        X: 特征矩阵
        y: 目标
        n_estimators: 最大阶段数
        learning_rate: 收缩系数
        max_depth: 每棵树的最大深度
        min_samples_leaf: 叶节点最少样本数
        seed: 随机种子（仅 subsample < 1 时使用）
        subsample: 每阶段的行采样比例

    Returns:
        TreeEnsemble(kind='boosting')，train_rmse 为每阶段之后的训练 RMSE
    """
    if n_estimators < 1:
        raise ModelParameterError('n_estimators', n_estimators, '必须 >= 1')
    if not learning_rate > 0:
        raise ModelParameterError('learning_rate', learning_rate, '必须 > 0')
    if not 0.0 < subsample <= 1.0:
        raise ModelParameterError('subsample', subsample, '必须在 (0, 1] 内')
    X, y = _check_tree_params(X, y, max_depth, min_samples_leaf)
    n = len(y)
    base = float(y.mean())
    pred = np.full(n, base)
    rng = np.random.default_rng(seed)
    index = SplitIndex(X)
    trees: List[RegressionTree] = []
    history: List[float] = []
    previous = float(np.sqrt(np.mean((y - pred) ** 2)))
    stalled = 0

    for stage in range(n_estimators):
        residual = y - pred
        if subsample < 1.0:
            rows = np.sort(rng.choice(n, max(1, int(round(subsample * n))), replace=False))
        else:
            rows = np.arange(n)
        tree = _TreeBuilder(X, residual, max_depth, min_samples_leaf, 1.0, None, index).build(rows)
        trees.append(tree)
        pred = pred + learning_rate * tree.predict(X)
        rmse = float(np.sqrt(np.mean((y - pred) ** 2)))
        history.append(rmse)
        stalled = stalled + 1 if previous - rmse < EARLY_STOP_DELTA else 0
        previous = rmse
        if stalled >= EARLY_STOP_ROUNDS:
            logger.debug("训练 RMSE 不再下降，提前停止", stage=stage + 1, rmse=f"{rmse:.6g}")
            break

    return TreeEnsemble(
        kind=BOOSTING, trees=trees, n_features=X.shape[1], learning_rate=learning_rate, base_score=base,
        feature_subsample=1.0, seed=seed, train_rmse=history,
        hyperparameters={'n_estimators': n_estimators, 'max_depth': max_depth,
                         'min_samples_leaf': min_samples_leaf, 'subsample': subsample},
    )


if __name__ == "__main__":
    """
    命令行入口：在 CSV（最后一列为目标）上训练树模型并打印结构摘要
    """
    import argparse

    import pandas as pd

    parser = argparse.ArgumentParser(description='树模型工具')
    parser.add_argument('data', help='CSV 文件，最后一列为目标')
    parser.add_argument('--kind', choices=['tree', 'forest', 'gbm'], default='tree')
    parser.add_argument('--depth', type=int, default=5)
    parser.add_argument('--trees', type=int, default=100)
    parser.add_argument('--seed', type=int, default=42)
    args = parser.parse_args()

    table = pd.read_csv(args.data)
    features, labels = table.iloc[:, :-1].to_numpy(dtype=float), table.iloc[:, -1].to_numpy(dtype=float)
    if args.kind == 'tree':
        single = fit_tree(features, labels, max_depth=args.depth)
        print(f"节点数: {single.n_nodes}  深度: {single.depth}  使用特征: {single.used_features()}")
    else:
        if args.kind == 'forest':
            model = fit_forest(features, labels, n_trees=args.trees, max_depth=args.depth, seed=args.seed)
        else:
            model = fit_gbm(features, labels, n_estimators=args.trees, max_depth=args.depth, seed=args.seed)
        print(f"{model.kind}: {len(model.trees)} 棵树")
        if model.train_rmse:
            print(f"最终训练 RMSE: {model.train_rmse[-1]:.6g}")
