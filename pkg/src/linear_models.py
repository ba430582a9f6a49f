#!/usr/bin/env python3
"""
线性回归模型模块

本模块从零实现线性回归族：普通最小二乘、岭回归、Lasso 与弹性网络。
功能特点：
- 岭回归：中心化后求解 (XᵀX + λI)β = Xᵀy，截距不惩罚，Cholesky 分解求解
- 最小二乘：λ = 0 的岭回归，秩亏时退化为伪逆（最小范数解）
- Lasso / 弹性网络：标准化列上的循环坐标下降 + 软阈值
- 收敛判据：系数最大变化 < 1e-8，或 10000 轮后报告 KKT 残差
- 模型字典序列化

目标函数约定：
- 岭回归：||y - b - Xβ||² + λ||β||²
- 弹性网络：(1/2n)||y - b - Zβ||² + λ[α||β||₁ + (1-α)/2 ||β||²]，Z 为标准化列

作者：微出行流量预测软件团队
版本：v1.0
许可：商业软件
"""

from dataclasses import dataclass, field
from typing import Dict, Any, Optional

import numpy as np

try:
    from .exceptions import NumericalError, ConvergenceError, ShapeMismatchError, ModelParameterError
    from .log_manager import log_manager
except ImportError:
    from exceptions import NumericalError, ConvergenceError, ShapeMismatchError, ModelParameterError
    from log_manager import log_manager

__all__ = ['LinearModel', 'fit_ols', 'fit_ridge', 'fit_lasso', 'fit_elastic_net', 'kkt_violation',
           'lambda_max', 'CD_TOLERANCE', 'CD_MAX_SWEEPS']

logger = log_manager.get_logger('linear_models')

CD_TOLERANCE = 1e-8
CD_MAX_SWEEPS = 10000
KKT_TOLERANCE = 1e-6
CONDITION_LIMIT = 1e12


@dataclass
class LinearModel:
    """
    线性模型

    coefficients 为原始特征尺度上的系数；x_mean 为训练列均值（线性归因使用），
    x_scale 为坐标下降使用的列标准差（岭回归/最小二乘为 1）。
    """
    coefficients: np.ndarray
    intercept: float
    penalty: str = 'none'
    lam: float = 0.0
    alpha: float = 1.0
    x_mean: Optional[np.ndarray] = None
    x_scale: Optional[np.ndarray] = None
    n_iter: int = 0
    info: Dict[str, Any] = field(default_factory=dict)

    @property
    def n_features(self) -> int:
        return int(len(self.coefficients))

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features:
            raise ShapeMismatchError(self.n_features, X.shape[1])
        return X @ self.coefficients + self.intercept

    def to_dict(self) -> Dict[str, Any]:
        return {
            'coefficients': [float(c) for c in self.coefficients],
            'intercept': float(self.intercept),
            'penalty': self.penalty,
            'lam': float(self.lam),
            'alpha': float(self.alpha),
            'x_mean': None if self.x_mean is None else [float(v) for v in self.x_mean],
            'x_scale': None if self.x_scale is None else [float(v) for v in self.x_scale],
            'n_iter': int(self.n_iter),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'LinearModel':
        return cls(
            coefficients=np.asarray(data['coefficients'], dtype=float),
            intercept=float(data['intercept']),
            penalty=data.get('penalty', 'none'),
            lam=float(data.get('lam', 0.0)),
            alpha=float(data.get('alpha', 1.0)),
            x_mean=None if data.get('x_mean') is None else np.asarray(data['x_mean'], dtype=float),
            x_scale=None if data.get('x_scale') is None else np.asarray(data['x_scale'], dtype=float),
            n_iter=int(data.get('n_iter', 0)),
        )


def _check_xy(X: np.ndarray, y: np.ndarray):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] < 1:
        raise ModelParameterError('X', X.shape, '至少需要 1 行')
    if X.shape[0] != len(y):
        raise ShapeMismatchError(X.shape[0], len(y), what='行数')
    return X, y


def _cholesky_solve(gram: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    lower = np.linalg.cholesky(gram)
    z = np.linalg.solve(lower, rhs)
    return np.linalg.solve(lower.T, z)


def fit_ridge(X: np.ndarray, y: np.ndarray, lam: float = 1.0, allow_pinv: bool = False) -> LinearModel:
    """
    岭回归（截距不惩罚）

    Args:
        X: 特征矩阵 (n, p)
        y: 目标 (n,)
        lam: 惩罚系数 λ >= 0
        allow_pinv: 方程组奇异或严重病态时是否退化为伪逆解

    Returns:
        LinearModel

    Raises:
        ModelParameterError: λ < 0
        NumericalError: 方程组奇异且不允许伪逆退化，附带条件数估计
    """
    if lam < 0 or not np.isfinite(lam):
        raise ModelParameterError('lam', lam, '必须为非负有限数')
    X, y = _check_xy(X, y)
    x_mean = X.mean(axis=0)
    y_mean = float(y.mean())
    xc = X - x_mean
    yc = y - y_mean
    gram = xc.T @ xc + lam * np.eye(X.shape[1])
    rhs = xc.T @ yc

    beta = None
    fallback = False
    try:
        condition = float(np.linalg.cond(gram)) if X.shape[1] else 1.0
        if condition < CONDITION_LIMIT:
            beta = _cholesky_solve(gram, rhs)
    except np.linalg.LinAlgError:
        condition = float('inf')
    if beta is None or not np.all(np.isfinite(beta)):
        if not allow_pinv:
            raise NumericalError('岭回归正规方程奇异', condition)
        beta = np.linalg.lstsq(xc, yc, rcond=None)[0]
        fallback = True
        logger.warning("正规方程病态，已退化为伪逆解", condition=f"{condition:.3g}")

    return LinearModel(
        coefficients=beta,
        intercept=float(y_mean - x_mean @ beta),
        penalty='ridge' if lam > 0 else 'none',
        lam=float(lam),
        x_mean=x_mean,
        x_scale=np.ones(X.shape[1]),
        info={'condition_estimate': condition, 'pinv_fallback': fallback},
    )


def fit_ols(X: np.ndarray, y: np.ndarray) -> LinearModel:
    """普通最小二乘：λ = 0 的岭回归，秩亏时使用伪逆"""
    return fit_ridge(X, y, lam=0.0, allow_pinv=True)


def _standardize(X: np.ndarray):
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    safe = np.where(scale > 0, scale, 1.0)
    return (X - mean) / safe, mean, scale


def lambda_max(X: np.ndarray, y: np.ndarray) -> float:
    """使 Lasso 全部系数为零的最小 λ：max_j |z_jᵀ(y - ȳ)| / n（z 为标准化列）"""
    X, y = _check_xy(X, y)
    z, _, _ = _standardize(X)
    return float(np.max(np.abs(z.T @ (y - y.mean()))) / len(y)) if X.shape[1] else 0.0


def _kkt(z: np.ndarray, r: np.ndarray, beta: np.ndarray, lam: float, alpha: float, active: np.ndarray) -> float:
    n = len(r)
    grad = z.T @ r / n
    l1 = lam * alpha
    l2 = lam * (1.0 - alpha)
    zero = beta == 0
    violation = np.where(zero, np.maximum(np.abs(grad) - l1, 0.0),
                         np.abs(grad - l2 * beta - l1 * np.sign(beta)))
    violation = np.where(active, violation, 0.0)
    return float(violation.max()) if len(violation) else 0.0


def kkt_violation(model: LinearModel, X: np.ndarray, y: np.ndarray) -> float:
    """在标准化空间中计算模型相对弹性网络目标的最大 KKT 残差"""
    X, y = _check_xy(X, y)
    z, mean, scale = _standardize(X)
    beta = model.coefficients * np.where(scale > 0, scale, 0.0)
    r = (y - y.mean()) - z @ beta
    return _kkt(z, r, beta, model.lam, model.alpha, scale > 0)


def fit_elastic_net(X: np.ndarray, y: np.ndarray, lam: float = 0.01, alpha: float = 0.5,
                    tol: float = CD_TOLERANCE, max_sweeps: int = CD_MAX_SWEEPS) -> LinearModel:
    """
    弹性网络：标准化列上的循环坐标下降

    Args:
        X: 特征矩阵
        y: 目标
        lam: 总惩罚系数 λ >= 0
        alpha: L1 占比，0 <= α <= 1（α = 1 为 Lasso）
        tol: 系数最大变化的收敛阈值
        max_sweeps: 最大轮数

    Returns:
        LinearModel: 系数换算回原始特征尺度

    Raises:
        ModelParameterError: 参数越界
        ConvergenceError: 达到最大轮数仍未收敛，附带最后的 KKT 残差
    """
    if lam < 0 or not np.isfinite(lam):
        raise ModelParameterError('lam', lam, '必须为非负有限数')
    if not 0.0 <= alpha <= 1.0:
        raise ModelParameterError('alpha', alpha, '必须在 [0, 1] 内')
    X, y = _check_xy(X, y)
    n, p = X.shape
    z, mean, scale = _standardize(X)
    active = scale > 0
    y_mean = float(y.mean())
    r = y - y_mean
    beta = np.zeros(p)
    l1 = lam * alpha
    denom = 1.0 + lam * (1.0 - alpha)
    # 标准化列满足 z_jᵀz_j / n = 1
    columns = [j for j in range(p) if active[j]]

    sweeps = 0
    converged = not columns
    while not converged and sweeps < max_sweeps:
        sweeps += 1
        max_change = 0.0
        for j in columns:
            zj = z[:, j]
            old = beta[j]
            rho = zj @ r / n + old
            new = np.sign(rho) * max(abs(rho) - l1, 0.0) / denom
            if new != old:
                r -= zj * (new - old)
                beta[j] = new
                max_change = max(max_change, abs(new - old))
        converged = max_change < tol

    violation = _kkt(z, r, beta, lam, alpha, active)
    if not converged:
        raise ConvergenceError(sweeps, violation)

    coef = np.where(active, beta / np.where(active, scale, 1.0), 0.0)
    penalty = 'lasso' if alpha == 1.0 else 'elastic_net'
    logger.debug("坐标下降收敛", penalty=penalty, sweeps=sweeps, kkt=f"{violation:.3g}",
                 nonzero=int(np.count_nonzero(coef)))
    return LinearModel(
        coefficients=coef,
        intercept=float(y_mean - mean @ coef),
        penalty=penalty,
        lam=float(lam),
        alpha=float(alpha),
        x_mean=mean,
        x_scale=scale,
        n_iter=sweeps,
        info={'kkt_violation': violation},
    )


def fit_lasso(X: np.ndarray, y: np.ndarray, lam: float = 0.01, tol: float = CD_TOLERANCE,
              max_sweeps: int = CD_MAX_SWEEPS) -> LinearModel:
    """Lasso：α = 1 的弹性网络"""
    return fit_elastic_net(X, y, lam=lam, alpha=1.0, tol=tol, max_sweeps=max_sweeps)


if __name__ == "__main__":
    """
    命令行入口：在 CSV（最后一列为目标）上拟合线性模型并打印系数
    """
    import argparse
    import json

    import pandas as pd

    parser = argparse.ArgumentParser(description='线性模型工具')
    parser.add_argument('data', help='CSV 文件，最后一列为目标')
    parser.add_argument('--penalty', choices=['none', 'ridge', 'lasso', 'elastic_net'], default='none')
    parser.add_argument('--lam', type=float, default=1.0)
    parser.add_argument('--alpha', type=float, default=0.5)
    args = parser.parse_args()

    table = pd.read_csv(args.data)
    features, labels = table.iloc[:, :-1].to_numpy(dtype=float), table.iloc[:, -1].to_numpy(dtype=float)
    fitters = {
        'none': lambda: fit_ols(features, labels),
        'ridge': lambda: fit_ridge(features, labels, args.lam),
        'lasso': lambda: fit_lasso(features, labels, args.lam),
        'elastic_net': lambda: fit_elastic_net(features, labels, args.lam, args.alpha),
    }
    fitted = fitters[args.penalty]()
    print(json.dumps(fitted.to_dict(), ensure_ascii=False, indent=2))
