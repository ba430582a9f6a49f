"""
微出行 OD 需求预测软件 - 核心包

行程接入、空间划分、流量网络、特征矩阵、回归模型、评估、SHAP 解释、合成城市与流水线。
"""

__version__ = '1.0.0'
