#!/usr/bin/env python3
"""
统一异常类模块

本模块定义了项目中使用的所有异常类，提供统一的错误处理机制。
功能特点：
- 统一的异常基类
- 各流水线阶段专用异常类（数据接入/空间划分/流量网络/特征/模型/评估/解释/流水线）
- 错误码体系
- 详细的错误信息（details 字典，便于写入报告和清单文件）

设计原则：
- 异常层次清晰，便于捕获和处理
- 提供详细的错误信息，便于调试
- 所有异常都继承自基础异常类

作者：微出行流量预测软件团队
版本：v1.0
许可：商业软件
"""

from typing import Optional, Dict, Any, List


class MicroflowException(Exception):
    """
    项目基础异常类

    所有项目异常都继承自此类，提供统一的异常处理接口。
    """

    def __init__(self, message: str, error_code: str = None, details: Dict[str, Any] = None):
        """
        初始化异常

        Args:
            message: 错误消息
            error_code: 错误码（可选）
            details: 详细信息字典（可选）
        """
        super().__init__(message)
        self.message = message
        self.error_code = error_code or "UNKNOWN_ERROR"
        self.details = details or {}

    def __str__(self) -> str:
        """返回异常字符串表示"""
        if self.error_code:
            return f"[{self.error_code}] {self.message}"
        return self.message

    def to_dict(self) -> Dict[str, Any]:
        """将异常转换为字典"""
        return {
            "error_code": self.error_code,
            "message": self.message,
            "details": self.details
        }


# ============== 配置管理异常 ==============

class ConfigError(MicroflowException):
    """配置管理相关异常"""

    def __init__(self, message: str, details: Dict[str, Any] = None):
        super().__init__(message, "CONFIG_ERROR", details)


class ConfigNotFoundError(ConfigError):
    """配置文件不存在异常"""

    def __init__(self, config_path: str):
        super().__init__(
            f"配置文件不存在: {config_path}",
            {"config_path": config_path}
        )


class ConfigFormatError(ConfigError):
    """配置文件格式错误异常"""

    def __init__(self, config_path: str, error: str):
        super().__init__(
            f"配置文件格式错误: {config_path} - {error}",
            {"config_path": config_path, "error": error}
        )


class ConfigValidationError(ConfigError):
    """配置验证失败异常（一次性列出全部违规项）"""

    def __init__(self, errors: List[str]):
        super().__init__(
            "配置验证失败: " + "; ".join(errors),
            {"errors": list(errors)}
        )
        self.errors = list(errors)


# ============== 数据接入异常 ==============

class IngestError(MicroflowException):
    """数据接入相关异常"""

    def __init__(self, message: str, details: Dict[str, Any] = None):
        super().__init__(message, "INGEST_ERROR", details)


class DataFileNotFoundError(IngestError, FileNotFoundError):
    """输入文件不存在异常（同时是内置 FileNotFoundError）"""

    def __init__(self, file_path: str):
        IngestError.__init__(
            self,
            f"文件不存在: {file_path}",
            {"file_path": str(file_path)}
        )
        self.filename = str(file_path)


class TripSchemaError(IngestError):
    """行程文件缺少必需列"""

    def __init__(self, column: str, file_path: str = None):
        super().__init__(
            f"行程文件缺少必需列: {column}",
            {"column": column, "file_path": file_path}
        )
        self.column = column


class ManifestError(IngestError):
    """协变量清单文件错误（列未声明或声明非法）"""

    def __init__(self, column: str, reason: str):
        super().__init__(
            f"协变量清单错误: {column} - {reason}",
            {"column": column, "reason": reason}
        )
        self.column = column


class RowParseError(IngestError):
    """数据行解析失败（携带行号）"""

    def __init__(self, file_path: str, row_number: int, reason: str):
        super().__init__(
            f"解析失败: {file_path} 第 {row_number} 行 - {reason}",
            {"file_path": str(file_path), "row_number": row_number, "reason": reason}
        )
        self.row_number = row_number


# ============== 空间划分异常 ==============

class PartitionError(MicroflowException):
    """空间划分相关异常"""

    def __init__(self, message: str, details: Dict[str, Any] = None):
        super().__init__(message, "PARTITION_ERROR", details)


class InvalidPolygonError(PartitionError):
    """多边形不满足区域不变量（未闭合/顶点不足/自相交/零面积）"""

    def __init__(self, zone_id: str, reason: str):
        super().__init__(
            f"非法多边形: {zone_id} - {reason}",
            {"zone_id": zone_id, "reason": reason}
        )


# ============== 流量网络异常 ==============

class GraphError(MicroflowException):
    """流量网络相关异常"""

    def __init__(self, message: str, details: Dict[str, Any] = None, error_code: str = "GRAPH_ERROR"):
        super().__init__(message, error_code, details)


class DegenerateGraphError(GraphError):
    """节点数不足，指标无定义"""

    def __init__(self, metric: str, n_nodes: int, required: int):
        super().__init__(
            f"图过小无法计算 {metric}: 节点数 {n_nodes} < {required}",
            {"metric": metric, "n_nodes": n_nodes, "required": required},
            "DEGENERATE_GRAPH"
        )


class NodeLookupError(GraphError, KeyError):
    """节点不存在"""

    def __init__(self, node: str):
        GraphError.__init__(self, f"节点不存在: {node}", {"node": node}, "NODE_NOT_FOUND")

    def __str__(self) -> str:
        return MicroflowException.__str__(self)


class GraphDomainError(GraphError, ValueError):
    """参数不在定义域内（如源点与汇点相同）"""

    def __init__(self, message: str, details: Dict[str, Any] = None):
        GraphError.__init__(self, message, details, "GRAPH_DOMAIN_ERROR")


# ============== 特征工程异常 ==============

class FeatureError(MicroflowException):
    """特征工程相关异常"""

    def __init__(self, message: str, details: Dict[str, Any] = None, error_code: str = "FEATURE_ERROR"):
        super().__init__(message, error_code, details)


class GeometryKindError(FeatureError):
    """图层几何类型与操作不匹配"""

    def __init__(self, layer: str, expected: str, actual: str):
        super().__init__(
            f"图层 {layer} 几何类型错误: 期望 {expected}, 实际 {actual}",
            {"layer": layer, "expected": expected, "actual": actual},
            "GEOMETRY_KIND_ERROR"
        )


class AssemblyError(FeatureError):
    """特征矩阵拼装时键不一致"""

    def __init__(self, key: Any, reason: str):
        super().__init__(
            f"特征矩阵拼装失败: {key} - {reason}",
            {"key": str(key), "reason": reason},
            "ASSEMBLY_ERROR"
        )


class SeasonalFitError(FeatureError):
    """季节模型拟合失败"""

    def __init__(self, reason: str):
        super().__init__(f"季节模型拟合失败: {reason}", {"reason": reason}, "SEASONAL_FIT_ERROR")


# ============== 模型异常 ==============

class ModelError(MicroflowException):
    """回归模型相关异常"""

    def __init__(self, message: str, details: Dict[str, Any] = None, error_code: str = "MODEL_ERROR"):
        super().__init__(message, error_code, details)


class ShapeMismatchError(ModelError, ValueError):
    """输入维度与训练时不一致"""

    def __init__(self, expected: Any, actual: Any, what: str = "列数"):
        ModelError.__init__(
            self,
            f"{what}不匹配: 期望 {expected}, 实际 {actual}",
            {"expected": expected, "actual": actual, "what": what},
            "SHAPE_MISMATCH"
        )


class NumericalError(ModelError):
    """数值求解失败（奇异系统），附条件数估计"""

    def __init__(self, reason: str, condition_estimate: float):
        super().__init__(
            f"数值求解失败: {reason} (条件数估计 {condition_estimate:.3e})",
            {"reason": reason, "condition_estimate": condition_estimate},
            "NUMERICAL_ERROR"
        )
        self.condition_estimate = condition_estimate


class ConvergenceError(ModelError):
    """坐标下降未收敛，附最后一次 KKT 违背量"""

    def __init__(self, sweeps: int, kkt_violation: float):
        super().__init__(
            f"坐标下降未收敛: {sweeps} 轮后 KKT 违背量 {kkt_violation:.3e}",
            {"sweeps": sweeps, "kkt_violation": kkt_violation},
            "CONVERGENCE_ERROR"
        )
        self.kkt_violation = kkt_violation


class ModelFormatError(ModelError):
    """模型文件版本不符或损坏"""

    def __init__(self, path: str, reason: str):
        super().__init__(
            f"模型文件格式错误: {path} - {reason}",
            {"path": str(path), "reason": reason},
            "MODEL_FORMAT_ERROR"
        )


class ModelParameterError(ModelError, ValueError):
    """超参数非法"""

    def __init__(self, name: str, value: Any, reason: str):
        ModelError.__init__(
            self,
            f"超参数非法: {name} = {value} - {reason}",
            {"name": name, "value": value, "reason": reason},
            "MODEL_PARAMETER_ERROR"
        )


# ============== 评估异常 ==============

class EvaluationError(MicroflowException):
    """评估相关异常"""

    def __init__(self, message: str, details: Dict[str, Any] = None, error_code: str = "EVALUATION_ERROR"):
        super().__init__(message, error_code, details)


class SplitError(EvaluationError):
    """时间截断后某一侧为空"""

    def __init__(self, empty_side: str, cutoff: str):
        super().__init__(
            f"时间截断切分失败: {empty_side} 集合为空 (截断点 {cutoff})",
            {"empty_side": empty_side, "cutoff": cutoff},
            "SPLIT_ERROR"
        )
        self.empty_side = empty_side


class AblationConfigError(EvaluationError):
    """消融配置中的特征组没有任何列"""

    def __init__(self, group: str):
        super().__init__(
            f"特征组没有任何列: {group}",
            {"group": group},
            "ABLATION_CONFIG_ERROR"
        )
        self.group = group


# ============== 解释异常 ==============

class ExplainError(MicroflowException):
    """SHAP 解释相关异常"""

    def __init__(self, message: str, details: Dict[str, Any] = None, error_code: str = "EXPLAIN_ERROR"):
        super().__init__(message, error_code, details)


class MissingCoverError(ExplainError):
    """树模型缺少叶子覆盖数，无法计算路径相关 TreeSHAP"""

    def __init__(self, tree_index: int):
        super().__init__(
            f"第 {tree_index} 棵树缺少覆盖数",
            {"tree_index": tree_index},
            "MISSING_COVER"
        )


# ============== 合成数据异常 ==============

class SynthError(MicroflowException):
    """合成城市生成相关异常"""

    def __init__(self, message: str, details: Dict[str, Any] = None):
        super().__init__(message, "SYNTH_ERROR", details)


class ScenarioError(SynthError):
    """场景参数非法"""

    def __init__(self, field: str, value: Any, reason: str):
        super().__init__(
            f"场景参数非法: {field} = {value} - {reason}",
            {"field": field, "value": value, "reason": reason}
        )


# ============== 流水线异常 ==============

class PipelineError(MicroflowException):
    """流水线阶段相关异常"""

    def __init__(self, message: str, details: Dict[str, Any] = None, error_code: str = "PIPELINE_ERROR"):
        super().__init__(message, error_code, details)


class StageDependencyError(PipelineError):
    """前置阶段产物缺失"""

    def __init__(self, stage: str, missing: str):
        super().__init__(
            f"阶段 {stage} 缺少前置产物: {missing}",
            {"stage": stage, "missing": missing},
            "STAGE_DEPENDENCY_ERROR"
        )
        self.missing = missing


# ============== 工具函数 ==============

def handle_exception(e: Exception) -> Dict[str, Any]:
    """
    统一处理异常，转换为字典格式

    Args:
        e: 异常对象

    Returns:
        异常信息字典
    """
    if isinstance(e, MicroflowException):
        return e.to_dict()
    else:
        return {
            "error_code": "UNKNOWN_ERROR",
            "message": str(e),
            "details": {
                "exception_type": type(e).__name__
            }
        }
