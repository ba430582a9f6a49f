#!/usr/bin/env python3
"""
工具函数模块

本模块提供跨模块复用的通用工具函数。
功能特点：
- 文件操作：哈希计算、目录保证、确定性 JSON/CSV 写出
- 随机性管理：由根种子派生子种子
- 系统信息：运行环境版本记录

设计原则：
- 功能单一，职责明确
- 输出字节级可复现（键排序、固定浮点格式、固定换行）
- 详细的异常处理和错误信息

作者：微出行流量预测软件团队
版本：v1.0
许可：商业软件
"""

import hashlib
import json
import os
import platform
from pathlib import Path
from typing import Dict, Any, Union

import numpy as np
import pandas as pd

# 模块导出列表
__all__ = [
    'FileOperations', 'SystemUtils', 'derive_seed', 'ensure_dir', 'to_jsonable'
]

# 报告中浮点数统一格式
FLOAT_FORMAT = '%.10g'


def to_jsonable(value: Any) -> Any:
    """将 numpy/pandas 标量与容器转换为可 JSON 序列化的原生类型"""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, (pd.Timestamp,)):
        return value.isoformat()
    if isinstance(value, Path):
        return str(value)
    return value


class FileOperations:
    """文件操作工具类"""

    @staticmethod
    def get_file_hash(file_path: Union[str, Path], algorithm: str = "sha256") -> str:
        """
        计算文件哈希值

        Args:
            file_path: 文件路径
            algorithm: 哈希算法（sha256/md5）

        Returns:
            str: 十六进制哈希值

        Raises:
            FileNotFoundError: 文件不存在
        """
        file_path = Path(file_path)
        if not file_path.exists():
            raise FileNotFoundError(f"文件不存在: {file_path}")

        hasher = hashlib.new(algorithm)
        with open(file_path, 'rb') as f:
            for chunk in iter(lambda: f.read(1024 * 1024), b''):
                hasher.update(chunk)
        return hasher.hexdigest()

    @staticmethod
    def write_json(data: Any, file_path: Union[str, Path]) -> Path:
        """
        确定性写出 JSON（键排序、缩进 2、UTF-8、结尾换行）

        Args:
            data: 待写出的数据
            file_path: 目标路径

        Returns:
            Path: 写出的文件路径
        """
        file_path = Path(file_path)
        file_path.parent.mkdir(parents=True, exist_ok=True)
        text = json.dumps(to_jsonable(data), ensure_ascii=False, indent=2, sort_keys=True)
        with open(file_path, 'w', encoding='utf-8', newline='\n') as f:
            f.write(text + '\n')
        return file_path

    @staticmethod
    def read_json(file_path: Union[str, Path]) -> Any:
        """读取 JSON 文件"""
        file_path = Path(file_path)
        if not file_path.exists():
            raise FileNotFoundError(f"文件不存在: {file_path}")
        with open(file_path, 'r', encoding='utf-8') as f:
            return json.load(f)

    @staticmethod
    def write_csv(df: pd.DataFrame, file_path: Union[str, Path]) -> Path:
        """
        确定性写出 CSV（固定浮点格式、LF 换行、不写索引）

        Args:
            df: 待写出的表
            file_path: 目标路径

        Returns:
            Path: 写出的文件路径
        """
        file_path = Path(file_path)
        file_path.parent.mkdir(parents=True, exist_ok=True)
        df.to_csv(file_path, index=False, float_format=FLOAT_FORMAT, lineterminator='\n',
                  encoding='utf-8')
        return file_path

    @staticmethod
    def get_file_info(file_path: Union[str, Path]) -> Dict[str, Any]:
        """
        获取文件基本信息

        Args:
            file_path: 文件路径

        Returns:
            dict: {'path', 'size', 'sha256'}
        """
        file_path = Path(file_path)
        return {
            'path': str(file_path),
            'size': file_path.stat().st_size,
            'sha256': FileOperations.get_file_hash(file_path),
        }


class SystemUtils:
    """系统工具类"""

    @staticmethod
    def get_versions() -> Dict[str, str]:
        """
        获取运行环境版本信息（写入阶段清单）

        Returns:
            dict: python/numpy/pandas 版本
        """
        return {
            'python': platform.python_version(),
            'numpy': np.__version__,
            'pandas': pd.__version__,
        }


def derive_seed(root_seed: int, *labels: Any) -> int:
    """
    由根种子和标签确定性派生子种子

    Args:
        root_seed: 根种子（run.seed）
        *labels: 任意可字符串化的标签（如阶段名、模型名、日期）

    Returns:
        int: 32 位非负整数子种子

    Examples:
        >>> derive_seed(42, "forest", "daily", "quarters") == derive_seed(42, "forest", "daily", "quarters")
        True
    """
    material = "/".join([str(int(root_seed))] + [str(label) for label in labels])
    digest = hashlib.sha256(material.encode('utf-8')).digest()
    return int.from_bytes(digest[:4], 'big')


def ensure_dir(dir_path: Union[str, Path]) -> bool:
    """确保目录存在"""
    try:
        os.makedirs(dir_path, exist_ok=True)
        return True
    except OSError:
        return False
