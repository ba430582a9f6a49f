#!/usr/bin/env python3
"""
依赖检查模块

本模块集中处理第三方库的可选导入。
功能特点：
- safe_import：导入失败时返回 (None, False)，不抛出异常
- missing_packages：启动前列出缺失的核心依赖
- progress：tqdm 可用时包装进度条，否则原样返回可迭代对象

作者：微出行流量预测软件团队
版本：v1.0
许可：商业软件
"""

import importlib
from typing import Any, Iterable, List, Optional, Tuple

__all__ = ['safe_import', 'missing_packages', 'progress', 'CORE_PACKAGES']

# 导入名 -> requirements.txt 中的包名
CORE_PACKAGES = (('numpy', 'numpy'), ('pandas', 'pandas'), ('yaml', 'PyYAML'),
                 ('psutil', 'psutil'), ('jsonlines', 'jsonlines'))


def safe_import(module_name: str) -> Tuple[Optional[Any], bool]:
    """
    导入模块并返回 (模块, 是否成功)

    Args:
        module_name: 模块名

    Returns:
        Tuple[Optional[Any], bool]: 成功时为 (module, True)，否则为 (None, False)
    """
    try:
        return importlib.import_module(module_name), True
    except ImportError:
        return None, False


def missing_packages() -> List[str]:
    """返回未安装的核心依赖包名（按 CORE_PACKAGES 顺序）"""
    return [package for module, package in CORE_PACKAGES if not safe_import(module)[1]]


_tqdm_module, HAS_TQDM = safe_import('tqdm')


def progress(iterable: Iterable, desc: Optional[str] = None, total: Optional[int] = None,
             enabled: bool = True) -> Iterable:
    """tqdm 可用且启用时包装进度条"""
    if not HAS_TQDM or not enabled:
        return iterable
    return _tqdm_module.tqdm(iterable, desc=desc, total=total, leave=False)
