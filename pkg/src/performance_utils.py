#!/usr/bin/env python3
"""
性能工具模块

本模块提供并行处理和资源监控相关的工具函数。
功能特点：
- 并行处理支持：线程池（森林、逐日生成）和进程池（模型对比单元格、消融子集），结果按输入顺序返回
- jobs == 1 时在当前进程内顺序执行
- 内存使用监控（写入阶段清单）

设计原则：
- 可配置的并行度（--jobs 上限）
- 并行不改变结果：归约顺序固定

作者：微出行流量预测软件团队
版本：v1.0
许可：商业软件
"""

import os
from concurrent.futures import ThreadPoolExecutor, ProcessPoolExecutor
from typing import Dict, Any, Optional, List, Callable, TypeVar

import psutil

# 类型变量
T = TypeVar('T')
R = TypeVar('R')

__all__ = ['ParallelProcessor', 'get_memory_usage']


class ParallelProcessor:
    """
    并行处理器

    提供线程池和进程池的并行处理功能。
    """

    def __init__(self, max_workers: Optional[int] = None, use_processes: bool = False):
        """
        初始化并行处理器

        Args:
            max_workers: 最大工作线程/进程数，None表示使用CPU核心数
            use_processes: 是否使用进程池（默认使用线程池）
        """
        if max_workers is None:
            max_workers = os.cpu_count() or 4

        self.max_workers = max(1, int(max_workers))
        self.use_processes = use_processes
        self.executor_class = ProcessPoolExecutor if use_processes else ThreadPoolExecutor

    def map(self, func: Callable[[T], R], items: List[T]) -> List[R]:
        """
        并行处理列表（结果顺序与输入一致）

        进程池要求 func 和 items 可以 pickle（模块顶层函数或其 functools.partial）。

        Args:
            func: 处理函数
            items: 待处理项列表

        Returns:
            处理结果列表
        """
        items = list(items)
        if self.max_workers == 1 or len(items) <= 1:
            return [func(item) for item in items]
        with self.executor_class(max_workers=min(self.max_workers, len(items))) as executor:
            return list(executor.map(func, items))


def get_memory_usage() -> Dict[str, Any]:
    """
    获取当前内存使用情况

    Returns:
        包含内存使用信息的字典
    """
    process = psutil.Process(os.getpid())
    memory_info = process.memory_info()

    return {
        'rss_mb': round(memory_info.rss / 1024 / 1024, 2),  # 物理内存
        'vms_mb': round(memory_info.vms / 1024 / 1024, 2),  # 虚拟内存
        'percent': round(process.memory_percent(), 3),
        'available_mb': round(psutil.virtual_memory().available / 1024 / 1024, 2)
    }

