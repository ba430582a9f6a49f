#!/usr/bin/env python3
"""
日志管理模块

本模块为所有模块提供统一的日志记录功能。
功能特点：
- 按模块分类日志，便于问题定位
- 支持分级输出（DEBUG/INFO/WARN/ERROR）
- 日志轮转，避免单个文件过大
- 同时支持文件输出和控制台输出
- 阶段关联日志，支持按阶段/运行ID过滤

设计原则：
- 统一的日志格式和管理策略
- 导入时不产生文件副作用，调用 configure() 后才写日志文件
- 详细的上下文信息记录

作者：微出行流量预测软件团队
版本：v1.0
许可：商业软件
"""

import logging
import logging.handlers
import sys
import threading
from pathlib import Path
from typing import Dict, Optional, Any, List

# 模块导出列表
__all__ = ['LogManager', 'TaskAwareLogger', 'log_manager']


class TaskAwareLogger:
    """
    任务感知的日志记录器

    扩展标准Logger功能，支持阶段ID关联和上下文键值对。
    """

    def __init__(self, logger: logging.Logger):
        """
        初始化任务感知日志记录器

        Args:
            logger (logging.Logger): 标准日志记录器实例
        """
        self.logger = logger

    def _log_with_task(self, log_level: int, message: str, /, task_id: Optional[str] = None,
                       **kwargs) -> None:
        """
        带阶段ID的日志记录

        Args:
            log_level (int): 日志级别（仅限位置参数，上下文里可以再传 level=）
            message (str): 日志消息
            task_id (str, optional): 阶段或运行ID
            **kwargs: 额外的日志上下文信息
        """
        if task_id:
            message = f"[{task_id}] {message}"

        if kwargs:
            context_info = ", ".join([f"{k}={v}" for k, v in kwargs.items()])
            message = f"{message} [{context_info}]"

        self.logger.log(log_level, message)

    def debug(self, message: str, /, task_id: Optional[str] = None, **kwargs) -> None:
        """调试日志"""
        self._log_with_task(logging.DEBUG, message, task_id, **kwargs)

    def info(self, message: str, /, task_id: Optional[str] = None, **kwargs) -> None:
        """信息日志"""
        self._log_with_task(logging.INFO, message, task_id, **kwargs)

    def warning(self, message: str, /, task_id: Optional[str] = None, **kwargs) -> None:
        """警告日志"""
        self._log_with_task(logging.WARNING, message, task_id, **kwargs)

    def error(self, message: str, /, task_id: Optional[str] = None, **kwargs) -> None:
        """错误日志"""
        self._log_with_task(logging.ERROR, message, task_id, **kwargs)


class LogManager:
    """
    日志管理器

    负责创建和管理所有模块的日志记录器，提供统一的日志配置和管理。
    """

    def __init__(self, log_level: str = "INFO"):
        """
        初始化日志管理器

        Args:
            log_level (str): 默认日志级别
        """
        self.log_dir: Optional[Path] = None
        self.log_level = getattr(logging, log_level.upper())
        self.loggers: Dict[str, TaskAwareLogger] = {}
        self._file_handlers: Dict[str, logging.Handler] = {}
        self._lock = threading.Lock()

        # 默认配置
        self.config = {
            'log_level': log_level,
            'max_file_size': 10 * 1024 * 1024,  # 10MB
            'backup_count': 5,
            'console_output': True,
            'log_format': '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
            'date_format': '%Y-%m-%d %H:%M:%S'
        }

    def _formatter(self) -> logging.Formatter:
        return logging.Formatter(self.config['log_format'], self.config['date_format'])

    def _ensure_console(self) -> None:
        """为 microflow 根记录器挂载控制台处理器（只挂一次）"""
        root = logging.getLogger('microflow')
        root.setLevel(self.log_level)
        if not self.config['console_output']:
            return
        if any(getattr(h, '_microflow_console', False) for h in root.handlers):
            return
        console_handler = logging.StreamHandler(sys.stderr)
        console_handler.setLevel(self.log_level)
        console_handler.setFormatter(self._formatter())
        console_handler._microflow_console = True
        root.addHandler(console_handler)

    def configure(self, log_dir: Optional[str] = None, log_level: Optional[str] = None,
                  console_output: Optional[bool] = None, **kwargs: Any) -> None:
        """
        应用日志配置

        Args:
            log_dir (str, optional): 日志目录，设置后为每个模块挂载轮转文件处理器
            log_level (str, optional): 日志级别
            console_output (bool, optional): 是否输出到控制台
            **kwargs: 其他配置项（max_file_size/backup_count/log_format）
        """
        self.config.update(kwargs)
        if console_output is not None:
            self.config['console_output'] = console_output
        if log_level:
            self.set_log_level(log_level)
        if log_dir:
            self.log_dir = Path(log_dir)
            self.log_dir.mkdir(parents=True, exist_ok=True)
            with self._lock:
                for module_name in list(self.loggers):
                    self._attach_file_handler(module_name)
        self._ensure_console()

    def _attach_file_handler(self, module_name: str) -> None:
        """为模块日志记录器挂载轮转文件处理器"""
        if self.log_dir is None:
            return
        old = self._file_handlers.pop(module_name, None)
        logger = logging.getLogger(f'microflow.{module_name}')
        if old is not None:
            logger.removeHandler(old)
            old.close()
        file_handler = logging.handlers.RotatingFileHandler(
            self.log_dir / f"{module_name}.log",
            maxBytes=self.config['max_file_size'],
            backupCount=self.config['backup_count'],
            encoding='utf-8'
        )
        file_handler.setLevel(self.log_level)
        file_handler.setFormatter(self._formatter())
        logger.addHandler(file_handler)
        self._file_handlers[module_name] = file_handler

    def get_logger(self, module_name: str) -> TaskAwareLogger:
        """
        获取指定模块的日志记录器

        Args:
            module_name (str): 模块名称

        Returns:
            TaskAwareLogger: 任务感知的日志记录器
        """
        with self._lock:
            if module_name not in self.loggers:
                logger = logging.getLogger(f'microflow.{module_name}')
                logger.setLevel(self.log_level)
                self.loggers[module_name] = TaskAwareLogger(logger)
                self._attach_file_handler(module_name)
            return self.loggers[module_name]

    def set_log_level(self, level: str) -> None:
        """
        设置全局日志级别

        Args:
            level (str): 日志级别 (DEBUG/INFO/WARNING/ERROR/CRITICAL)
        """
        self.log_level = getattr(logging, level.upper())
        self.config['log_level'] = level.upper()

        with self._lock:
            for task_logger in self.loggers.values():
                task_logger.logger.setLevel(self.log_level)
                for handler in task_logger.logger.handlers:
                    handler.setLevel(self.log_level)
            root = logging.getLogger('microflow')
            root.setLevel(self.log_level)
            for handler in root.handlers:
                handler.setLevel(self.log_level)

    def get_log_files(self) -> List[Path]:
        """
        获取所有日志文件列表

        Returns:
            List[Path]: 日志文件路径列表
        """
        if self.log_dir is None:
            return []
        return sorted(self.log_dir.glob("*.log"))

    def close(self) -> None:
        """关闭并移除全部文件处理器"""
        with self._lock:
            for module_name, handler in self._file_handlers.items():
                logging.getLogger(f'microflow.{module_name}').removeHandler(handler)
                handler.close()
            self._file_handlers.clear()
            self.log_dir = None


# 全局日志管理器实例
log_manager = LogManager()
