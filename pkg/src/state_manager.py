#!/usr/bin/env python3
"""
状态管理模块

本模块负责记录和管理流水线各阶段的运行状态。
功能特点：
- 每个阶段一个清单文件（manifests/<stage>.json），原子写入
- 清单记录输入文件哈希、输出文件、配置哈希、起止时间、状态和错误
- 最新性检查：配置哈希、输入哈希、输出文件全部一致时跳过阶段
- 阶段生命周期管理（等待/运行/完成/失败/跳过）

设计原则：
- 线程安全的状态操作
- 可靠的状态持久化（临时文件 + replace）
- 详细的阶段运行记录

作者：微出行流量预测软件团队
版本：v1.0
许可：商业软件
"""

import copy
import json
import os
import threading
import time
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Dict, Any, Optional, List, Union

try:
    from .utils import FileOperations, SystemUtils, to_jsonable
    from .performance_utils import get_memory_usage
    from .log_manager import log_manager
except ImportError:
    from utils import FileOperations, SystemUtils, to_jsonable
    from performance_utils import get_memory_usage
    from log_manager import log_manager

# 模块导出列表
__all__ = ['StageStatus', 'StateManager']

logger = log_manager.get_logger('state_manager')


class StageStatus(Enum):
    """阶段状态枚举"""
    PENDING = "pending"      # 等待中
    RUNNING = "running"      # 运行中
    COMPLETED = "completed"  # 已完成
    FAILED = "failed"        # 失败
    SKIPPED = "skipped"      # 已是最新，跳过


class StateManager:
    """
    阶段状态管理器

    为每个流水线阶段维护一份清单文件，并据此判断阶段是否需要重跑。

    使用方法：
        state = StateManager("./data/run/manifests")
        if not state.is_up_to_date("ingest", inputs, cfg_hash):
            record = state.begin_stage("ingest", inputs, cfg_hash)
            ...
            state.complete_stage(record, outputs)
    """

    def __init__(self, manifest_dir: Union[str, Path]):
        """
        初始化状态管理器

        Args:
            manifest_dir: 清单目录
        """
        self.manifest_dir = Path(manifest_dir)
        self._lock = threading.RLock()

    def manifest_path(self, stage: str) -> Path:
        """返回阶段清单路径"""
        return self.manifest_dir / f"{stage}.json"

    def load_manifest(self, stage: str) -> Optional[Dict[str, Any]]:
        """
        读取阶段清单

        Args:
            stage: 阶段名

        Returns:
            dict or None: 清单内容，不存在或损坏时返回 None
        """
        path = self.manifest_path(stage)
        if not path.exists():
            return None
        try:
            with open(path, 'r', encoding='utf-8') as f:
                return json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            logger.warning(f"清单文件损坏，视为不存在: {path}", error=str(e))
            return None

    def get_status(self, stage: str) -> StageStatus:
        """获取阶段状态，没有清单时为 PENDING"""
        manifest = self.load_manifest(stage)
        if manifest is None:
            return StageStatus.PENDING
        return StageStatus(manifest.get('status', StageStatus.PENDING.value))

    def is_up_to_date(self, stage: str, inputs: List[Union[str, Path]], config_hash: str) -> bool:
        """
        判断阶段是否已是最新

        条件：清单状态为 completed、配置哈希一致、每个输入文件哈希一致、输出文件全部存在。

        Args:
            stage: 阶段名
            inputs: 当前输入文件列表
            config_hash: 当前配置哈希

        Returns:
            bool: 是否可以跳过
        """
        manifest = self.load_manifest(stage)
        if manifest is None or manifest.get('status') != StageStatus.COMPLETED.value:
            return False
        if manifest.get('config_hash') != config_hash:
            return False
        recorded = manifest.get('inputs', {})
        current = {str(p) for p in inputs}
        if set(recorded) != current:
            return False
        for path, digest in recorded.items():
            if not Path(path).exists() or FileOperations.get_file_hash(path) != digest:
                return False
        return all(Path(p).exists() for p in manifest.get('outputs', []))

    def begin_stage(self, stage: str, inputs: List[Union[str, Path]], config_hash: str) -> Dict[str, Any]:
        """
        开始一个阶段：记录输入哈希并写出 running 状态的清单

        Args:
            stage: 阶段名
            inputs: 输入文件列表
            config_hash: 配置哈希

        Returns:
            dict: 阶段记录（传给 complete_stage/fail_stage）
        """
        record = {
            'stage': stage,
            'inputs': {str(p): FileOperations.get_file_hash(p) for p in sorted(str(p) for p in inputs)},
            'outputs': [],
            'config_hash': config_hash,
            'started': datetime.now().isoformat(),
            'finished': None,
            'status': StageStatus.RUNNING.value,
            'error': None,
            'versions': SystemUtils.get_versions(),
            'statistics': {},
        }
        self._save(record)
        logger.info("阶段开始", task_id=stage, inputs=len(record['inputs']))
        return record

    def complete_stage(self, record: Dict[str, Any], outputs: List[Union[str, Path]],
                       statistics: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
        """
        标记阶段完成

        Args:
            record: begin_stage 返回的记录
            outputs: 输出文件列表
            statistics: 额外统计信息

        Returns:
            dict: 更新后的记录
        """
        record = copy.deepcopy(record)
        record['outputs'] = sorted(str(p) for p in outputs)
        record['finished'] = datetime.now().isoformat()
        record['status'] = StageStatus.COMPLETED.value
        record['statistics'] = dict(statistics or {})
        record['statistics']['memory'] = get_memory_usage()
        self._save(record)
        logger.info("阶段完成", task_id=record['stage'], outputs=len(record['outputs']))
        return record

    def fail_stage(self, record: Dict[str, Any], error: Dict[str, Any]) -> Dict[str, Any]:
        """
        标记阶段失败

        Args:
            record: begin_stage 返回的记录
            error: handle_exception 生成的错误字典

        Returns:
            dict: 更新后的记录
        """
        record = copy.deepcopy(record)
        record['finished'] = datetime.now().isoformat()
        record['status'] = StageStatus.FAILED.value
        record['error'] = error
        self._save(record)
        logger.error("阶段失败", task_id=record['stage'], error=error.get('message'))
        return record

    def list_stages(self) -> Dict[str, str]:
        """列出已有清单的阶段及其状态"""
        result = {}
        if not self.manifest_dir.exists():
            return result
        for path in sorted(self.manifest_dir.glob('*.json')):
            manifest = self.load_manifest(path.stem)
            if manifest is not None:
                result[path.stem] = manifest.get('status')
        return result

    def _save(self, record: Dict[str, Any]) -> None:
        """原子写入清单文件"""
        with self._lock:
            path = self.manifest_path(record['stage'])
            path.parent.mkdir(parents=True, exist_ok=True)
            tmp_file = path.with_suffix('.json.tmp')
            payload = json.dumps(to_jsonable(record), ensure_ascii=False, indent=2, sort_keys=True)
            # 尝试多次原子替换，缓解跨系统挂载偶发 Invalid argument
            for attempt in range(3):
                try:
                    with open(tmp_file, 'w', encoding='utf-8') as f:
                        f.write(payload)
                        f.flush()
                        os.fsync(f.fileno())
                    tmp_file.replace(path)
                    return
                except OSError:
                    time.sleep(0.1 * (attempt + 1))
                    if attempt == 2:
                        raise
