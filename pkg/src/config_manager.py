#!/usr/bin/env python3
"""
配置管理模块

本模块提供全局配置管理功能，统一管理流水线所有阶段的配置参数。
功能特点：
- 支持YAML格式配置文件的加载和保存
- 提供默认配置和动态配置更新（命令行参数覆盖配置文件）
- 分模块配置管理，避免全局混杂
- 配置项嵌套路径访问（如 cleaning.t_min_s）
- 一次性收集全部违规项的配置校验
- 配置哈希，写入每份报告和阶段清单

设计原则：
- 集中式配置管理，确保所有模块使用一致的配置
- 合理的默认值，确保首次运行无需手动配置
- 所有随机性来自 run.seed 一个根种子

作者：微出行流量预测软件团队
版本：v1.0
许可：商业软件
"""

import copy
import hashlib
import json
from pathlib import Path
from typing import Dict, Any, Optional, List

import pandas as pd
import yaml

# 导入统一异常类
try:
    from .exceptions import ConfigFormatError, ConfigNotFoundError, ConfigValidationError
except ImportError:
    from exceptions import ConfigFormatError, ConfigNotFoundError, ConfigValidationError

__all__ = ['ConfigManager', 'config_manager', 'VALID_SCALES', 'MODEL_KINDS']

VALID_SCALES = ('hourly', 'daily', 'monthly')
RUN_CONTROL_SECTIONS = ('log',)
RUN_CONTROL_KEYS = ('jobs', 'force')
MODEL_KINDS = ('ols', 'ridge', 'lasso', 'elastic_net', 'tree', 'forest', 'gbm', 'knn', 'seasonal')


def _deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    """递归合并字典，override 优先"""
    merged = copy.deepcopy(base)
    for key, value in (override or {}).items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


class ConfigManager:
    """
    配置管理器类

    提供流水线配置的加载、覆盖、校验和哈希功能。
    支持分模块配置和嵌套路径访问。

    使用方法：
        config_manager = ConfigManager("config.yaml")
        t_min = config_manager.get_config("cleaning.t_min_s")
        config_manager.update_config("run.seed", 7)
    """

    def __init__(self, config_file: Optional[str] = None):
        """
        初始化配置管理器

        Args:
            config_file (str, optional): 配置文件路径；为 None 时仅使用默认配置
        """
        self.config_file: Optional[Path] = Path(config_file) if config_file else None
        self.config: Dict[str, Any] = self._get_default_config()
        if self.config_file is not None:
            self.load_config(self.config_file)

    def load_config(self, config_file: str) -> Dict[str, Any]:
        """
        从配置文件加载配置并与默认配置合并

        Args:
            config_file (str): YAML 配置文件路径

        Returns:
            dict: 合并后的配置字典

        Raises:
            ConfigNotFoundError: 配置文件不存在
            ConfigFormatError: YAML 格式错误或顶层不是映射
        """
        path = Path(config_file)
        if not path.exists():
            raise ConfigNotFoundError(str(path))
        try:
            with open(path, 'r', encoding='utf-8') as f:
                loaded = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise ConfigFormatError(str(path), str(e))
        if not isinstance(loaded, dict):
            raise ConfigFormatError(str(path), '顶层必须是映射')

        self.config_file = path
        self.config = _deep_merge(self._get_default_config(), loaded)
        return self.config

    def get_config(self, key: str, default: Any = None) -> Any:
        """
        获取指定配置项（支持嵌套路径）

        Args:
            key (str): 配置项路径，支持点号分隔的嵌套路径（如"features.lags"）
            default (Any, optional): 默认值，当配置项不存在时返回

        Returns:
            Any: 配置值

        Examples:
            >>> config_manager.get_config("cleaning.t_max_s")
            7200
        """
        value: Any = self.config
        for k in key.split('.'):
            if isinstance(value, dict) and k in value:
                value = value[k]
            else:
                return default
        return value

    def update_config(self, key: str, value: Any) -> bool:
        """
        更新内存中的配置项（命令行覆盖使用，不回写用户文件）

        Args:
            key (str): 配置项路径，支持嵌套路径
            value (Any): 配置值

        Returns:
            bool: 更新成功与否
        """
        keys = key.split('.')
        config_ref = self.config
        for k in keys[:-1]:
            if k not in config_ref:
                config_ref[k] = {}
            elif not isinstance(config_ref[k], dict):
                return False
            config_ref = config_ref[k]
        config_ref[keys[-1]] = value
        return True

    def save_config(self, path: str) -> bool:
        """
        保存当前生效配置到文件

        Args:
            path (str): 目标路径

        Returns:
            bool: 保存成功与否
        """
        target = Path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        with open(target, 'w', encoding='utf-8') as f:
            yaml.safe_dump(self.config, f, default_flow_style=False,
                           allow_unicode=True, indent=2, sort_keys=False)
        return True

    def get_all_config(self) -> Dict[str, Any]:
        """
        获取完整配置字典

        Returns:
            dict: 完整配置字典的深拷贝
        """
        return copy.deepcopy(self.config)

    def config_hash(self) -> str:
        """
        计算生效配置的哈希（键排序后的规范 JSON 的 SHA-256）

        日志节与 run.jobs、run.force 不影响产物，不参与哈希。

        Returns:
            str: 十六进制哈希值
        """
        effective = {k: v for k, v in self.config.items() if k not in RUN_CONTROL_SECTIONS}
        effective['run'] = {k: v for k, v in (self.config.get('run') or {}).items() if k not in RUN_CONTROL_KEYS}
        canonical = json.dumps(effective, sort_keys=True, ensure_ascii=False, default=str)
        return hashlib.sha256(canonical.encode('utf-8')).hexdigest()

    def _get_default_config(self) -> Dict[str, Any]:
        """
        获取默认配置

        Returns:
            dict: 默认配置字典
        """
        return {
            # 基础配置
            "base": {
                "output_dir": "./data/run",
                "encoding": "utf-8",
            },

            # 输入文件路径（synth 阶段会自动填充）
            "paths": {
                "trips": None,
                "zones": {},           # level -> 多边形 JSON 路径
                "layers": [],          # 空间图层 JSON 路径列表
                "covariates": None,
                "covariate_manifest": None,
                "holidays": None,
            },

            # 行程文件列映射
            "ingest": {
                "schema": {
                    "trip_id": "trip_id",
                    "start_ts": "start_ts",
                    "end_ts": "end_ts",
                    "origin_x": "origin_x",
                    "origin_y": "origin_y",
                    "dest_x": "dest_x",
                    "dest_y": "dest_y",
                    "duration_s": "duration_s",
                },
            },

            # 异常行程清洗（30 秒 ~ 2 小时）
            "cleaning": {
                "t_min_s": 30,
                "t_max_s": 7200,
            },

            # 空间划分
            "partition": {
                "levels": ["quarters"],
                "hex_grid": {
                    "enabled": False,
                    "circumradius_m": 250.0,
                },
            },

            # 时间尺度与截断
            "temporal": {
                "scales": ["daily"],
                "cutoff": "2021-11-01",
                "weekend_days": [4, 5],   # 周五、周六（周一=0）
            },

            # 特征工程
            "features": {
                "lags": [1, 2, 7],
                "rolling_windows": [3, 7],
                "network_lag": 1,
                "connectivity_exact_max_nodes": 500,
                "path_weighting": "unweighted",
            },

            # 季节分解模型
            "seasonal": {
                "n_changepoints": 10,
                "weekly_order": 3,
                "yearly_order": 10,
                "daily_order": 4,
                "ridge_lambda": 1.0e-3,
            },

            # 模型网格（桌面规模默认值；函数级默认值保持 2000/1000 棵树）
            "models": {
                "grid": [
                    {"name": "Linear Regression", "kind": "ols", "params": {}},
                    {"name": "Ridge", "kind": "ridge", "params": {"lam": 1.0}},
                    {"name": "Lasso", "kind": "lasso", "params": {"lam": 0.01}},
                    {"name": "Elastic Net", "kind": "elastic_net", "params": {"lam": 0.01, "alpha": 0.5}},
                    {"name": "Decision Tree", "kind": "tree", "params": {"max_depth": 8, "min_samples_leaf": 5}},
                    {"name": "Random Forest", "kind": "forest",
                     "params": {"n_trees": 40, "max_depth": 8, "min_samples_leaf": 5}},
                    {"name": "Gradient Boosting", "kind": "gbm",
                     "params": {"n_estimators": 200, "learning_rate": 0.1, "max_depth": 5}},
                    {"name": "K Nearest Neighbors", "kind": "knn", "params": {"k": 10}},
                    {"name": "Seasonal Baseline", "kind": "seasonal", "params": {}},
                ],
            },

            # 评估
            "evaluation": {
                "ablation": True,
            },

            # SHAP 解释
            "explain": {
                "sample_size": 2000,
                "top_k": 10,
                "per_row": False,
            },

            # 合成城市场景
            "synth": {
                "seed": 42,
                "n_zones": 9,
                "zone_side_m": 1000.0,
                "start": "2021-01-01",
                "days": 365,
                "base_volume": 2.0,
                "gravity_beta": 1.0,
                "mass_sigma": 0.6,
                "weekly_amplitude": 0.3,
                "yearly_amplitude": 0.2,
                "rain_probability": 0.25,
                "rain_multiplier": 0.6,
                "holiday_multiplier": 0.5,
                "persistence": 0.7,
                "zone_shock_sigma": 0.2,
                "zone_shock_rho": 0.8,
                "noise": True,
            },

            # 日志模块配置
            "log": {
                "level": "INFO",
                "max_file_size": 10485760,  # 10MB
                "backup_count": 5,
                "console_output": True,
            },

            # 运行控制
            "run": {
                "seed": 42,
                "jobs": 1,
                "force": False,
            },
        }

    def validate_config(self, check_paths: bool = False) -> Dict[str, Any]:
        """
        验证配置完整性和合法性，一次性收集全部问题

        验证规则包括：
        - 时间尺度/空间层级非空且合法
        - 截断点可解析
        - 清洗阈值 0 <= t_min < t_max
        - 滞后阶数为正整数
        - 模型网格种类合法
        - （可选）引用的输入文件存在

        Args:
            check_paths (bool): 是否检查 paths 节中的文件存在性

        Returns:
            dict: {'valid': bool, 'errors': [...], 'warnings': [...]}
        """
        errors: List[str] = []
        warnings: List[str] = []

        scales = self.get_config('temporal.scales') or []
        if not scales:
            errors.append('temporal.scales 不能为空')
        for scale in scales:
            if scale not in VALID_SCALES:
                errors.append(f'temporal.scales 含非法尺度: {scale}，必须是 {list(VALID_SCALES)} 之一')

        levels = list(self.get_config('partition.levels') or [])
        if self.get_config('partition.hex_grid.enabled', False):
            levels.append('hex_grid')
            radius = self.get_config('partition.hex_grid.circumradius_m')
            if not isinstance(radius, (int, float)) or radius <= 0:
                errors.append(f'partition.hex_grid.circumradius_m 必须为正数，当前值: {radius}')
        if not levels:
            errors.append('partition.levels 不能为空')

        cutoff = self.get_config('temporal.cutoff')
        try:
            pd.Timestamp(cutoff)
        except (ValueError, TypeError):
            errors.append(f'temporal.cutoff 无法解析: {cutoff}')

        t_min = self.get_config('cleaning.t_min_s')
        t_max = self.get_config('cleaning.t_max_s')
        if not isinstance(t_min, int) or not isinstance(t_max, int):
            errors.append('cleaning.t_min_s / cleaning.t_max_s 必须是整数')
        elif not (0 <= t_min < t_max):
            errors.append(f'cleaning 阈值必须满足 0 <= t_min_s < t_max_s，当前值: {t_min}, {t_max}')

        for lag in self.get_config('features.lags') or []:
            if not isinstance(lag, int) or lag < 1:
                errors.append(f'features.lags 必须为正整数，当前值: {lag}')
        if self.get_config('features.path_weighting') != 'unweighted':
            errors.append('features.path_weighting 仅支持 unweighted')

        weekend = self.get_config('temporal.weekend_days') or []
        if any((not isinstance(d, int)) or d < 0 or d > 6 for d in weekend):
            errors.append(f'temporal.weekend_days 必须是 0-6 的整数，当前值: {weekend}')

        grid = self.get_config('models.grid') or []
        if not grid:
            errors.append('models.grid 不能为空')
        names = set()
        for entry in grid:
            kind = entry.get('kind') if isinstance(entry, dict) else None
            if kind not in MODEL_KINDS:
                errors.append(f'models.grid 含非法模型种类: {kind}')
            name = entry.get('name') if isinstance(entry, dict) else None
            if name in names:
                errors.append(f'models.grid 模型名称重复: {name}')
            names.add(name)

        sample_size = self.get_config('explain.sample_size')
        if not isinstance(sample_size, int) or sample_size < 1:
            errors.append(f'explain.sample_size 必须为正整数，当前值: {sample_size}')

        log_level = self.get_config('log.level', 'INFO')
        if log_level not in ['DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL']:
            errors.append(f'log.level 值无效: {log_level}')

        jobs = self.get_config('run.jobs', 1)
        if not isinstance(jobs, int) or jobs < 1:
            errors.append(f'run.jobs 必须为正整数，当前值: {jobs}')

        if check_paths:
            for key in ('trips', 'covariates', 'covariate_manifest', 'holidays'):
                value = self.get_config(f'paths.{key}')
                if value is None:
                    if key == 'trips':
                        errors.append('paths.trips 未配置')
                    continue
                if not Path(value).exists():
                    errors.append(f'paths.{key} 文件不存在: {value}')
            zones = self.get_config('paths.zones') or {}
            for level in self.get_config('partition.levels') or []:
                if level not in zones:
                    errors.append(f'paths.zones 缺少层级: {level}')
                elif not Path(zones[level]).exists():
                    errors.append(f'paths.zones.{level} 文件不存在: {zones[level]}')
            for layer in self.get_config('paths.layers') or []:
                if not Path(layer).exists():
                    errors.append(f'paths.layers 文件不存在: {layer}')

        if self.get_config('explain.sample_size', 0) > 100000:
            warnings.append('explain.sample_size 过大，SHAP 计算会很慢')

        return {'valid': not errors, 'errors': errors, 'warnings': warnings}

    def require_valid(self, check_paths: bool = False) -> None:
        """
        校验配置，存在错误时一次性抛出全部违规项

        Raises:
            ConfigValidationError: 至少一项错误
        """
        result = self.validate_config(check_paths=check_paths)
        if not result['valid']:
            raise ConfigValidationError(result['errors'])


# 全局配置管理器实例（默认配置，CLI 会按 --config 重新加载）
config_manager = ConfigManager()
