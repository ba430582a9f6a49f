"""
测试公共夹具

提供单位正方形区域、九宫格划分、小型合成城市和临时运行目录。
"""

import sys
from pathlib import Path

import pytest

PROJECT_ROOT = Path(__file__).resolve().parent.parent
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

from src.zone_partitioner import Zone, SpatialPartition
from src.city_synthesizer import CityScenario, generate
from src.config_manager import ConfigManager


def square(zone_id, x0, y0, side=1.0, level='test'):
    """逆时针闭合正方形区域"""
    ring = ((x0, y0), (x0 + side, y0), (x0 + side, y0 + side), (x0, y0 + side), (x0, y0))
    return Zone(zone_id, ring, level)


@pytest.fixture
def unit_square():
    return square('U', 0.0, 0.0)


@pytest.fixture
def nine_zone_partition():
    """3x3 网格，Q1..Q9 按行排列，边长 1"""
    zones = tuple(square(f'Q{k + 1}', float(k % 3), float(k // 3), level='quarters') for k in range(9))
    return SpatialPartition(level='quarters', zones=zones)


@pytest.fixture(scope='session')
def tiny_scenario():
    return CityScenario(seed=11, n_zones=4, zone_side_m=500.0, start='2021-01-01', days=60,
                        base_volume=1.5)


@pytest.fixture(scope='session')
def tiny_city(tiny_scenario):
    return generate(tiny_scenario)


@pytest.fixture
def run_config(tmp_path):
    """指向临时目录的小规模流水线配置"""
    config = ConfigManager()
    config.update_config('base.output_dir', str(tmp_path / 'run'))
    config.update_config('synth.n_zones', 4)
    config.update_config('synth.zone_side_m', 500.0)
    config.update_config('synth.days', 75)
    config.update_config('synth.start', '2021-01-01')
    config.update_config('temporal.cutoff', '2021-03-01')
    config.update_config('models.grid', [
        {'name': 'Linear Regression', 'kind': 'ols', 'params': {}},
        {'name': 'Decision Tree', 'kind': 'tree', 'params': {'max_depth': 4, 'min_samples_leaf': 3}},
        {'name': 'Gradient Boosting', 'kind': 'gbm', 'params': {'n_estimators': 20, 'learning_rate': 0.3,
                                                              'max_depth': 3}},
    ])
    config.update_config('explain.sample_size', 50)
    config.update_config('log.console_output', False)
    return config
