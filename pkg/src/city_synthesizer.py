#!/usr/bin/env python3
"""
合成城市生成模块

本模块按种子生成带有可恢复结构的合成城市数据，作为整条流水线的验证基准。
功能特点：
- 方格区域布局，区域质量服从对数正态分布（可显式指定）
- 引力模型均值：μ_ij(t) = base · m_i m_j · (s / d_ij)^β · 季节 · 天气 · 节假日 · g_i(t) g_j(t)
- 区域活跃度 g_i(t) 为 AR(1) 对数冲击，昨日活跃的区域今日仍偏活跃
- 持续性：λ_ij(t) 按比例 κ 跟随昨日计数与均值之比，计数 ~ Poisson(λ)（可关闭噪声取四舍五入值）
- 行程端点在区域内均匀分布，时长落在清洗阈值之内
- 输出行程、区域多边形、空间图层、协变量、节假日，以及单独目录下的真值记录

设计原则：
- 所有随机性来自场景种子，按日期派生子种子；计数逐日顺序抽样，行程逐日并行展开
- planted_answers 与 generate 共用同一条 λ 计算路径
- 真值文件写在 ground_truth/ 下，流水线从不读取

作者：微出行流量预测软件团队
版本：v1.0
许可：商业软件
"""

import math
from dataclasses import dataclass, field, asdict
from datetime import date
from pathlib import Path
from typing import Dict, Any, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

try:
    from .exceptions import ScenarioError
    from .log_manager import log_manager
    from .utils import FileOperations, derive_seed
    from .performance_utils import ParallelProcessor
    from .trip_ingestor import (TripRecord, CovariateSeries, HolidayCalendar, write_trips,
                                write_covariates, write_holidays)
    from .zone_partitioner import Zone, SpatialPartition, save_partition
    from .spatial_features import SpatialLayer, save_layer
except ImportError:
    from exceptions import ScenarioError
    from log_manager import log_manager
    from utils import FileOperations, derive_seed
    from performance_utils import ParallelProcessor
    from trip_ingestor import (TripRecord, CovariateSeries, HolidayCalendar, write_trips,
                               write_covariates, write_holidays)
    from zone_partitioner import Zone, SpatialPartition, save_partition
    from spatial_features import SpatialLayer, save_layer

__all__ = ['CityScenario', 'PlantedAnswers', 'CityData', 'generate', 'planted_answers',
           'expected_rates', 'write_city', 'FIXED_HOLIDAYS']

logger = log_manager.get_logger('city_synthesizer')

# 每年固定的节假日（月, 日, 标签）
FIXED_HOLIDAYS: Tuple[Tuple[int, int, str], ...] = (
    (1, 1, 'new_year'),
    (4, 15, 'spring_festival'),
    (5, 1, 'labour_day'),
    (9, 20, 'autumn_festival'),
    (10, 1, 'national_day'),
    (12, 25, 'winter_holiday'),
)

WALK_SPEED_MPS = 4.0
DAY_SECONDS = 86400


@dataclass
class CityScenario:
    """
    合成城市场景参数

    masses 为 None 时由种子按 lognormal(0, mass_sigma) 生成；
    base_volume 是两个单位质量、相距一个区域边长的区域间的日均行程数。
    persistence 是昨日同一 OD 对行程中次日重复出行的比例（0 表示逐日独立）；
    zone_shock_sigma / zone_shock_rho 控制区域活跃度的 AR(1) 对数冲击。
    replicate 只进入计数抽样的子种子，同一场景的不同重复共享全部植入结构。
    """
    seed: int = 42
    n_zones: int = 9
    zone_side_m: float = 1000.0
    start: str = '2021-01-01'
    days: int = 365
    base_volume: float = 2.0
    gravity_beta: float = 1.0
    mass_sigma: float = 0.6
    masses: Optional[List[float]] = None
    weekly_amplitude: float = 0.3
    yearly_amplitude: float = 0.2
    rain_probability: float = 0.25
    rain_multiplier: float = 0.6
    holiday_multiplier: float = 0.5
    persistence: float = 0.7
    zone_shock_sigma: float = 0.2
    zone_shock_rho: float = 0.8
    noise: bool = True
    replicate: int = 0
    level: str = 'quarters'
    t_min_s: int = 30
    t_max_s: int = 7200

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        """
        校验场景参数

        Raises:
            ScenarioError: 任一参数越界（质量和乘子必须为正）
        """
        if not isinstance(self.n_zones, int) or self.n_zones < 1:
            raise ScenarioError('n_zones', self.n_zones, '必须为正整数')
        if not (self.zone_side_m > 0 and math.isfinite(self.zone_side_m)):
            raise ScenarioError('zone_side_m', self.zone_side_m, '必须为正数')
        if not isinstance(self.days, int) or self.days < 1:
            raise ScenarioError('days', self.days, '日期范围至少为 1 天')
        try:
            pd.Timestamp(self.start)
        except (ValueError, TypeError):
            raise ScenarioError('start', self.start, '无法解析为日期')
        if not self.base_volume > 0:
            raise ScenarioError('base_volume', self.base_volume, '必须为正数')
        if not self.gravity_beta >= 0:
            raise ScenarioError('gravity_beta', self.gravity_beta, '必须 >= 0')
        if not self.mass_sigma >= 0:
            raise ScenarioError('mass_sigma', self.mass_sigma, '必须 >= 0')
        if self.masses is not None:
            if len(self.masses) != self.n_zones:
                raise ScenarioError('masses', self.masses, f'长度必须等于 n_zones={self.n_zones}')
            if any(not (m > 0 and math.isfinite(m)) for m in self.masses):
                raise ScenarioError('masses', self.masses, '区域质量必须为正数')
        for name in ('weekly_amplitude', 'yearly_amplitude'):
            value = getattr(self, name)
            if not 0 <= value < 1:
                raise ScenarioError(name, value, '季节振幅必须在 [0, 1) 内')
        if not 0 <= self.rain_probability <= 1:
            raise ScenarioError('rain_probability', self.rain_probability, '必须在 [0, 1] 内')
        if not 0 < self.rain_multiplier <= 1:
            raise ScenarioError('rain_multiplier', self.rain_multiplier, '必须在 (0, 1] 内')
        if not self.holiday_multiplier > 0:
            raise ScenarioError('holiday_multiplier', self.holiday_multiplier, '必须为正数')
        if not 0 <= self.persistence < 1:
            raise ScenarioError('persistence', self.persistence, '必须在 [0, 1) 内')
        if not (self.zone_shock_sigma >= 0 and math.isfinite(self.zone_shock_sigma)):
            raise ScenarioError('zone_shock_sigma', self.zone_shock_sigma, '必须 >= 0')
        if not 0 <= self.zone_shock_rho < 1:
            raise ScenarioError('zone_shock_rho', self.zone_shock_rho, '必须在 [0, 1) 内')
        if not isinstance(self.replicate, int) or self.replicate < 0:
            raise ScenarioError('replicate', self.replicate, '必须为非负整数')
        if not 0 <= self.t_min_s < self.t_max_s:
            raise ScenarioError('t_min_s', self.t_min_s, '必须满足 0 <= t_min_s < t_max_s')

    @classmethod
    def from_config(cls, section: Dict[str, Any], **overrides) -> 'CityScenario':
        known = {f for f in cls.__dataclass_fields__}
        params = {k: v for k, v in {**(section or {}), **overrides}.items() if k in known}
        return cls(**params)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    # ---------- 派生量 ----------

    @property
    def zone_ids(self) -> List[str]:
        return [f'Q{k + 1:02d}' for k in range(self.n_zones)]

    @property
    def grid_columns(self) -> int:
        return int(math.ceil(math.sqrt(self.n_zones)))

    def zone_origin(self, k: int) -> Tuple[float, float]:
        cols = self.grid_columns
        return (k % cols) * self.zone_side_m, (k // cols) * self.zone_side_m

    def resolved_masses(self) -> np.ndarray:
        if self.masses is not None:
            return np.asarray(self.masses, dtype=float)
        rng = np.random.default_rng(derive_seed(self.seed, 'masses'))
        return rng.lognormal(mean=0.0, sigma=self.mass_sigma, size=self.n_zones)

    def distance_matrix(self) -> np.ndarray:
        """质心距离；对角线取 s/2"""
        s = self.zone_side_m
        centers = np.array([[x + s / 2, y + s / 2] for x, y in map(self.zone_origin, range(self.n_zones))])
        d = np.sqrt(((centers[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2))
        np.fill_diagonal(d, s / 2)
        return d

    def dates(self) -> pd.DatetimeIndex:
        return pd.date_range(pd.Timestamp(self.start).normalize(), periods=self.days, freq='D', tz='UTC')


@dataclass
class PlantedAnswers:
    """
    真值记录：逐日逐边 λ、季节分量和真实依赖的特征

    rates 是给定前一天计数后的条件期望 λ_ij(t)，counts 从 Poisson(rates) 抽出；
    mean_rates 是不含持续性的无条件均值 μ_ij(t)。
    """
    zone_ids: List[str]
    dates: List[str]
    masses: np.ndarray
    rates: np.ndarray            # (days, n, n)
    mean_rates: np.ndarray       # (days, n, n)
    counts: np.ndarray           # (days, n, n)
    zone_shocks: np.ndarray      # (days, n)
    persistence: float
    weekly: np.ndarray
    yearly: np.ndarray
    weather: np.ndarray
    holiday: np.ndarray
    weekly_amplitude: float
    yearly_amplitude: float
    depends_on: List[str] = field(default_factory=list)

    def rate(self, day: int, orig: str, dest: str) -> float:
        return float(self.rates[day, self.zone_ids.index(orig), self.zone_ids.index(dest)])

    def to_dict(self) -> Dict[str, Any]:
        return {
            'zone_ids': self.zone_ids,
            'dates': self.dates,
            'masses': [float(m) for m in self.masses],
            'weekly_amplitude': self.weekly_amplitude,
            'yearly_amplitude': self.yearly_amplitude,
            'persistence': self.persistence,
            'components': [
                {'date': d, 'weekly': float(w), 'yearly': float(y), 'weather': float(r), 'holiday': float(h),
                 'zone_shocks': [float(z) for z in shocks]}
                for d, w, y, r, h, shocks in zip(self.dates, self.weekly, self.yearly, self.weather,
                                                 self.holiday, self.zone_shocks)
            ],
            'rates': self.rates.tolist(),
            'mean_rates': self.mean_rates.tolist(),
            'counts': self.counts.tolist(),
            'depends_on': list(self.depends_on),
        }


@dataclass
class CityData:
    """generate 的全部产出"""
    scenario: CityScenario
    trips: List[TripRecord]
    partition: SpatialPartition
    layers: List[SpatialLayer]
    covariates: List[CovariateSeries]
    holidays: HolidayCalendar
    answers: PlantedAnswers


# ============== 真值分量 ==============

def _holiday_calendar(scenario: CityScenario) -> HolidayCalendar:
    days = scenario.dates()
    calendar = HolidayCalendar()
    for year in sorted(set(days.year)):
        for month, day, label in FIXED_HOLIDAYS:
            d = date(year, month, day)
            if days[0].date() <= d <= days[-1].date():
                calendar.holidays[d] = label
    return calendar


def _weather(scenario: CityScenario) -> Tuple[np.ndarray, np.ndarray]:
    """逐日降雨标记和降水量（毫米）"""
    rng = np.random.default_rng(derive_seed(scenario.seed, 'weather'))
    rain = rng.random(scenario.days) < scenario.rain_probability
    amount = np.round(rng.uniform(1.0, 20.0, size=scenario.days), 1)
    return rain, np.where(rain, amount, 0.0)


def _seasonal_components(scenario: CityScenario) -> Tuple[np.ndarray, np.ndarray]:
    epoch_days = (scenario.dates() - pd.Timestamp('1970-01-01', tz='UTC')).days.to_numpy().astype(float)
    weekly = scenario.weekly_amplitude * np.sin(2 * np.pi * epoch_days / 7.0)
    yearly = scenario.yearly_amplitude * np.sin(2 * np.pi * epoch_days / 365.25)
    return weekly, yearly


def _zone_shocks(scenario: CityScenario) -> np.ndarray:
    """区域活跃度对数冲击 z_i(t)：平稳 AR(1)，方差 zone_shock_sigma²"""
    n, days = scenario.n_zones, scenario.days
    sigma, rho = scenario.zone_shock_sigma, scenario.zone_shock_rho
    shocks = np.zeros((days, n))
    if sigma == 0:
        return shocks
    rng = np.random.default_rng(derive_seed(scenario.seed, 'zone_shocks'))
    innovations = rng.normal(0.0, 1.0, size=(days, n))
    shocks[0] = sigma * innovations[0]
    step = sigma * math.sqrt(1.0 - rho ** 2)
    for t in range(1, days):
        shocks[t] = rho * shocks[t - 1] + step * innovations[t]
    return shocks


def _simulate_counts(scenario: CityScenario, mean_rates: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    逐日抽样 OD 计数

    λ(0) = μ(0)，λ(t) = μ(t) · ((1 - κ) + κ · N(t-1) / μ(t-1))，N(t) ~ Poisson(λ(t))；
    关闭噪声时 N(t) 取 λ(t) 的四舍五入值。E[N(t)] = μ(t) 对任意 κ 成立。
    """
    kappa = scenario.persistence
    rates = np.empty_like(mean_rates)
    counts = np.zeros(mean_rates.shape, dtype=np.int64)
    for t, day in enumerate(scenario.dates()):
        if t == 0 or kappa == 0:
            rates[t] = mean_rates[t]
        else:
            ratio = counts[t - 1] / mean_rates[t - 1]
            rates[t] = mean_rates[t] * ((1.0 - kappa) + kappa * ratio)
        if scenario.noise:
            rng = np.random.default_rng(derive_seed(scenario.seed, 'counts', scenario.replicate,
                                                    day.strftime('%Y-%m-%d')))
            counts[t] = rng.poisson(rates[t])
        else:
            counts[t] = np.rint(rates[t]).astype(np.int64)
    return rates, counts


def expected_rates(scenario: CityScenario) -> PlantedAnswers:
    """计算每天每条有序边的期望流量 λ 和实际计数（generate 与 planted_answers 共用）"""
    masses = scenario.resolved_masses()
    gravity = scenario.base_volume * np.outer(masses, masses) \
        * (scenario.zone_side_m / scenario.distance_matrix()) ** scenario.gravity_beta
    weekly, yearly = _seasonal_components(scenario)
    rain, _ = _weather(scenario)
    weather = np.where(rain, scenario.rain_multiplier, 1.0)
    calendar = _holiday_calendar(scenario)
    holiday = np.array([scenario.holiday_multiplier if calendar.is_holiday(d.date()) else 1.0
                        for d in scenario.dates()])
    daily = (1.0 + weekly) * (1.0 + yearly) * weather * holiday

    shocks = _zone_shocks(scenario)
    # 对数正态修正使 E[g] = 1
    activity = np.exp(shocks - scenario.zone_shock_sigma ** 2 / 2.0)
    mean_rates = daily[:, None, None] * gravity[None, :, :] * activity[:, :, None] * activity[:, None, :]
    rates, counts = _simulate_counts(scenario, mean_rates)
    return PlantedAnswers(
        zone_ids=scenario.zone_ids,
        dates=[d.strftime('%Y-%m-%d') for d in scenario.dates()],
        masses=masses, rates=rates, mean_rates=mean_rates, counts=counts, zone_shocks=shocks,
        persistence=scenario.persistence,
        weekly=weekly, yearly=yearly, weather=weather, holiday=holiday,
        weekly_amplitude=scenario.weekly_amplitude, yearly_amplitude=scenario.yearly_amplitude,
        depends_on=['previous_count', 'lag_7_count', 'rolling_mean_7', 'centroid_distance_m',
                    'orig_strength_out', 'dest_strength_in', 'is_holiday', 'precipitation',
                    'weekly_component', 'yearly_component'],
    )


def planted_answers(scenario: CityScenario) -> PlantedAnswers:
    """
    场景真值

    Returns:
        PlantedAnswers：λ_ij(t)、真实季节分量、需求真正依赖的特征列表
    """
    return expected_rates(scenario)


# ============== 空间产物 ==============

def _partition(scenario: CityScenario) -> SpatialPartition:
    s = scenario.zone_side_m
    zones = []
    for k, zone_id in enumerate(scenario.zone_ids):
        x, y = scenario.zone_origin(k)
        ring = ((x, y), (x + s, y), (x + s, y + s), (x, y + s), (x, y))
        zones.append(Zone(zone_id, ring, scenario.level))
    return SpatialPartition(level=scenario.level, zones=tuple(zones))


def _layers(scenario: CityScenario, masses: np.ndarray) -> List[SpatialLayer]:
    rng = np.random.default_rng(derive_seed(scenario.seed, 'layers'))
    s = scenario.zone_side_m
    margin = 0.05 * s

    stops = []
    for k in range(scenario.n_zones):
        x, y = scenario.zone_origin(k)
        n = 1 + int(rng.poisson(3.0 * masses[k]))
        for px, py in rng.uniform(margin, s - margin, size=(n, 2)):
            stops.append([x + float(px), y + float(py)])

    cols = scenario.grid_columns
    rows = int(math.ceil(scenario.n_zones / cols))
    lanes = []
    for r in range(rows):
        ly = r * s + float(rng.uniform(0.2, 0.8)) * s
        lanes.append([[0.0, ly], [cols * s, ly]])

    parks = []
    side = 0.2 * s
    for k in range(scenario.n_zones):
        if rng.random() < 0.5:
            continue
        x, y = scenario.zone_origin(k)
        px, py = (float(v) for v in rng.uniform(margin, s - margin - side, size=2))
        x0, y0 = x + px, y + py
        parks.append([[x0, y0], [x0 + side, y0], [x0 + side, y0 + side], [x0, y0 + side], [x0, y0]])

    return [SpatialLayer('bus_stops', 'point', stops),
            SpatialLayer('bike_lanes', 'line', lanes),
            SpatialLayer('parks', 'polygon', parks)]


def _covariates(scenario: CityScenario) -> List[CovariateSeries]:
    keys = list(scenario.dates())
    rain, amount = _weather(scenario)
    rng = np.random.default_rng(derive_seed(scenario.seed, 'temperature'))
    doy = np.array([d.dayofyear for d in keys], dtype=float)
    temperature = np.round(20.0 + 8.0 * np.sin(2 * np.pi * (doy - 110.0) / 365.25)
                           + rng.normal(0.0, 2.0, size=len(keys)), 1)
    return [
        CovariateSeries('precipitation', 'daily', 'forecastable', dict(zip(keys, map(float, amount)))),
        CovariateSeries('temperature', 'daily', 'forecastable', dict(zip(keys, map(float, temperature)))),
        CovariateSeries('weather_description', 'daily', 'lag-only',
                        {k: ('rain' if r else 'clear') for k, r in zip(keys, rain)},
                        vocabulary=['clear', 'rain']),
    ]


# ============== 行程生成 ==============

def _day_trips(scenario: CityScenario, day: pd.Timestamp, counts: np.ndarray) -> List[TripRecord]:
    """把一天的 OD 计数展开为行程记录"""
    rng = np.random.default_rng(derive_seed(scenario.seed, 'trips', scenario.replicate,
                                            day.strftime('%Y-%m-%d')))
    n = scenario.n_zones
    orig_idx, dest_idx = np.divmod(np.repeat(np.arange(n * n), counts.ravel()), n)
    total = len(orig_idx)
    if total == 0:
        return []

    s = scenario.zone_side_m
    eps = 1e-6 * s
    origins = np.array([scenario.zone_origin(k) for k in range(n)])
    o_xy = origins[orig_idx] + rng.uniform(eps, s - eps, size=(total, 2))
    d_xy = origins[dest_idx] + rng.uniform(eps, s - eps, size=(total, 2))
    seconds = np.sort(rng.integers(0, DAY_SECONDS, size=total))
    distance = np.sqrt(((o_xy - d_xy) ** 2).sum(axis=1))
    durations = np.clip((distance / WALK_SPEED_MPS + rng.uniform(60.0, 300.0, size=total)).astype(int),
                        scenario.t_min_s, scenario.t_max_s)

    stamp = day.strftime('%Y%m%d')
    trips = []
    for k in range(total):
        start = day + pd.Timedelta(seconds=int(seconds[k]))
        trips.append(TripRecord(
            trip_id=f'T{stamp}-{k:06d}',
            start_ts=start,
            end_ts=start + pd.Timedelta(seconds=int(durations[k])),
            origin=(float(o_xy[k, 0]), float(o_xy[k, 1])),
            destination=(float(d_xy[k, 0]), float(d_xy[k, 1])),
            duration_s=int(durations[k]),
        ))
    return trips


def generate(scenario: CityScenario, start: Optional[str] = None, days: Optional[int] = None,
             jobs: int = 1) -> CityData:
    """
    生成合成城市

    Args:
        scenario: 场景参数
        start: 覆盖场景的起始日期
        days: 覆盖场景的天数
        jobs: 逐日生成的并行数

    Returns:
        CityData：行程、划分、图层、协变量、节假日和真值

    Raises:
        ScenarioError: 参数非法或日期范围退化
    """
    overrides = {k: v for k, v in (('start', start), ('days', days)) if v is not None}
    if overrides:
        scenario = CityScenario(**{**scenario.to_dict(), **overrides})

    answers = expected_rates(scenario)
    dates = list(scenario.dates())
    per_day = ParallelProcessor(max_workers=jobs).map(
        lambda i: _day_trips(scenario, dates[i], answers.counts[i]), list(range(scenario.days)))
    trips = [t for day_trips in per_day for t in day_trips]

    city = CityData(
        scenario=scenario,
        trips=trips,
        partition=_partition(scenario),
        layers=_layers(scenario, answers.masses),
        covariates=_covariates(scenario),
        holidays=_holiday_calendar(scenario),
        answers=answers,
    )
    logger.info("合成城市生成完成", zones=scenario.n_zones, days=scenario.days, trips=len(trips),
                expected=round(float(answers.rates.sum()), 3))
    return city


def write_city(city: CityData, output_dir: Union[str, Path]) -> Dict[str, Any]:
    """
    写出合成城市的全部文件

    目录结构：
        trips.csv
        zones/<level>.json
        layers/<name>.json
        covariates.csv, covariates.manifest.yaml
        holidays.txt
        ground_truth/planted.json

    Returns:
        dict: 各文件路径（字符串）
    """
    out = Path(output_dir)
    level = city.partition.level
    trips_path = write_trips(city.trips, out / 'trips.csv')
    zones_path = save_partition(city.partition, out / 'zones' / f'{level}.json')
    layer_paths = [save_layer(layer, out / 'layers' / f'{layer.name}.json') for layer in city.layers]
    cov_path, manifest_path = write_covariates(city.covariates, out / 'covariates.csv')
    holidays_path = write_holidays(city.holidays, out / 'holidays.txt')
    truth_path = FileOperations.write_json(
        {'scenario': city.scenario.to_dict(), **city.answers.to_dict()},
        out / 'ground_truth' / 'planted.json')
    paths = {
        'trips': str(trips_path),
        'zones': {level: str(zones_path)},
        'layers': [str(p) for p in layer_paths],
        'covariates': str(cov_path),
        'covariate_manifest': str(manifest_path),
        'holidays': str(holidays_path),
        'ground_truth': str(truth_path),
    }
    logger.info(f"合成城市已写出: {out}", trips=len(city.trips))
    return paths


if __name__ == "__main__":
    """
    命令行入口：生成并写出合成城市
    """
    import argparse

    parser = argparse.ArgumentParser(description='合成城市生成工具')
    parser.add_argument('--output', required=True, help='输出目录')
    parser.add_argument('--seed', type=int, default=42)
    parser.add_argument('--zones', type=int, default=9)
    parser.add_argument('--days', type=int, default=365)
    parser.add_argument('--start', default='2021-01-01')
    parser.add_argument('--no-noise', action='store_true', help='关闭泊松噪声')
    parser.add_argument('--replicate', type=int, default=0, help='计数抽样的重复编号')
    args = parser.parse_args()

    result = generate(CityScenario(seed=args.seed, n_zones=args.zones, days=args.days, start=args.start,
                                   noise=not args.no_noise, replicate=args.replicate))
    written = write_city(result, args.output)
    print(f"行程数: {len(result.trips)}  期望总量: {result.answers.rates.sum():.1f}")
    for key, value in written.items():
        print(f"  {key}: {value}")
