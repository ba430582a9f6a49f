#!/usr/bin/env python3
"""
流水线编排模块

本模块按单一配置文件把各阶段串成完整流水线，每个阶段写出产物和阶段清单。
阶段顺序：synth → ingest → features → train → evaluate → ablate → explain。

功能特点：
- 每个阶段先检查前置产物，缺失时抛出 StageDependencyError 并指明缺失文件
- 阶段清单记录输入哈希、配置哈希、版本信息；已是最新的阶段直接跳过（--force 强制重跑）
- 报告只包含确定性内容（配置哈希而非时间戳），同配置同种子两次运行逐字节一致
- 合成数据的真值目录 ground_truth/ 从不作为任何阶段的输入

输出目录结构：
    city/                      合成数据（synth）与 paths.json
    ingest/trips_clean.csv     清洗后的行程
    features/<scale>__<level>.csv (+ .groups.json)
    models/<scale>__<level>/<model>.json, scaler.json；models/index.json
    reports/ingest.json, network.json, benchmark.csv/json, best_models.csv,
            ablation.csv/json, shap_<scale>__<level>.json, shap_top_<scale>__<level>.csv
    manifests/<stage>.json
    logs/

作者：微出行流量预测软件团队
版本：v1.0
许可：商业软件
"""

import re
from pathlib import Path
from typing import Dict, Any, List, Optional, Tuple, Callable

import numpy as np
import pandas as pd

try:
    from .exceptions import StageDependencyError, ExplainError, handle_exception
    from .log_manager import log_manager
    from .config_manager import ConfigManager
    from .state_manager import StateManager
    from .utils import FileOperations, derive_seed
    from .trip_ingestor import (CleaningPolicy, load_trips, clean_trips_with_report, trips_to_frame,
                                write_trips, load_covariates, load_holidays)
    from .zone_partitioner import HexGridSpec, load_partition, generate_hex_grid, save_partition
    from .spatial_features import load_layer
    from .flow_network import assign_trips, aggregate_od, level_statistics
    from .feature_generator import (FeatureMatrix, ScalerState, build_feature_matrix, save_matrix, load_matrix,
                                    KEY_COLUMNS)
    from .model_zoo import ModelSpec, save_model, load_model
    from .model_evaluator import (TABLE_COLUMNS, CutoffSpec, EvaluationResult, prepare_split, run_benchmark,
                                  score_fitted, result_row, select_best, run_ablation, demand_profile,
                                  improvement_summary, format_table)
    from .shap_explainer import importance, sample_rows, write_importance_json, write_top_k_csv, write_shap_rows
    from .city_synthesizer import CityScenario, generate, write_city
    from .tree_models import RegressionTree, TreeEnsemble
    from .linear_models import LinearModel
except ImportError:
    from exceptions import StageDependencyError, ExplainError, handle_exception
    from log_manager import log_manager
    from config_manager import ConfigManager
    from state_manager import StateManager
    from utils import FileOperations, derive_seed
    from trip_ingestor import (CleaningPolicy, load_trips, clean_trips_with_report, trips_to_frame,
                               write_trips, load_covariates, load_holidays)
    from zone_partitioner import HexGridSpec, load_partition, generate_hex_grid, save_partition
    from spatial_features import load_layer
    from flow_network import assign_trips, aggregate_od, level_statistics
    from feature_generator import (FeatureMatrix, ScalerState, build_feature_matrix, save_matrix, load_matrix,
                                   KEY_COLUMNS)
    from model_zoo import ModelSpec, save_model, load_model
    from model_evaluator import (TABLE_COLUMNS, CutoffSpec, EvaluationResult, prepare_split, run_benchmark,
                                 score_fitted, result_row, select_best, run_ablation, demand_profile,
                                 improvement_summary, format_table)
    from shap_explainer import importance, sample_rows, write_importance_json, write_top_k_csv, write_shap_rows
    from city_synthesizer import CityScenario, generate, write_city
    from tree_models import RegressionTree, TreeEnsemble
    from linear_models import LinearModel

__all__ = ['PipelineRunner', 'STAGES']

logger = log_manager.get_logger('pipeline_runner')

STAGES = ('synth', 'ingest', 'features', 'train', 'evaluate', 'ablate', 'explain')
TREE_KINDS = ('tree', 'forest', 'gbm')


def _slug(name: str) -> str:
    return re.sub(r'[^0-9a-zA-Z]+', '_', name).strip('_').lower() or 'model'


def _cell(scale: str, level: str) -> str:
    return f'{scale}__{level}'


class PipelineRunner:
    """
    流水线运行器

    使用方法：
        runner = PipelineRunner(ConfigManager("config.yaml"))
        runner.cmd_run_all()
    """

    def __init__(self, config: ConfigManager, output_dir: Optional[str] = None, force: bool = False):
        self.config = config
        if output_dir:
            self.config.update_config('base.output_dir', str(output_dir))
        if force:
            self.config.update_config('run.force', True)
        self.output_dir = Path(self.config.get_config('base.output_dir'))
        self.force = bool(self.config.get_config('run.force', False))
        self.state = StateManager(self.output_dir / 'manifests')

    # ---------- 公共属性 ----------

    @property
    def config_hash(self) -> str:
        return self.config.config_hash()

    @property
    def seed(self) -> int:
        return int(self.config.get_config('run.seed', 42))

    @property
    def jobs(self) -> int:
        return int(self.config.get_config('run.jobs', 1))

    @property
    def scales(self) -> List[str]:
        return list(self.config.get_config('temporal.scales'))

    @property
    def levels(self) -> List[str]:
        levels = list(self.config.get_config('partition.levels') or [])
        if self.config.get_config('partition.hex_grid.enabled', False):
            levels.append('hex_grid')
        return levels

    @property
    def cutoff(self) -> CutoffSpec:
        return CutoffSpec.parse(self.config.get_config('temporal.cutoff'))

    def path(self, *parts: str) -> Path:
        return self.output_dir.joinpath(*parts)

    def matrix_path(self, scale: str, level: str) -> Path:
        return self.path('features', f'{_cell(scale, level)}.csv')

    def matrix_paths(self) -> List[Path]:
        paths = []
        for scale in self.scales:
            for level in self.levels:
                csv = self.matrix_path(scale, level)
                paths += [csv, csv.with_name(csv.name + '.groups.json')]
        return paths

    # ---------- 输入路径解析 ----------

    def input_paths(self) -> Dict[str, Any]:
        """
        配置中的输入路径；paths.trips 未配置时使用 synth 阶段写出的 city/paths.json
        """
        configured = self.config.get_config('paths') or {}
        if configured.get('trips'):
            return dict(configured)
        generated = self.path('city', 'paths.json')
        if generated.exists():
            return FileOperations.read_json(generated)
        return dict(configured)

    def _optional_inputs(self, paths: Dict[str, Any]) -> List[str]:
        return [paths[k] for k in ('covariates', 'covariate_manifest', 'holidays') if paths.get(k)]

    def _calendar(self, paths: Dict[str, Any]):
        return load_holidays(paths['holidays']) if paths.get('holidays') else None

    # ---------- 阶段框架 ----------

    def _run_stage(self, stage: str, inputs: List[Any],
                   body: Callable[[], Tuple[List[Path], Dict[str, Any]]]) -> List[str]:
        inputs = [str(p) for p in inputs]
        for p in inputs:
            if not Path(p).exists():
                raise StageDependencyError(stage, p)
        if not self.force and self.state.is_up_to_date(stage, inputs, self.config_hash):
            logger.info("阶段已是最新，跳过", task_id=stage)
            return list(self.state.load_manifest(stage).get('outputs', []))
        record = self.state.begin_stage(stage, inputs, self.config_hash)
        try:
            outputs, statistics = body()
        except Exception as e:
            self.state.fail_stage(record, handle_exception(e))
            raise
        self.state.complete_stage(record, outputs, statistics)
        return [str(p) for p in outputs]

    def _report(self, payload: Dict[str, Any], *parts: str) -> Path:
        return FileOperations.write_json({'config_hash': self.config_hash, **payload}, self.path('reports', *parts))

    # ---------- synth ----------

    def cmd_synth(self) -> int:
        def body():
            scenario = CityScenario.from_config(self.config.get_config('synth'),
                                                level=(self.config.get_config('partition.levels') or ['quarters'])[0],
                                                t_min_s=self.config.get_config('cleaning.t_min_s'),
                                                t_max_s=self.config.get_config('cleaning.t_max_s'))
            city = generate(scenario, jobs=self.jobs)
            written = write_city(city, self.path('city'))
            pipeline_paths = {k: v for k, v in written.items() if k != 'ground_truth'}
            index = FileOperations.write_json(pipeline_paths, self.path('city', 'paths.json'))
            outputs = [index, written['trips'], written['covariates'], written['covariate_manifest'],
                       written['holidays'], written['ground_truth'], *written['layers'], *written['zones'].values()]
            return outputs, {'trips': len(city.trips)}

        self._run_stage('synth', [], body)
        return 0

    # ---------- ingest ----------

    def cmd_ingest(self) -> int:
        paths = self.input_paths()
        if not paths.get('trips'):
            raise StageDependencyError('ingest', 'paths.trips')

        def body():
            records, ingest_report = load_trips(paths['trips'], self.config.get_config('ingest.schema'),
                                                return_report=True)
            policy = CleaningPolicy(t_min_s=self.config.get_config('cleaning.t_min_s'),
                                    t_max_s=self.config.get_config('cleaning.t_max_s'))
            kept, cleaning_report = clean_trips_with_report(records, policy)
            clean = write_trips(kept, self.path('ingest', 'trips_clean.csv'))
            report = self._report({'ingest': ingest_report.to_dict(), 'cleaning': cleaning_report.to_dict(),
                                   'demand_profile': demand_profile(trips_to_frame(kept))}, 'ingest.json')
            return [clean, report], {'accepted': ingest_report.rows_accepted, 'retained': len(kept)}

        self._run_stage('ingest', [paths['trips']], body)
        return 0

    # ---------- features ----------

    def _partitions(self, paths: Dict[str, Any]) -> Dict[str, Any]:
        zones = paths.get('zones') or {}
        partitions = {}
        for level in self.config.get_config('partition.levels') or []:
            if level not in zones:
                raise StageDependencyError('features', f'paths.zones.{level}')
            partitions[level] = load_partition(zones[level], level=level)
        if self.config.get_config('partition.hex_grid.enabled', False):
            if not partitions:
                raise StageDependencyError('features', 'paths.zones（六边形网格需要一个多边形层级确定外包框）')
            boxes = np.array([z.bbox for p in partitions.values() for z in p.zones])
            bbox = (boxes[:, 0].min(), boxes[:, 1].min(), boxes[:, 2].max(), boxes[:, 3].max())
            radius = float(self.config.get_config('partition.hex_grid.circumradius_m'))
            partitions['hex_grid'] = generate_hex_grid(HexGridSpec(radius, tuple(float(v) for v in bbox)))
        return partitions

    def cmd_features(self) -> int:
        paths = self.input_paths()
        clean = self.path('ingest', 'trips_clean.csv')
        zone_files = [(paths.get('zones') or {})[lv] for lv in self.config.get_config('partition.levels') or []
                      if lv in (paths.get('zones') or {})]
        inputs = [clean, *zone_files, *(paths.get('layers') or []), *self._optional_inputs(paths)]

        def body():
            trips = trips_to_frame(load_trips(clean))
            partitions = self._partitions(paths)
            layers = [load_layer(p) for p in paths.get('layers') or []]
            covariates = load_covariates(paths['covariates'], paths.get('covariate_manifest')) \
                if paths.get('covariates') else []
            cal = self._calendar(paths)
            outputs: List[Path] = []
            network: Dict[str, Any] = {}
            rows = {}
            for scale in self.scales:
                for level, part in partitions.items():
                    if level == 'hex_grid':
                        outputs.append(save_partition(part, self.path('features', 'hex_grid.json')))
                    m = build_feature_matrix(
                        trips, part, layers, covariates, cal, scale, self.cutoff.cutoff,
                        lags=self.config.get_config('features.lags'),
                        rolling_windows=self.config.get_config('features.rolling_windows'),
                        weekend_days=self.config.get_config('temporal.weekend_days'),
                        network_lag=self.config.get_config('features.network_lag'),
                        exact_max_nodes=self.config.get_config('features.connectivity_exact_max_nodes'),
                        seasonal_params=self.config.get_config('seasonal'), jobs=self.jobs)
                    csv = save_matrix(m, self.matrix_path(scale, level))
                    outputs += [csv, csv.with_name(csv.name + '.groups.json')]
                    graphs = aggregate_od(assign_trips(trips, part), scale, level)
                    network[_cell(scale, level)] = level_statistics(graphs)
                    rows[_cell(scale, level)] = m.n_rows
            outputs.append(self._report({'levels': network}, 'network.json'))
            return outputs, {'rows': rows}

        self._run_stage('features', inputs, body)
        return 0

    # ---------- train ----------

    def _grid(self) -> List[ModelSpec]:
        return [ModelSpec.from_dict(e) for e in self.config.get_config('models.grid')]

    def _matrices(self) -> Dict[Tuple[str, str], FeatureMatrix]:
        return {(s, lv): load_matrix(self.matrix_path(s, lv)) for s in self.scales for lv in self.levels}

    def cmd_train(self) -> int:
        paths = self.input_paths()
        inputs = self.matrix_paths() + ([paths['holidays']] if paths.get('holidays') else [])

        def body():
            table, results = run_benchmark(self._matrices(), self._grid(), self.cutoff,
                                           seed=derive_seed(self.seed, 'train'), jobs=self.jobs,
                                           cal=self._calendar(paths),
                                           seasonal_params=self.config.get_config('seasonal'),
                                           return_results=True)
            outputs: List[Path] = []
            entries = []
            scalers_written = set()
            for (scale, level, name), result in results.items():
                folder = self.path('models', _cell(scale, level))
                if (scale, level) not in scalers_written and result.scaler is not None:
                    outputs.append(FileOperations.write_json(result.scaler.to_dict(), folder / 'scaler.json'))
                    scalers_written.add((scale, level))
                entry = {'timeframe': scale, 'geography': level, **result.spec.to_dict(),
                         'path': None, 'error': result.error or ''}
                if result.model is not None:
                    model_path = save_model(result.model, folder / f'{_slug(name)}.json', name=name, seed=self.seed)
                    entry['path'] = str(model_path)
                    outputs.append(model_path)
                entries.append(entry)
            index = FileOperations.write_json({'config_hash': self.config_hash, 'models': entries},
                                              self.path('models', 'index.json'))
            failed = int((table['error'] != '').sum())
            return [index, *outputs], {'models': len(entries), 'failed': failed}

        self._run_stage('train', inputs, body)
        return 0

    # ---------- evaluate ----------

    def _model_index(self, stage: str) -> Dict[str, Any]:
        index = self.path('models', 'index.json')
        if not index.exists():
            raise StageDependencyError(stage, str(index))
        return FileOperations.read_json(index)

    def _prepared(self, scale: str, level: str):
        state = ScalerState.from_dict(FileOperations.read_json(self.path('models', _cell(scale, level), 'scaler.json')))
        return prepare_split(load_matrix(self.matrix_path(scale, level)), self.cutoff, state=state)

    def cmd_evaluate(self) -> int:
        index = self._model_index('evaluate')
        model_files = [e['path'] for e in index['models'] if e.get('path')]
        scalers = [self.path('models', _cell(s, lv), 'scaler.json') for s in self.scales for lv in self.levels]
        inputs = [self.path('models', 'index.json'), *self.matrix_paths(), *scalers, *model_files]

        def body():
            rows = []
            prepared = {}
            for entry in index['models']:
                key = (entry['timeframe'], entry['geography'])
                if key not in prepared:
                    prepared[key] = self._prepared(*key)
                train, test, _ = prepared[key]
                spec = ModelSpec.from_dict(entry)
                if entry.get('path'):
                    result = score_fitted(load_model(entry['path']), spec, test)
                else:
                    result = EvaluationResult(spec=spec, metrics=None, error=entry['error'])
                rows.append(result_row(train, 'all', result))
            table = pd.DataFrame(rows, columns=TABLE_COLUMNS)
            best = select_best(table)
            csv = FileOperations.write_csv(table, self.path('reports', 'benchmark.csv'))
            best_csv = FileOperations.write_csv(best, self.path('reports', 'best_models.csv'))
            report = self._report({'rows': table.to_dict(orient='records'),
                                   'best': best.to_dict(orient='records'),
                                   'improvement': improvement_summary(table)}, 'benchmark.json')
            return [csv, best_csv, report], {'rows': len(table)}

        self._run_stage('evaluate', inputs, body)
        return 0

    # ---------- ablate ----------

    def _benchmark(self, stage: str) -> pd.DataFrame:
        path = self.path('reports', 'benchmark.json')
        if not path.exists():
            raise StageDependencyError(stage, str(path))
        return pd.DataFrame(FileOperations.read_json(path)['rows'], columns=TABLE_COLUMNS)

    def cmd_ablate(self) -> int:
        table = self._benchmark('ablate')
        inputs = [self.path('reports', 'benchmark.json'), *self.matrix_paths()]
        grid = {spec.name: spec for spec in self._grid()}

        def body():
            frames = []
            for _, best in select_best(table).iterrows():
                spec = grid.get(best['regressor'])
                if spec is None:
                    continue
                m = load_matrix(self.matrix_path(best['timeframe'], best['geography']))
                frames.append(run_ablation(m, spec, self.cutoff, seed=derive_seed(self.seed, 'train'),
                                           jobs=self.jobs))
            ablation = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=TABLE_COLUMNS)
            csv = FileOperations.write_csv(ablation, self.path('reports', 'ablation.csv'))
            report = self._report({'rows': ablation.to_dict(orient='records'),
                                   'improvement': improvement_summary(table, ablation)}, 'ablation.json')
            return [csv, report], {'rows': len(ablation)}

        self._run_stage('ablate', inputs, body)
        return 0

    # ---------- explain ----------

    def _explained_entry(self, table: pd.DataFrame, index: Dict[str, Any], scale: str,
                         level: str) -> Optional[Dict[str, Any]]:
        """优先解释 MAE 最低的树模型，没有可用树模型时退回线性模型"""
        ok = table[(table['timeframe'] == scale) & (table['geography'] == level) & (table['error'] == '')]
        ok = ok.sort_values(['mae', 'rmse'], kind='mergesort')
        kinds = {(e['timeframe'], e['geography'], e['name']): e for e in index['models']}
        for allowed in (TREE_KINDS, ('ols', 'ridge', 'lasso', 'elastic_net')):
            for _, row in ok.iterrows():
                entry = kinds.get((scale, level, row['regressor']))
                if entry and entry['kind'] in allowed and entry.get('path'):
                    return entry
        return None

    def cmd_explain(self) -> int:
        table = self._benchmark('explain')
        index = self._model_index('explain')
        scalers = [self.path('models', _cell(s, lv), 'scaler.json') for s in self.scales for lv in self.levels]
        inputs = [self.path('reports', 'benchmark.json'), self.path('models', 'index.json'),
                  *self.matrix_paths(), *scalers,
                  *[e['path'] for e in index['models'] if e.get('path') and e['kind'] in TREE_KINDS + (
                      'ols', 'ridge', 'lasso', 'elastic_net')]]
        sample_size = int(self.config.get_config('explain.sample_size'))
        top_k = int(self.config.get_config('explain.top_k'))
        per_row = bool(self.config.get_config('explain.per_row', False))

        def body():
            outputs: List[Path] = []
            explained = {}
            for scale in self.scales:
                for level in self.levels:
                    entry = self._explained_entry(table, index, scale, level)
                    if entry is None:
                        logger.warning("没有可解释的模型，跳过", scale=scale, level=level)
                        continue
                    model = load_model(entry['path'])
                    if not isinstance(model, (TreeEnsemble, RegressionTree, LinearModel)):
                        raise ExplainError(f"模型不支持解释: {entry['name']}")
                    _, test, _ = self._prepared(scale, level)
                    rows = sample_rows(test.n_rows, sample_size, derive_seed(self.seed, 'explain', scale, level))
                    X = test.features()[rows]
                    report, phi = importance(model, X, test.groups, k=top_k, return_values=True)
                    report.extra.update({'timeframe': scale, 'geography': level, 'regressor': entry['name']})
                    cell = _cell(scale, level)
                    outputs.append(write_importance_json(report, self.path('reports', f'shap_{cell}.json'),
                                                         config_hash=self.config_hash))
                    outputs.append(write_top_k_csv(report, self.path('reports', f'shap_top_{cell}.csv')))
                    if per_row:
                        keys = test.frame.iloc[rows][KEY_COLUMNS].reset_index(drop=True)
                        keys['bucket_start'] = keys['bucket_start'].map(lambda ts: ts.isoformat())
                        outputs.append(write_shap_rows(phi, test.feature_columns, keys, report.base_value_mean,
                                                       self.path('reports', f'shap_rows_{cell}.jsonl')))
                    explained[cell] = entry['name']
            return outputs, {'explained': explained}

        self._run_stage('explain', inputs, body)
        return 0

    # ---------- 汇总 ----------

    def cmd_run_all(self) -> int:
        if not (self.config.get_config('paths') or {}).get('trips'):
            self.cmd_synth()
        self.cmd_ingest()
        self.cmd_features()
        self.cmd_train()
        self.cmd_evaluate()
        if self.config.get_config('evaluation.ablation', True):
            self.cmd_ablate()
        self.cmd_explain()
        logger.info("流水线完成", output_dir=str(self.output_dir))
        return 0

    def report_text(self) -> str:
        """已有报告的定宽文本：模型对比、最优模型、消融、SHAP Top-k"""
        sections = []
        if self.path('reports', 'benchmark.json').exists():
            table = self._benchmark('report')
            sections += ['== 模型对比 ==', format_table(table), '',
                         '== 最优模型 ==', format_table(select_best(table)), '']
        if self.path('reports', 'ablation.json').exists():
            rows = FileOperations.read_json(self.path('reports', 'ablation.json'))['rows']
            sections += ['== 特征组消融 ==', format_table(pd.DataFrame(rows, columns=TABLE_COLUMNS)), '']
        for top in sorted(self.path('reports').glob('shap_top_*.csv')) if self.path('reports').exists() else []:
            sections += [f'== {top.stem} ==', pd.read_csv(top).to_string(index=False), '']
        if not sections:
            raise StageDependencyError('report', str(self.path('reports')))
        return '\n'.join(sections)

    def status(self) -> Dict[str, str]:
        return {stage: self.state.get_status(stage).value for stage in STAGES}


if __name__ == "__main__":
    """
    命令行入口：运行单个阶段（完整命令行见仓库根目录 main.py）
    """
    import argparse

    parser = argparse.ArgumentParser(description='流水线阶段工具')
    parser.add_argument('stage', choices=list(STAGES) + ['run-all'])
    parser.add_argument('--config', help='配置文件路径')
    parser.add_argument('--output-dir', help='输出目录')
    parser.add_argument('--force', action='store_true')
    args = parser.parse_args()

    runner = PipelineRunner(ConfigManager(args.config), output_dir=args.output_dir, force=args.force)
    method = getattr(runner, 'cmd_' + args.stage.replace('-', '_'))
    raise SystemExit(method())
