"""
模型评估测试
"""

import math

import numpy as np
import pandas as pd
import pytest

from src.model_evaluator import (CutoffSpec, ABLATION_SUBSETS, TABLE_COLUMNS, split, metrics, prepare_split,
                                 run_benchmark, run_ablation, select_best, improvement_summary,
                                 demand_profile, format_table)
from src.feature_generator import FeatureMatrix, SPATIAL, TEMPORAL, NETWORK, build_feature_matrix
from src.model_zoo import ModelSpec
from src.city_synthesizer import CityScenario, generate
from src.trip_ingestor import trips_to_frame
from src.exceptions import SplitError, AblationConfigError, ShapeMismatchError

def toy_matrix(days=40, seed=0, groups=(SPATIAL, TEMPORAL, NETWORK)):
    rng = np.random.default_rng(seed)
    starts = pd.date_range('2021-01-01', periods=days, freq='D', tz='UTC')
    rows = []
    for start in starts:
        for o, d, dist in (('A', 'B', 100.0), ('B', 'A', 100.0), ('A', 'C', 300.0)):
            lag = float(rng.integers(0, 10))
            prev = float(rng.integers(0, 5))
            rows.append({'orig': o, 'dest': d, 'bucket_start': start, 'split': 'train',
                         'dist': dist, 'lag': lag, 'prev': prev,
                         'target': float(max(0, round(2 * lag + prev - dist / 100 + rng.normal())))})
    frame = pd.DataFrame(rows)
    all_groups = {'dist': SPATIAL, 'lag': TEMPORAL, 'prev': NETWORK}
    kept = {c: g for c, g in all_groups.items() if g in groups}
    frame = frame[['orig', 'dest', 'bucket_start', 'split'] + list(kept) + ['target']]
    return FeatureMatrix(frame=frame, groups=kept, scale='daily', level='toy')

GRID = [ModelSpec('ols', 'ols'), ModelSpec('tree', 'tree', {'max_depth': 3}),
        ModelSpec('seasonal', 'seasonal')]

class TestMetrics:
    def test_identities(self):
        report = metrics([1, 2, 3], [2, 3, 4])
        assert (report.mae, report.mse, report.rmse) == (1.0, 1.0, 1.0)
        assert report.mape == pytest.approx((1 + 1 / 2 + 1 / 3) / 3 * 100)

    def test_zero_targets_excluded_from_mape(self):
        report = metrics([0, 2, 4], [1, 3, 2])
        assert report.n_mape_excluded == 1
        assert report.mape == pytest.approx((0.5 + 0.5) / 2 * 100)
        assert report.rmse == pytest.approx(math.sqrt(report.mse))

    def test_all_zero_targets(self):
        report = metrics([0, 0], [1, 1])
        assert math.isnan(report.mape) and report.mae == 1.0

    @pytest.mark.parametrize('y_true,y_pred', [([1, 2], [1]), ([], [])])
    def test_shape(self, y_true, y_pred):
        with pytest.raises(ShapeMismatchError):
            metrics(y_true, y_pred)

class TestSplit:
    def test_counts(self):
        m = toy_matrix()
        train, test = split(m, '2021-01-31')
        assert (train.n_rows, test.n_rows) == (90, 30)
        assert train.frame['bucket_start'].max() < pd.Timestamp('2021-01-31', tz='UTC')
        assert (m.frame['split'] == 'train').sum() == 90

    def test_unaligned_cutoff_floors(self):
        train, test = split(toy_matrix(), '2021-01-31T15:00:00+00:00')
        assert train.n_rows == 90
        assert CutoffSpec.parse('2021-01-31T15:00:00').aligned('monthly') == pd.Timestamp('2021-01-01', tz='UTC')

    @pytest.mark.parametrize('cutoff,side', [('2020-06-01', 'train'), ('2022-01-01', 'test')])
    def test_empty_side(self, cutoff, side):
        with pytest.raises(SplitError) as info:
            split(toy_matrix(), cutoff)
        assert info.value.empty_side == side

    def test_scaler_fitted_on_train_only(self):
        m = toy_matrix()
        m.frame.loc[m.frame['bucket_start'] >= pd.Timestamp('2021-01-31', tz='UTC'), 'lag'] = 1000.0
        train, test, state = prepare_split(m, '2021-01-31')
        assert state.maximum['lag'] <= 9.0
        assert train.frame['lag'].max() <= 1.0
        assert test.frame['lag'].min() > 1.0

class TestBenchmark:
    def test_rows_and_errors(self):
        grid = GRID + [ModelSpec('knn_too_big', 'knn', {'k': 10_000})]
        table = run_benchmark({('daily', 'toy'): toy_matrix()}, grid, '2021-01-31', seed=1)
        assert list(table.columns) == TABLE_COLUMNS
        assert list(table['regressor']) == ['ols', 'tree', 'seasonal', 'knn_too_big']
        failed = table.set_index('regressor').loc['knn_too_big']
        assert failed['error'].startswith('MODEL_PARAMETER_ERROR') and math.isnan(failed['mae'])
        assert (table.loc[table['regressor'] != 'knn_too_big', 'error'] == '').all()
        assert table.loc[table['regressor'] == 'seasonal', 'regressortype'].item() == 'Time series'

    def test_cell_order_and_parallel(self):
        matrices = {('monthly', 'toy'): toy_matrix(days=90, seed=3), ('daily', 'toy'): toy_matrix(seed=2)}
        matrices[('monthly', 'toy')].scale = 'monthly'
        grid = GRID[:2]
        serial = run_benchmark(matrices, grid, '2021-02-01', seed=5)
        parallel = run_benchmark(matrices, grid, '2021-02-01', seed=5, jobs=3)
        assert list(serial['timeframe']) == ['daily', 'daily', 'monthly', 'monthly']
        pd.testing.assert_frame_equal(serial, parallel)

class TestSelection:
    def table(self):
        rows = [
            ('daily', 'q', 'ols', 'Classical ML', 2.0, 3.0, ''),
            ('daily', 'q', 'tree', 'Classical ML', 1.0, 2.5, ''),
            ('daily', 'q', 'gbm', 'Classical ML', 1.0, 2.0, ''),
            ('daily', 'q', 'seasonal', 'Time series', 0.5, 0.5, ''),
            ('daily', 'q', 'knn', 'Classical ML', np.nan, np.nan, 'MODEL_PARAMETER_ERROR: k'),
            ('hourly', 'q', 'ols', 'Classical ML', 4.0, 5.0, ''),
        ]
        frame = pd.DataFrame(rows, columns=['timeframe', 'geography', 'regressor', 'regressortype',
                                            'mae', 'rmse', 'error'])
        frame['featurestypes'] = 'all'
        return frame

    def test_best_by_mae_then_rmse(self):
        best = select_best(self.table()).set_index('timeframe')['regressor']
        assert best.to_dict() == {'daily': 'gbm', 'hourly': 'ols'}

    def test_baseline_can_be_included(self):
        best = select_best(self.table(), include_baseline=True).set_index('timeframe')['regressor']
        assert best['daily'] == 'seasonal'

    def test_improvement_summary(self):
        table = self.table()
        table = table[table['regressor'] != 'seasonal']
        daily = improvement_summary(table)[0]
        assert daily['best'] == 'gbm' and daily['runner_up'] == 'tree'
        assert daily['mae_vs_runner_up_pct'] == pytest.approx(0.0)
        assert daily['rmse_vs_runner_up_pct'] == pytest.approx(20.0)
        assert 'mae_vs_baseline_pct' not in daily

    def test_summary_ranks_without_baseline(self):
        daily = improvement_summary(self.table())[0]
        assert daily['best'] == 'gbm'
        assert daily['mae_vs_baseline_pct'] == pytest.approx(-100.0)

class TestAblation:
    def test_seven_subsets(self):
        table = run_ablation(toy_matrix(), ModelSpec('tree', 'tree', {'max_depth': 3}), '2021-01-31')
        assert list(table['featurestypes']) == [label for label, _ in ABLATION_SUBSETS]
        assert len(table) == 7
        assert (table['error'] == '').all()
        assert table['n_rows'].eq(30).all()

    def test_each_subset_reads_only_its_columns(self, mocker):
        import src.model_evaluator as model_evaluator
        fit_spy = mocker.spy(model_evaluator, 'fit_model')
        eval_spy = mocker.spy(model_evaluator, 'evaluate_model')
        run_ablation(toy_matrix(), ModelSpec('ols', 'ols'), '2021-01-31')
        by_group = {SPATIAL: 'dist', TEMPORAL: 'lag', NETWORK: 'prev'}
        seen = [sorted(c.args[3]) for c in eval_spy.call_args_list]
        assert seen == [sorted(by_group[g] for g in groups) for _, groups in ABLATION_SUBSETS]
        assert [np.asarray(c.args[1]).shape[1] for c in fit_spy.call_args_list] == [3, 1, 1, 1, 2, 2, 2]

    def test_missing_group(self):
        with pytest.raises(AblationConfigError) as info:
            run_ablation(toy_matrix(groups=(SPATIAL, TEMPORAL)), ModelSpec('ols', 'ols'), '2021-01-31')
        assert info.value.group == NETWORK

    def test_parallel_subsets_match_serial(self):
        spec = ModelSpec('tree', 'tree', {'max_depth': 3})
        serial = run_ablation(toy_matrix(seed=4), spec, '2021-01-31', seed=2)
        parallel = run_ablation(toy_matrix(seed=4), spec, '2021-01-31', seed=2, jobs=3)
        pd.testing.assert_frame_equal(serial, parallel)

    def test_summary_reports_subset_change(self):
        m = toy_matrix()
        spec = ModelSpec('ols', 'ols')
        table = run_benchmark({('daily', 'toy'): m}, [spec], '2021-01-31')
        ablation = run_ablation(m, spec, '2021-01-31')
        changes = improvement_summary(table, ablation)[0]['ablation_mae_change_pct']
        assert set(changes) == {label for label, _ in ABLATION_SUBSETS if label != 'all'}

    def test_subset_change_relative_to_all(self):
        table = TestSelection().table()
        ablation = pd.DataFrame({'timeframe': 'daily', 'geography': 'q', 'featurestypes': ['all', 'spatial'],
                                 'mae': [2.0, 3.0]})
        daily = improvement_summary(table, ablation)[0]
        assert daily['ablation_mae_change_pct'] == {'spatial': pytest.approx(50.0)}


def test_demand_profile():
    trips = pd.DataFrame({'start_ts': pd.to_datetime(['2021-01-04T08:10:00Z', '2021-01-04T08:50:00Z',
                                                      '2021-03-06T17:00:00Z'], utc=True)})
    profile = demand_profile(trips)
    assert profile['hour_of_day'][8] == 2 and profile['hour_of_day'][17] == 1
    assert profile['day_of_week'][0] == 2 and profile['day_of_week'][5] == 1
    assert profile['month'][3] == 1 and sum(profile['month'].values()) == 3


def test_format_table():
    table = run_benchmark({('daily', 'toy'): toy_matrix()}, GRID[:1], '2021-01-31')
    text = format_table(table)
    assert 'regressor' in text and 'ols' in text and 'error' not in text.splitlines()[0]


@pytest.mark.slow
def test_gbm_beats_seasonal_baseline_on_synthetic_city():
    city = generate(CityScenario(seed=42, n_zones=4, zone_side_m=500.0, start='2021-01-01', days=150,
                                 base_volume=3.0))
    cutoff = pd.Timestamp('2021-04-15', tz='UTC')
    m = build_feature_matrix(trips_to_frame(city.trips), city.partition, city.layers, city.covariates,
                             city.holidays, 'daily', cutoff)
    grid = [ModelSpec('gbm', 'gbm', {'n_estimators': 100, 'learning_rate': 0.1, 'max_depth': 3,
                                     'min_samples_leaf': 5}),
            ModelSpec('seasonal', 'seasonal')]
    table = run_benchmark({('daily', 'quarters'): m}, grid, cutoff, seed=1, cal=city.holidays)
    table = table.set_index('regressor')
    assert (table['error'] == '').all()
    assert table.loc['gbm', 'mae'] < table.loc['seasonal', 'mae']
