"""
特征矩阵生成测试
"""

import math
from datetime import date

import numpy as np
import pandas as pd
import pytest

from src.feature_generator import (
    SPATIAL, TEMPORAL, NETWORK, FeatureMatrix, assemble_matrix, build_feature_matrix, calendar_features,
    covariate_features, fit_scaler, apply_scaler, inverse_scaler, impute, lag_features, select_row_keys,
    save_matrix, load_matrix,
)
from src.flow_network import TimeBucket, assign_trips, aggregate_od
from src.trip_ingestor import CovariateSeries, HolidayCalendar, trips_to_frame
from src.exceptions import AssemblyError, FeatureError

CUTOFF = pd.Timestamp('2021-02-15', tz='UTC')


def utc(text):
    return pd.Timestamp(text, tz='UTC')


def build(city, trips=None, covariates=None):
    return build_feature_matrix(
        trips if trips is not None else trips_to_frame(city.trips), city.partition, city.layers,
        covariates if covariates is not None else city.covariates, city.holidays, 'daily', CUTOFF)


@pytest.fixture(scope='module')
def matrix(tiny_city):
    return build(tiny_city)


class TestCalendar:
    def test_weekend_and_one_hot(self):
        friday = calendar_features(TimeBucket.of('2021-01-01', 'daily'), None)
        sunday = calendar_features(TimeBucket.of('2021-01-03', 'daily'), None)
        assert friday['is_weekend'] == 1.0 and sunday['is_weekend'] == 0.0
        assert friday['dow_4'] == 1.0 and friday['month_1'] == 1.0
        assert sum(v for k, v in friday.items() if k.startswith('dow_')) == 1.0
        assert 'hour_0' not in friday

    def test_custom_weekend(self):
        sunday = calendar_features(TimeBucket.of('2021-01-03', 'daily'), None, weekend_days=(5, 6))
        assert sunday['is_weekend'] == 1.0

    def test_holiday_flags(self):
        cal = HolidayCalendar({date(2021, 1, 20): 'festival'})
        assert calendar_features(TimeBucket.of('2021-01-20', 'daily'), cal)['is_holiday'] == 1.0
        assert calendar_features(TimeBucket.of('2021-01-21', 'daily'), cal)['is_holiday'] == 0.0
        assert calendar_features(TimeBucket.of('2021-01-01', 'monthly'), cal)['is_holiday'] == 1.0
        assert calendar_features(TimeBucket.of('2021-02-01', 'monthly'), cal)['is_holiday'] == 0.0

    def test_hourly_columns(self):
        features = calendar_features(TimeBucket.of('2021-01-01T13:20:00', 'hourly'), None)
        assert features['hour_13'] == 1.0
        assert sum(v for k, v in features.items() if k.startswith('hour_')) == 1.0


class TestLagFeatures:
    @pytest.fixture
    def history(self):
        return {utc(d): v for d, v in zip(['2021-01-01', '2021-01-02', '2021-01-03'], [2, 5, 9])}

    def test_lag_positions(self, history):
        features = lag_features(history, [], TimeBucket.of('2021-01-04', 'daily'), [1, 2, 7])
        assert features['previous_count'] == 9.0
        assert features['lag_2_count'] == 5.0
        assert math.isnan(features['lag_7_count'])
        assert features['rolling_mean_3'] == pytest.approx(16.0 / 3.0)
        assert features['rolling_mean_7'] == pytest.approx(16.0 / 3.0)

    def test_no_history(self):
        features = lag_features({}, [], TimeBucket.of('2021-01-04', 'daily'), [1])
        assert math.isnan(features['previous_count'])
        assert math.isnan(features['rolling_mean_3'])

    def test_invalid_lag(self, history):
        with pytest.raises(FeatureError):
            lag_features(history, [], TimeBucket.of('2021-01-04', 'daily'), [0, 1])


class TestCovariates:
    def test_lag_only_reads_only_the_past(self, mocker):
        keys = pd.date_range('2021-01-01', periods=10, freq='D', tz='UTC')
        cov = CovariateSeries('weather', 'daily', 'lag-only', {k: ('rain' if i % 2 else 'clear')
                                                               for i, k in enumerate(keys)},
                              vocabulary=['clear', 'rain'])
        spy = mocker.spy(cov, 'get')
        bucket = TimeBucket.of('2021-01-05', 'daily')
        features = covariate_features([cov], bucket)
        assert spy.call_count >= 1
        assert all(call.args[0] < bucket.start for call in spy.call_args_list)
        assert features == {'prev_weather_clear': 0.0, 'prev_weather_rain': 1.0}

    def test_finer_cadence_is_averaged(self):
        keys = pd.date_range('2021-01-01', periods=48, freq='h', tz='UTC')
        cov = CovariateSeries('temp', 'hourly', 'forecastable', {k: float(i) for i, k in enumerate(keys)})
        features = covariate_features([cov], TimeBucket.of('2021-01-02', 'daily'))
        assert features['temp'] == pytest.approx(np.mean(np.arange(24, 48)))

    def test_missing_is_nan(self):
        cov = CovariateSeries('temp', 'daily', 'forecastable', {})
        assert math.isnan(covariate_features([cov], TimeBucket.of('2021-01-02', 'daily'))['temp'])


class TestRowSelection:
    def test_pairs_enter_after_first_trip(self):
        index = pd.MultiIndex.from_tuples([
            ('A', 'B', utc('2021-01-01')), ('A', 'B', utc('2021-01-02')), ('A', 'B', utc('2021-01-03')),
            ('B', 'A', utc('2021-01-01')), ('B', 'A', utc('2021-01-02')), ('B', 'A', utc('2021-01-03')),
        ])
        target = pd.Series([0, 3, 0, 0, 0, 0], index=index)
        kept = select_row_keys(target)
        assert list(kept.index) == [('A', 'B', utc('2021-01-02')), ('A', 'B', utc('2021-01-03'))]
        assert list(kept) == [3, 0]


def small_blocks():
    keys = pd.MultiIndex.from_tuples([('A', 'B', utc('2021-01-01')), ('A', 'B', utc('2021-01-02')),
                                      ('B', 'A', utc('2021-01-02'))])
    target = pd.Series([1, 2, 4], index=keys)
    pairs = pd.MultiIndex.from_tuples([('A', 'B'), ('B', 'A')])
    spatial = pd.DataFrame({'centroid_distance_m': [10.0, 10.0]}, index=pairs)
    temporal = pd.DataFrame({'is_weekend': [1.0, 0.0, 0.0]}, index=keys)
    network = pd.DataFrame({'previous_count': [0.0, 1.0, 0.0]}, index=keys)
    return target, spatial, temporal, network


class TestAssemble:
    def test_column_groups_in_order(self):
        m = assemble_matrix(*small_blocks(), cutoff=utc('2021-01-02'))
        assert m.groups == {'centroid_distance_m': SPATIAL, 'is_weekend': TEMPORAL, 'previous_count': NETWORK}
        assert list(m.frame['split']) == ['train', 'test', 'test']
        assert list(m.target) == [1.0, 2.0, 4.0]

    def test_missing_key_names_the_key(self):
        target, spatial, temporal, network = small_blocks()
        with pytest.raises(AssemblyError) as info:
            assemble_matrix(target, spatial, temporal.iloc[:2], network)
        assert 'B' in info.value.details['key'] and '2021-01-02' in info.value.details['key']

    def test_duplicate_column_across_groups(self):
        target, spatial, temporal, network = small_blocks()
        with pytest.raises(AssemblyError):
            assemble_matrix(target, spatial, temporal.rename(columns={'is_weekend': 'previous_count'}), network)


def scaler_matrix():
    frame = pd.DataFrame({
        'orig': ['A', 'A', 'A', 'A'], 'dest': ['B'] * 4,
        'bucket_start': [utc('2021-01-01'), utc('2021-01-02'), utc('2021-01-03'), utc('2021-01-04')],
        'split': ['train', 'train', 'train', 'test'],
        'a': [2.0, 4.0, 6.0, 8.0], 'c': [5.0, 5.0, 5.0, 7.0], 'lag': [1.0, np.nan, 3.0, np.nan],
        'target': [0.0, 1.0, 2.0, 3.0],
    })
    return FeatureMatrix(frame=frame, groups={'a': SPATIAL, 'c': SPATIAL, 'lag': TEMPORAL})


class TestScaler:
    def test_min_max(self):
        m = scaler_matrix()
        scaled = apply_scaler(fit_scaler(m), m).frame
        assert list(scaled['a']) == [0.0, 0.5, 1.0, 1.5]
        assert list(scaled['c']) == [0.0, 0.0, 0.0, 0.0]

    def test_forward_fill_within_edge(self):
        m = scaler_matrix()
        filled = impute(fit_scaler(m), m).frame
        assert list(filled['lag']) == [1.0, 1.0, 3.0, 3.0]

    def test_inverse(self):
        m = scaler_matrix()
        state = fit_scaler(m)
        imputed = impute(state, m).frame
        restored = inverse_scaler(state, apply_scaler(state, m)).frame
        np.testing.assert_allclose(restored['a'], imputed['a'], rtol=0, atol=1e-12)
        np.testing.assert_allclose(restored['lag'], imputed['lag'], rtol=0, atol=1e-12)

    def test_state_round_trip(self):
        state = fit_scaler(scaler_matrix())
        assert type(state).from_dict(state.to_dict()) == state


class TestBuild:
    def test_no_leakage(self, tiny_city, matrix):
        frame = trips_to_frame(tiny_city.trips)
        past = frame[frame['start_ts'] < CUTOFF]
        future = frame[frame['start_ts'] >= CUTOFF]
        perturbed_trips = pd.concat([past, future.iloc[::3]], ignore_index=True)

        perturbed_covariates = []
        for cov in tiny_city.covariates:
            values = dict(cov.values)
            for key in values:
                if key >= CUTOFF:
                    values[key] = 'rain' if cov.is_categorical else values[key] * 3.0 + 17.0
            perturbed_covariates.append(CovariateSeries(cov.name, cov.cadence, cov.kind, values, cov.vocabulary))

        other = build(tiny_city, trips=perturbed_trips, covariates=perturbed_covariates)
        left = matrix.frame[matrix.train_mask()].reset_index(drop=True)
        right = other.frame[other.train_mask()].reset_index(drop=True)
        pd.testing.assert_frame_equal(left, right)
        assert not matrix.frame[~matrix.train_mask()].reset_index(drop=True).equals(
            other.frame[~other.train_mask()].reset_index(drop=True))

    def test_targets_match_graph_weights(self, tiny_city, matrix):
        graphs = aggregate_od(assign_trips(tiny_city.trips, tiny_city.partition), 'daily', 'quarters')
        by_start = {b.start: g for b, g in graphs.items()}
        for row in matrix.frame.itertuples(index=False):
            g = by_start.get(row.bucket_start)
            assert row.target == (g.weight(row.orig, row.dest) if g is not None else 0)
            prev = by_start.get(row.bucket_start - pd.Timedelta(days=1))
            assert row.previous_count == (prev.weight(row.orig, row.dest) if prev is not None else 0)

    def test_lag_columns_follow_positions(self, matrix):
        frame = matrix.frame.set_index(['orig', 'dest', 'bucket_start'])
        first = frame.index.get_level_values('bucket_start').min()
        for (o, d, start), row in frame.sample(n=100, random_state=0).iterrows():
            earlier = start - pd.Timedelta(days=7)
            if earlier < first:
                assert math.isnan(row['lag_7_count'])
            elif (o, d, earlier) in frame.index:
                assert row['lag_7_count'] == frame.at[(o, d, earlier), 'target']
            else:
                assert row['lag_7_count'] == 0.0

    def test_group_layout(self, matrix):
        groups = list(matrix.groups.values())
        assert groups == sorted(groups, key=[SPATIAL, TEMPORAL, NETWORK].index)
        assert 'centroid_distance_m' in matrix.columns_in([SPATIAL])
        assert {'weekly_component', 'precipitation', 'prev_weather_description_rain'} <= set(
            matrix.columns_in([TEMPORAL]))
        assert 'previous_count' in matrix.columns_in([NETWORK])
        assert matrix.frame['bucket_start'].is_monotonic_increasing

    def test_deterministic(self, tiny_city, matrix):
        pd.testing.assert_frame_equal(build(tiny_city).frame, matrix.frame)

    def test_save_load(self, matrix, tmp_path):
        loaded = load_matrix(save_matrix(matrix, tmp_path / 'm.csv'))
        assert loaded.groups == matrix.groups
        assert loaded.n_rows == matrix.n_rows
        np.testing.assert_allclose(loaded.features(), matrix.features(), rtol=1e-9, equal_nan=True)

    def test_empty_trips(self, tiny_city):
        with pytest.raises(FeatureError):
            build(tiny_city, trips=trips_to_frame([]))
