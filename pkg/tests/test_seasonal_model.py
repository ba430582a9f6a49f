"""
季节分解模型测试
"""

import logging
from datetime import date

import numpy as np
import pandas as pd
import pytest

from src.seasonal_model import SeasonalModel, fit_seasonal, seasonal_features, seasonal_frame
from src.flow_network import TimeBucket
from src.trip_ingestor import HolidayCalendar
from src.exceptions import SeasonalFitError


def daily_series(values, start='2021-01-04'):
    index = pd.date_range(start, periods=len(values), freq='D', tz='UTC')
    return pd.Series(np.asarray(values, dtype=float), index=index)


def epoch_days(index):
    return ((index - pd.Timestamp('1970-01-01', tz='UTC')) / pd.Timedelta(days=1)).to_numpy()


def cutoff_after(series, scale='daily'):
    return series.index[-1] + pd.Timedelta(days=1 if scale == 'daily' else 0, hours=1 if scale == 'hourly' else 0)


class TestConstantSeries:
    @pytest.fixture(scope='class')
    def model(self):
        series = daily_series(np.full(800, 100.0))
        return fit_seasonal(series, None, cutoff_after(series))

    def test_only_intercept(self, model):
        assert model.coefficients['trend:intercept'] == pytest.approx(100.0, abs=1e-6)
        for name, value in model.coefficients.items():
            if name != 'trend:intercept':
                assert abs(value) < 1e-6, name

    def test_future_is_flat(self, model):
        future = [TimeBucket('daily', model.fit_end + pd.Timedelta(days=k)) for k in range(30)]
        frame = seasonal_frame(model, future)
        assert np.abs(np.diff(frame['yhat'].to_numpy())).max() < 1e-3
        assert frame['yhat'].iloc[0] == pytest.approx(100.0, abs=1e-3)


class TestWeeklySinusoid:
    @pytest.fixture(scope='class')
    def fitted(self):
        index = pd.date_range('2021-01-04', periods=120, freq='D', tz='UTC')
        planted = 10.0 * np.sin(2 * np.pi * epoch_days(index) / 7.0)
        series = pd.Series(50.0 + planted, index=index)
        return series, fit_seasonal(series, None, cutoff_after(series))

    def test_reconstruction(self, fitted):
        series, model = fitted
        yhat = model.components(series.index)['yhat'].to_numpy()
        y = series.to_numpy()
        r2 = 1.0 - np.sum((y - yhat) ** 2) / np.sum((y - y.mean()) ** 2)
        assert r2 >= 0.99
        assert model.dropped_terms == ['yearly']

    def test_one_period_ahead(self, fitted):
        series, model = fitted
        ahead = pd.date_range(model.fit_end, periods=7, freq='D')
        weekly = model.components(ahead)['weekly_component'].to_numpy()
        planted = 10.0 * np.sin(2 * np.pi * epoch_days(ahead) / 7.0)
        assert np.abs(weekly - planted).max() <= 0.5

    def test_in_window_value_matches_fitted(self, fitted):
        series, model = fitted
        start = series.index[17]
        features = seasonal_features(model, TimeBucket('daily', start))
        assert features['yhat'] == pytest.approx(model.components(series.index)['yhat'].iloc[17])
        assert features['yhat'] == pytest.approx(sum(features[c] for c in (
            'trend_component', 'weekly_component', 'yearly_component', 'daily_component', 'holiday_component')))


def test_step_trend_changepoint():
    days = np.arange(120, dtype=float)
    series = daily_series(np.where(days < 60, 20.0, 20.0 + (days - 60)))
    model = fit_seasonal(series, None, cutoff_after(series), weekly_order=0)
    deltas = np.array([model.coefficients[f'trend:delta_{j}'] for j in range(10)])
    location = model.changepoints[int(np.argmax(np.abs(deltas)))] * model.span_days
    spacing = model.span_days / 11.0
    assert abs(location - 60.0) <= 2 * spacing


def test_holiday_effect():
    values = np.full(120, 100.0)
    cal = HolidayCalendar({date(2021, 1, 20): 'festival', date(2021, 2, 17): 'festival',
                           date(2021, 3, 10): 'festival', date(2022, 1, 1): 'unseen'})
    series = daily_series(values)
    for d in cal.dates()[:3]:
        series.loc[pd.Timestamp(d.isoformat(), tz='UTC')] += 50.0
    model = fit_seasonal(series, cal, cutoff_after(series))
    assert model.coefficients['holiday:festival'] == pytest.approx(50.0, abs=1.0)
    assert 'holiday:unseen' not in model.coefficients
    bucket = TimeBucket('daily', pd.Timestamp('2021-02-17', tz='UTC'))
    assert seasonal_features(model, bucket)['holiday_component'] == pytest.approx(50.0, abs=1.0)


class TestDroppedTerms:
    def test_short_history(self, caplog):
        series = daily_series(np.arange(10.0))
        with caplog.at_level(logging.WARNING):
            model = fit_seasonal(series, None, cutoff_after(series))
        assert set(model.dropped_terms) == {'weekly', 'yearly'}
        assert model.orders['weekly'] == 0
        assert '季节项已剔除' in caplog.text

    def test_daily_term_only_for_hourly(self):
        index = pd.date_range('2021-01-04', periods=24 * 4, freq='h', tz='UTC')
        series = pd.Series(5.0 + np.sin(2 * np.pi * np.arange(len(index)) / 24.0), index=index)
        model = fit_seasonal(series, None, index[-1] + pd.Timedelta(hours=1), scale='hourly')
        assert model.orders['daily'] == 4
        assert 'daily' not in model.dropped_terms

    def test_round_trip(self):
        series = daily_series(np.linspace(10.0, 40.0, 60))
        model = fit_seasonal(series, None, cutoff_after(series))
        back = SeasonalModel.from_dict(model.to_dict())
        pd.testing.assert_frame_equal(back.components(series.index), model.components(series.index))


class TestErrors:
    def test_empty(self):
        with pytest.raises(SeasonalFitError):
            fit_seasonal(pd.Series([], dtype=float, index=pd.DatetimeIndex([], tz='UTC')), None,
                         pd.Timestamp('2021-01-01', tz='UTC'))

    def test_data_after_cutoff(self):
        series = daily_series(np.ones(20))
        with pytest.raises(SeasonalFitError):
            fit_seasonal(series, None, series.index[10])
