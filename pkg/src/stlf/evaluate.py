"""The evaluation protocol: test-week selection, rolling multi-step forecasts
without re-estimation, per-horizon MAPE and training-time accounting.

Within a test window, parameters fitted before the window stay frozen; only
model state advances as each actual observation arrives. Origins step hourly
through the window and every origin emits forecasts for leads 1..24
(truncated at the window end).
"""

from __future__ import annotations

import csv
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone

import numpy as np

from stlf import arima, dshw, narxrf
from stlf.baseline import AveragingModel, avg_forecast, avg_residuals
from stlf.errors import SpanTooShortError, StateSyncError
from stlf.series import SECONDS_PER_HOUR, WEEK_HOURS, HourlySeries, exp_smooth

HORIZON = 24
TEST_WEEKS = (16, 28, 40, 52, 53)
MODEL_NAMES = ("avg", "avgarima", "origdshw", "moddshw", "narxrf")
#: A month of context is 30 days; the 3-month training slices are 2160 hours.
MONTH_HOURS = 720
#: MAPE pairs with |actual| below this floor (kWh) are excluded and counted.
MAPE_EPS = 1e-3


@dataclass(frozen=True)
class TestWindow:
    week_index: int
    start_index: int  # series index of the first target hour
    n_hours: int

    @property
    def indices(self) -> range:
        return range(self.start_index, self.start_index + self.n_hours)


@dataclass(frozen=True)
class ForecastMatrix:
    origins: np.ndarray  # origin series indices
    values: np.ndarray  # (n_origins, 24), NaN where the window truncated a lead
    actuals: np.ndarray  # aligned true loads, same shape


@dataclass
class EvalReport:
    series_id: str
    dataset: str
    model: str
    week_index: int
    mape: np.ndarray  # 24 percentages, NaN where undefined
    excluded: np.ndarray  # 24 excluded-pair counts
    train_seconds: float
    forecast_seconds: float
    error: str | None = None


def _hour_index(series: HourlySeries, day: date) -> int:
    ts = datetime(day.year, day.month, day.day, tzinfo=timezone.utc)
    return int(ts.timestamp()) // SECONDS_PER_HOUR - series.start_hour


def make_test_windows(series: HourlySeries) -> list[TestWindow]:
    """Windows for weeks 16, 28, 40, 52 and 53 of the final evaluable year.

    The year is the most recent one whose ISO weeks 16 through 52 are fully
    covered by the series. "Week 53" collects the days of that calendar year
    after ISO week 52 ends (one to four days, or none), clipped to the series.
    """
    n = len(series)
    last_year = series.timestamp(n - 1).year
    chosen = None
    for year in range(last_year, last_year - 3, -1):
        first = _hour_index(series, date.fromisocalendar(year, 16, 1))
        last = _hour_index(series, date.fromisocalendar(year, 52, 7) + timedelta(days=1))
        if first >= 0 and last <= n:
            chosen = year
            break
    if chosen is None:
        raise SpanTooShortError(
            "series does not fully cover ISO weeks 16..52 of any recent year"
        )

    windows = []
    for week in (16, 28, 40, 52):
        start = _hour_index(series, date.fromisocalendar(chosen, week, 1))
        windows.append(TestWindow(week, start, WEEK_HOURS))

    tail_day = date.fromisocalendar(chosen, 52, 7) + timedelta(days=1)
    tail_hours = 0
    while tail_day.year == chosen:
        tail_hours += 24
        tail_day += timedelta(days=1)
    if tail_hours:
        start = _hour_index(series, date.fromisocalendar(chosen, 52, 7) + timedelta(days=1))
        tail_hours = min(tail_hours, n - start)
        if tail_hours > 0:
            windows.append(TestWindow(53, start, tail_hours))
    return windows


# ---------------------------------------------------------------------------
# Forecaster adapters: shared predict/advance surface over the model modules
# ---------------------------------------------------------------------------


class AvgForecaster:
    name = "avg"

    def __init__(self, series: HourlySeries, origin: int):
        self.model = AveragingModel(series)
        self.origin = origin

    def predict(self, horizons: int) -> np.ndarray:
        return np.array([avg_forecast(self.model, self.origin, k) for k in range(1, horizons + 1)])

    def advance(self, y: float) -> None:
        self.origin += 1


class AvgArimaForecaster:
    name = "avgarima"

    def __init__(self, series: HourlySeries, origin: int, train_hours: int):
        self.model = AveragingModel(series)
        window = range(origin + 1 - train_hours, origin + 1)
        residuals = avg_residuals(self.model, window)
        self.fit = arima.with_clock(arima.stepwise_select(residuals), origin)
        self.origin = origin

    def predict(self, horizons: int) -> np.ndarray:
        return np.array(
            [arima.avg_arima_forecast(self.model, self.fit, self.origin, k) for k in range(1, horizons + 1)]
        )

    def advance(self, y: float) -> None:
        residual = y - avg_forecast(self.model, self.origin, 1)
        self.fit = arima.arma_update(self.fit, residual)
        self.origin += 1


class DshwForecaster:
    def __init__(self, series: HourlySeries, origin: int, train_hours: int, variant: str):
        self.name = "origdshw" if variant == "original" else "moddshw"
        train = slice_series(series, origin + 1 - train_hours, origin + 1)
        fitted = dshw.fit(train, variant)
        self.params = fitted.params
        self.state = dshw.reclock(fitted.state, origin)
        self.converged = fitted.converged
        self.origin = origin

    def predict(self, horizons: int) -> np.ndarray:
        if self.state.clock != self.origin:
            raise StateSyncError(f"state clock {self.state.clock} != origin {self.origin}")
        return np.array([dshw.forecast(self.state, self.params, k) for k in range(1, horizons + 1)])

    def advance(self, y: float) -> None:
        self.state = dshw.update(self.state, self.params, y)
        self.origin += 1


class NarxForecaster:
    name = "narxrf"

    def __init__(self, series: HourlySeries, origin: int, seed: int, n_trees: int, jobs: int):
        self.series = series
        self.model = narxrf.fit_narx(slice_series(series, 0, origin + 1), seed, n_trees=n_trees, jobs=jobs)
        self._smoothed = exp_smooth(series.temp, narxrf.TEMP_SMOOTH)
        self.origin = origin

    def predict(self, horizons: int) -> np.ndarray:
        out = np.empty(horizons)
        for k in range(1, horizons + 1):
            row = narxrf._feature_matrix(
                self.series, self._smoothed, np.array([self.origin]), k
            )[0]
            out[k - 1] = narxrf.predict_forest(self.model.forests[k], row)
        return out

    def advance(self, y: float) -> None:
        self.origin += 1  # stateless: the extended history is read in place


def slice_series(series: HourlySeries, start: int, stop: int) -> HourlySeries:
    if start < 0 or stop > len(series) or start >= stop:
        raise ValueError(f"bad slice [{start}, {stop}) of a {len(series)}-hour series")
    return HourlySeries(
        series.start_hour + start,
        series.values[start:stop].copy(),
        None if series.temp is None else series.temp[start:stop].copy(),
        dict(series.meta),
    )


@dataclass(frozen=True)
class BenchmarkConfig:
    seed: int = 0
    train_months: int = 3  # history for the DSHW variants and the residual ARMA
    n_trees: int = narxrf.N_TREES
    jobs: int = 1


def fit_model(name: str, series: HourlySeries, window_start: int, seed: int,
              config: BenchmarkConfig = BenchmarkConfig()):
    """Fit one model on data strictly before ``window_start``.

    Training history follows each model's own policy: the averaging layer
    just reads weekly lags, the DSHW variants and the residual ARMA see the
    most recent ``train_months``, and NARX-RF sees everything.
    """
    origin = window_start - 1
    train_hours = config.train_months * MONTH_HOURS
    if name == "avg":
        return AvgForecaster(series, origin)
    if name == "avgarima":
        return AvgArimaForecaster(series, origin, train_hours)
    if name == "origdshw":
        return DshwForecaster(series, origin, train_hours, "original")
    if name == "moddshw":
        return DshwForecaster(series, origin, train_hours, "modified")
    if name == "narxrf":
        return NarxForecaster(series, origin, seed, config.n_trees, config.jobs)
    raise ValueError(f"unknown model {name!r}; expected one of {MODEL_NAMES}")


def rolling_forecast(forecaster, series: HourlySeries, window: TestWindow) -> ForecastMatrix:
    """Roll hourly origins through the window without re-estimating anything.

    Each origin emits leads 1..24 (clipped at the window end), then the next
    actual is fed to the model's state-update hook.
    """
    start = window.start_index
    if forecaster.origin != start - 1:
        raise StateSyncError(
            f"model origin {forecaster.origin} is not aligned to window start {start}"
        )
    last_target = start + window.n_hours - 1
    origins = np.arange(start - 1, last_target)
    values = np.full((origins.shape[0], HORIZON), np.nan)
    actuals = np.full((origins.shape[0], HORIZON), np.nan)
    y = series.values
    for i, origin in enumerate(origins):
        kmax = min(HORIZON, last_target - origin)
        values[i, :kmax] = forecaster.predict(kmax)
        actuals[i, :kmax] = y[origin + 1 : origin + 1 + kmax]
        forecaster.advance(float(y[origin + 1]))
    return ForecastMatrix(origins=origins, values=values, actuals=actuals)


def mape_per_horizon(fm: ForecastMatrix, eps: float = MAPE_EPS):
    """Per-lead MAPE in percent plus the count of excluded near-zero actuals.

    A lead with no valid pairs is NaN (undefined), never zero.
    """
    if fm.origins.shape[0] == 0:
        raise ValueError("empty forecast matrix")
    mape = np.full(HORIZON, np.nan)
    excluded = np.zeros(HORIZON, dtype=np.int64)
    for k in range(HORIZON):
        actual = fm.actuals[:, k]
        pred = fm.values[:, k]
        present = ~np.isnan(actual)
        usable = present & (np.abs(actual) >= eps)
        excluded[k] = int(np.count_nonzero(present & ~usable))
        if usable.any():
            mape[k] = 100.0 * float(
                np.mean(np.abs(actual[usable] - pred[usable]) / np.abs(actual[usable]))
            )
    return mape, excluded


@dataclass(frozen=True)
class SeriesEntry:
    series_id: str
    dataset: str
    series: HourlySeries


def _run_task(entry: SeriesEntry, window: TestWindow, model: str,
              config: BenchmarkConfig) -> EvalReport:
    seed = _task_seed(config.seed, entry.series_id, window.week_index, model)
    try:
        t0 = time.perf_counter()
        forecaster = fit_model(model, entry.series, window.start_index, seed, config)
        t1 = time.perf_counter()
        fm = rolling_forecast(forecaster, entry.series, window)
        t2 = time.perf_counter()
        mape, excluded = mape_per_horizon(fm)
        return EvalReport(
            entry.series_id, entry.dataset, model, window.week_index,
            mape, excluded, t1 - t0, t2 - t1,
        )
    except Exception as exc:  # a failing task must not abort the batch
        return EvalReport(
            entry.series_id, entry.dataset, model, window.week_index,
            np.full(HORIZON, np.nan), np.zeros(HORIZON, dtype=np.int64),
            0.0, 0.0, error=f"{type(exc).__name__}: {exc}",
        )


def _task_seed(master: int, series_id: str, week: int, model: str) -> int:
    from stlf._kernels import derive_seed

    sid = sum((i + 1) * b for i, b in enumerate(series_id.encode()))
    mid = sum((i + 1) * b for i, b in enumerate(model.encode()))
    return derive_seed(master, sid, week, mid)


def benchmark(entries: list[SeriesEntry], models, config: BenchmarkConfig = BenchmarkConfig()) -> list[EvalReport]:
    """Every (series, window, model) combination, fitted fresh per window.

    Tasks are independent; per-task seeds derive from the master seed and the
    task identity, so worker count never changes the results. Failures are
    isolated into their report's ``error`` field.
    """
    tasks = []
    for entry in entries:
        for window in make_test_windows(entry.series):
            for model in models:
                tasks.append((entry, window, model))
    if config.jobs > 1:
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            reports = list(pool.map(lambda t: _run_task(*t, config), tasks))
    else:
        reports = [_run_task(*t, config) for t in tasks]
    reports.sort(key=lambda r: (r.dataset, r.series_id, r.week_index, r.model))
    return reports


def median_mape(reports: list[EvalReport]):
    """Median MAPE across series, per (dataset, model, horizon); windows pool
    their origins through per-window MAPEs first."""
    groups: dict[tuple[str, str], list[np.ndarray]] = {}
    for r in reports:
        if r.error:
            continue
        groups.setdefault((r.dataset, r.model), []).append(r.mape)
    out = {}
    for key, rows in groups.items():
        stacked = np.vstack(rows)
        with np.errstate(all="ignore"):
            out[key] = np.nanmedian(stacked, axis=0)
    return out


def write_report_csv(reports: list[EvalReport], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([
            "series_id", "dataset", "model", "week", "horizon", "mape",
            "excluded_pairs", "train_seconds", "forecast_seconds",
        ])
        for r in reports:
            for k in range(HORIZON):
                mape = r.mape[k]
                writer.writerow([
                    r.series_id, r.dataset, r.model, r.week_index, k + 1,
                    "" if np.isnan(mape) else f"{mape:.6f}",
                    int(r.excluded[k]), f"{r.train_seconds:.3f}", f"{r.forecast_seconds:.3f}",
                ])
