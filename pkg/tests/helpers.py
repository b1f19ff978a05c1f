"""Shared synthetic-series builders for the test suite."""

from datetime import datetime, timezone

import numpy as np

from stlf.series import HourlySeries, hour_of_timestamp

#: Monday 2012-01-02 00:00 UTC; aligning starts to a Monday midnight keeps
#: hour-of-week arithmetic easy to reason about in tests.
MONDAY_HOUR = hour_of_timestamp(datetime(2012, 1, 2, tzinfo=timezone.utc))


def day_week_profiles(seed: int = 0):
    """A mean-1 daily profile and a mean-1 weekly profile that is constant
    within each day (so the multiplicative structure is exactly separable)."""
    rng = np.random.default_rng(seed)
    day = 1.0 + 0.4 * np.sin(2 * np.pi * np.arange(24) / 24) + 0.05 * rng.standard_normal(24)
    day = np.abs(day)
    day /= day.mean()
    factors = np.abs(1.0 + 0.1 * rng.standard_normal(7))
    factors /= factors.mean()
    week = np.repeat(factors, 24)
    return day, week


def multiplicative_series(n_hours: int, level: float = 100.0, seed: int = 0,
                          noise_sd: float = 0.0, start_hour: int = MONDAY_HOUR,
                          with_temp: bool = False) -> HourlySeries:
    day, week = day_week_profiles(seed)
    t = np.arange(n_hours)
    y = level * day[t % 24] * week[t % 168]
    if noise_sd > 0.0:
        rng = np.random.default_rng(seed + 1)
        y = np.maximum(y + noise_sd * rng.standard_normal(n_hours), 1e-3)
    temp = None
    if with_temp:
        temp = 10.0 + 8.0 * np.sin(2 * np.pi * t / 8766.0)
    return HourlySeries(start_hour, y, temp)


def true_value(series_start: int, index: int, level: float, day, week) -> float:
    t = index  # profiles are indexed relative to the series start
    return level * day[t % 24] * week[t % 168]


def two_year_series(seed: int = 123, noise_sd: float = 2.0) -> HourlySeries:
    """Mid-2011 through the first days of 2014: enough history for every
    model plus a complete final year for window selection."""
    start = hour_of_timestamp(datetime(2011, 6, 1, tzinfo=timezone.utc))
    end = hour_of_timestamp(datetime(2014, 1, 3, tzinfo=timezone.utc))
    n = end - start
    t = np.arange(n)
    rng = np.random.default_rng(seed)
    y = (100.0 + 40.0 * np.sin(2 * np.pi * t / 24) + 15.0 * np.sin(2 * np.pi * t / 168)
         + 5.0 * np.sin(2 * np.pi * t / 8766))
    if noise_sd > 0.0:
        y = y + noise_sd * rng.standard_normal(n)
    y = np.maximum(y, 1e-3)
    temp = 10.0 + 8.0 * np.sin(2 * np.pi * t / 8766) + 0.5 * rng.standard_normal(n)
    return HourlySeries(start, y, temp)
