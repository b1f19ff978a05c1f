"""Four-week averaging predictor and its residual series.

The forecast for hour ``t+k`` is the mean of the observations at the same
hour in each of the previous four weeks. It is the seasonal layer of the
avgARIMA baseline; its residuals feed the ARMA corrector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from stlf.errors import InsufficientHistoryError, LeadOutOfRangeError
from stlf.series import WEEK_HOURS, HourlySeries

N_WEEKS = 4


@dataclass(frozen=True)
class AveragingModel:
    history: HourlySeries
    week: int = WEEK_HOURS


def avg_forecast(model: AveragingModel, origin: int, k: int) -> float:
    """Mean of the four weekly-lag observations of the target hour ``origin + k``.

    All four lags precede the origin because ``k <= 24 < week``.
    """
    if not 1 <= k <= 24:
        raise LeadOutOfRangeError(f"lead {k} outside 1..24")
    target = origin + k
    deepest = target - N_WEEKS * model.week
    if deepest < 0:
        raise InsufficientHistoryError(
            f"origin {origin} lead {k}: need {N_WEEKS * model.week} hours of weekly history"
        )
    y = model.history.values
    total = 0.0
    for m in range(1, N_WEEKS + 1):
        total += y[target - m * model.week]
    return total / N_WEEKS


def avg_residuals(model: AveragingModel, window: range) -> np.ndarray:
    """One-step residuals ``y[t] - avg_forecast(t-1, 1)`` for each t in ``window``.

    The four weekly lags are the same for every lead that shifts the same
    target hour, so the 1-step alignment is canonical.
    """
    if len(window) == 0:
        return np.empty(0)
    if window[0] - N_WEEKS * model.week < 0:
        raise InsufficientHistoryError(
            f"window starts at {window[0]}; need {N_WEEKS * model.week} hours before it"
        )
    y = model.history.values
    idx = np.asarray(window)
    lagged = np.zeros(idx.shape[0])
    for m in range(1, N_WEEKS + 1):
        lagged += y[idx - m * model.week]
    return y[idx] - lagged / N_WEEKS
