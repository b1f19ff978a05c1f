"""Multiplicative double-seasonal Holt-Winters with a first-order
autocorrelation adjustment.

One smoothed level plus two multiplicative index rings (24 daily slots, 168
weekly slots) are updated per observation; the k-step forecast multiplies the
level by the indices k slots ahead and adds a geometrically damped copy of
the last one-step error. Two fitting objectives are supported: in-sample
1-step squared error (the original formulation) and the sum over all 24
horizons (the modified one, which also widens the adjustment coefficient's
upper bound from 0.9 to 0.99).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from stlf import optimize
from stlf._kernels import dshw_pass
from stlf.errors import (
    InsufficientHistoryError,
    LeadOutOfRangeError,
    NonPositiveValueError,
)
from stlf.series import DAY_HOURS, WEEK_HOURS, HourlySeries

HORIZON = 24

PHI_MAX = {"original": 0.9, "modified": 0.99}

#: Fit search box for the three smoothing constants.
_SMOOTH_LO = 1e-4
_SMOOTH_HI = 1.0 - 1e-4
_START = (0.1, 0.1, 0.1, 0.5)


@dataclass(frozen=True)
class DshwParams:
    """Smoothing constants: level, daily index, weekly index, plus the
    autocorrelation adjustment ``phi`` (capped by the variant)."""

    alpha: float
    gamma_day: float
    gamma_week: float
    phi: float
    variant: str = "original"

    def __post_init__(self):
        if self.variant not in PHI_MAX:
            raise ValueError(f"unknown variant {self.variant!r}")
        for name in ("alpha", "gamma_day", "gamma_week"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")
        if not 0.0 <= self.phi <= self.phi_max:
            raise ValueError(f"phi={self.phi} outside [0, {self.phi_max}]")

    @property
    def phi_max(self) -> float:
        return PHI_MAX[self.variant]


@dataclass(frozen=True)
class DshwState:
    """Level, the two index rings (oldest slot first) and the pieces of the
    last fitted value needed by the adjustment term."""

    level: float
    day_ring: np.ndarray  # 24 slots, [0] is the oldest
    week_ring: np.ndarray  # 168 slots
    last_y: float
    last_fit: float
    clock: int = 0

    def __post_init__(self):
        d = np.asarray(self.day_ring, dtype=np.float64)
        w = np.asarray(self.week_ring, dtype=np.float64)
        if d.shape != (DAY_HOURS,) or w.shape != (WEEK_HOURS,):
            raise ValueError("rings must hold 24 and 168 slots")
        d.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "day_ring", d)
        object.__setattr__(self, "week_ring", w)


def _require_positive(values: np.ndarray):
    if np.isnan(values).any():
        raise NonPositiveValueError("series contains missing values; repair first")
    if (values <= 0.0).any():
        raise NonPositiveValueError(
            "multiplicative smoothing needs strictly positive loads; clamp first"
        )


def init_state(train: HourlySeries) -> DshwState:
    """Seed level and index rings from the first two weeks of training data.

    Two weeks is the smallest window that covers the weekly cycle twice.
    Daily indices average ``y_t / (mean of t's 24-hour block)`` by hour of
    day; weekly indices average the remaining ratio by hour of week; both are
    normalized to mean one.
    """
    y = np.asarray(train.values, dtype=np.float64)
    if y.shape[0] < 2 * WEEK_HOURS:
        raise InsufficientHistoryError(
            f"need at least {2 * WEEK_HOURS} hours to initialize, have {y.shape[0]}"
        )
    head = y[: 2 * WEEK_HOURS]
    _require_positive(head)
    level = float(head.mean())
    block_means = head.reshape(-1, DAY_HOURS).mean(axis=1)
    day = (head / np.repeat(block_means, DAY_HOURS)).reshape(-1, DAY_HOURS).mean(axis=0)
    day = day / day.mean()
    week = (head / (level * np.tile(day, 2 * WEEK_HOURS // DAY_HOURS))).reshape(
        2, WEEK_HOURS
    ).mean(axis=0)
    week = week / week.mean()
    last = 2 * WEEK_HOURS - 1
    return DshwState(
        level=level,
        day_ring=day,
        week_ring=week,
        last_y=float(head[last]),
        last_fit=level * day[last % DAY_HOURS] * week[last % WEEK_HOURS],
        clock=last,
    )


def update(state: DshwState, params: DshwParams, y: float) -> DshwState:
    """Advance the state by one observation (the three smoothing recursions,
    level first, then both index rings from the fresh level)."""
    if not y > 0.0:
        raise NonPositiveValueError(f"observation {y} is not positive")
    dlag = float(state.day_ring[0])
    wlag = float(state.week_ring[0])
    fitted = state.level * dlag * wlag
    level = params.alpha * y / (dlag * wlag) + (1.0 - params.alpha) * state.level
    d_new = params.gamma_day * y / (level * wlag) + (1.0 - params.gamma_day) * dlag
    w_new = params.gamma_week * y / (level * dlag) + (1.0 - params.gamma_week) * wlag
    day_ring = np.concatenate((state.day_ring[1:], [d_new]))
    week_ring = np.concatenate((state.week_ring[1:], [w_new]))
    return DshwState(level, day_ring, week_ring, float(y), fitted, state.clock + 1)


def forecast(state: DshwState, params: DshwParams, k: int) -> float:
    """k-step-ahead forecast: seasonal product plus the damped last error."""
    if not 1 <= k <= HORIZON:
        raise LeadOutOfRangeError(f"lead {k} outside 1..{HORIZON}")
    seasonal = state.level * state.day_ring[k - 1] * state.week_ring[k - 1]
    return float(seasonal + params.phi**k * (state.last_y - state.last_fit))


def _prev_errors(y: np.ndarray, fitted: np.ndarray, state: DshwState) -> np.ndarray:
    """One-step error available at each origin (the origin before y[0] uses
    the error stored in the initial state)."""
    prev = np.empty(y.shape[0])
    prev[0] = state.last_y - state.last_fit
    prev[1:] = y[:-1] - fitted[:-1]
    return prev


def _post_init_pass(params: DshwParams, train: HourlySeries, state: DshwState):
    y = np.asarray(train.values, dtype=np.float64)
    _require_positive(y)
    y_post = y[state.clock + 1 :]
    if y_post.shape[0] == 0:
        raise InsufficientHistoryError("no observations after the initialization window")
    L, D, W, fitted = dshw_pass(
        y_post,
        params.alpha,
        params.gamma_day,
        params.gamma_week,
        state.level,
        state.day_ring,
        state.week_ring,
    )
    return y_post, L, D, W, fitted


def objective_1step(params: DshwParams, train: HourlySeries) -> float:
    """In-sample sum of squared 1-hour-ahead forecast errors."""
    state = init_state(train)
    y_post, _, _, _, fitted = _post_init_pass(params, train, state)
    resid = y_post - fitted - params.phi * _prev_errors(y_post, fitted, state)
    sse = float(resid @ resid)
    return sse if np.isfinite(sse) else 1e300


def objective_multih(params: DshwParams, train: HourlySeries) -> float:
    """In-sample sum of squared errors over all horizons 1..24.

    The index histories depend only on observations, so one forward pass
    serves every horizon; origins close to the end contribute only the
    horizons that fit.
    """
    state = init_state(train)
    y_post, L, D, W, fitted = _post_init_pass(params, train, state)
    return _multih_sse(y_post, L, D, W, fitted, state, params.phi)


def _multih_sse(y, L, D, W, fitted, state: DshwState, phi: float) -> float:
    n = y.shape[0]
    prev = _prev_errors(y, fitted, state)
    total = 0.0
    for k in range(1, HORIZON + 1):
        m = n - k + 1
        if m <= 0:
            break
        pred = L[:m] * D[k - 1 : k - 1 + m] * W[k - 1 : k - 1 + m] + phi**k * prev[:m]
        resid = y[k - 1 :] - pred
        total += float(resid @ resid)
    return total if np.isfinite(total) else 1e300


@dataclass(frozen=True)
class DshwModel:
    """A fitted model: smoothing parameters plus the running state."""

    params: DshwParams
    state: DshwState


@dataclass(frozen=True)
class DshwFit:
    params: DshwParams
    state: DshwState
    objective: float
    n_evals: int
    converged: bool

    def __iter__(self):
        return iter((self.params, self.state))

    @property
    def model(self) -> DshwModel:
        return DshwModel(self.params, self.state)


def fit(
    train: HourlySeries,
    variant: str = "modified",
    tol: float = 1e-6,
    max_evals: int = 2000,
) -> DshwFit:
    """Fit the four smoothing parameters on a training slice (nominally the
    most recent 3 months) and return them with the end-of-training state."""
    if variant not in PHI_MAX:
        raise ValueError(f"unknown variant {variant!r}")
    state0 = init_state(train)
    y = np.asarray(train.values, dtype=np.float64)
    _require_positive(y)
    y_post = y[state0.clock + 1 :]
    if y_post.shape[0] < HORIZON:
        raise InsufficientHistoryError(
            f"need more than {2 * WEEK_HOURS + HORIZON} hours of training data"
        )
    multi = variant == "modified"

    def objective(v: np.ndarray) -> float:
        L, D, W, fitted = dshw_pass(
            y_post, v[0], v[1], v[2], state0.level, state0.day_ring, state0.week_ring
        )
        if multi:
            return _multih_sse(y_post, L, D, W, fitted, state0, v[3])
        prev = _prev_errors(y_post, fitted, state0)
        resid = y_post - fitted - v[3] * prev
        sse = float(resid @ resid)
        return sse if np.isfinite(sse) else 1e300

    bounds = optimize.BoxBounds(
        np.array([_SMOOTH_LO, _SMOOTH_LO, _SMOOTH_LO, 0.0]),
        np.array([_SMOOTH_HI, _SMOOTH_HI, _SMOOTH_HI, PHI_MAX[variant]]),
    )
    result = optimize.minimize(objective, np.array(_START), bounds, tol=tol, max_evals=max_evals)
    params = DshwParams(
        alpha=float(result.x[0]),
        gamma_day=float(result.x[1]),
        gamma_week=float(result.x[2]),
        phi=float(result.x[3]),
        variant=variant,
    )

    L, D, W, fitted = dshw_pass(
        y_post,
        params.alpha,
        params.gamma_day,
        params.gamma_week,
        state0.level,
        state0.day_ring,
        state0.week_ring,
    )
    m = y_post.shape[0]
    end_state = DshwState(
        level=float(L[m]),
        day_ring=D[m : m + DAY_HOURS].copy(),
        week_ring=W[m : m + WEEK_HOURS].copy(),
        last_y=float(y_post[-1]),
        last_fit=float(fitted[-1]),
        clock=y.shape[0] - 1,
    )
    return DshwFit(params, end_state, result.fun, result.n_evals, result.converged)


def reclock(state: DshwState, clock: int) -> DshwState:
    """Re-anchor the state's position counter (e.g. to an absolute series index)."""
    return replace(state, clock=clock)
