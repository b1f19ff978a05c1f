"""ARMA(p,q) on optionally differenced data, fit by conditional sum of squares.

Used to whiten the autocorrelated residuals of the averaging predictor
(the avgARIMA baseline). Orders are picked by a stepwise AICc search with
hard caps, coefficients live in a partial-autocorrelation parameterization
so every fit is stationary and invertible by construction, and forecasting
is the plain recursive-expectation recursion with frozen coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from stlf import optimize
from stlf._kernels import arma_innovations
from stlf.baseline import AveragingModel, avg_forecast
from stlf.errors import (
    DegenerateSampleSizeError,
    InsufficientHistoryError,
    StateSyncError,
)

P_MAX = 5
Q_MAX = 5
#: Margin keeping partial autocorrelations away from +-1 (roots away from the
#: unit circle).
_PACF_MARGIN = 1e-4
#: Lag-1 autocorrelation above which the series is differenced once.
_DIFF_THRESHOLD = 0.95


@dataclass(frozen=True)
class ArmaSpec:
    p: int
    d: int
    q: int
    include_mean: bool = True

    def __post_init__(self):
        if not 0 <= self.p <= P_MAX or not 0 <= self.q <= Q_MAX:
            raise ValueError(f"orders (p={self.p}, q={self.q}) outside caps {P_MAX}, {Q_MAX}")
        if self.d not in (0, 1):
            raise ValueError(f"d={self.d} not in {{0, 1}}")

    @property
    def n_params(self) -> int:
        return self.p + self.q + int(self.include_mean)


@dataclass(frozen=True)
class ArmaState:
    """Most-recent-first lag windows plus the undifferencing anchor.

    ``clock`` is a caller-defined position counter advanced by one per
    observation; composite models use it to detect desynchronization.
    """

    last_w: np.ndarray  # p most recent (differenced) observations
    last_e: np.ndarray  # q most recent innovations
    last_raw: float  # most recent undifferenced observation
    clock: int


@dataclass(frozen=True)
class ArmaFit:
    spec: ArmaSpec
    ar: np.ndarray
    ma: np.ndarray
    mean: float
    sigma2: float
    css: float
    n_eff: int
    state: ArmaState
    converged: bool = True


def pacf_to_ar(pacf: np.ndarray) -> np.ndarray:
    """Durbin-Levinson map from partial autocorrelations in (-1,1) to the
    coefficients of a stationary AR polynomial."""
    phi = np.array(pacf, dtype=np.float64)
    for j in range(1, phi.shape[0]):
        prev = phi[:j].copy()
        phi[:j] = prev - phi[j] * prev[::-1]
    return phi


def _split_coords(coords: np.ndarray, spec: ArmaSpec, fallback_mean: float):
    ar = pacf_to_ar(coords[: spec.p]) if spec.p else np.empty(0)
    # Invertibility of 1 + sum(ma_j z^j) via the same map with a sign flip.
    ma = -pacf_to_ar(coords[spec.p : spec.p + spec.q]) if spec.q else np.empty(0)
    mean = coords[spec.p + spec.q] if spec.include_mean else fallback_mean
    return ar, ma, mean


def css_fit(x, spec: ArmaSpec, tol: float = 1e-6) -> ArmaFit:
    """Fit ARMA coefficients by minimizing the conditional sum of squares.

    The search runs in partial-autocorrelation space (plus the mean), so
    stationarity and invertibility hold for every candidate. Non-convergence
    is reported through the ``converged`` flag, never by discarding the best
    point found.
    """
    x = np.asarray(x, dtype=np.float64)
    w = np.diff(x) if spec.d else x.copy()
    n = w.shape[0]
    if n < 10 * (spec.p + spec.q + 1):
        raise InsufficientHistoryError(
            f"need {10 * (spec.p + spec.q + 1)} observations after differencing, have {n}"
        )
    t0 = max(spec.p, spec.q)
    n_eff = n - t0
    sample_mean = float(w.mean())

    if spec.p == 0 and spec.q == 0:
        mean = sample_mean if spec.include_mean else 0.0
        e = w[t0:] - mean
        css = float(e @ e)
        sigma2 = css / n_eff
        state = _state_from_training(spec, np.empty(0), np.empty(0), mean, x, w, e)
        return ArmaFit(spec, np.empty(0), np.empty(0), mean, sigma2, css, n_eff, state)

    def objective(coords: np.ndarray) -> float:
        ar, ma, mean = _split_coords(coords, spec, 0.0)
        e = arma_innovations(w, ar, ma, mean, t0)
        css = float(e @ e)
        return css if np.isfinite(css) else 1e300

    ndim = spec.n_params
    lower = np.full(ndim, -1.0 + _PACF_MARGIN)
    upper = np.full(ndim, 1.0 - _PACF_MARGIN)
    x0 = np.zeros(ndim)
    if spec.include_mean:
        spread = 10.0 * float(w.std()) + 1e-3
        lower[-1] = sample_mean - spread
        upper[-1] = sample_mean + spread
        x0[-1] = sample_mean
    result = optimize.minimize(
        objective, x0, optimize.BoxBounds(lower, upper), tol=tol, max_evals=max(600, 300 * ndim)
    )

    ar, ma, mean = _split_coords(result.x, spec, 0.0)
    e = arma_innovations(w, ar, ma, mean, t0)
    css = float(e @ e)
    sigma2 = css / n_eff
    state = _state_from_training(spec, ar, ma, mean, x, w, e)
    return ArmaFit(spec, ar, ma, mean, sigma2, css, n_eff, state, converged=result.converged)


def _state_from_training(spec, ar, ma, mean, x, w, innovations) -> ArmaState:
    last_w = w[-spec.p :][::-1].copy() if spec.p else np.empty(0)
    last_e = innovations[-spec.q :][::-1].copy() if spec.q else np.empty(0)
    return ArmaState(last_w=last_w, last_e=last_e, last_raw=float(x[-1]), clock=x.shape[0] - 1)


def with_clock(fit: ArmaFit, clock: int) -> ArmaFit:
    """Re-anchor the state's position counter (e.g. to a series index)."""
    return replace(fit, state=replace(fit.state, clock=clock))


def seeded_fit_state(fit: ArmaFit, x_prefix) -> ArmaFit:
    """State as at the start of the CSS recursion: the first ``max(p,q)`` (+d)
    observations consumed, all pre-sample innovations zero."""
    x_prefix = np.asarray(x_prefix, dtype=np.float64)
    spec = fit.spec
    t0 = max(spec.p, spec.q) + spec.d
    if x_prefix.shape[0] != t0:
        raise ValueError(f"prefix must hold exactly {t0} observations")
    w = np.diff(x_prefix) if spec.d else x_prefix
    last_w = w[-spec.p :][::-1].copy() if spec.p else np.empty(0)
    last_e = np.zeros(spec.q)
    state = ArmaState(last_w, last_e, float(x_prefix[-1]), clock=t0 - 1)
    return replace(fit, state=state)


def aicc(fit: ArmaFit) -> float:
    """Small-sample-corrected AIC from the CSS innovation variance."""
    k = fit.spec.n_params + 1  # +1 for the innovation variance
    n = fit.n_eff
    if n <= k + 1:
        raise DegenerateSampleSizeError(f"n_eff={n} too small for k={k}")
    return n * float(np.log(max(fit.sigma2, 1e-300))) + 2.0 * k * n / (n - k - 1)


#: Candidates whose AR or MA roots sit this close to the unit circle are
#: rejected during order selection: they are boundary fits that buy in-sample
#: CSS with spurious, unstable structure.
_ROOT_REJECT = 1.01
#: Candidates whose AR and MA polynomials nearly share a root are rejected:
#: a common factor cancels out of the transfer function, so the extra orders
#: only chase noise (measured gaps: < 0.03 for redundant fits on white noise,
#: > 1 for genuinely mixed processes).
_COMMON_FACTOR_GAP = 0.1


def _poly_roots(coeffs_desc: np.ndarray) -> np.ndarray:
    return np.roots(coeffs_desc[::-1])


def root_margin(fit: ArmaFit) -> float:
    """Smallest modulus over the AR and MA polynomial roots (inf when p=q=0)."""
    margin = np.inf
    if fit.spec.p:
        margin = min(margin, float(np.abs(_poly_roots(np.concatenate(([1.0], -fit.ar)))).min()))
    if fit.spec.q:
        margin = min(margin, float(np.abs(_poly_roots(np.concatenate(([1.0], fit.ma)))).min()))
    return margin


def common_factor_gap(fit: ArmaFit) -> float:
    """Smallest distance between any AR root and any MA root (inf if either side is empty)."""
    if not (fit.spec.p and fit.spec.q):
        return np.inf
    ar_roots = _poly_roots(np.concatenate(([1.0], -fit.ar)))
    ma_roots = _poly_roots(np.concatenate(([1.0], fit.ma)))
    return float(min(abs(ra - rb) for ra in ar_roots for rb in ma_roots))


def selection_score(fit: ArmaFit) -> float:
    """AICc, with near-unit-circle and near-cancelling fits pushed out of
    consideration (the standard order-selection hygiene)."""
    if root_margin(fit) < _ROOT_REJECT or common_factor_gap(fit) < _COMMON_FACTOR_GAP:
        return np.inf
    return aicc(fit)


def _lag1_autocorr(x: np.ndarray) -> float:
    c = x - x.mean()
    denom = float(c @ c)
    if denom == 0.0:
        return 0.0
    return float(c[:-1] @ c[1:]) / denom


def _tie_key(spec: ArmaSpec) -> tuple:
    return (spec.p + spec.q, spec.p, spec.include_mean)


def stepwise_select(x) -> ArmaFit:
    """Stepwise AICc search over (p, q) and the mean toggle.

    Differencing is decided first (d=1 iff the lag-1 autocorrelation exceeds
    0.95), then the search starts from four standard candidates and moves to
    the best improving +-1 neighbor until none improves. Ties break toward
    smaller p+q, then smaller p, then no mean. Near-cancelling boundary fits
    score as infinitely bad (see :func:`selection_score`).
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] < 200:
        raise InsufficientHistoryError(f"need at least 200 observations, have {x.shape[0]}")
    d = 1 if _lag1_autocorr(x) > _DIFF_THRESHOLD else 0
    default_mean = d == 0

    cache: dict[tuple[int, int, bool], tuple[ArmaFit, float]] = {}

    def evaluate(p: int, q: int, include_mean: bool) -> tuple[ArmaFit, float]:
        key = (p, q, include_mean)
        if key not in cache:
            fit = css_fit(x, ArmaSpec(p, d, q, include_mean))
            cache[key] = (fit, selection_score(fit))
        return cache[key]

    candidates = [(2, 2, default_mean), (1, 0, default_mean), (0, 1, default_mean), (0, 0, default_mean)]
    best_key = min(
        candidates,
        key=lambda k: (evaluate(*k)[1], _tie_key(ArmaSpec(k[0], d, k[1], k[2]))),
    )
    best_fit, best_aicc = evaluate(*best_key)

    for _ in range(100):
        p, q, include_mean = best_key
        neighbors = [(p + 1, q, include_mean), (p - 1, q, include_mean),
                     (p, q + 1, include_mean), (p, q - 1, include_mean),
                     (p, q, not include_mean)]
        scored = []
        for np_, nq, nm in neighbors:
            if not (0 <= np_ <= P_MAX and 0 <= nq <= Q_MAX):
                continue
            _, score = evaluate(np_, nq, nm)
            scored.append((score, _tie_key(ArmaSpec(np_, d, nq, nm)), (np_, nq, nm)))
        scored.sort(key=lambda s: (s[0], s[1]))
        if scored and scored[0][0] < best_aicc:
            best_key = scored[0][2]
            best_fit, best_aicc = evaluate(*best_key)
        else:
            break
    return best_fit


def arma_update(fit: ArmaFit, y_new: float) -> ArmaFit:
    """Advance the state with one observation; coefficients stay frozen."""
    spec, state = fit.spec, fit.state
    w_new = y_new - state.last_raw if spec.d else y_new
    pred_w = _one_step_w(fit)
    e_new = w_new - pred_w
    last_w = np.concatenate(([w_new], state.last_w[:-1])) if spec.p else state.last_w
    last_e = np.concatenate(([e_new], state.last_e[:-1])) if spec.q else state.last_e
    new_state = ArmaState(last_w, last_e, float(y_new), state.clock + 1)
    return replace(fit, state=new_state)


def last_innovation(fit_before: ArmaFit, y_new: float) -> float:
    """Innovation that :func:`arma_update` would record for ``y_new``."""
    w_new = y_new - fit_before.state.last_raw if fit_before.spec.d else y_new
    return w_new - _one_step_w(fit_before)


def _one_step_w(fit: ArmaFit) -> float:
    state = fit.state
    pred = fit.mean
    if fit.spec.p:
        pred += float(fit.ar @ (state.last_w - fit.mean))
    if fit.spec.q:
        pred += float(fit.ma @ state.last_e)
    return pred


def arma_forecast(fit: ArmaFit, k: int) -> np.ndarray:
    """Recursive-expectation forecasts for leads 1..k from the current state."""
    spec, state = fit.spec, fit.state
    wbuf = list(state.last_w)
    ebuf = list(state.last_e)
    out = np.empty(k)
    for j in range(k):
        pred = fit.mean
        for i in range(spec.p):
            pred += fit.ar[i] * (wbuf[i] - fit.mean)
        for l in range(spec.q):
            pred += fit.ma[l] * ebuf[l]
        out[j] = pred
        if spec.p:
            wbuf = [pred] + wbuf[:-1]
        if spec.q:
            ebuf = [0.0] + ebuf[:-1]
    if spec.d:
        return state.last_raw + np.cumsum(out)
    return out


def avg_arima_forecast(avg: AveragingModel, fit: ArmaFit, origin: int, k: int) -> float:
    """avgARIMA: the averaging forecast plus the ARMA correction at lead ``k``.

    ``fit.state.clock`` must equal ``origin`` (the residual stream has been
    advanced exactly to the forecast origin).
    """
    if fit.state.clock != origin:
        raise StateSyncError(f"ARMA state clock {fit.state.clock} != origin {origin}")
    return avg_forecast(avg, origin, k) + float(arma_forecast(fit, k)[k - 1])


def ljung_box(x, lags: int = 20) -> float:
    """Ljung-Box portmanteau statistic over the first ``lags`` autocorrelations."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    if n <= lags + 1:
        raise DegenerateSampleSizeError(f"need more than {lags + 1} observations")
    c = x - x.mean()
    denom = float(c @ c)
    if denom == 0.0:
        return 0.0
    stat = 0.0
    for j in range(1, lags + 1):
        rho = float(c[:-j] @ c[j:]) / denom
        stat += rho * rho / (n - j)
    return n * (n + 2.0) * stat
