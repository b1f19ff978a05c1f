import numpy as np
import pytest

import helpers
from stlf import arima
from stlf.arima import (
    ArmaFit,
    ArmaSpec,
    ArmaState,
    aicc,
    arma_forecast,
    arma_update,
    avg_arima_forecast,
    css_fit,
    last_innovation,
    ljung_box,
    pacf_to_ar,
    seeded_fit_state,
    stepwise_select,
    with_clock,
)
from stlf.baseline import AveragingModel, avg_forecast, avg_residuals
from stlf.errors import DegenerateSampleSizeError, InsufficientHistoryError, StateSyncError
from stlf.series import HourlySeries


def simulate_ar(coeffs, n, seed, mean=0.0, sd=1.0):
    rng = np.random.default_rng(seed)
    e = sd * rng.standard_normal(n)
    x = np.zeros(n)
    p = len(coeffs)
    for t in range(n):
        acc = e[t]
        for i, c in enumerate(coeffs, start=1):
            if t - i >= 0:
                acc += c * (x[t - i] - mean)
        x[t] = mean + acc
    return x


def simulate_ma(theta, n, seed):
    rng = np.random.default_rng(seed)
    e = rng.standard_normal(n + 1)
    return e[1:] + theta * e[:-1]


def make_fit(spec, ar=(), ma=(), mean=0.0, sigma2=1.0, n_eff=500,
             last_w=(), last_e=(), last_raw=0.0, clock=0):
    return ArmaFit(
        spec, np.array(ar, dtype=float), np.array(ma, dtype=float), mean,
        sigma2, sigma2 * n_eff, n_eff,
        ArmaState(np.array(last_w, dtype=float), np.array(last_e, dtype=float), last_raw, clock),
    )


class TestCssFit:
    def test_ar1_recovery_vs_yule_walker(self):
        x = simulate_ar([0.8], 5000, seed=42)
        fit = css_fit(x, ArmaSpec(1, 0, 0))
        assert 0.75 <= fit.ar[0] <= 0.85
        c = x - x.mean()
        yw = float(c[:-1] @ c[1:]) / float(c @ c)  # independent oracle
        assert fit.ar[0] == pytest.approx(yw, abs=0.01)

    def test_white_noise_mean_model(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal(2000)
        fit = css_fit(x, ArmaSpec(0, 0, 0, include_mean=True))
        assert fit.mean == pytest.approx(x.mean(), abs=1e-12)
        assert fit.sigma2 == pytest.approx(x.var(), rel=1e-6)

    def test_ma1_recovery_vs_autocorr_inversion(self):
        x = simulate_ma(0.5, 5000, seed=9)
        fit = css_fit(x, ArmaSpec(0, 0, 1))
        assert 0.43 <= fit.ma[0] <= 0.57
        c = x - x.mean()
        rho1 = float(c[:-1] @ c[1:]) / float(c @ c)
        theta_oracle = (1 - np.sqrt(1 - 4 * rho1**2)) / (2 * rho1)
        assert fit.ma[0] == pytest.approx(theta_oracle, abs=0.05)

    def test_insufficient_data(self):
        with pytest.raises(InsufficientHistoryError):
            css_fit(np.ones(25), ArmaSpec(1, 0, 1))

    def test_stationary_and_invertible_roots(self):
        x = simulate_ar([0.5, 0.3], 3000, seed=17)
        for spec in (ArmaSpec(2, 0, 0), ArmaSpec(2, 0, 2), ArmaSpec(1, 0, 1)):
            fit = css_fit(x, spec)
            if fit.spec.p:
                roots = np.roots(np.concatenate(([1.0], -fit.ar))[::-1])
                assert np.all(np.abs(roots) > 1 + 1e-6)
            if fit.spec.q:
                roots = np.roots(np.concatenate(([1.0], fit.ma))[::-1])
                assert np.all(np.abs(roots) > 1 + 1e-6)

    def test_pacf_map_matches_direct_ar1(self):
        assert pacf_to_ar(np.array([0.6]))[0] == 0.6
        # AR(2) from pacf (r1, r2): phi = (r1*(1-r2), r2)
        out = pacf_to_ar(np.array([0.5, -0.3]))
        assert np.allclose(out, [0.5 * 1.3, -0.3])


class TestAicc:
    def test_penalty_monotone_in_k(self):
        small = make_fit(ArmaSpec(1, 0, 0, include_mean=False), ar=[0.5], sigma2=2.0)
        big = make_fit(ArmaSpec(1, 0, 1, include_mean=False), ar=[0.5], ma=[0.1], sigma2=2.0)
        assert aicc(small) < aicc(big)

    def test_halved_sigma2_drops_by_n_log2(self):
        a = make_fit(ArmaSpec(1, 0, 0, include_mean=False), ar=[0.5], sigma2=2.0, n_eff=400)
        b = make_fit(ArmaSpec(1, 0, 0, include_mean=False), ar=[0.5], sigma2=1.0, n_eff=400)
        assert aicc(a) - aicc(b) == pytest.approx(400 * np.log(2), rel=1e-12)

    def test_degenerate_sample_size(self):
        f = make_fit(ArmaSpec(1, 0, 0, include_mean=False), ar=[0.5], n_eff=3)
        with pytest.raises(DegenerateSampleSizeError):
            aicc(f)


class TestStepwise:
    def test_ar2_close_to_exhaustive_grid(self):
        x = simulate_ar([0.5, 0.3], 5000, seed=101)
        best = stepwise_select(x)
        best_score = arima.selection_score(best)
        grid_best = min(
            arima.selection_score(css_fit(x, ArmaSpec(p, 0, q, include_mean=True)))
            for p in range(6)
            for q in range(6)
        )
        assert best_score <= grid_best + 2.0

    def test_white_noise_prefers_tiny_models(self):
        small = 0
        for seed in range(20):
            x = np.random.default_rng(seed).standard_normal(2000)
            fit = stepwise_select(x)
            if fit.spec.p + fit.spec.q <= 1:
                small += 1
        assert small >= 16

    def test_random_walk_gets_differenced(self):
        rng = np.random.default_rng(8)
        x = np.cumsum(rng.standard_normal(3000))
        assert stepwise_select(x).spec.d == 1

    def test_never_worse_than_start_candidates(self):
        x = simulate_ar([0.4], 2500, seed=55)
        best = arima.selection_score(stepwise_select(x))
        for p, q in ((2, 2), (1, 0), (0, 1), (0, 0)):
            cand = arima.selection_score(css_fit(x, ArmaSpec(p, 0, q, include_mean=True)))
            assert best <= cand + 1e-9

    def test_too_short(self):
        with pytest.raises(InsufficientHistoryError):
            stepwise_select(np.ones(100))


class TestUpdateAndForecast:
    def test_update_replays_css_residuals(self):
        x = simulate_ar([0.6], 1200, seed=4)
        fit = css_fit(x, ArmaSpec(1, 0, 1))
        t0 = max(fit.spec.p, fit.spec.q)
        from stlf._kernels import arma_innovations

        batch = arma_innovations(x, fit.ar, fit.ma, fit.mean, t0)
        replay = seeded_fit_state(fit, x[:t0])
        seen = []
        for y in x[t0:]:
            seen.append(last_innovation(replay, float(y)))
            replay = arma_update(replay, float(y))
        assert np.allclose(seen, batch, atol=1e-12)
        # and the end state matches the one css_fit stored
        assert np.allclose(replay.state.last_w, fit.state.last_w)
        assert np.allclose(replay.state.last_e, fit.state.last_e, atol=1e-12)

    def test_ar1_zero_innovation(self):
        fit = make_fit(ArmaSpec(1, 0, 0, include_mean=False), ar=[0.8], last_w=[5.0], last_raw=5.0)
        updated = arma_update(fit, 4.0)
        assert updated.state.last_w[0] == 4.0
        assert last_innovation(fit, 4.0) == pytest.approx(4.0 - 0.8 * 5.0)

    def test_mean_only_innovation(self):
        fit = make_fit(ArmaSpec(0, 0, 0, include_mean=True), mean=10.0, last_raw=10.0)
        assert last_innovation(fit, 12.5) == pytest.approx(2.5)

    def test_coefficients_frozen_by_update(self):
        fit = make_fit(ArmaSpec(1, 0, 1), ar=[0.7], ma=[0.2], last_w=[1.0], last_e=[0.3])
        updated = arma_update(fit, 2.0)
        assert np.array_equal(updated.ar, fit.ar) and np.array_equal(updated.ma, fit.ma)
        assert updated.state.clock == fit.state.clock + 1

    def test_ar1_forecast_decay(self):
        fit = make_fit(ArmaSpec(1, 0, 0, include_mean=False), ar=[0.8], last_w=[10.0], last_raw=10.0)
        out = arma_forecast(fit, 3)
        assert np.allclose(out, [8.0, 6.4, 5.12])

    def test_ma1_forecast_reverts_to_mean_at_lead_2(self):
        fit = make_fit(ArmaSpec(0, 0, 1, include_mean=True), ma=[0.5], mean=3.0,
                       last_e=[2.0], last_raw=4.0)
        out = arma_forecast(fit, 2)
        assert out[0] == pytest.approx(3.0 + 0.5 * 2.0)
        assert out[1] == pytest.approx(3.0)

    def test_random_walk_flat_forecast(self):
        fit = make_fit(ArmaSpec(0, 1, 0, include_mean=False), last_raw=7.0)
        assert np.allclose(arma_forecast(fit, 5), 7.0)

    def test_long_lead_reverts_to_mean(self):
        x = simulate_ar([0.7], 3000, seed=21, mean=50.0)
        fit = css_fit(x, ArmaSpec(1, 0, 0, include_mean=True))
        far = arma_forecast(fit, 200)[-1]
        assert abs(far - fit.mean) < 1e-3 * x.std()


class TestAvgArima:
    def _series_with_ar_noise(self, seed, n_weeks=30, coeff=0.8, sd=1.0):
        base = helpers.multiplicative_series(n_weeks * 168, level=100.0, seed=3)
        noise = simulate_ar([coeff], len(base), seed=seed, sd=sd)
        return HourlySeries(base.start_hour, base.values + noise)

    def test_zero_model_is_plain_averaging(self):
        s = self._series_with_ar_noise(1)
        m = AveragingModel(s)
        fit = make_fit(ArmaSpec(0, 0, 0, include_mean=False), clock=3000)
        origin = 3000
        for k in (1, 12, 24):
            assert avg_arima_forecast(m, fit, origin, k) == avg_forecast(m, origin, k)

    def test_constant_residual_shifts_all_leads(self):
        s = self._series_with_ar_noise(2)
        m = AveragingModel(s)
        c = 5.5
        fit = make_fit(ArmaSpec(0, 0, 0, include_mean=True), mean=c, clock=3000)
        for k in (1, 10, 24):
            assert avg_arima_forecast(m, fit, 3000, k) == pytest.approx(avg_forecast(m, 3000, k) + c)

    def test_clock_mismatch_raises(self):
        s = self._series_with_ar_noise(3)
        fit = make_fit(ArmaSpec(0, 0, 0, include_mean=False), clock=2999)
        with pytest.raises(StateSyncError):
            avg_arima_forecast(AveragingModel(s), fit, 3000, 1)

    def test_beats_plain_averaging_on_ar_noise(self):
        s = self._series_with_ar_noise(7)
        m = AveragingModel(s)
        n = len(s)
        train = range(n - 168 - 2160, n - 168)
        fit = with_clock(stepwise_select(avg_residuals(m, train)), n - 169)
        mse_avg = mse_comb = 0.0
        for origin in range(n - 169, n - 1):
            actual = s.values[origin + 1]
            mse_avg += (actual - avg_forecast(m, origin, 1)) ** 2
            mse_comb += (actual - avg_arima_forecast(m, fit, origin, 1)) ** 2
            fit = arma_update(fit, actual - avg_forecast(m, origin, 1))
        assert mse_comb < mse_avg

    def test_ljung_box_improves(self):
        wins = 0
        for seed in range(3):
            s = self._series_with_ar_noise(100 + seed)
            m = AveragingModel(s)
            n = len(s)
            train = range(n - 168 - 2160, n - 168)
            fit = with_clock(stepwise_select(avg_residuals(m, train)), n - 169)
            plain, corrected = [], []
            for origin in range(n - 169, n - 1):
                actual = s.values[origin + 1]
                resid = actual - avg_forecast(m, origin, 1)
                plain.append(resid)
                corrected.append(actual - avg_arima_forecast(m, fit, origin, 1))
                fit = arma_update(fit, resid)
            if ljung_box(np.array(corrected), 20) < ljung_box(np.array(plain), 20):
                wins += 1
        assert wins == 3


def test_ljung_box_statistic_definition():
    rng = np.random.default_rng(0)
    x = rng.standard_normal(500)
    n = len(x)
    c = x - x.mean()
    denom = float(c @ c)
    expect = n * (n + 2) * sum(
        (float(c[:-j] @ c[j:]) / denom) ** 2 / (n - j) for j in range(1, 21)
    )
    assert ljung_box(x, 20) == pytest.approx(expect, rel=1e-12)
