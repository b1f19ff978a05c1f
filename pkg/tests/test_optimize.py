import numpy as np
import pytest
from scipy.optimize import minimize as scipy_minimize

from stlf.optimize import BoxBounds, minimize


def box(lo, hi, n=1):
    return BoxBounds(np.full(n, float(lo)), np.full(n, float(hi)))


class TestBasics:
    def test_quadratic_1d(self):
        x, f = minimize(lambda v: (v[0] - 2.0) ** 2, np.array([0.5]), box(0, 10))
        assert abs(x[0] - 2.0) < 1e-5
        assert f < 1e-9

    def test_quadratic_2d(self):
        b = BoxBounds(np.array([-1.0, -1.0]), np.array([1.0, 1.0]))
        x, f = minimize(lambda v: v[0] ** 2 + v[1] ** 2, np.array([0.5, 0.5]), b)
        assert np.all(np.abs(x) < 1e-5)

    def test_monotone_pinned_at_lower_bound(self):
        x, f = minimize(lambda v: v[0], np.array([0.5]), box(0, 1))
        assert 0.0 < x[0] < 1e-6
        assert 0.0 < f < 1e-6

    def test_result_object_fields(self):
        r = minimize(lambda v: (v[0] - 2.0) ** 2, np.array([0.5]), box(0, 10))
        assert r.converged and r.n_evals > 0
        assert r.fun == pytest.approx((r.x[0] - 2.0) ** 2)


class TestContracts:
    def test_every_evaluated_point_strictly_inside(self):
        seen = []

        def f(v):
            seen.append(v.copy())
            return np.sum((v - 0.7) ** 2)

        b = BoxBounds(np.array([0.0, 0.0]), np.array([1.0, 1.0]))
        minimize(f, np.array([0.2, 0.9]), b)
        pts = np.array(seen)
        assert np.all(pts > 0.0) and np.all(pts < 1.0)

    def test_deterministic(self):
        def f(v):
            return np.sin(3 * v[0]) + v[0] ** 2 + 0.3 * v[1] ** 4

        b = BoxBounds(np.array([-2.0, -2.0]), np.array([2.0, 2.0]))
        r1 = minimize(f, np.array([1.0, -1.0]), b)
        r2 = minimize(f, np.array([1.0, -1.0]), b)
        assert np.array_equal(r1.x, r2.x) and r1.fun == r2.fun and r1.n_evals == r2.n_evals

    def test_never_worse_than_start(self):
        def f(v):
            return (v[0] - 0.3) ** 2 + 1.0

        r = minimize(f, np.array([0.9]), box(0, 1), max_evals=50)
        assert r.fun <= f(np.array([0.9]))

    def test_max_evals_respected(self):
        calls = 0

        def f(v):
            nonlocal calls
            calls += 1
            return float(np.sum(v**2))

        minimize(f, np.array([0.5, 0.5, 0.5]), box(-1, 1, 3), max_evals=40)
        assert calls <= 40

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            minimize(lambda v: 0.0, np.array([0.5, 0.5]), box(0, 1))

    def test_non_finite_at_start(self):
        with pytest.raises(ValueError):
            minimize(lambda v: float("nan"), np.array([0.5]), box(0, 1))

    def test_x0_on_boundary_rejected(self):
        with pytest.raises(ValueError):
            minimize(lambda v: v[0], np.array([0.0]), box(0, 1))

    def test_bad_bounds(self):
        with pytest.raises(ValueError):
            BoxBounds(np.array([1.0]), np.array([1.0]))


class TestAgainstScipyOracle:
    """The bounded result should match an unconstrained reference optimizer
    whenever the true minimum is interior."""

    @pytest.mark.parametrize("x0", [(0.2, 0.2), (0.8, 0.3)])
    def test_rosenbrock_interior(self, x0):
        def f(v):
            return (1 - v[0]) ** 2 + 100 * (v[1] - v[0] ** 2) ** 2

        b = BoxBounds(np.array([-2.0, -2.0]), np.array([2.0, 2.0]))
        mine = minimize(f, np.array(x0), b, max_evals=4000)
        ref = scipy_minimize(f, np.array(x0), method="Nelder-Mead",
                             options={"xatol": 1e-8, "fatol": 1e-12, "maxfev": 4000})
        assert mine.fun <= ref.fun + 1e-6
        assert np.all(np.abs(mine.x - 1.0) < 1e-2)

    def test_quartic_bowl(self):
        def f(v):
            return float(np.sum((v - 0.25) ** 4) + np.sum(v**2))

        b = BoxBounds(np.array([-1.0, -1.0, -1.0]), np.array([1.0, 1.0, 1.0]))
        mine = minimize(f, np.array([0.5, -0.5, 0.9]), b, max_evals=4000)
        ref = scipy_minimize(f, np.array([0.5, -0.5, 0.9]), method="Nelder-Mead",
                             options={"xatol": 1e-8, "fatol": 1e-12, "maxfev": 4000})
        assert mine.fun <= ref.fun + 1e-8
