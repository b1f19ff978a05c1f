"""Bounded derivative-free minimization for small smooth objectives.

Box constraints are enforced by a logistic squashing map from unbounded
coordinates onto ``(lower, upper)``; a Nelder-Mead simplex with the standard
coefficients runs in the unbounded space, so every point ever evaluated is
strictly inside the box. Deterministic given identical inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Keeps the squash strictly inside (0, 1) in floating point.
_SIGMOID_CLIP = 1e-12

_REFLECT = 1.0
_EXPAND = 2.0
_CONTRACT = 0.5
_SHRINK = 0.5


@dataclass(frozen=True)
class BoxBounds:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=np.float64)
        hi = np.asarray(self.upper, dtype=np.float64)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("bounds must be 1-D vectors of equal length")
        if not np.all(lo < hi):
            raise ValueError("every lower bound must be strictly below its upper bound")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    def __len__(self) -> int:
        return self.lower.shape[0]

    def squash(self, z: np.ndarray) -> np.ndarray:
        """Map unbounded coordinates into the open box."""
        s = np.empty_like(z)
        pos = z >= 0
        s[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
        ez = np.exp(z[~pos])
        s[~pos] = ez / (1.0 + ez)
        s = np.clip(s, _SIGMOID_CLIP, 1.0 - _SIGMOID_CLIP)
        return self.lower + (self.upper - self.lower) * s

    def unsquash(self, x: np.ndarray) -> np.ndarray:
        p = (x - self.lower) / (self.upper - self.lower)
        if np.any(p <= 0.0) or np.any(p >= 1.0):
            raise ValueError("point must be strictly inside the box")
        return np.log(p / (1.0 - p))


@dataclass(frozen=True)
class MinimizeResult:
    x: np.ndarray
    fun: float
    n_evals: int
    converged: bool

    def __iter__(self):
        # Allows ``x_star, f_star = minimize(...)``.
        return iter((self.x, self.fun))


def minimize(f, x0, bounds: BoxBounds, tol: float = 1e-6, max_evals: int = 2000) -> MinimizeResult:
    """Minimize ``f`` over a box, starting strictly inside it.

    Runs Nelder-Mead (reflection 1, expansion 2, contraction 0.5, shrink 0.5)
    in squashed space until the simplex diameter drops below ``tol`` or the
    evaluation budget is spent, then restarts once from the incumbent with a
    tighter initial simplex. Returns the best point ever evaluated.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    if x0.shape != bounds.lower.shape:
        raise ValueError(f"x0 has dimension {x0.shape}, bounds have {bounds.lower.shape}")
    z0 = bounds.unsquash(x0)

    evals = 0

    def eval_at(z: np.ndarray) -> float:
        nonlocal evals
        evals += 1
        return float(f(bounds.squash(z)))

    f0 = eval_at(z0)
    if not np.isfinite(f0):
        raise ValueError(f"objective is non-finite at x0: {f0}")

    best_z, best_f = z0.copy(), f0

    def run_simplex(z_start: np.ndarray, f_start: float, step: float) -> tuple[np.ndarray, float, bool]:
        nonlocal best_z, best_f
        n = z_start.shape[0]
        sim = np.repeat(z_start[None, :], n + 1, axis=0)
        fsim = np.empty(n + 1)
        fsim[0] = f_start
        for i in range(n):
            sim[i + 1, i] += step
            if evals >= max_evals:
                return best_z, best_f, False
            fsim[i + 1] = eval_at(sim[i + 1])

        while True:
            order = np.argsort(fsim, kind="stable")
            sim, fsim = sim[order], fsim[order]
            if fsim[0] < best_f:
                best_z, best_f = sim[0].copy(), fsim[0]
            if np.max(np.abs(sim[1:] - sim[0])) < tol:
                return sim[0], fsim[0], True
            if evals >= max_evals:
                return sim[0], fsim[0], False

            centroid = sim[:-1].mean(axis=0)
            zr = centroid + _REFLECT * (centroid - sim[-1])
            fr = eval_at(zr)
            if fr < fsim[0]:
                ze = centroid + _EXPAND * (centroid - sim[-1])
                fe = eval_at(ze) if evals < max_evals else np.inf
                if fe < fr:
                    sim[-1], fsim[-1] = ze, fe
                else:
                    sim[-1], fsim[-1] = zr, fr
            elif fr < fsim[-2]:
                sim[-1], fsim[-1] = zr, fr
            else:
                if fr < fsim[-1]:
                    zc = centroid + _CONTRACT * (centroid - sim[-1])
                else:
                    zc = centroid - _CONTRACT * (centroid - sim[-1])
                fc = eval_at(zc) if evals < max_evals else np.inf
                if fc < min(fr, fsim[-1]):
                    sim[-1], fsim[-1] = zc, fc
                else:
                    for i in range(1, n + 1):
                        sim[i] = sim[0] + _SHRINK * (sim[i] - sim[0])
                        if evals >= max_evals:
                            fsim[i] = np.inf
                            continue
                        fsim[i] = eval_at(sim[i])

    z1, f1, conv1 = run_simplex(z0, f0, step=0.25)
    if f1 < best_f:
        best_z, best_f = z1.copy(), f1
    conv2 = True
    if evals < max_evals:
        z2, f2, conv2 = run_simplex(best_z.copy(), best_f, step=0.05)
        if f2 < best_f:
            best_z, best_f = z2.copy(), f2

    return MinimizeResult(
        x=bounds.squash(best_z),
        fun=best_f,
        n_evals=evals,
        converged=conv1 and conv2,
    )
