"""Per-lead-time random forests over lagged load, temperature and calendar
features (the NARX-RF model).

One forest is trained for every lead time 1..24, so no forecast is ever fed
back into the inputs. Feature rows take eight load lags measured backward
from the forecast origin, observed and smoothed temperature at the target
hour, and the target hour's calendar position.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from stlf import _kernels
from stlf.errors import (
    InsufficientHistoryError,
    LeadOutOfRangeError,
    MissingExogenousError,
)
from stlf.series import DAY_HOURS, WEEK_HOURS, HourlySeries, exp_smooth

HORIZON = 24
N_TREES = 500
MTRY = 3
MIN_NODE = 5
SAMPLE_CAP = 5000
TEMP_SMOOTH = 0.85

#: Weekday index of the Unix epoch (1970-01-01 was a Thursday), Monday = 0.
_EPOCH_WEEKDAY = 3


@dataclass(frozen=True)
class FeatureRecipe:
    """Feature layout for one lead time ``h``.

    Load lags are offsets behind the forecast origin; at h=24 the ``24-h``
    offset degenerates to the origin observation itself.
    """

    h: int

    def __post_init__(self):
        if not 1 <= self.h <= HORIZON:
            raise LeadOutOfRangeError(f"lead {self.h} outside 1..{HORIZON}")

    @property
    def load_lags(self) -> tuple[int, ...]:
        h = self.h
        return (1, 2, 3, DAY_HOURS - h, 2 * DAY_HOURS - h, 3 * DAY_HOURS - h,
                WEEK_HOURS - h, 2 * WEEK_HOURS - h)

    @property
    def n_features(self) -> int:
        return len(self.load_lags) + 4  # + temp, smoothed temp, hour, weekday


@dataclass(frozen=True)
class RegressionTree:
    """Node-array CART tree; ``feature == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]


@dataclass(frozen=True)
class Forest:
    trees: list[RegressionTree]
    mtry: int
    sample_size: int
    recipe: FeatureRecipe
    rng_seed: int


@dataclass(frozen=True)
class NarxRfModel:
    forests: dict[int, Forest] = field(default_factory=dict)

    def __post_init__(self):
        if sorted(self.forests) != list(range(1, HORIZON + 1)):
            raise ValueError("model must hold one forest per lead 1..24")


def _calendar_codes(series: HourlySeries, idx: np.ndarray):
    abs_hour = series.start_hour + idx
    hod = abs_hour % DAY_HOURS
    dow = (abs_hour // DAY_HOURS + _EPOCH_WEEKDAY) % 7
    return hod.astype(np.float64), dow.astype(np.float64)


def _feature_matrix(series: HourlySeries, smoothed: np.ndarray, origins: np.ndarray, h: int) -> np.ndarray:
    recipe = FeatureRecipe(h)
    y = series.values
    target = origins + h
    cols = [y[origins - g] for g in recipe.load_lags]
    cols.append(series.temp[target])
    cols.append(smoothed[target])
    hod, dow = _calendar_codes(series, target)
    cols.append(hod)
    cols.append(dow)
    return np.column_stack(cols)


def build_dataset(series: HourlySeries, h: int):
    """All (feature row, target) pairs for lead ``h``, in chronological order.

    A row at origin t uses loads at or before t plus temperature and calendar
    information at the target hour t+h; the target is the load at t+h.
    """
    recipe = FeatureRecipe(h)
    if series.temp is None:
        raise MissingExogenousError("NARX features need an aligned temperature channel")
    n = len(series)
    deepest = max(recipe.load_lags)
    first = deepest
    last = n - 1 - h
    if last < first:
        raise InsufficientHistoryError(
            f"lead {h}: need at least {deepest + h + 1} hours, have {n}"
        )
    origins = np.arange(first, last + 1)
    smoothed = exp_smooth(series.temp, TEMP_SMOOTH)
    rows = _feature_matrix(series, smoothed, origins, h)
    targets = series.values[origins + h].copy()
    return rows, targets


def grow_tree(rows: np.ndarray, targets: np.ndarray, mtry: int = MTRY,
              min_node: int = MIN_NODE, seed: int = 0) -> RegressionTree:
    """Grow a single CART tree on all given rows (no subsampling here)."""
    rows = np.ascontiguousarray(rows, dtype=np.float64)
    targets = np.ascontiguousarray(targets, dtype=np.float64)
    if rows.shape[0] < 1:
        raise ValueError("need at least one row")
    all_rows = np.arange(rows.shape[0], dtype=np.int64)
    arrays = _kernels.grow_tree(
        rows, targets, all_rows, mtry, min_node, np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
    )
    return RegressionTree(*arrays)


def _grow_subsampled(rows, targets, n_sample, mtry, min_node, tree_seed) -> RegressionTree:
    rng = np.random.Generator(np.random.PCG64(tree_seed))
    n = rows.shape[0]
    if n_sample < n:
        sub = rng.choice(n, size=n_sample, replace=False).astype(np.int64)
        sub.sort()
    else:
        sub = np.arange(n, dtype=np.int64)
    arrays = _kernels.grow_tree(
        rows, targets, sub, mtry, min_node, np.uint64(_kernels.derive_seed(tree_seed, 1))
    )
    return RegressionTree(*arrays)


def fit_forest(rows, targets, recipe: FeatureRecipe, seed: int,
               n_trees: int = N_TREES, mtry: int = MTRY, min_node: int = MIN_NODE,
               sample_cap: int = SAMPLE_CAP, jobs: int = 1) -> Forest:
    """Train a forest of subsampled CART trees.

    Each tree draws ``min(sample_cap, n)`` rows without replacement under a
    seed derived from (seed, tree index), so the result is identical no
    matter how tree construction is scheduled.
    """
    rows = np.ascontiguousarray(rows, dtype=np.float64)
    targets = np.ascontiguousarray(targets, dtype=np.float64)
    if rows.shape[0] < 1:
        raise ValueError("need at least one row")
    n_sample = min(sample_cap, rows.shape[0])
    seeds = [_kernels.derive_seed(seed, i) for i in range(n_trees)]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            trees = list(
                pool.map(
                    lambda s: _grow_subsampled(rows, targets, n_sample, mtry, min_node, s),
                    seeds,
                )
            )
    else:
        trees = [_grow_subsampled(rows, targets, n_sample, mtry, min_node, s) for s in seeds]
    return Forest(trees=trees, mtry=mtry, sample_size=n_sample, recipe=recipe, rng_seed=seed)


def predict_forest(forest: Forest, row) -> float:
    """Mean of the tree predictions for one feature row."""
    row = np.asarray(row, dtype=np.float64)
    if row.shape != (forest.recipe.n_features,):
        raise ValueError(
            f"row has {row.shape} features, recipe expects {forest.recipe.n_features}"
        )
    return float(predict_forest_batch(forest, row[None, :])[0])


def predict_forest_batch(forest: Forest, rows: np.ndarray) -> np.ndarray:
    rows = np.ascontiguousarray(rows, dtype=np.float64)
    if rows.shape[1] != forest.recipe.n_features:
        raise ValueError(
            f"rows have {rows.shape[1]} features, recipe expects {forest.recipe.n_features}"
        )
    acc = np.zeros(rows.shape[0])
    for tree in forest.trees:
        _kernels.predict_tree(
            tree.feature, tree.threshold, tree.left, tree.right, tree.value, rows, acc
        )
    return acc / len(forest.trees)


def fit_narx(series: HourlySeries, seed: int, n_trees: int = N_TREES,
             jobs: int = 1) -> NarxRfModel:
    """Fit one forest per lead time on all available history."""
    if series.temp is None:
        raise MissingExogenousError("NARX-RF needs an aligned temperature channel")
    if len(series) < 2 * WEEK_HOURS + HORIZON + 1:
        raise InsufficientHistoryError(
            f"need at least {2 * WEEK_HOURS + HORIZON + 1} hours, have {len(series)}"
        )
    forests = {}
    for h in range(1, HORIZON + 1):
        rows, targets = build_dataset(series, h)
        forests[h] = fit_forest(
            rows, targets, FeatureRecipe(h), _kernels.derive_seed(seed, h),
            n_trees=n_trees, jobs=jobs,
        )
    return NarxRfModel(forests=forests)


def narx_forecast(model: NarxRfModel, series: HourlySeries, origin: int, k: int) -> float:
    """Direct (non-recursive) forecast: assemble the lead-k feature row at
    ``origin`` and query that lead's forest."""
    if not 1 <= k <= HORIZON:
        raise LeadOutOfRangeError(f"lead {k} outside 1..{HORIZON}")
    if series.temp is None:
        raise MissingExogenousError("NARX-RF needs an aligned temperature channel")
    recipe = FeatureRecipe(k)
    if origin - max(recipe.load_lags) < 0 or origin + k >= len(series):
        raise InsufficientHistoryError(
            f"origin {origin} lead {k}: lags or target temperature out of range"
        )
    smoothed = exp_smooth(series.temp, TEMP_SMOOTH)
    row = _feature_matrix(series, smoothed, np.array([origin]), k)[0]
    return predict_forest(model.forests[k], row)
