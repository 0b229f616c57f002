"""Random forest regressor built on :class:`DecisionTreeRegressor`.

Each tree draws its rows from a generator keyed by (random_state, tree
index), so training is reproducible and independent of whether trees are
built serially or across threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from ..base import BaseEstimator
from ..validation import check_X_y, check_array, check_is_fitted, rng_from
from .tree import DecisionTreeRegressor


class RandomForestRegressor(BaseEstimator):
    """Bagged ensemble of multi-output regression trees.

    Parameters
    ----------
    n_estimators : int
        Number of trees.
    max_depth, min_samples_leaf, max_features
        Passed to every tree (see :class:`DecisionTreeRegressor`).
    subsample : float
        Fraction of training rows drawn per tree: with replacement when
        ``bootstrap`` is true, without when false.
    bootstrap : bool
        Sample rows with replacement.
    random_state : int
        Master seed; per-tree seeds derive from (random_state, tree index).
    n_jobs : int
        Threads used to build trees; any value yields identical models.
    """

    def __init__(self, n_estimators=100, max_depth=None, min_samples_leaf=1,
                 max_features=1.0, subsample=1.0, bootstrap=True,
                 random_state=0, n_jobs=1):
        self.n_estimators = n_estimators
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.max_features = max_features
        self.subsample = subsample
        self.bootstrap = bootstrap
        self.random_state = random_state
        self.n_jobs = n_jobs

    def _tree_params(self):
        return dict(
            max_depth=self.max_depth,
            min_samples_leaf=self.min_samples_leaf,
            max_features=self.max_features,
        )

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        if int(self.n_estimators) < 1:
            raise ValueError("n_estimators must be >= 1")
        if not 0.0 < float(self.subsample) <= 1.0:
            raise ValueError(f"subsample must be in (0, 1], got {self.subsample}")
        self._y_was_1d = y.ndim == 1
        y2 = y.reshape(X.shape[0], -1)
        n = X.shape[0]
        n_draw = min(n, max(1, math.ceil(float(self.subsample) * n)))

        def build(i):
            rng = rng_from(self.random_state, i, 0)
            if self.bootstrap:
                rows = rng.integers(0, n, size=n_draw)
            elif n_draw < n:
                rows = rng.permutation(n)[:n_draw]
            else:
                rows = np.arange(n)
            tree_seed = int(rng_from(self.random_state, i, 1).integers(2**31 - 1))
            tree = DecisionTreeRegressor(random_state=tree_seed, **self._tree_params())
            return tree.fit(X[rows], y2[rows])

        indices = range(int(self.n_estimators))
        if int(self.n_jobs) > 1:
            with ThreadPoolExecutor(max_workers=int(self.n_jobs)) as pool:
                self.trees_ = list(pool.map(build, indices))
        else:
            self.trees_ = [build(i) for i in indices]

        self.n_features_in_ = X.shape[1]
        self.n_outputs_ = y2.shape[1]
        self.target_min_ = y2.min(axis=0)
        self.target_max_ = y2.max(axis=0)
        return self

    def predict(self, X):
        check_is_fitted(self, "trees_")
        X = check_array(X, ndim=2, name="X")
        acc = np.zeros((X.shape[0], self.n_outputs_))
        for tree in self.trees_:
            acc += tree.value_[tree.apply(X)]
        acc /= len(self.trees_)
        return acc[:, 0] if self._y_was_1d else acc
