"""Exhaustive hyperparameter search with k-fold cross-validation."""

from __future__ import annotations

import itertools

import numpy as np

from ..base import BaseEstimator, clone
from ..exceptions import TooFewPointsError
from ..validation import check_X_y, rng_from
from .metrics import mae, rmse, mape

# Searched when a grid search is requested without explicit candidates.
DEFAULT_FOREST_GRID = {
    "n_estimators": [100, 300],
    "max_depth": [None, 16],
    "min_samples_leaf": [1, 4],
    "max_features": [1.0, 0.5],
    "subsample": [1.0],
}

_SCORERS = {"mae": mae, "rmse": rmse, "mape": mape}


class GridSearchCV(BaseEstimator):
    """Evaluate every parameter combination by cross-validated error.

    The candidate order is the Cartesian product of the grid lists in key
    order; ties on the mean score keep the earliest combination. After the
    search the best combination is refit on the full data.
    """

    def __init__(self, estimator, param_grid=None, folds=5, scoring="mae",
                 random_state=0):
        self.estimator = estimator
        self.param_grid = param_grid
        self.folds = folds
        self.scoring = scoring
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        grid = self.param_grid if self.param_grid is not None else DEFAULT_FOREST_GRID
        if not grid or any(len(v) == 0 for v in grid.values()):
            raise ValueError("param_grid must map names to non-empty candidate lists")
        valid = set(self.estimator._param_names())
        unknown = set(grid) - valid
        if unknown:
            raise ValueError(f"unknown estimator parameter(s): {sorted(unknown)}")
        if self.scoring not in _SCORERS:
            raise ValueError(f"scoring must be one of {sorted(_SCORERS)}")
        score_fn = _SCORERS[self.scoring]

        folds = int(self.folds)
        n = X.shape[0]
        if folds < 2:
            raise ValueError("folds must be >= 2")
        if n < folds:
            raise TooFewPointsError(f"{n} sample(s) cannot fill {folds} folds")
        perm = rng_from(self.random_state, 0).permutation(n)
        fold_rows = np.array_split(perm, folds)

        keys = list(grid.keys())
        self.results_ = []
        best = None
        for combo in itertools.product(*(grid[k] for k in keys)):
            params = dict(zip(keys, combo))
            scores = []
            for f in range(folds):
                val = fold_rows[f]
                train = np.concatenate([fold_rows[g] for g in range(folds) if g != f])
                est = clone(self.estimator).set_params(**params)
                est.fit(X[train], y[train])
                scores.append(score_fn(y[val], est.predict(X[val])))
            mean_score = float(np.mean(scores))
            self.results_.append(
                {"params": params, "fold_scores": scores, "mean_score": mean_score}
            )
            if best is None or mean_score < best[0]:
                best = (mean_score, params)

        self.best_score_, self.best_params_ = best
        self.best_estimator_ = clone(self.estimator).set_params(**self.best_params_)
        self.best_estimator_.fit(X, y)
        return self

    def predict(self, X):
        return self.best_estimator_.predict(X)
