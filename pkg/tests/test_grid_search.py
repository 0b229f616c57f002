"""Cross-validated grid search against an independent recomputation."""

import itertools

import numpy as np
import pytest

from eisbridge import GridSearchCV, RandomForestRegressor, clone, mae
from eisbridge.exceptions import TooFewPointsError
from eisbridge.validation import rng_from


def _manual_cv(estimator, grid, X, y, folds, seed):
    perm = rng_from(seed, 0).permutation(len(X))
    fold_rows = np.array_split(perm, folds)
    keys = list(grid.keys())
    results = []
    for combo in itertools.product(*(grid[k] for k in keys)):
        params = dict(zip(keys, combo))
        scores = []
        for f in range(folds):
            val = fold_rows[f]
            train = np.concatenate([fold_rows[g] for g in range(folds) if g != f])
            est = clone(estimator).set_params(**params)
            est.fit(X[train], y[train])
            scores.append(mae(y[val], est.predict(X[val])))
        results.append((params, float(np.mean(scores))))
    return results


def test_matches_manual_cross_validation():
    rng = np.random.default_rng(0)
    X = rng.uniform(0.0, 1.0, (40, 2))
    y = np.sin(4.0 * X[:, 0]) + 0.2 * X[:, 1]
    grid = {"n_estimators": [2, 5], "min_samples_leaf": [1, 3]}
    base = RandomForestRegressor(random_state=11)

    search = GridSearchCV(base, grid, folds=4, scoring="mae", random_state=3)
    search.fit(X, y)
    expected = _manual_cv(base, grid, X, y, folds=4, seed=3)

    got = [(r["params"], r["mean_score"]) for r in search.results_]
    assert [p for p, _ in got] == [p for p, _ in expected]
    for (_, a), (_, b) in zip(got, expected):
        assert abs(a - b) < 1e-12
    best = min(range(len(expected)), key=lambda i: expected[i][1])
    assert search.best_params_ == expected[best][0]
    assert abs(search.best_score_ - expected[best][1]) < 1e-12


def test_refit_equals_direct_fit_with_best_params():
    rng = np.random.default_rng(1)
    X = rng.uniform(0.0, 1.0, (30, 2))
    y = X[:, 0] * 2.0 + X[:, 1]
    base = RandomForestRegressor(random_state=5)
    search = GridSearchCV(base, {"n_estimators": [1, 3]}, folds=3).fit(X, y)

    direct = clone(base).set_params(**search.best_params_).fit(X, y)
    q = rng.uniform(0.0, 1.0, (12, 2))
    assert np.array_equal(search.predict(q), direct.predict(q))


def test_tie_keeps_earliest_combination():
    # duplicated candidate values give identical scores; the first wins
    X = np.arange(12.0).reshape(-1, 1)
    y = X[:, 0].copy()
    base = RandomForestRegressor(random_state=0, bootstrap=False)
    search = GridSearchCV(base, {"n_estimators": [1, 1]}, folds=3).fit(X, y)
    assert search.results_[0]["mean_score"] == search.results_[1]["mean_score"]
    assert search.best_params_ == {"n_estimators": 1}
    assert search.best_score_ == search.results_[0]["mean_score"]


def test_deterministic_across_runs():
    rng = np.random.default_rng(2)
    X = rng.uniform(0.0, 1.0, (24, 2))
    y = rng.normal(0.0, 1.0, 24)
    kwargs = dict(param_grid={"n_estimators": [2, 4]}, folds=3, random_state=9)
    a = GridSearchCV(RandomForestRegressor(random_state=1), **kwargs).fit(X, y)
    b = GridSearchCV(RandomForestRegressor(random_state=1), **kwargs).fit(X, y)
    assert a.best_params_ == b.best_params_
    assert a.best_score_ == b.best_score_


def test_rejects_bad_arguments():
    X = np.arange(10.0).reshape(-1, 1)
    y = X[:, 0]
    base = RandomForestRegressor()
    with pytest.raises(ValueError):
        GridSearchCV(base, {"not_a_param": [1]}).fit(X, y)
    with pytest.raises(ValueError):
        GridSearchCV(base, {"n_estimators": []}).fit(X, y)
    with pytest.raises(ValueError):
        GridSearchCV(base, {"n_estimators": [1]}, scoring="r2").fit(X, y)
    with pytest.raises(ValueError):
        GridSearchCV(base, {"n_estimators": [1]}, folds=1).fit(X, y)
    with pytest.raises(TooFewPointsError):
        GridSearchCV(base, {"n_estimators": [1]}, folds=20).fit(X, y)
