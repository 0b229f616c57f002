"""Multi-output regression tree with axis-aligned splits.

The tree is stored as flat node tables (feature index, threshold, left and
right child, leaf value vector), which doubles as its serialization format.
Split quality is the reduction of the summed per-output squared error, so a
single tree handles scalar and vector targets uniformly.
"""

from __future__ import annotations

import numpy as np

from ..base import BaseEstimator
from ..validation import check_X_y, check_array, check_is_fitted, rng_from

_LEAF = -1


def _resolve_max_features(max_features, n_features: int) -> int:
    if isinstance(max_features, (int, np.integer)) and not isinstance(max_features, bool):
        m = int(max_features)
    else:
        frac = float(max_features)
        if not 0.0 < frac <= 1.0:
            raise ValueError(f"max_features fraction must be in (0, 1], got {frac}")
        m = int(frac * n_features)
    return min(max(m, 1), n_features)


def _best_split(X, y, feature_ids, min_leaf):
    """Return (cost, feature, threshold) of the best split, or None.

    For every candidate feature the rows are sorted once and all split
    positions are scored with cumulative sums; ties keep the first
    (lowest-feature, lowest-position) candidate.
    """
    n = X.shape[0]
    tot = y.sum(axis=0)
    tot2 = (y * y).sum(axis=0)
    best = None
    for f in feature_ids:
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        ys = y[order]
        cs = np.cumsum(ys, axis=0)
        cs2 = np.cumsum(ys * ys, axis=0)
        sizes = np.arange(1, n)  # rows in the left child for split position i
        valid = xs[1:] > xs[:-1]
        if min_leaf > 1:
            valid &= (sizes >= min_leaf) & (n - sizes >= min_leaf)
        if not np.any(valid):
            continue
        left_sse = cs2[:-1] - (cs[:-1] ** 2) / sizes[:, None]
        right_sse = (tot2 - cs2[:-1]) - ((tot - cs[:-1]) ** 2) / (n - sizes)[:, None]
        cost = left_sse.sum(axis=1) + right_sse.sum(axis=1)
        cost[~valid] = np.inf
        i = int(np.argmin(cost))
        if np.isfinite(cost[i]) and (best is None or cost[i] < best[0]):
            thr = 0.5 * (xs[i] + xs[i + 1])
            if thr >= xs[i + 1]:  # midpoint may round up between adjacent floats
                thr = xs[i]

            best = (float(cost[i]), int(f), float(thr))
    return best


class DecisionTreeRegressor(BaseEstimator):
    """Regression tree for scalar or vector targets.

    Parameters
    ----------
    max_depth : int or None
        Depth limit; None grows until leaves are pure or too small to split.
    min_samples_leaf : int
        Minimum rows in each child.
    max_features : float or int
        Candidate features per split: a fraction of the feature count or an
        absolute count.
    random_state : int
        Seed for the per-split feature draw.
    """

    def __init__(self, max_depth=None, min_samples_leaf=1, max_features=1.0,
                 random_state=0):
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.max_features = max_features
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        self._y_was_1d = y.ndim == 1
        y2 = y.reshape(X.shape[0], -1)
        self.n_features_in_ = X.shape[1]
        self.n_outputs_ = y2.shape[1]
        rng = rng_from(self.random_state, 0)
        m = _resolve_max_features(self.max_features, self.n_features_in_)
        min_leaf = int(self.min_samples_leaf)
        if min_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        max_depth = np.inf if self.max_depth is None else int(self.max_depth)

        feature, threshold, left, right, value = [], [], [], [], []

        def new_node():
            feature.append(_LEAF)
            threshold.append(0.0)
            left.append(_LEAF)
            right.append(_LEAF)
            value.append(None)
            return len(feature) - 1

        root = new_node()
        stack = [(root, np.arange(X.shape[0]), 0)]
        while stack:
            node, rows, depth = stack.pop()
            yn = y2[rows]
            leaf_value = yn.mean(axis=0)
            split = None
            if (
                depth < max_depth
                and rows.size >= 2 * min_leaf
                and np.any(yn.min(axis=0) < yn.max(axis=0))
            ):
                if m < self.n_features_in_:
                    cand = np.sort(rng.choice(self.n_features_in_, m, replace=False))
                else:
                    cand = np.arange(self.n_features_in_)
                split = _best_split(X[rows], yn, cand, min_leaf)
            if split is None:
                value[node] = leaf_value
                continue
            _, f, thr = split
            go_left = X[rows, f] <= thr
            feature[node] = f
            threshold[node] = thr
            left[node] = new_node()
            right[node] = new_node()
            value[node] = leaf_value  # kept for serialization symmetry
            # push right first so the left branch is built first (stable order)
            stack.append((right[node], rows[~go_left], depth + 1))
            stack.append((left[node], rows[go_left], depth + 1))

        self.feature_ = np.asarray(feature, dtype=np.int64)
        self.threshold_ = np.asarray(threshold, dtype=float)
        self.left_ = np.asarray(left, dtype=np.int64)
        self.right_ = np.asarray(right, dtype=np.int64)
        self.value_ = np.vstack([np.asarray(v, dtype=float) for v in value])
        return self

    @classmethod
    def from_arrays(cls, feature, threshold, left, right, value, params=None):
        tree = cls(**(params or {}))
        tree.feature_ = np.asarray(feature, dtype=np.int64)
        tree.threshold_ = np.asarray(threshold, dtype=float)
        tree.left_ = np.asarray(left, dtype=np.int64)
        tree.right_ = np.asarray(right, dtype=np.int64)
        tree.value_ = np.asarray(value, dtype=float)
        tree.n_features_in_ = int(tree.feature_.max() + 1) if np.any(tree.feature_ >= 0) else 1
        tree.n_outputs_ = tree.value_.shape[1]
        tree._y_was_1d = tree.n_outputs_ == 1
        return tree

    def apply(self, X):
        """Leaf index reached by each row."""
        check_is_fitted(self, "feature_")
        X = check_array(X, ndim=2, name="X")
        idx = np.zeros(X.shape[0], dtype=np.int64)
        while True:
            feat = self.feature_[idx]
            active = np.where(feat >= 0)[0]
            if active.size == 0:
                return idx
            nodes = idx[active]
            go_left = X[active, feat[active]] <= self.threshold_[nodes]
            idx[active] = np.where(go_left, self.left_[nodes], self.right_[nodes])

    def predict(self, X):
        leaves = self.apply(X)
        out = self.value_[leaves]
        return out[:, 0] if self._y_was_1d else out
