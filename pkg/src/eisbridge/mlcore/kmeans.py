"""Lloyd's k-means with k-means++ seeding.

Implemented directly on numpy; deterministic for a given seed, ties broken
toward the lowest index throughout so results do not depend on iteration
order.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from ..base import BaseEstimator
from ..exceptions import TooFewPointsError
from ..validation import check_array, check_is_fitted, rng_from


class KMeansResult(NamedTuple):
    centers: np.ndarray       # (k, d)
    assignments: np.ndarray   # (n,) int cluster index per point
    inertia: float            # sum of squared distances to assigned centers
    iterations: int


def _sq_dists(X, centers):
    # (n, k) squared euclidean distances
    diff = X[:, None, :] - centers[None, :, :]
    return np.einsum("nkd,nkd->nk", diff, diff)


def _plus_plus_init(X, k, rng):
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    d2 = np.sum((X - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            # all remaining mass on already-chosen points; reuse uniform draw
            idx = rng.integers(n)
        else:
            r = rng.random() * total
            idx = int(np.searchsorted(np.cumsum(d2), r, side="right"))
            idx = min(idx, n - 1)
        centers[j] = X[idx]
        d2 = np.minimum(d2, np.sum((X - centers[j]) ** 2, axis=1))
    return centers


class KMeans(BaseEstimator):
    """k-means clustering estimator.

    Parameters
    ----------
    n_clusters : int
        Number of clusters; must not exceed the number of distinct points.
    max_iter : int
        Upper bound on Lloyd iterations.
    tol : float
        Convergence threshold on the largest center movement per iteration.
    random_state : int
        Seed for the k-means++ initialization.
    """

    def __init__(self, n_clusters=2, max_iter=300, tol=1e-6, random_state=0):
        self.n_clusters = n_clusters
        self.max_iter = max_iter
        self.tol = tol
        self.random_state = random_state

    def fit(self, X):
        X = check_array(X, ndim=2, name="X")
        k = int(self.n_clusters)
        if k < 1:
            raise ValueError("n_clusters must be >= 1")
        n_distinct = np.unique(X, axis=0).shape[0]
        if k > n_distinct:
            raise TooFewPointsError(
                f"n_clusters={k} exceeds the {n_distinct} distinct point(s)"
            )
        rng = rng_from(self.random_state, 0)
        centers = _plus_plus_init(X, k, rng)

        inertia_path = []
        labels = np.zeros(X.shape[0], dtype=int)
        n_iter = 0
        for n_iter in range(1, int(self.max_iter) + 1):
            d2 = _sq_dists(X, centers)
            labels = np.argmin(d2, axis=1)
            inertia_path.append(float(d2[np.arange(X.shape[0]), labels].sum()))
            new_centers = centers.copy()
            for j in range(k):
                mask = labels == j
                if np.any(mask):
                    new_centers[j] = X[mask].mean(axis=0)
                else:
                    # relocate an empty cluster to the worst-fit point
                    worst = int(np.argmax(d2[np.arange(X.shape[0]), labels]))
                    new_centers[j] = X[worst]
            shift = float(np.max(np.sqrt(np.sum((new_centers - centers) ** 2, axis=1))))
            centers = new_centers
            if shift < float(self.tol):
                break

        # final assignment against the converged centers
        d2 = _sq_dists(X, centers)
        labels = np.argmin(d2, axis=1)
        self.cluster_centers_ = centers
        self.labels_ = labels
        self.inertia_ = float(d2[np.arange(X.shape[0]), labels].sum())
        self.inertia_path_ = inertia_path
        self.n_iter_ = n_iter
        return self

    def predict(self, X):
        check_is_fitted(self, "cluster_centers_")
        X = check_array(X, ndim=2, name="X")
        return np.argmin(_sq_dists(X, self.cluster_centers_), axis=1)


def kmeans(points, k, *, seed=0, max_iter=300, tol=1e-6) -> KMeansResult:
    """Functional wrapper around :class:`KMeans`."""
    est = KMeans(n_clusters=k, max_iter=max_iter, tol=tol, random_state=seed).fit(points)
    return KMeansResult(
        centers=est.cluster_centers_,
        assignments=est.labels_,
        inertia=est.inertia_,
        iterations=est.n_iter_,
    )
