"""Downstream task harness: Lasso regression with K-fold CV, K-means
clustering, and partition-agreement metrics (NMI, adjusted Rand index)."""

from __future__ import annotations

from dataclasses import dataclass
from math import comb, log as _ln

import numpy as np

__all__ = [
    "LassoFit",
    "RegressionReport",
    "ClusteringReport",
    "lasso_lambda_max",
    "lasso_fit",
    "kfold_regress",
    "KMeansResult",
    "kmeans",
    "nmi",
    "ari",
    "clustering_report",
]


@dataclass
class LassoFit:
    coef: np.ndarray  # original feature scale
    intercept: float
    coef_std: np.ndarray  # solution of the standardized problem
    mean: np.ndarray
    scale: np.ndarray
    l1_weight: float
    sweeps: int

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(X, dtype=np.float64) @ self.coef + self.intercept


@dataclass
class RegressionReport:
    task: str
    mae: float
    rmse: float
    r2: float
    l1_weight: float
    folds: int

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "metrics": {"mae": self.mae, "rmse": self.rmse, "r2": self.r2},
            "l1_weight": self.l1_weight,
            "folds": self.folds,
        }


@dataclass
class ClusteringReport:
    task: str
    clusters: int
    nmi: float
    ari: float
    assignments: np.ndarray

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "metrics": {"nmi": self.nmi, "ari": self.ari},
            "clusters": self.clusters,
            "assignments": [int(a) for a in self.assignments],
        }


def _standardize(X: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale = np.where(scale > 0, scale, 1.0)  # constant columns stay zero
    return (X - mean) / scale, mean, scale


def lasso_lambda_max(X: np.ndarray, y: np.ndarray) -> float:
    """Smallest l1 weight at which the lasso solution is identically zero."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    Z, _, _ = _standardize(X)
    yc = y - y.mean()
    return float(np.abs(Z.T @ yc).max() / X.shape[0])


def lasso_fit(
    X: np.ndarray,
    y: np.ndarray,
    l1_weight: float,
    tol: float = 1e-7,
    max_sweeps: int = 10_000,
) -> LassoFit:
    """Coordinate descent for (1/2N)||y - Xw - b||^2 + l1_weight*||w||_1.

    Features are standardized internally (constant columns get coefficient
    0); sweeps stop when the largest coefficient change falls below tol.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise ValueError("X must be N x p and y length N")
    if X.shape[1] < 1:
        raise ValueError("need at least one feature")
    if not (np.isfinite(X).all() and np.isfinite(y).all()):
        raise ValueError("lasso_fit requires finite inputs")
    if l1_weight < 0:
        raise ValueError("l1 weight must be non-negative")
    n, p = X.shape
    Z, mean, scale = _standardize(X)
    yc = y - y.mean()
    col_sq = (Z * Z).sum(axis=0)
    w = np.zeros(p)
    resid = yc.copy()
    thresh = n * l1_weight
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        max_delta = 0.0
        for j in range(p):
            if col_sq[j] == 0.0:
                continue
            old = w[j]
            if old != 0.0:
                resid += Z[:, j] * old
            rho = Z[:, j] @ resid
            new = np.sign(rho) * max(abs(rho) - thresh, 0.0) / col_sq[j]
            if new != 0.0:
                resid -= Z[:, j] * new
            w[j] = new
            max_delta = max(max_delta, abs(new - old))
        if max_delta <= tol:
            break
    coef = w / scale
    intercept = float(y.mean() - mean @ coef)
    return LassoFit(coef, intercept, w, mean, scale, l1_weight, sweeps)


def _fold_metrics(y_true: np.ndarray, y_pred: np.ndarray) -> tuple[float, float, float]:
    err = y_true - y_pred
    mae = float(np.abs(err).mean())
    rmse = float(np.sqrt((err * err).mean()))
    ss_res = float((err * err).sum())
    centered = y_true - y_true.mean()
    ss_tot = float((centered * centered).sum())
    r2 = 0.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return mae, rmse, r2


def kfold_regress(
    X: np.ndarray,
    y: np.ndarray,
    k: int = 5,
    l1_grid: np.ndarray | None = None,
    seed: int = 0,
    task: str = "regression",
) -> RegressionReport:
    """Grid-search the l1 weight on validation MAE over deterministic folds
    and report the chosen weight's mean test-fold MAE/RMSE/R^2."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = X.shape[0]
    if k < 2:
        raise ValueError("need at least 2 folds")
    if k > n:
        raise ValueError(f"cannot split {n} samples into {k} folds")
    if l1_grid is None:
        lam_max = max(lasso_lambda_max(X, y), 1e-12)
        l1_grid = np.geomspace(1e-4 * lam_max, lam_max, 20)
    order = np.random.default_rng(seed).permutation(n)
    folds = np.array_split(order, k)
    results = []  # (mean_mae, mean_rmse, mean_r2) per grid point
    for lam in l1_grid:
        maes, rmses, r2s = [], [], []
        for test_idx in folds:
            train_idx = np.setdiff1d(order, test_idx, assume_unique=True)
            fit = lasso_fit(X[train_idx], y[train_idx], float(lam))
            mae, rmse, r2 = _fold_metrics(y[test_idx], fit.predict(X[test_idx]))
            maes.append(mae)
            rmses.append(rmse)
            r2s.append(r2)
        results.append((float(np.mean(maes)), float(np.mean(rmses)), float(np.mean(r2s))))
    best = min(range(len(l1_grid)), key=lambda i: results[i][0])
    mae, rmse, r2 = results[best]
    return RegressionReport(
        task=task, mae=mae, rmse=rmse, r2=r2, l1_weight=float(l1_grid[best]), folds=k
    )


@dataclass
class KMeansResult:
    assignments: np.ndarray
    centers: np.ndarray
    inertia: float
    iterations: int


def _plus_plus_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    d2 = ((X - centers[0]) ** 2).sum(axis=1)
    for c in range(1, k):
        total = d2.sum()
        if total == 0.0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centers[c] = X[idx]
        d2 = np.minimum(d2, ((X - centers[c]) ** 2).sum(axis=1))
    return centers


def kmeans(X: np.ndarray, k: int, seed: int = 0, max_iter: int = 300) -> KMeansResult:
    """Lloyd iterations from a k-means++ start, deterministic per seed.

    Runs until the assignments stop changing or max_iter; an emptied cluster
    is re-seeded to the point farthest from its current center.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("X must be N x p")
    n = X.shape[0]
    if k <= 0:
        raise ValueError("k must be positive")
    if k > n:
        raise ValueError(f"cannot form {k} clusters from {n} points")
    rng = np.random.default_rng(seed)
    centers = _plus_plus_init(X, k, rng)
    assign = np.full(n, -1)
    iterations = 0
    for iterations in range(1, max_iter + 1):
        d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_assign = d2.argmin(axis=1)
        for c in range(k):
            if not (new_assign == c).any():
                far = int(d2[np.arange(n), new_assign].argmax())
                centers[c] = X[far]
                new_assign[far] = c
        if (new_assign == assign).all():
            break
        assign = new_assign
        for c in range(k):
            members = X[assign == c]
            if members.shape[0]:
                centers[c] = members.mean(axis=0)
    inertia = float(((X - centers[assign]) ** 2).sum())
    return KMeansResult(assign, centers, inertia, iterations)


def _contingency(a, b) -> tuple[dict, dict, dict, int]:
    a = list(a)
    b = list(b)
    if len(a) != len(b):
        raise ValueError(f"label length mismatch: {len(a)} vs {len(b)}")
    if not a:
        raise ValueError("empty labelings")
    na: dict = {}
    nb: dict = {}
    nab: dict = {}
    for x, y in zip(a, b):
        na[x] = na.get(x, 0) + 1
        nb[y] = nb.get(y, 0) + 1
        nab[(x, y)] = nab.get((x, y), 0) + 1
    return na, nb, nab, len(a)


def nmi(a, b) -> float:
    """Normalized mutual information with arithmetic-mean normalization.

    Exactly 1.0 for identical partitions (including the all-one-cluster
    case); 0.0 when one side has zero entropy and the other does not.
    """
    na, nb, nab, n = _contingency(a, b)
    # identical expression for entropy and the diagonal MI terms keeps
    # identical partitions at exactly 1.0
    h_a = sum((c / n) * _ln((n * c) / (c * c)) for _, c in sorted(na.items()))
    h_b = sum((c / n) * _ln((n * c) / (c * c)) for _, c in sorted(nb.items()))
    if len(na) == 1 and len(nb) == 1:
        return 1.0
    if h_a == 0.0 or h_b == 0.0:
        return 0.0
    mi = sum(
        (nij / n) * _ln((n * nij) / (na[x] * nb[y]))
        for (x, y), nij in sorted(nab.items())
    )
    return mi / ((h_a + h_b) / 2.0)


def ari(a, b) -> float:
    """Adjusted Rand index from exact pair counts; 1.0 for identical
    partitions, ~0 for independent ones, and 1.0 in the degenerate case
    where both index terms coincide with their expectation."""
    na, nb, nab, n = _contingency(a, b)
    index = sum(comb(c, 2) for c in nab.values())
    sum_a = sum(comb(c, 2) for c in na.values())
    sum_b = sum(comb(c, 2) for c in nb.values())
    total = comb(n, 2)
    # scale by 2*total to stay in exact integers
    num = 2 * (total * index - sum_a * sum_b)
    den = total * (sum_a + sum_b) - 2 * sum_a * sum_b
    if den == 0:
        return 1.0
    return num / den


def clustering_report(
    features: np.ndarray,
    labels: np.ndarray,
    k: int,
    seed: int = 0,
    task: str = "landuse",
) -> ClusteringReport:
    result = kmeans(features, k, seed=seed)
    return ClusteringReport(
        task=task,
        clusters=k,
        nmi=nmi(labels, result.assignments),
        ari=ari(labels, result.assignments),
        assignments=result.assignments,
    )
