"""Least squares with day fixed effects and day-clustered standard errors."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from sklearn.base import BaseEstimator, RegressorMixin


class RankDeficient(ValueError):
    def __init__(self, columns):
        self.columns = list(columns)
        super().__init__(f"design matrix is rank deficient; dependent columns: {self.columns}")


@dataclass
class OLSResult:
    names: list
    coef: np.ndarray
    se: np.ndarray
    r2: float
    n: int
    k: int
    resid: np.ndarray = field(repr=False)
    cluster_se: np.ndarray | None = None
    n_clusters: int | None = None

    def coefficient(self, name: str) -> float:
        return float(self.coef[self.names.index(name)])

    def to_dict(self) -> dict:
        d = {"n": self.n, "k": self.k, "r2": self.r2,
             "coef": dict(zip(self.names, map(float, self.coef))),
             "se": dict(zip(self.names, map(float, self.se)))}
        if self.cluster_se is not None:
            d["cluster_se"] = dict(zip(self.names, map(float, self.cluster_se)))
            d["n_clusters"] = self.n_clusters
        return d


def design(X, names=None, *, intercept: bool = True, days=None, fixed_effects: bool = False):
    """Stack the intercept, regressors and (optionally) day dummies, first day omitted."""
    X = np.asarray(X, float)
    if X.ndim == 1:
        X = X[:, None]
    names = list(names) if names is not None else [f"x{j + 1}" for j in range(X.shape[1])]
    cols, out_names = [], []
    if intercept:
        cols.append(np.ones(X.shape[0]))
        out_names.append("const")
    cols.extend(X.T)
    out_names.extend(names)
    if fixed_effects:
        if days is None:
            raise ValueError("fixed effects need days")
        levels = sorted(set(days), key=str)
        days = np.asarray([str(d) for d in days])
        drop = 1 if intercept else 0
        for lev in levels[drop:]:
            cols.append((days == str(lev)).astype(float))
            out_names.append(f"day[{lev}]")
    return np.column_stack(cols), out_names


def ols(y, X, names=None, *, intercept: bool = True, days=None, fixed_effects: bool = False,
        cluster=None) -> OLSResult:
    """Fit by pivoted QR.

    ``cluster`` is a label per row (usually the day); the clustered variance is
    the sandwich ``(X'X)^-1 (sum_g X_g' u_g u_g' X_g) (X'X)^-1`` times
    ``G/(G-1) * (N-1)/(N-K)``.
    """
    y = np.asarray(y, float)
    Z, znames = design(X, names, intercept=intercept, days=days, fixed_effects=fixed_effects)
    n, k = Z.shape
    if n != y.shape[0]:
        raise ValueError("y and X have different lengths")
    if n <= k:
        raise RankDeficient(znames[n:] if n < k else [])
    Q, R, piv = scipy.linalg.qr(Z, mode="economic", pivoting=True)
    d = np.abs(np.diag(R))
    tol = max(n, k) * np.finfo(float).eps * (d[0] if d.size else 0.0)
    rank = int((d > tol).sum())
    if rank < k:
        raise RankDeficient([znames[j] for j in piv[rank:]])
    beta_p = scipy.linalg.solve_triangular(R, Q.T @ y)
    beta = np.empty(k)
    beta[piv] = beta_p
    resid = y - Z @ beta
    Rinv = scipy.linalg.solve_triangular(R, np.eye(k))
    bread_p = Rinv @ Rinv.T
    bread = np.empty((k, k))
    bread[np.ix_(piv, piv)] = bread_p
    rss = float(resid @ resid)
    sigma2 = rss / (n - k)
    se = np.sqrt(np.diag(bread) * sigma2)
    centered = y - y.mean() if intercept else y
    tss = float(centered @ centered)
    r2 = 1.0 - rss / tss if tss > 0 else 1.0
    res = OLSResult(names=znames, coef=beta, se=se, r2=r2, n=n, k=k, resid=resid)
    if cluster is not None:
        res.cluster_se, res.n_clusters = _cluster_se(Z, resid, bread, cluster)
    return res


def _cluster_se(Z, resid, bread, cluster):
    labels = np.asarray([str(c) for c in cluster])
    n, k = Z.shape
    groups = np.unique(labels)
    G = groups.size
    if G < 2:
        raise ValueError("clustered standard errors need at least two clusters")
    meat = np.zeros((k, k))
    for g in groups:
        s = Z[labels == g].T @ resid[labels == g]
        meat += np.outer(s, s)
    scale = G / (G - 1) * (n - 1) / (n - k)
    V = bread @ meat @ bread * scale
    return np.sqrt(np.diag(V)), int(G)


class OLSRegressor(RegressorMixin, BaseEstimator):
    """scikit-learn front end for :func:`ols`.

    ``fit(X, y, days=...)`` adds day fixed effects when ``fixed_effects`` is set
    and clusters by day when ``cluster_by_day`` is set.  ``predict`` uses the
    slope coefficients and intercept only (no day effects).
    """

    def __init__(self, fit_intercept: bool = True, fixed_effects: bool = False, cluster_by_day: bool = False):
        self.fit_intercept = fit_intercept
        self.fixed_effects = fixed_effects
        self.cluster_by_day = cluster_by_day

    def fit(self, X, y, days=None):
        X = np.asarray(X, float)
        if X.ndim == 1:
            X = X[:, None]
        if (self.fixed_effects or self.cluster_by_day) and days is None:
            raise ValueError("days are required for fixed effects or clustering")
        res = ols(y, X, intercept=self.fit_intercept, days=days, fixed_effects=self.fixed_effects,
                  cluster=days if self.cluster_by_day else None)
        p = X.shape[1]
        off = 1 if self.fit_intercept else 0
        self.result_ = res
        self.n_features_in_ = p
        self.intercept_ = float(res.coef[0]) if self.fit_intercept else 0.0
        self.coef_ = res.coef[off:off + p].copy()
        self.bse_ = res.se[off:off + p].copy()
        return self

    def predict(self, X):
        X = np.asarray(X, float)
        if X.ndim == 1:
            X = X[:, None]
        return self.intercept_ + X @ self.coef_
