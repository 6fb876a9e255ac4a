"""Which swaps could have been sandwiched profitably given their slippage bound."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from ..amm import PoolState, VictimOrder, best_frontrun
from .events import SwapEvent

FRONTRUNNABLE = "frontrunnable"
NOT_FRONTRUNNABLE = "not_frontrunnable"
UNCLASSIFIABLE = "unclassifiable"


@dataclass(frozen=True)
class Classification:
    key: tuple[int, int]
    status: str
    revenue_opt: float | None = None
    x_opt: float | None = None
    x_max: float | None = None
    revenue_at_max: float | None = None
    reason: str | None = None

    @property
    def frontrunnable(self) -> bool:
        return self.status == FRONTRUNNABLE

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def classify_one(r1: float, r2: float, v: float, m: float, variant: str = "verbatim"):
    res = best_frontrun(PoolState(r1, r2), VictimOrder(v, m), variant)
    return res


def classify_frontrunnable(events: Iterable[SwapEvent], variant: str = "verbatim") -> list[Classification]:
    """Frontrunnable iff the revenue-optimal sandwich earns a positive revenue.

    Events without reserves or a slippage bound are reported unclassifiable.
    """
    out = []
    for e in events:
        if e.reserves_before is None or e.min_output is None:
            out.append(Classification(e.key, UNCLASSIFIABLE, reason="missing reserves or min_output"))
            continue
        try:
            res = classify_one(e.reserves_before[0], e.reserves_before[1], e.input_amount, e.min_output, variant)
        except ValueError as exc:
            out.append(Classification(e.key, UNCLASSIFIABLE, reason=str(exc)))
            continue
        status = FRONTRUNNABLE if res.revenue_opt > 0 else NOT_FRONTRUNNABLE
        out.append(Classification(e.key, status, res.revenue_opt, res.x_opt, res.x_max, res.revenue_at_max))
    return out


class FrontrunnableClassifier(ClassifierMixin, BaseEstimator):
    """Rows ``(r1, r2, v, m)`` in, frontrunnable flag out.

    Nothing is learned; ``fit`` only records the label set so the estimator
    plugs into scikit-learn pipelines and scoring.
    """

    def __init__(self, variant: str = "verbatim"):
        self.variant = variant

    def fit(self, X, y=None):
        X = np.asarray(X, float)
        if X.ndim != 2 or X.shape[1] != 4:
            raise ValueError("X must have columns (r1, r2, v, m)")
        self.classes_ = np.array([False, True])
        self.n_features_in_ = 4
        return self

    def decision_function(self, X) -> np.ndarray:
        X = np.asarray(X, float)
        return np.array([classify_one(*row, variant=self.variant).revenue_opt for row in X])

    def predict(self, X) -> np.ndarray:
        return self.decision_function(X) > 0
