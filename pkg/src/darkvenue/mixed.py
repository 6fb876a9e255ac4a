"""Equilibrium fee distribution when both arbitrageurs bid only in the dark venue.

Each arbitrageur bids ``g`` on ``[v, v + p*(c - v)]`` (``v = v(B-2)``) with CDF

    F(g) = (1-p)/p * (g - v) / (c - g)

which leaves any bid in the support earning ``(1-p)*(c - v)`` against a rival
who detects with probability ``p``.
"""
from __future__ import annotations

import numpy as np

from .model import ModelParams


class DegenerateSupport(ValueError):
    pass


def _spread(params: ModelParams) -> tuple[float, float]:
    floor, c = params.vb2, params.c
    if c == floor:
        raise DegenerateSupport("c equals v(B-2); the fee distribution collapses to a point")
    return floor, c - floor


def support(params: ModelParams) -> tuple[float, float]:
    floor, spread = _spread(params)
    return floor, floor + params.p * spread


def density(g, params: ModelParams):
    floor, spread = _spread(params)
    p = params.p
    if p == 0:
        raise DegenerateSupport("p = 0: the fee distribution is a point mass at v(B-2)")
    g = np.asarray(g, dtype=float)
    lo, hi = floor, floor + p * spread
    inside = (g >= lo) & (g <= hi)
    u = np.where(inside, (g - floor) / spread, 0.0)
    val = (1 - p) / p / ((1 - u) ** 2 * spread)
    out = np.where(inside, val, 0.0)
    return float(out) if out.ndim == 0 else out


def cdf(g, params: ModelParams):
    floor, spread = _spread(params)
    p, c = params.p, params.c
    g = np.asarray(g, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        raw = (1 - p) / p * (g - floor) / (c - g)
    out = np.where(g < floor, 0.0, np.where(g >= floor + p * spread, 1.0, np.clip(raw, 0.0, 1.0)))
    return float(out) if out.ndim == 0 else out


def ppf(u, params: ModelParams):
    """Inverse CDF; ``u`` in [0, 1]."""
    floor, spread = _spread(params)
    p = params.p
    u = np.asarray(u, dtype=float)
    if p == 0:
        out = np.full_like(u, floor)
    else:
        a = (1 - p) / p
        with np.errstate(divide="ignore", invalid="ignore"):
            out = floor + spread * np.where(u > 0, u / (a + u), 0.0)
    return float(out) if out.ndim == 0 else out


def sample_mixed_fee(rng: np.random.Generator, params: ModelParams, size=None):
    return ppf(rng.random(size), params)


def mean_fee(params: ModelParams) -> float:
    """Closed-form mean of the fee distribution."""
    floor, spread = _spread(params)
    p = params.p
    if p == 1:
        return params.c
    a = (1 - p) / p
    # E[g] = floor + spread * (1 - a*ln((1+a)/a))
    return floor + spread * (1 - a * np.log((1 + a) / a))
