"""Daily frontrunning statistics and Table-style summaries."""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .arbitrage import ArbitrageMatch, unique_pairs
from .events import SwapEvent
from .frontrunnable import Classification

DENOMINATORS = ("lit", "all")


class EmptyInput(ValueError):
    pass


@dataclass(frozen=True)
class DailyStats:
    day: object
    n_events: int
    n_frontrunnable: int
    n_frontrunnable_dark: int
    n_frontrun: int
    n_arbitrages: int
    frontrun_probability: float | None
    dark_proportion: float | None
    cost_to_revenue_lit: float | None
    cost_to_revenue_dark: float | None

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["day"] = None if self.day is None else str(self.day)
        return d


def _ratio(num: int, den: int) -> float | None:
    return num / den if den else None


def _mean(xs: list) -> float | None:
    return float(np.mean(xs)) if xs else None


def daily_series(events: Sequence[SwapEvent], matches: Iterable[ArbitrageMatch],
                 classifications: Iterable[Classification], *, denominator: str = "lit") -> list[DailyStats]:
    """Per-day frontrun probability, dark share and cost-to-revenue ratios.

    The frontrun probability is frontrun / frontrunnable swaps of the day.  With
    ``denominator="lit"`` (default) dark-tagged swaps are left out of both
    counts since they cannot be frontrun; ``"all"`` keeps them in the
    denominator.  Ratios with a zero denominator are ``None``.
    """
    if denominator not in DENOMINATORS:
        raise ValueError(f"denominator must be one of {DENOMINATORS}")
    matches = list(matches)
    status = {c.key: c for c in classifications}
    victims = {m.victim.key for m in matches}
    by_day = defaultdict(list)
    for e in events:
        by_day[e.day].append(e)
    pairs_by_day = defaultdict(list)
    for m in unique_pairs(matches):
        pairs_by_day[m.front.day].append(m)

    out = []
    for day in sorted(by_day, key=lambda d: (d is None, d or "")):
        evs = by_day[day]
        fr = [e for e in evs if e.key in status and status[e.key].frontrunnable]
        dark = [e for e in fr if e.is_dark]
        den = [e for e in fr if not e.is_dark] if denominator == "lit" else fr
        hit = [e for e in den if e.key in victims]
        ctr = {"lit": [], "dark": []}
        for m in pairs_by_day.get(day, []):
            r = m.cost_to_revenue
            if r is not None:
                ctr["dark" if m.front.is_dark else "lit"].append(r)
        out.append(DailyStats(
            day=day, n_events=len(evs), n_frontrunnable=len(fr), n_frontrunnable_dark=len(dark),
            n_frontrun=len(hit), n_arbitrages=len(pairs_by_day.get(day, [])),
            frontrun_probability=_ratio(len(hit), len(den)), dark_proportion=_ratio(len(dark), len(fr)),
            cost_to_revenue_lit=_mean(ctr["lit"]), cost_to_revenue_dark=_mean(ctr["dark"]),
        ))
    return out


@dataclass(frozen=True)
class Summary:
    n: int
    mean: float
    sd: float
    p10: float
    p50: float
    p90: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def nearest_rank(sorted_values: np.ndarray, pct: float) -> float:
    """Smallest value with at least ``pct`` percent of the data at or below it."""
    n = len(sorted_values)
    rank = max(1, math.ceil(pct / 100.0 * n))
    return float(sorted_values[rank - 1])


def summary_table(values) -> Summary:
    """N, mean, sample SD (ddof=1, 0 for a single value) and nearest-rank percentiles."""
    x = np.asarray([v for v in values if v is not None], float)
    if x.size == 0:
        raise EmptyInput("summary of an empty vector")
    s = np.sort(x)
    sd = float(np.std(x, ddof=1)) if x.size > 1 else 0.0
    return Summary(n=int(x.size), mean=float(x.mean()), sd=sd,
                   p10=nearest_rank(s, 10), p50=nearest_rank(s, 50), p90=nearest_rank(s, 90))
