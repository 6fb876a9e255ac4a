"""Identification of insertion (sandwich) arbitrages in a swap stream.

A front leg and a back leg form an arbitrage when they sit in the same block
and pool, trade in opposite directions, the back leg sells exactly what the
front leg bought, and at least one swap in the front leg's direction executes
between them.  Every back leg is paired with at most one front leg.
"""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable

from .events import SwapEvent, check_unique


@dataclass(frozen=True)
class ArbitrageMatch:
    front: SwapEvent
    victim: SwapEvent
    back: SwapEvent

    @property
    def revenue(self) -> float:
        return self.back.output_amount - self.front.input_amount

    @property
    def gas(self) -> float:
        return self.front.gas_fee + self.back.gas_fee

    @property
    def profit(self) -> float:
        return self.revenue - self.gas

    @property
    def cost_to_revenue(self) -> float | None:
        return self.gas / self.revenue if self.revenue > 0 else None

    @property
    def legs(self) -> tuple:
        return (self.front.key, self.back.key)

    def to_row(self) -> dict:
        return {
            "block_number": self.front.block_number, "pool_id": self.front.pool_id,
            "front_index": self.front.tx_index, "victim_index": self.victim.tx_index,
            "back_index": self.back.tx_index, "front_hash": self.front.tx_hash,
            "victim_hash": self.victim.tx_hash, "back_hash": self.back.tx_hash,
            "revenue": self.revenue, "profit": self.profit, "cost_to_revenue": self.cost_to_revenue,
        }


def _same_amount(a: float, b: float, rel_tol: float | None) -> bool:
    if rel_tol is None:
        return a == b
    return math.isclose(a, b, rel_tol=rel_tol, abs_tol=0.0)


def _match_group(group: list[SwapEvent], rel_tol: float | None) -> list[ArbitrageMatch]:
    pairs = []  # (front position, back position)
    open_fronts: list[int] = []
    used = set()
    for j, ev in enumerate(group):
        hit = None
        for i in open_fronts:
            f = group[i]
            if f.direction == ev.direction or not _same_amount(f.output_amount, ev.input_amount, rel_tol):
                continue
            if any(group[k].direction == f.direction for k in range(i + 1, j)):
                hit = i
                break
        if hit is not None:
            open_fronts.remove(hit)
            pairs.append((hit, j))
            used.update((hit, j))
        else:
            open_fronts.append(j)

    out = []
    for i, j in pairs:
        f, b = group[i], group[j]
        for k in range(i + 1, j):
            if k not in used and group[k].direction == f.direction:
                out.append(ArbitrageMatch(f, group[k], b))
    return out


def identify_arbitrages(events: Iterable[SwapEvent], *, rel_tol: float | None = None) -> list[ArbitrageMatch]:
    """All sandwich matches, one row per victim, in (block, front, victim) order.

    ``rel_tol`` relaxes the exact equality between the front leg's output and
    the back leg's input (off by default).
    """
    events = list(events)
    check_unique(events)
    groups: dict = defaultdict(list)
    for e in sorted(events, key=lambda e: e.key):
        groups[(e.block_number, e.pool_id)].append(e)
    out = []
    for key in sorted(groups, key=lambda k: (k[0], str(k[1]))):
        out.extend(_match_group(groups[key], rel_tol))
    out.sort(key=lambda m: (m.front.block_number, m.front.tx_index, m.victim.tx_index))
    return out


def unique_pairs(matches: Iterable[ArbitrageMatch]) -> list[ArbitrageMatch]:
    """One match per (front, back) pair, so revenue is not counted once per victim."""
    seen = {}
    for m in matches:
        seen.setdefault(m.legs, m)
    return list(seen.values())
