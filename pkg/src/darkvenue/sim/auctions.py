"""Ascending lit auction with a random deadline and the sealed first-price dark auction."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


def rounds_from_uniform(u, lam: float):
    """Geometric(lam) on {1, 2, ...} by inversion."""
    if not 0.0 < lam <= 1.0:
        raise ValueError(f"lambda={lam} outside (0, 1]; the deadline would never arrive")
    u = np.asarray(u, dtype=float)
    if lam == 1.0:
        out = np.ones(u.shape, dtype=np.int64)
    else:
        # 1 - u lies in (0, 1] so the log is finite
        with np.errstate(divide="ignore"):
            k = np.floor(np.log1p(-u) / math.log1p(-lam))
        out = 1 + np.minimum(k, 2**62).astype(np.int64)
    return int(out) if out.ndim == 0 else out


def sample_auction_rounds(rng: np.random.Generator, lam: float, size=None):
    return rounds_from_uniform(rng.random(size), lam)


@dataclass
class LitAuctionState:
    rounds_total: int
    first_mover: int | None = None
    current_high_bid: float | None = None
    holder: int | None = None
    standing: dict = field(default_factory=dict)
    bid_history: list = field(default_factory=list)

    @property
    def mover_sequence(self) -> list[int]:
        return [who for _, who, _ in self.bid_history]


def _next_bid(rule, posted: bool, high: float | None, holder: int | None, me: int,
              opening: float, eps: float, cap: float) -> float | None:
    """What bidder ``me`` posts on its turn, or None to pass."""
    if holder == me:
        return None
    if rule == "escalate":
        bid = opening if high is None else high + eps
        # tolerate rounding in the accumulated increments
        return bid if bid <= cap + 1e-9 * max(1.0, abs(cap)) else None
    if posted:
        return None
    fee = float(rule)
    if high is None or fee >= high + eps - 1e-12:
        return fee
    return None


def run_lit_auction(bidders, rules, rounds: int, first_mover: int, *, opening: float,
                    eps: float, cap: float) -> LitAuctionState:
    """Alternating-move ascending auction truncated after ``rounds`` moves.

    ``bidders`` lists the participating arbitrageur ids (0, 1 or 2 of them),
    ``rules`` maps id to ``"escalate"`` or a fixed fee, ``first_mover`` must be
    one of ``bidders``.
    """
    st = LitAuctionState(rounds_total=int(rounds))
    bidders = list(bidders)
    if not bidders:
        return st
    if first_mover not in bidders:
        raise ValueError("first mover must be a bidder")
    order = [first_mover] + [b for b in bidders if b != first_mover]
    st.first_mover = first_mover
    posted = {b: False for b in order}
    idle = 0
    for t in range(int(rounds)):
        me = order[t % len(order)]
        bid = _next_bid(rules[me], posted[me], st.current_high_bid, st.holder, me, opening, eps, cap)
        if bid is None:
            idle += 1
            if idle >= len(order) and t >= len(order) - 1:
                break
            continue
        idle = 0
        posted[me] = True
        st.current_high_bid, st.holder = bid, me
        st.standing[me] = bid
        st.bid_history.append((t + 1, me, bid))
    return st


def lit_auction_vec(part1, part2, rule1, rule2, rounds, first, *, opening: float, eps: float, cap: float):
    """Vectorized :func:`run_lit_auction` for arbitrageurs 0 and 1.

    ``part1``/``part2`` flag participation, ``first`` is the first mover (0/1).
    Returns standing bids (nan when none was posted) and the high-bid holder (-1 if none).
    """
    part = [np.asarray(part1, bool), np.asarray(part2, bool)]
    n = part[0].shape[0]
    out_standing = [np.full(n, np.nan), np.full(n, np.nan)]
    out_holder = np.full(n, -1, np.int64)
    rows = np.flatnonzero(part[0] | part[1])
    if rows.size == 0:
        return out_standing[0], out_standing[1], out_holder
    # work on the participating rows only, shrinking as auctions end
    rounds = np.asarray(rounds, np.int64)[rows]
    p0, p1 = part[0][rows], part[1][rows]
    both = p0 & p1
    first = np.where(both, np.asarray(first, np.int64)[rows], np.where(p0, 0, 1))
    rules = (rule1, rule2)
    k = rows.size
    high = np.full(k, np.nan)
    holder = np.full(k, -1, np.int64)
    standing = [np.full(k, np.nan), np.full(k, np.nan)]
    posted = [np.zeros(k, bool), np.zeros(k, bool)]
    idle = np.zeros(k, np.int64)
    live = np.ones(k, bool)
    tol = 1e-9 * max(1.0, abs(cap))

    def flush(mask):
        idx = rows[mask]
        out_holder[idx] = holder[mask]
        out_standing[0][idx] = standing[0][mask]
        out_standing[1][idx] = standing[1][mask]

    t = 0
    while live.any():
        if live.sum() * 2 < live.size:
            flush(~live)
            keep = live.copy()
            rows, rounds, both, first, high, holder, idle, live = (
                a[keep] for a in (rows, rounds, both, first, high, holder, idle, live))
            standing = [x[keep] for x in standing]
            posted = [x[keep] for x in posted]
            k = rows.size
        me = np.where(both, (first + t) % 2, first)
        for j in (0, 1):
            act = live & (me == j) & (t < rounds)
            if not act.any():
                continue
            rule = rules[j]
            mine = holder == j
            if rule == "escalate":
                bid = np.where(np.isnan(high), opening, high + eps)
                ok = act & ~mine & (bid <= cap + tol)
            else:
                fee = float(rule)
                bid = np.full(k, fee)
                ok = act & ~mine & ~posted[j] & (np.isnan(high) | (fee >= high + eps - 1e-12))
            high = np.where(ok, bid, high)
            holder = np.where(ok, j, holder)
            standing[j] = np.where(ok, bid, standing[j])
            posted[j] |= ok
            idle = np.where(ok, 0, np.where(act, idle + 1, idle))
        t += 1
        nb = np.where(both, 2, 1)
        live = (t < rounds) & ~((idle >= nb) & (t >= nb))
    flush(np.ones(rows.size, bool))
    return out_standing[0], out_standing[1], out_holder


def run_dark_auction(bids: dict, u: float):
    """Sealed first-price auction; ties split by the uniform ``u``.

    Returns ``(winner, price)`` or ``(None, None)`` with no bids.
    """
    if not bids:
        return None, None
    top = max(bids.values())
    tied = sorted(k for k, b in bids.items() if b == top)
    winner = tied[min(int(u * len(tied)), len(tied) - 1)]
    return winner, top
