"""Synthetic swap corpora with planted sandwiches and near-miss distractors.

Each planted sandwich and each distractor lives in its own pool, so ground
truth is known by construction.  Distractor kinds each break exactly one
matching condition:

``next_block``      back leg lands in the following block
``other_pool``      the only in-between swap trades in another pool
``same_direction``  back leg trades in the front leg's direction
``amount_mismatch`` back leg sells slightly more than the front leg bought
``victim_after``    the same-direction swap executes after the back leg
``second_back``     a valid sandwich followed by a second back leg for the same front
"""
from __future__ import annotations

import datetime as dt
from dataclasses import dataclass

import numpy as np

from ..amm import PoolState, swap_output
from .events import IN_OUT, OUT_IN, SwapEvent

DISTRACTOR_KINDS = ("next_block", "other_pool", "same_direction", "amount_mismatch", "victim_after", "second_back")
EPOCH = dt.date(2021, 1, 1)


@dataclass
class Corpus:
    events: list
    truth: set  # (block, front_index, victim_index, back_index)
    n_sandwiches: int
    n_distractors: dict


def _amount(rng) -> float:
    return float(rng.lognormal(3.0, 1.5))


def _unit_sandwich(rng, pool, n_victims, extra_back=False):
    a = _amount(rng)
    b = _amount(rng)
    evs = [("front", 0, pool, IN_OUT, a, b)]
    for _ in range(n_victims):
        evs.append(("victim", 0, pool, IN_OUT, _amount(rng), _amount(rng)))
    evs.append(("back", 0, pool, OUT_IN, b, a * (1 + rng.uniform(0.001, 0.05))))
    if extra_back:
        evs.append(("noise", 0, pool, OUT_IN, b, a * 1.01))
    return evs


def _unit_distractor(rng, kind, pool, other_pool):
    a, b = _amount(rng), _amount(rng)
    front = ("noise", 0, pool, IN_OUT, a, b)
    victim = ("noise", 0, pool, IN_OUT, _amount(rng), _amount(rng))
    back = ("noise", 0, pool, OUT_IN, b, a * 1.02)
    if kind == "next_block":
        return [front, victim, ("noise", 1, pool, OUT_IN, b, a * 1.02)]
    if kind == "other_pool":
        return [front, ("noise", 0, other_pool, IN_OUT, _amount(rng), _amount(rng)), back]
    if kind == "same_direction":
        return [front, victim, ("noise", 0, pool, IN_OUT, b, a * 1.02)]
    if kind == "amount_mismatch":
        return [front, victim, ("noise", 0, pool, OUT_IN, b * (1 + 1e-6), a * 1.02)]
    if kind == "victim_after":
        return [front, back, victim]
    raise ValueError(kind)


def generate_corpus(n_events: int = 100_000, n_sandwiches: int = 1_000, seed: int = 0, *,
                    distractors_per_kind: int | None = None, blocks_per_day: int = 500,
                    events_per_block: int = 100, dark_share: float = 0.2,
                    with_reserves: bool = False) -> Corpus:
    """Build a corpus of about ``n_events`` swaps (exactly, when there is room for background).

    With ``with_reserves`` every swap also gets pre-trade reserves and a
    slippage bound (victims loose, others mostly tight) so it can be classified.
    """
    rng = np.random.default_rng(seed)
    per_kind = n_sandwiches // 4 if distractors_per_kind is None else distractors_per_kind
    units = []  # lists of event templates
    pid = 0

    def new_pool():
        nonlocal pid
        pid += 1
        return f"S{pid}"

    for _ in range(n_sandwiches):
        units.append(_unit_sandwich(rng, new_pool(), int(rng.integers(1, 4))))
    counts = {}
    for kind in DISTRACTOR_KINDS:
        for _ in range(per_kind):
            if kind == "second_back":
                units.append(_unit_sandwich(rng, new_pool(), 1, extra_back=True))
            else:
                units.append(_unit_distractor(rng, kind, new_pool(), new_pool()))
        counts[kind] = per_kind

    planted = sum(len(u) for u in units)
    n_blocks = max(1, -(-max(n_events, planted) // events_per_block))
    per_block: list[list] = [[] for _ in range(n_blocks + 1)]
    for u in units:
        blk = int(rng.integers(0, n_blocks))
        keys = np.sort(rng.random(len(u)))
        for (role, off, pool, direction, amt_in, amt_out), k in zip(u, keys):
            per_block[blk + off].append((float(k), role, pool, direction, amt_in, amt_out))
    n_bg = max(0, n_events - planted)
    bg_blocks = rng.integers(0, n_blocks, n_bg)
    n_bg_pools = max(1, n_bg // 20)
    for blk in bg_blocks:
        d = IN_OUT if rng.random() < 0.5 else OUT_IN
        per_block[int(blk)].append((float(rng.random()), "noise", f"P{int(rng.integers(n_bg_pools))}", d,
                                    _amount(rng), _amount(rng)))

    events, truth_rows = [], []
    for blk, rows in enumerate(per_block):
        rows.sort(key=lambda r: r[0])
        day = EPOCH + dt.timedelta(days=blk // blocks_per_day)
        sandwich_rows = {}
        for idx, (_, role, pool, direction, amt_in, amt_out) in enumerate(rows):
            tag = "Lit" if role == "victim" else ("Dark" if rng.random() < dark_share else "Lit")
            reserves = min_out = None
            if with_reserves:
                r1 = amt_in * float(rng.uniform(20, 2000))
                r2 = r1 * float(rng.lognormal(0.0, 0.5))
                quote = swap_output(PoolState(r1, r2), amt_in)
                slip = rng.uniform(0.01, 0.05) if role == "victim" else rng.choice([0.0, 0.001, 0.02])
                reserves, min_out = (r1, r2), quote * (1.0 - float(slip))
            events.append(SwapEvent(
                block_number=blk, tx_index=idx, tx_hash=f"0x{blk:06x}{idx:04x}", pool_id=pool,
                direction=direction, input_amount=amt_in, output_amount=amt_out,
                gas_fee=float(rng.uniform(0.0, 0.01)) * amt_in, reserves_before=reserves,
                min_output=min_out, venue_tag=tag, day=day))
            if role in ("front", "victim", "back"):
                sandwich_rows.setdefault(pool, []).append((role, idx))
        for pool, rs in sandwich_rows.items():
            front = next(i for r, i in rs if r == "front")
            back = next(i for r, i in rs if r == "back")
            truth_rows.extend((blk, front, i, back) for r, i in rs if r == "victim")
    return Corpus(events=events, truth=set(truth_rows),
                  n_sandwiches=n_sandwiches, n_distractors=counts)

