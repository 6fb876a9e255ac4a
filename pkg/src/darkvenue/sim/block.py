"""Block assembly: visibility, nonce dedup, conflicting-arbitrage resolution, top-B selection."""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

NONCE_RULES = ("higher_fee", "dark_first")


@dataclass(frozen=True)
class PendingTx:
    """One submitted copy of a transaction.

    A dual-venue order is two ``PendingTx`` sharing a nonce, one per venue.
    ``target`` names the arbitrage opportunity an arbitrage order competes for;
    only the first such order to execute succeeds.
    """

    owner: str
    venue: str  # "Lit" | "Dark"
    fee: float
    nonce: str
    is_frontrunnable: bool = False
    target: str | None = None
    tie: float = 0.0

    def __post_init__(self):
        if self.venue not in ("Lit", "Dark"):
            raise ValueError(f"venue must be Lit or Dark, got {self.venue!r}")
        if self.fee < 0:
            raise ValueError("fee must be nonnegative")


@dataclass
class Block:
    miner_adopted_dark: bool
    ordered_inclusions: list = field(default_factory=list)  # (PendingTx, fee)
    frontrun_event: tuple | None = None

    @property
    def owners(self) -> list[str]:
        return [tx.owner for tx, _ in self.ordered_inclusions]

    def includes(self, owner: str) -> bool:
        return any(tx.owner == owner for tx, _ in self.ordered_inclusions)

    def check(self, capacity: int) -> None:
        """Raise AssertionError if a block invariant fails."""
        inc = self.ordered_inclusions
        assert len(inc) <= capacity, "block over capacity"
        nonces = [tx.nonce for tx, _ in inc]
        assert len(nonces) == len(set(nonces)), "duplicate nonce"
        venues = [tx.venue for tx, _ in inc]
        if not self.miner_adopted_dark:
            assert "Dark" not in venues, "dark tx in a non-adopting miner's block"
        seen_lit = False
        for v in venues:
            seen_lit |= v == "Lit"
            assert not (seen_lit and v == "Dark"), "dark tx after a lit tx"
        for seg in ("Dark", "Lit"):
            fees = [f for tx, f in inc if tx.venue == seg]
            assert all(a >= b for a, b in zip(fees, fees[1:])), f"{seg} segment fees increase"


def _exec_key(tx: PendingTx):
    return (tx.venue != "Dark", -tx.fee, tx.tie)


def assemble_block(mempool, darkpool, miner_adopted_dark: bool, B: int,
                   rng: np.random.Generator | None = None, *, nonce_rule: str = "higher_fee") -> Block:
    """Pick and order up to ``B`` transactions.

    With ``rng`` given, tie keys are redrawn uniformly so that equal fees are
    broken at random; otherwise each transaction's own ``tie`` is used.
    """
    if nonce_rule not in NONCE_RULES:
        raise ValueError(f"nonce_rule must be one of {NONCE_RULES}")
    visible = list(mempool) + (list(darkpool) if miner_adopted_dark else [])
    if rng is not None:
        keys = rng.random(len(visible))
        visible = [PendingTx(t.owner, t.venue, t.fee, t.nonce, t.is_frontrunnable, t.target, float(k))
                   for t, k in zip(visible, keys)]

    by_nonce: dict[str, list[PendingTx]] = {}
    for tx in visible:
        by_nonce.setdefault(tx.nonce, []).append(tx)
    kept = []
    for group in by_nonce.values():
        if nonce_rule == "dark_first":
            kept.append(min(group, key=_exec_key))
        else:
            kept.append(min(group, key=lambda t: (-t.fee, t.venue != "Dark", t.tie)))

    by_target: dict[str, list[PendingTx]] = {}
    free = []
    for tx in kept:
        if tx.target is None:
            free.append(tx)
        else:
            by_target.setdefault(tx.target, []).append(tx)
    # later conflicting orders would revert; they never occupy a slot
    free += [min(g, key=_exec_key) for g in by_target.values()]

    chosen = sorted(free, key=lambda t: (-t.fee, t.tie))[:B]
    ordered = sorted(chosen, key=_exec_key)
    return Block(miner_adopted_dark=bool(miner_adopted_dark),
                 ordered_inclusions=[(t, t.fee) for t in ordered])


def assemble_blocks(fee, present, is_dark, nonce, target, tie, adopted, B: int,
                    *, nonce_rule: str = "higher_fee", with_position: bool = True):
    """Vectorized :func:`assemble_block` over a batch of episodes.

    ``fee``, ``present`` and ``tie`` are ``(n, m)``; ``is_dark``, ``nonce`` and
    ``target`` describe the ``m`` slots (``target`` is -1 for ordinary orders);
    ``adopted`` is ``(n,)``.  Returns ``(included, position)`` where position is
    the execution index (or -1); position is None when ``with_position`` is false.
    """
    if nonce_rule not in NONCE_RULES:
        raise ValueError(f"nonce_rule must be one of {NONCE_RULES}")
    fee = np.asarray(fee, float)
    tie = np.asarray(tie, float)
    is_dark = np.asarray(is_dark, bool)
    nonce = np.asarray(nonce)
    target = np.asarray(target)
    n, m = fee.shape
    alive = np.asarray(present, bool) & (~is_dark[None, :] | np.asarray(adopted, bool)[:, None])

    def beats(a, b, key):
        """Row mask: slot a wins against slot b under ``key`` ordering (full ties go to a)."""
        ka, kb = key(a), key(b)
        res = np.zeros(n, bool)
        undecided = np.ones(n, bool)
        for xa, xb in zip(ka, kb):
            res |= undecided & (xa < xb)
            undecided &= xa == xb
        return res | undecided

    exec_key = lambda s: (np.full(n, not is_dark[s]), -fee[:, s], tie[:, s])
    if nonce_rule == "dark_first":
        dedup_key = exec_key
    else:
        dedup_key = lambda s: (-fee[:, s], np.full(n, not is_dark[s]), tie[:, s])

    for key_fn, same in ((dedup_key, nonce[:, None] == nonce[None, :]),
                         (exec_key, (target[:, None] == target[None, :]) & (target[:, None] >= 0))):
        drop = np.zeros((n, m), bool)
        for a, b in combinations(range(m), 2):
            if not same[a, b]:
                continue
            both = alive[:, a] & alive[:, b]
            a_wins = beats(a, b, key_fn)
            drop[:, b] |= both & a_wins
            drop[:, a] |= both & ~a_wins
        alive &= ~drop

    # top B by (fee desc, tie): count the alive slots ranked ahead of each slot
    ahead = np.zeros((n, m), np.int64)
    used = alive.any(axis=0)
    for a, b in combinations(np.flatnonzero(used), 2):
        both = alive[:, a] & alive[:, b]
        a_first = (fee[:, a] > fee[:, b]) | ((fee[:, a] == fee[:, b]) & (tie[:, a] <= tie[:, b]))
        ahead[:, b] += both & a_first
        ahead[:, a] += both & ~a_first
    included = alive & (ahead < B)
    if not with_position:
        return included, None

    pos_order = np.lexsort((tie, -fee, ~is_dark[None, :].repeat(n, 0), ~included), axis=-1)
    prank = np.empty_like(pos_order)
    np.put_along_axis(prank, pos_order, np.arange(m)[None, :].repeat(n, 0), axis=-1)
    position = np.where(included, prank, -1)
    return included, position
