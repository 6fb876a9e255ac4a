"""Monte Carlo episodes of the one-block game.

One episode: the winning miner's adoption is drawn, arbitrageurs detect user 0's
lit order, the lit and dark auctions run, a block is assembled and every agent
is scored.  The vectorized kernel :func:`simulate_batch` is the workhorse;
:func:`run_episode` is a plain-Python reference that consumes the same uniforms
and must agree with it episode by episode.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .. import mixed
from ..model import AgentStrategyProfile, BiddingRule, ModelParams, Venue
from .auctions import lit_auction_vec, rounds_from_uniform, run_dark_auction, run_lit_auction
from .block import Block, PendingTx, assemble_block, assemble_blocks
from .rng import EpisodeStream, uniform_block

# uniform columns
U_ADOPT, U_DET1, U_DET2, U_FIRST, U_ROUNDS, U_DARK_TIE, U_FEE1, U_FEE2 = range(8)
U_TIES = 8

DEFAULT_CHUNK = 1 << 16
DEFAULT_NONCE_RULE = "dark_first"


def n_slots(B: int) -> int:
    return B + 6


def n_uniforms(B: int) -> int:
    return U_TIES + n_slots(B)


def _slot_layout(B: int):
    """Slots: users 1..B+1, user 0, arb1 lit, arb1 dark, arb2 lit, arb2 dark."""
    m = n_slots(B)
    u0 = B + 1
    a1l, a1d, a2l, a2d = B + 2, B + 3, B + 4, B + 5
    nonce = np.arange(m)
    nonce[a1d] = nonce[a1l]
    nonce[a2d] = nonce[a2l]
    target = np.full(m, -1)
    target[[a1l, a1d, a2l, a2d]] = 0
    return u0, (a1l, a1d, a2l, a2d), nonce, target


def agent_names(B: int) -> list[str]:
    return ["user0"] + [f"user{i}" for i in range(1, B + 2)] + ["arb1", "arb2"]


def column_names(B: int) -> list[str]:
    return agent_names(B) + ["miner", "welfare", "frontrun", "adopted", "detect1", "detect2"]


def _dark_bids(rule, aware, rival_posted, u_fee, params: ModelParams):
    n = aware.shape[0]
    if rule is None:
        return np.full(n, np.nan)
    if rule == "mixed":
        bid = mixed.ppf(u_fee, params)
    elif rule == "floor":
        bid = np.full(n, params.opening_bid)
    elif rule == "truthful":
        bid = np.full(n, params.c)
    elif rule == "reactive":
        bid = np.where(rival_posted, params.c, params.opening_bid)
    else:
        bid = np.full(n, float(rule))
    return np.where(aware, bid, np.nan)


def simulate_batch(profile: AgentStrategyProfile, params: ModelParams, U: np.ndarray, *,
                   force_adoption: bool | None = None, nonce_rule: str = DEFAULT_NONCE_RULE) -> np.ndarray:
    """Score a batch of episodes; returns an ``(n, len(column_names(B)))`` array."""
    B = params.B
    n = U.shape[0]
    m = n_slots(B)
    u0, (a1l, a1d, a2l, a2d), nonce, target = _slot_layout(B)
    ven0 = profile.user_venue[0]

    if force_adoption is None:
        adopted = U[:, U_ADOPT] < profile.alpha
    else:
        adopted = np.full(n, bool(force_adoption))
    u0_lit = ven0 is Venue.LIT
    det = [u0_lit & (U[:, U_DET1] < params.p), u0_lit & (U[:, U_DET2] < params.p)]

    vens = profile.arb_venue
    rules = profile.arb_rule
    starts = [det[j] & vens[j].uses_lit() for j in (0, 1)]
    any_start = starts[0] | starts[1]
    part = [any_start & vens[j].uses_lit() for j in (0, 1)]
    coin = (U[:, U_FIRST] >= 0.5).astype(np.int64)
    first = np.where(starts[0] & starts[1], coin, np.where(starts[0], 0, 1))
    if any_start.any():
        rounds = rounds_from_uniform(U[:, U_ROUNDS], params.lam)
        lit1, lit2, _ = lit_auction_vec(part[0], part[1], rules[0].lit, rules[1].lit, rounds, first,
                                        opening=params.opening_bid, eps=params.eps, cap=params.c)
    else:
        lit1 = lit2 = np.full(n, np.nan)
    lits = [lit1, lit2]
    posted = [~np.isnan(lit1), ~np.isnan(lit2)]

    darks = []
    for j, ufee in ((0, U[:, U_FEE1]), (1, U[:, U_FEE2])):
        aware = (det[j] | posted[1 - j]) & vens[j].uses_dark()
        darks.append(_dark_bids(rules[j].dark, aware, posted[1 - j], ufee, params))
    # relay forwards only the sealed-bid winner
    both_dark = ~np.isnan(darks[0]) & ~np.isnan(darks[1])
    first_wins = (darks[0] > darks[1]) | ((darks[0] == darks[1]) & (U[:, U_DARK_TIE] < 0.5))
    darks[1] = np.where(both_dark & first_wins, np.nan, darks[1])
    darks[0] = np.where(both_dark & ~first_wins, np.nan, darks[0])

    fee = np.zeros((n, m))
    present = np.zeros((n, m), bool)
    user_fee = np.asarray(profile.user_fee, float)
    for i in range(1, B + 2):
        fee[:, i - 1] = user_fee[i]
        present[:, i - 1] = profile.user_venue[i] is not Venue.NONE
    fee[:, u0] = user_fee[0]
    present[:, u0] = ven0 is not Venue.NONE
    for s, arr in ((a1l, lits[0]), (a1d, darks[0]), (a2l, lits[1]), (a2d, darks[1])):
        ok = ~np.isnan(arr)
        fee[:, s] = np.where(ok, arr, 0.0)
        present[:, s] = ok
    is_dark = np.zeros(m, bool)
    is_dark[[a1d, a2d]] = True
    is_dark[u0] = ven0 is Venue.DARK
    for i in range(1, B + 2):
        is_dark[i - 1] = profile.user_venue[i] is Venue.DARK

    inc, _ = assemble_blocks(fee, present, is_dark, nonce, target, U[:, U_TIES:U_TIES + m],
                             adopted, B, nonce_rule=nonce_rule, with_position=False)

    inc0 = inc[:, u0]
    arb_inc = [inc[:, a1l] | inc[:, a1d], inc[:, a2l] | inc[:, a2d]]
    arb_fee = [np.where(inc[:, a1d], fee[:, a1d], fee[:, a1l]),
               np.where(inc[:, a2d], fee[:, a2d], fee[:, a2l])]
    frontrun = inc0 & u0_lit & (arb_inc[0] | arb_inc[1])
    c = params.c

    out = np.zeros((n, len(column_names(B))))
    paid_transfer = inc0 * (ven0 is Venue.DARK) * profile.transfer
    out[:, 0] = inc0 * (params.v0 - user_fee[0] - c * frontrun) - paid_transfer
    vals = np.array([params.v(i) for i in range(1, B + 2)])
    user_inc = inc[:, :B + 1]
    out[:, 1:B + 2] = user_inc * (vals - user_fee[1:])[None, :]
    arb_paid = []
    for j in (0, 1):
        won = arb_inc[j] & frontrun
        out[:, B + 2 + j] = won * (c - arb_fee[j])
        arb_paid.append(np.where(won, arb_fee[j], 0.0))
    k = B + 4
    out[:, k] = (user_inc * user_fee[None, 1:]).sum(axis=1) + inc0 * user_fee[0] \
        + arb_paid[0] + arb_paid[1] + paid_transfer
    out[:, k + 1] = (user_inc * vals[None, :]).sum(axis=1) + inc0 * params.v0
    out[:, k + 2] = frontrun
    out[:, k + 3] = adopted
    out[:, k + 4] = det[0]
    out[:, k + 5] = det[1]
    return out


# ---------------------------------------------------------------- scalar reference

@dataclass
class EpisodeOutcome:
    block: Block
    payoffs: dict
    miner_fee_revenue: float
    detection_draws: tuple[bool, bool]
    adopted: bool
    frontrun: bool
    welfare: float
    fees_paid: dict = field(default_factory=dict)

    def row(self, B: int) -> np.ndarray:
        names = agent_names(B)
        vals = [self.payoffs[k] for k in names]
        return np.array(vals + [self.miner_fee_revenue, self.welfare, float(self.frontrun),
                                float(self.adopted), float(self.detection_draws[0]),
                                float(self.detection_draws[1])])


def _scalar_dark_bid(rule, rival_posted: bool, u: float, params: ModelParams) -> float:
    if rule == "mixed":
        return float(mixed.ppf(u, params))
    if rule == "floor":
        return params.opening_bid
    if rule == "truthful":
        return params.c
    if rule == "reactive":
        return params.c if rival_posted else params.opening_bid
    return float(rule)


def run_episode(profile: AgentStrategyProfile, params: ModelParams, stream, *,
                force_adoption: bool | None = None, nonce_rule: str = DEFAULT_NONCE_RULE) -> EpisodeOutcome:
    """Reference implementation of one episode.

    ``stream`` is indexable by uniform column (see :class:`EpisodeStream`).
    """
    profile.check(params.B + 2)
    B = params.B
    ven0 = profile.user_venue[0]
    adopted = profile.alpha > stream[U_ADOPT] if force_adoption is None else bool(force_adoption)
    lit0 = ven0 is Venue.LIT
    det = (lit0 and stream[U_DET1] < params.p, lit0 and stream[U_DET2] < params.p)
    vens, rules = profile.arb_venue, profile.arb_rule

    starters = [j for j in (0, 1) if det[j] and vens[j].uses_lit()]
    lit_bids: dict[int, float] = {}
    if starters:
        if len(starters) == 2:
            first = 1 if stream[U_FIRST] >= 0.5 else 0
        else:
            first = starters[0]
        bidders = [j for j in (0, 1) if vens[j].uses_lit()]
        rounds = rounds_from_uniform(stream[U_ROUNDS], params.lam)
        st = run_lit_auction(bidders, {j: rules[j].lit for j in bidders}, rounds, first,
                             opening=params.opening_bid, eps=params.eps, cap=params.c)
        lit_bids = dict(st.standing)

    dark_bids: dict[int, float] = {}
    for j, col in ((0, U_FEE1), (1, U_FEE2)):
        rival_posted = (1 - j) in lit_bids
        if vens[j].uses_dark() and (det[j] or rival_posted):
            dark_bids[j] = _scalar_dark_bid(rules[j].dark, rival_posted, stream[col], params)
    winner, _ = run_dark_auction(dark_bids, stream[U_DARK_TIE])

    m = n_slots(B)
    ties = [stream[U_TIES + s] for s in range(m)]
    u0, (a1l, a1d, a2l, a2d), _, _ = _slot_layout(B)
    mempool, darkpool = [], []
    for i in range(1, B + 2):
        ven = profile.user_venue[i]
        if ven is Venue.NONE:
            continue
        tx = PendingTx(f"user{i}", ven.value, profile.user_fee[i], f"u{i}", tie=ties[i - 1])
        (darkpool if ven is Venue.DARK else mempool).append(tx)
    if ven0 is not Venue.NONE:
        tx = PendingTx("user0", ven0.value, profile.user_fee[0], "u0", is_frontrunnable=True, tie=ties[u0])
        (darkpool if ven0 is Venue.DARK else mempool).append(tx)
    for j, (sl, sd) in enumerate(((a1l, a1d), (a2l, a2d))):
        if j in lit_bids:
            mempool.append(PendingTx(f"arb{j + 1}", "Lit", lit_bids[j], f"a{j + 1}", target="opp", tie=ties[sl]))
        if winner == j:
            darkpool.append(PendingTx(f"arb{j + 1}", "Dark", dark_bids[j], f"a{j + 1}", target="opp", tie=ties[sd]))

    block = assemble_block(mempool, darkpool, adopted, B, nonce_rule=nonce_rule)
    included = {tx.owner: (tx, f) for tx, f in block.ordered_inclusions}
    inc0 = "user0" in included
    arb_in = [f"arb{j}" for j in (1, 2) if f"arb{j}" in included]
    frontrun = inc0 and lit0 and bool(arb_in)
    if frontrun:
        block.frontrun_event = (arb_in[0], "user0")

    c = params.c
    payoffs: dict[str, float] = {}
    paid: dict[str, float] = {}
    transfer = profile.transfer if (inc0 and ven0 is Venue.DARK) else 0.0
    payoffs["user0"] = (params.v0 - profile.user_fee[0] - c * frontrun if inc0 else 0.0) - transfer
    if inc0:
        paid["user0"] = profile.user_fee[0]
    welfare = params.v0 if inc0 else 0.0
    for i in range(1, B + 2):
        name = f"user{i}"
        if name in included:
            payoffs[name] = params.v(i) - profile.user_fee[i]
            paid[name] = profile.user_fee[i]
            welfare += params.v(i)
        else:
            payoffs[name] = 0.0
    for j in (1, 2):
        name = f"arb{j}"
        if name in included and frontrun:
            f = included[name][1]
            payoffs[name] = c - f
            paid[name] = f
        else:
            payoffs[name] = 0.0
            if name in included:
                paid[name] = 0.0
    revenue = sum(paid.values()) + transfer
    return EpisodeOutcome(block=block, payoffs=payoffs, miner_fee_revenue=revenue,
                          detection_draws=(bool(det[0]), bool(det[1])), adopted=bool(adopted),
                          frontrun=frontrun, welfare=welfare, fees_paid=paid)


def episode(profile: AgentStrategyProfile, params: ModelParams, seed: int, index: int, **kw) -> EpisodeOutcome:
    """Scalar episode ``index`` of the stream keyed by ``seed``."""
    return run_episode(profile, params, EpisodeStream(seed, index, n_uniforms(params.B)), **kw)


# ---------------------------------------------------------------- estimation

class Moments:
    """Running mean and co-moment matrix, merged pairwise (order fixed by caller)."""

    def __init__(self, k: int):
        self.n = 0
        self.mean = np.zeros(k)
        self.comoment = np.zeros((k, k))

    @classmethod
    def of(cls, X: np.ndarray) -> "Moments":
        out = cls(X.shape[1])
        out.n = X.shape[0]
        out.mean = X.mean(axis=0)
        D = X - out.mean
        out.comoment = D.T @ D
        return out

    def merge(self, other: "Moments") -> "Moments":
        if other.n == 0:
            return self
        if self.n == 0:
            self.n, self.mean, self.comoment = other.n, other.mean.copy(), other.comoment.copy()
            return self
        n = self.n + other.n
        delta = other.mean - self.mean
        self.comoment = self.comoment + other.comoment + np.outer(delta, delta) * (self.n * other.n / n)
        self.mean = self.mean + delta * (other.n / n)
        self.n = n
        return self

    def cov(self) -> np.ndarray | None:
        if self.n < 2:
            return None
        return self.comoment / (self.n - 1)


def _chunks(n: int, chunk: int):
    return [(s, min(chunk, n - s)) for s in range(0, n, chunk)]


def run_moments(jobs: Sequence[tuple[AgentStrategyProfile, bool | None]], params: ModelParams,
                n_episodes: int, seed: int, *, nonce_rule: str = DEFAULT_NONCE_RULE,
                chunk_size: int = DEFAULT_CHUNK, workers: int = 1) -> Moments:
    """Joint moments of several profiles evaluated on common random numbers.

    Columns are the per-job :func:`column_names` blocks laid side by side.
    """
    if n_episodes < 1:
        raise ValueError("n_episodes must be at least 1")
    ncols = n_uniforms(params.B)
    for prof, _ in jobs:
        prof.check(params.B + 2)

    def one(chunk):
        start, size = chunk
        U = uniform_block(seed, start, size, ncols)
        X = np.hstack([simulate_batch(p, params, U, force_adoption=f, nonce_rule=nonce_rule) for p, f in jobs])
        return Moments.of(X)

    chunks = _chunks(n_episodes, chunk_size)
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(one, chunks))
    else:
        parts = [one(c) for c in chunks]
    total = Moments(parts[0].mean.shape[0])
    for part in parts:
        total.merge(part)
    return total


@dataclass(frozen=True)
class PayoffEstimate:
    mean: dict
    se: dict | None
    n_episodes: int
    seed: int

    def to_dict(self) -> dict:
        return {"mean": self.mean, "se": self.se, "n_episodes": self.n_episodes, "seed": self.seed}


def estimate_payoffs(profile: AgentStrategyProfile, params: ModelParams, n_episodes: int, seed: int, *,
                     force_adoption: bool | None = None, nonce_rule: str = DEFAULT_NONCE_RULE,
                     chunk_size: int = DEFAULT_CHUNK, workers: int = 1) -> PayoffEstimate:
    """Per-agent mean payoff and standard error; ``se`` is None when n_episodes == 1."""
    mom = run_moments([(profile, force_adoption)], params, n_episodes, seed, nonce_rule=nonce_rule,
                      chunk_size=chunk_size, workers=workers)
    names = column_names(params.B)
    mean = {k: float(x) for k, x in zip(names, mom.mean)}
    cov = mom.cov()
    se = None if cov is None else {k: float(np.sqrt(max(cov[i, i], 0.0) / mom.n)) for i, k in enumerate(names)}
    return PayoffEstimate(mean=mean, se=se, n_episodes=n_episodes, seed=seed)


@dataclass(frozen=True)
class AffineEstimate:
    """Expected payoffs as affine functions of alpha, from runs with adoption forced off and on.

    Every expectation in the game is ``(1-alpha)*m0 + alpha*m1`` because only
    the winning miner's adoption depends on alpha.
    """

    names: tuple[str, ...]
    m0: np.ndarray
    m1: np.ndarray
    cov: np.ndarray | None  # joint covariance of (x0, x1) columns
    n: int

    def at(self, alpha: float) -> tuple[dict, dict | None]:
        k = len(self.names)
        mean = (1 - alpha) * self.m0 + alpha * self.m1
        if self.cov is None:
            return dict(zip(self.names, mean)), None
        w = np.concatenate([np.full(k, 1 - alpha), np.full(k, alpha)])
        se = {}
        for i, name in enumerate(self.names):
            idx = [i, k + i]
            var = w[idx] @ self.cov[np.ix_(idx, idx)] @ w[idx]
            se[name] = float(np.sqrt(max(var, 0.0) / self.n))
        return {kk: float(v) for kk, v in zip(self.names, mean)}, se


def affine_estimate(profile: AgentStrategyProfile, params: ModelParams, n_episodes: int, seed: int,
                    **kw) -> AffineEstimate:
    mom = run_moments([(profile, False), (profile, True)], params, n_episodes, seed, **kw)
    names = tuple(column_names(params.B))
    k = len(names)
    return AffineEstimate(names=names, m0=mom.mean[:k], m1=mom.mean[k:], cov=mom.cov(), n=mom.n)


def paired_gain(base: AgentStrategyProfile, dev: AgentStrategyProfile, agent: str, params: ModelParams,
                n_episodes: int, seed: int, *, force_adoption: bool | None = None, **kw) -> tuple[float, float]:
    """Mean and SE of ``agent``'s payoff under ``dev`` minus under ``base`` (common random numbers)."""
    mom = run_moments([(base, force_adoption), (dev, force_adoption)], params, n_episodes, seed, **kw)
    names = column_names(params.B)
    k = len(names)
    i = names.index(agent)
    gain = float(mom.mean[k + i] - mom.mean[i])
    cov = mom.cov()
    if cov is None:
        return gain, float("nan")
    var = cov[k + i, k + i] + cov[i, i] - 2 * cov[i, k + i]
    return gain, float(np.sqrt(max(var, 0.0) / mom.n))


def trace(profile: AgentStrategyProfile, params: ModelParams, n_episodes: int, seed: int, **kw) -> np.ndarray:
    """Per-episode rows (column order of :func:`column_names`)."""
    ncols = n_uniforms(params.B)
    rows = [simulate_batch(profile, params, uniform_block(seed, s, size, ncols), **kw)
            for s, size in _chunks(n_episodes, DEFAULT_CHUNK)]
    return np.vstack(rows)


class DiagMoments:
    """Running means and variances only (cheap for many columns)."""

    def __init__(self, k: int):
        self.n = 0
        self.mean = np.zeros(k)
        self.m2 = np.zeros(k)

    @classmethod
    def of(cls, X: np.ndarray) -> "DiagMoments":
        out = cls(X.shape[1])
        out.n = X.shape[0]
        out.mean = X.mean(axis=0)
        out.m2 = ((X - out.mean) ** 2).sum(axis=0)
        return out

    def merge(self, other: "DiagMoments") -> "DiagMoments":
        if other.n == 0:
            return self
        if self.n == 0:
            self.n, self.mean, self.m2 = other.n, other.mean.copy(), other.m2.copy()
            return self
        n = self.n + other.n
        delta = other.mean - self.mean
        self.m2 = self.m2 + other.m2 + delta**2 * (self.n * other.n / n)
        self.mean = self.mean + delta * (other.n / n)
        self.n = n
        return self

    def se(self) -> np.ndarray:
        if self.n < 2:
            return np.full_like(self.mean, np.nan)
        return np.sqrt(self.m2 / (self.n - 1) / self.n)


def run_gains(base: tuple[AgentStrategyProfile, bool | None], deviations, params: ModelParams,
              n_episodes: int, seed: int, *, nonce_rule: str = DEFAULT_NONCE_RULE,
              chunk_size: int = DEFAULT_CHUNK, workers: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Paired payoff gains of many deviations against one base profile.

    ``deviations`` is a list of ``(profile, force_adoption, column, base_column)``;
    the gain is ``dev[column] - base[base_column]`` on common random numbers.
    Returns ``(mean, se)`` arrays.
    """
    names = column_names(params.B)
    ncols = n_uniforms(params.B)
    base_prof, base_force = base
    base_prof.check(params.B + 2)
    for prof, *_ in deviations:
        prof.check(params.B + 2)

    def one(chunk):
        start, size = chunk
        U = uniform_block(seed, start, size, ncols)
        Xb = simulate_batch(base_prof, params, U, force_adoption=base_force, nonce_rule=nonce_rule)
        out = DiagMoments(len(deviations))
        out.n = size
        for k, (prof, force, col, bcol) in enumerate(deviations):
            Xd = simulate_batch(prof, params, U, force_adoption=force, nonce_rule=nonce_rule)
            d = Xd[:, names.index(col)] - Xb[:, names.index(bcol)]
            out.mean[k] = d.mean()
            out.m2[k] = ((d - out.mean[k]) ** 2).sum()
        return out

    chunks = _chunks(n_episodes, chunk_size)
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(one, chunks))
    else:
        parts = [one(c) for c in chunks]
    total = DiagMoments(len(deviations))
    for part in parts:
        total.merge(part)
    return total.mean, total.se()
