"""Game primitives shared by every other module.

Valuations follow the 1-based ranking used throughout the game: ``v(1) > v(2)
> ... > v(B+1)`` for the non-frontrunnable users and ``v(0)`` for the single
frontrunnable user.  All amounts are abstract token units.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Sequence


class Venue(str, enum.Enum):
    LIT = "Lit"
    DARK = "Dark"
    BOTH = "Both"
    NONE = "None"

    def uses_lit(self) -> bool:
        return self in (Venue.LIT, Venue.BOTH)

    def uses_dark(self) -> bool:
        return self in (Venue.DARK, Venue.BOTH)


USER_VENUES = (Venue.LIT, Venue.DARK, Venue.NONE)
ARB_VENUES = (Venue.DARK, Venue.LIT, Venue.BOTH)


class Scenario(str, enum.Enum):
    NO_FRONTRUNNABLE_USER = "NoFrontrunnableUser"
    FRONTRUNNABLE_NO_ARB_SPACE = "FrontrunnableNoArbSpace"
    FRONTRUNNABLE_WITH_ARB_SPACE = "FrontrunnableWithArbSpace"


class Violation(str, enum.Enum):
    NON_MONOTONE_VALUATIONS = "NonMonotoneValuations"
    GAMMA_OUT_OF_RANGE = "GammaOutOfRange"
    PROBABILITY_OUT_OF_RANGE = "ProbabilityOutOfRange"
    CAPACITY_TOO_SMALL = "CapacityTooSmall"
    VALUATION_COUNT = "ValuationCount"
    FRONTRUNNABLE_VALUE_TOO_LOW = "FrontrunnableValueTooLow"
    ARB_PROFIT_TOO_LOW = "ArbProfitTooLow"
    INCREMENT_NOT_POSITIVE = "IncrementNotPositive"
    CONTINUATION_OUT_OF_RANGE = "ContinuationOutOfRange"
    BAD_OPENING = "BadOpening"


class ParamsError(ValueError):
    """Raised by :func:`validate`; ``violations`` lists every broken invariant."""

    def __init__(self, violations: list[tuple[Violation, str]]):
        self.violations = violations
        msg = "; ".join(f"{code.value}: {why}" for code, why in violations)
        super().__init__(msg)

    @property
    def codes(self) -> list[Violation]:
        return [code for code, _ in self.violations]


@dataclass(frozen=True)
class ModelParams:
    block_capacity: int
    user_valuations: tuple[float, ...]
    frontrunnable_valuation: float
    arb_profit: float
    detect_prob: float
    min_increment: float
    auction_continuation: float
    lit_fee_multiplier: float
    # Assumption 1 bound: v(B-2) - v(B-1) <= smallness_bound * v(B-1)
    smallness_bound: float = 0.05
    # lit opening bid (and the uncontested minimum bid) sits at v(B-2) or v(B-1)
    lit_opening: str = "B-2"

    def __post_init__(self):
        object.__setattr__(self, "user_valuations", tuple(float(x) for x in self.user_valuations))

    # short names used in formulas
    @property
    def B(self) -> int:
        return self.block_capacity

    @property
    def v0(self) -> float:
        return self.frontrunnable_valuation

    @property
    def c(self) -> float:
        return self.arb_profit

    @property
    def p(self) -> float:
        return self.detect_prob

    @property
    def eps(self) -> float:
        return self.min_increment

    @property
    def lam(self) -> float:
        return self.auction_continuation

    @property
    def gamma(self) -> float:
        return self.lit_fee_multiplier

    def v(self, i: int) -> float:
        """Valuation of user ``i`` (0 is the frontrunnable user)."""
        if i == 0:
            return self.frontrunnable_valuation
        if not 1 <= i <= len(self.user_valuations):
            raise IndexError(f"no user {i}; valuations are indexed 1..{len(self.user_valuations)}")
        return self.user_valuations[i - 1]

    @property
    def vb2(self) -> float:
        return self.v(self.B - 2)

    @property
    def vb1(self) -> float:
        return self.v(self.B - 1)

    @property
    def q(self) -> float:
        """Probability that at least one of the two arbitrageurs detects."""
        return 1.0 - (1.0 - self.p) ** 2

    @property
    def opening_bid(self) -> float:
        return self.vb1 if self.lit_opening == "B-1" else self.vb2

    def replace(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["user_valuations"] = list(self.user_valuations)
        return d


def validate(params: ModelParams) -> ModelParams:
    """Return ``params`` unchanged if every invariant holds, else raise ParamsError."""
    errs: list[tuple[Violation, str]] = []
    B = params.block_capacity
    v = params.user_valuations
    if not isinstance(B, int) or B < 4:
        errs.append((Violation.CAPACITY_TOO_SMALL, f"B={B} but indices B-2..B+1 need B >= 4"))
    if isinstance(B, int) and len(v) != B + 1:
        errs.append((Violation.VALUATION_COUNT, f"expected {B + 1} valuations, got {len(v)}"))
    if any(not math.isfinite(x) or x <= 0 for x in v):
        errs.append((Violation.NON_MONOTONE_VALUATIONS, "valuations must be positive and finite"))
    if any(a <= b for a, b in zip(v, v[1:])):
        errs.append((Violation.NON_MONOTONE_VALUATIONS, "valuations must be strictly decreasing"))
    p = params.detect_prob
    if not (0.0 <= p <= 1.0):
        errs.append((Violation.PROBABILITY_OUT_OF_RANGE, f"p={p} outside [0, 1]"))
    if not params.min_increment > 0:
        errs.append((Violation.INCREMENT_NOT_POSITIVE, f"eps={params.min_increment}"))
    if not (0.0 < params.auction_continuation <= 1.0):
        errs.append((Violation.CONTINUATION_OUT_OF_RANGE, f"lambda={params.auction_continuation} outside (0, 1]"))
    if params.lit_opening not in ("B-2", "B-1"):
        errs.append((Violation.BAD_OPENING, f"lit_opening={params.lit_opening!r}"))

    indexable = isinstance(B, int) and B >= 4 and len(v) == B + 1
    if indexable:
        vb2 = params.vb2
        if not params.v0 > vb2:
            errs.append((Violation.FRONTRUNNABLE_VALUE_TOO_LOW, f"v0={params.v0} <= v(B-2)={vb2}"))
        if not params.c > vb2:
            errs.append((Violation.ARB_PROFIT_TOO_LOW, f"c={params.c} <= v(B-2)={vb2}"))
        g = params.gamma
        if not (g > 1.0 and g * vb2 < params.c):
            errs.append((Violation.GAMMA_OUT_OF_RANGE, f"need gamma > 1 and gamma*v(B-2) < c; gamma={g}"))
    if errs:
        raise ParamsError(errs)
    return params


def assumption_warnings(params: ModelParams) -> list[str]:
    """Soft checks that do not block validation."""
    out = []
    gap = params.vb2 - params.vb1
    if gap > params.smallness_bound * params.vb1:
        out.append(
            f"v(B-2) - v(B-1) = {gap:g} exceeds {params.smallness_bound:g} * v(B-1); "
            "results that lean on a small valuation gap may not hold"
        )
    return out


def fee_floor(scenario: Scenario | str, params: ModelParams) -> float:
    """Minimum fee that guarantees inclusion under the given demand scenario."""
    scenario = Scenario(scenario)
    if scenario is Scenario.NO_FRONTRUNNABLE_USER:
        return params.v(params.B)
    if scenario is Scenario.FRONTRUNNABLE_NO_ARB_SPACE:
        return params.v(params.B - 1)
    return params.v(params.B - 2)


def scenario_for(user0_venue: Venue) -> Scenario:
    if user0_venue is Venue.LIT:
        return Scenario.FRONTRUNNABLE_WITH_ARB_SPACE
    if user0_venue is Venue.DARK:
        return Scenario.FRONTRUNNABLE_NO_ARB_SPACE
    return Scenario.NO_FRONTRUNNABLE_USER


def lit_auction_gamma(params: ModelParams) -> float:
    """Expected winning lit fee of a two-bidder auction, as a multiple of v(B-2).

    The winner pays ``open + eps*min(r-1, K)`` where ``r`` is geometric and ``K``
    is the number of increments that still fit under ``c``.
    """
    opening = params.opening_bid
    if params.c <= opening:
        return 1.0
    K = int(math.floor((params.c - opening) / params.eps + 1e-9))
    s = 1.0 - params.lam
    mean_steps = 0.0 if s == 0.0 else s * (1.0 - s**K) / params.lam
    return (opening + params.eps * mean_steps) / params.vb2


def with_implied_gamma(params: ModelParams) -> ModelParams:
    """Copy of ``params`` whose gamma matches the simulated lit auction."""
    return params.replace(lit_fee_multiplier=lit_auction_gamma(params))


_FIELDS = {f.name for f in fields(ModelParams)}


def params_from_dict(d: dict) -> ModelParams:
    unknown = set(d) - _FIELDS
    if unknown:
        raise KeyError(f"unknown parameter keys: {sorted(unknown)}")
    return ModelParams(**d)


def load_params(path: str | Path) -> ModelParams:
    with open(path) as fh:
        return params_from_dict(json.load(fh))


# ---------------------------------------------------------------- strategies

DARK_RULES = ("mixed", "floor", "truthful", "reactive")
LIT_RULES = ("escalate",)


@dataclass(frozen=True)
class BiddingRule:
    """How one arbitrageur bids.

    ``dark``: one of ``mixed`` (equilibrium fee distribution), ``floor`` (the
    minimum bid), ``truthful`` (bid c), ``reactive`` (c if a lit bid by the
    rival was seen, else the minimum) or a fixed fee.  ``lit``: ``escalate``
    (open, then outbid by eps each turn) or a fixed fee posted once.
    """

    dark: str | float | None = None
    lit: str | float | None = None

    def __post_init__(self):
        if isinstance(self.dark, str) and self.dark not in DARK_RULES:
            raise ValueError(f"unknown dark rule {self.dark!r}")
        if isinstance(self.lit, str) and self.lit not in LIT_RULES:
            raise ValueError(f"unknown lit rule {self.lit!r}")

    def to_dict(self) -> dict:
        return {"dark": self.dark, "lit": self.lit}


class InconsistentProfile(ValueError):
    pass


def case_rules(mine: Venue, theirs: Venue) -> BiddingRule:
    """Equilibrium bidding rule for venue pair (mine, theirs)."""
    mine, theirs = Venue(mine), Venue(theirs)
    if mine is Venue.LIT:
        return BiddingRule(lit="escalate")
    if mine is Venue.BOTH:
        dark = "floor" if theirs is Venue.LIT else "truthful"
        return BiddingRule(dark=dark, lit="escalate")
    if mine is Venue.DARK:
        if theirs is Venue.DARK:
            return BiddingRule(dark="mixed")
        if theirs is Venue.LIT:
            return BiddingRule(dark="floor")
        return BiddingRule(dark="reactive")
    raise InconsistentProfile(f"arbitrageurs cannot choose venue {mine.value}")


@dataclass(frozen=True)
class AgentStrategyProfile:
    alpha: float
    user_venue: tuple[Venue, ...]
    user_fee: tuple[float, ...]
    arb_venue: tuple[Venue, Venue]
    arb_rule: tuple[BiddingRule, BiddingRule]
    # transfer paid by user 0 to an adopting winning miner that executes user 0's dark order
    transfer: float = 0.0

    def check(self, n_users: int | None = None) -> "AgentStrategyProfile":
        if not 0.0 <= self.alpha <= 1.0:
            raise InconsistentProfile(f"alpha={self.alpha} outside [0, 1]")
        if len(self.user_venue) != len(self.user_fee):
            raise InconsistentProfile("user_venue and user_fee lengths differ")
        if n_users is not None and len(self.user_venue) != n_users:
            raise InconsistentProfile(f"expected {n_users} users, got {len(self.user_venue)}")
        for i, (ven, fee) in enumerate(zip(self.user_venue, self.user_fee)):
            if ven not in USER_VENUES:
                raise InconsistentProfile(f"user {i} venue {ven}")
            if fee < 0:
                raise InconsistentProfile(f"user {i} fee {fee} < 0")
            if ven is Venue.NONE and fee != 0:
                raise InconsistentProfile(f"user {i} chose None but attaches fee {fee}")
        for j, (ven, rule) in enumerate(zip(self.arb_venue, self.arb_rule), start=1):
            if ven not in ARB_VENUES:
                raise InconsistentProfile(f"arbitrageur {j} venue {ven}")
            if (rule.dark is not None) != ven.uses_dark():
                raise InconsistentProfile(f"arbitrageur {j}: dark rule {rule.dark!r} with venue {ven.value}")
            if (rule.lit is not None) != ven.uses_lit():
                raise InconsistentProfile(f"arbitrageur {j}: lit rule {rule.lit!r} with venue {ven.value}")
            for fee in (rule.dark, rule.lit):
                if isinstance(fee, (int, float)) and fee < 0:
                    raise InconsistentProfile(f"arbitrageur {j} negative fee {fee}")
        return self

    def replace(self, **changes) -> "AgentStrategyProfile":
        return replace(self, **changes)

    @property
    def scenario(self) -> Scenario:
        return scenario_for(self.user_venue[0])

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "user_venue": [v.value for v in self.user_venue],
            "user_fee": list(self.user_fee),
            "arb_venue": [v.value for v in self.arb_venue],
            "arb_rule": [r.to_dict() for r in self.arb_rule],
            "transfer": self.transfer,
        }


def user0_fee(params: ModelParams, venue: Venue) -> float:
    if venue is Venue.LIT:
        return params.vb2
    if venue is Venue.DARK:
        return params.vb1
    return 0.0


def standard_profile(
    params: ModelParams,
    alpha: float,
    user0_venue: Venue | str,
    arb_venues: Sequence[Venue | str] = (Venue.DARK, Venue.DARK),
    *,
    transfer: float = 0.0,
) -> AgentStrategyProfile:
    """Profile where every agent follows the equilibrium rule for the given venues.

    Non-frontrunnable users bid ``min(v_i, floor)`` for the scenario implied by
    user 0's venue; they are not strategic.
    """
    user0_venue = Venue(user0_venue)
    a1, a2 = (Venue(x) for x in arb_venues)
    floor = fee_floor(scenario_for(user0_venue), params)
    venues = [user0_venue] + [Venue.LIT] * (params.B + 1)
    fees = [user0_fee(params, user0_venue)] + [min(params.v(i), floor) for i in range(1, params.B + 2)]
    return AgentStrategyProfile(
        alpha=float(alpha),
        user_venue=tuple(venues),
        user_fee=tuple(fees),
        arb_venue=(a1, a2),
        arb_rule=(case_rules(a1, a2), case_rules(a2, a1)),
        transfer=transfer,
    )


def profile_from_dict(d: dict) -> AgentStrategyProfile:
    rules = tuple(BiddingRule(**r) for r in d["arb_rule"])
    return AgentStrategyProfile(
        alpha=float(d["alpha"]),
        user_venue=tuple(Venue(v) for v in d["user_venue"]),
        user_fee=tuple(float(x) for x in d["user_fee"]),
        arb_venue=tuple(Venue(v) for v in d["arb_venue"]),
        arb_rule=rules,
        transfer=float(d.get("transfer", 0.0)),
    )


def load_profile(path: str | Path, params: ModelParams | None = None) -> AgentStrategyProfile:
    """Load a profile JSON.

    Either the full form (see :meth:`AgentStrategyProfile.to_dict`) or the short
    form ``{"alpha": .., "user0": "Lit", "arbs": ["Both", "Both"]}`` which is
    expanded with :func:`standard_profile` and needs ``params``.
    """
    with open(path) as fh:
        d = json.load(fh)
    if "user_venue" in d:
        return profile_from_dict(d)
    if params is None:
        raise ValueError("short-form profile needs params")
    return standard_profile(params, d["alpha"], d["user0"], d.get("arbs", ["Dark", "Dark"]),
                            transfer=float(d.get("transfer", 0.0)))
