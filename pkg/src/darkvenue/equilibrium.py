"""Arbitrageur venue game, adoption thresholds and the subgame perfect equilibrium.

Ground truth runs simulation -> numeric roots -> closed forms: cells or payoffs
that are not pinned down analytically come from a Monte Carlo calibration,
thresholds are bisection roots, and closed forms are kept as cross-checks whose
disagreements are reported rather than reconciled.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import optimize

from . import formulas as F
from .model import ModelParams, ParamsError, Venue, Violation, standard_profile, validate
from .sim.engine import column_names, run_moments

DEFAULT_CAL_EPISODES = 100_000
DEFAULT_CAL_SEED = 20240601
ROOT_XTOL = 1e-10
ROOT_MAXITER = 200
GRID_POINTS = 2001

D, L, BOTH = Venue.DARK, Venue.LIT, Venue.BOTH
# tie-break preference when payoffs are equal
PREFERENCE = (BOTH, L, D)

REGIME_VENUES = {"BB": (BOTH, BOTH), "BD": (BOTH, D), "DD": (D, D)}


class Provenance(str, enum.Enum):
    ANALYTIC = "Analytic"
    SIMULATION = "SimulationCalibrated"


class Method(str, enum.Enum):
    CLOSED_FORM = "ClosedForm"
    NUMERIC = "NumericRoot"


class RootNotBracketed(ValueError):
    pass


class InvalidStep(ValueError):
    pass


# ---------------------------------------------------------------- calibration

_CAL_PROFILES = {
    "LitBoth": ((L, BOTH), L),
    "BB": ((BOTH, BOTH), L),
    "BD": ((BOTH, D), L),
}


@dataclass(frozen=True)
class Calibration:
    """Simulated payoffs for everything without a closed form.

    All profiles run on common random numbers with adoption forced off and on,
    so any expectation is affine in alpha and paired differences between
    profiles carry their joint covariance.
    """

    names: tuple
    keys: tuple
    mean: np.ndarray
    cov: np.ndarray | None
    n_episodes: int
    seed: int

    def _index(self, key: str, adopted: bool, column: str) -> int:
        k = len(self.names)
        return (2 * self.keys.index(key) + int(adopted)) * k + self.names.index(column)

    def combo(self, terms, alpha: float) -> tuple[float, float]:
        """Mean and SE of ``sum(coef * E[column | key])`` at adoption rate ``alpha``."""
        w = np.zeros(self.mean.shape[0])
        for key, column, coef in terms:
            w[self._index(key, False, column)] += coef * (1 - alpha)
            w[self._index(key, True, column)] += coef * alpha
        val = float(w @ self.mean)
        if self.cov is None:
            return val, 0.0
        return val, float(np.sqrt(max(w @ self.cov @ w, 0.0) / self.n_episodes))

    def at(self, key: str, alpha: float) -> tuple[dict, dict]:
        mean, se = {}, {}
        for col in self.names:
            mean[col], se[col] = self.combo([(key, col, 1.0)], alpha)
        return mean, se


@lru_cache(maxsize=64)
def calibrate(params: ModelParams, n_episodes: int = DEFAULT_CAL_EPISODES, seed: int = DEFAULT_CAL_SEED,
              nonce_rule: str = "dark_first") -> Calibration:
    jobs, keys = [], []
    for key, (arbs, u0) in _CAL_PROFILES.items():
        prof = standard_profile(params, 0.5, u0, arbs)
        jobs += [(prof, False), (prof, True)]
        keys.append(key)
    mom = run_moments(jobs, params, n_episodes, seed, nonce_rule=nonce_rule)
    return Calibration(names=tuple(column_names(params.B)), keys=tuple(keys), mean=mom.mean,
                       cov=mom.cov(), n_episodes=mom.n, seed=seed)


# ---------------------------------------------------------------- payoff matrix

@dataclass(frozen=True)
class PayoffMatrix:
    alpha: float
    entries: dict  # (row, col) -> (A1, A2)
    se: dict
    provenance: dict

    def payoff(self, player: int, own: Venue, other: Venue) -> tuple[float, float]:
        """Payoff and its SE for ``player`` (1 or 2) playing ``own`` against ``other``."""
        cell = (own, other) if player == 1 else (other, own)
        return self.entries[cell][player - 1], self.se[cell][player - 1]

    def best_response(self, player: int, other: Venue, abs_tol: float = 1e-9) -> Venue:
        vals = {v: self.payoff(player, v, other) for v in PREFERENCE}
        top = max(vals.values(), key=lambda t: t[0])
        for v in PREFERENCE:
            val, se = vals[v]
            tol = max(abs_tol, 3 * math.hypot(se, top[1]))
            if val >= top[0] - tol:
                return v
        raise AssertionError("unreachable")

    def pure_nash(self, abs_tol: float = 1e-9) -> list[tuple[Venue, Venue]]:
        out = []
        for r in PREFERENCE:
            for c in PREFERENCE:
                if self.best_response(1, c, abs_tol) is r and self.best_response(2, r, abs_tol) is c:
                    out.append((r, c))
        return out

    def symmetric(self, tol: float = 1e-12) -> bool:
        for (x, y), (a1, _) in self.entries.items():
            other = self.entries[(y, x)][1]
            scale = max(tol, 3 * math.hypot(self.se[(x, y)][0], self.se[(y, x)][1]))
            if abs(a1 - other) > scale:
                return False
        return True

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "cells": [
                {"row": x.value, "col": y.value, "A1": a, "A2": b,
                 "se": list(self.se[(x, y)]), "provenance": self.provenance[(x, y)].value}
                for (x, y), (a, b) in self.entries.items()
            ],
        }


def analytic_cells(alpha: float, params: ModelParams) -> dict:
    """The seven cells with unambiguous closed forms."""
    p, q = params.p, params.q
    Dv = params.c - params.vb2
    Lv = params.c - params.gamma * params.vb2
    dd = alpha * p * (1 - p) * Dv
    cells = {
        (D, D): (dd, dd),
        (D, L): (alpha * q * Dv, (1 - alpha) * p * Dv),
        (D, BOTH): (dd, (1 - alpha) * p * Dv),
        (L, L): (0.5 * Lv * q, 0.5 * Lv * q),
        (BOTH, BOTH): (0.5 * (1 - alpha) * Lv * q,) * 2,
    }
    cells[(L, D)] = cells[(D, L)][::-1]
    cells[(BOTH, D)] = cells[(D, BOTH)][::-1]
    return cells


def arb_payoff_matrix(alpha: float, params: ModelParams, calibration: Calibration | None = None) -> PayoffMatrix:
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha={alpha} outside [0, 1]")
    if calibration is None:
        calibration = calibrate(params)
    entries = analytic_cells(alpha, params)
    se = {k: (0.0, 0.0) for k in entries}
    prov = {k: Provenance.ANALYTIC for k in entries}
    # control variate: analytic Both/Both cell plus the paired simulated shift
    bb = entries[(BOTH, BOTH)][0]
    lit, lit_se = calibration.combo([("LitBoth", "arb1", 1.0), ("BB", "arb1", -1.0)], alpha)
    both, both_se = calibration.combo([("LitBoth", "arb2", 1.0), ("BB", "arb2", -1.0)], alpha)
    entries[(L, BOTH)] = (bb + lit, bb + both)
    entries[(BOTH, L)] = (bb + both, bb + lit)
    se[(L, BOTH)] = (lit_se, both_se)
    se[(BOTH, L)] = (both_se, lit_se)
    prov[(L, BOTH)] = prov[(BOTH, L)] = Provenance.SIMULATION
    return PayoffMatrix(alpha=alpha, entries=entries, se=se, provenance=prov)


@dataclass(frozen=True)
class Region:
    lo: float
    hi: float
    lo_closed: bool
    hi_closed: bool
    equilibria: tuple

    @property
    def label(self) -> str:
        if not self.equilibria:
            return "NoPureEquilibrium"
        return ",".join(f"{a.value}/{b.value}" for a, b in self.equilibria)

    def contains(self, alpha: float) -> bool:
        above = alpha > self.lo or (self.lo_closed and alpha == self.lo)
        below = alpha < self.hi or (self.hi_closed and alpha == self.hi)
        return above and below

    def to_dict(self) -> dict:
        return {"lo": self.lo, "hi": self.hi, "lo_closed": self.lo_closed, "hi_closed": self.hi_closed,
                "equilibria": [[a.value, b.value] for a, b in self.equilibria], "label": self.label}


def _ne_at(alpha, params, cal, abs_tol):
    return tuple(arb_payoff_matrix(alpha, params, cal).pure_nash(abs_tol))


def pure_nash_regions(params: ModelParams, calibration: Calibration | None = None, *,
                      grid: int = GRID_POINTS, abs_tol: float = 1e-9, xtol: float = 1e-13) -> list[Region]:
    """Partition [0, 1] by the set of pure equilibria of the venue game."""
    cal = calibration or calibrate(params)
    alphas = np.linspace(0.0, 1.0, grid)
    sets = [_ne_at(float(a), params, cal, abs_tol) for a in alphas]
    cuts = []  # (boundary, set at boundary)
    for k in range(grid - 1):
        if sets[k] == sets[k + 1]:
            continue
        lo, hi = float(alphas[k]), float(alphas[k + 1])
        left = sets[k]
        while hi - lo > xtol:
            mid = 0.5 * (lo + hi)
            if _ne_at(mid, params, cal, abs_tol) == left:
                lo = mid
            else:
                hi = mid
        cuts.append((lo, hi, left, sets[k + 1]))
    regions = []
    start, start_closed, cur = 0.0, True, sets[0]
    for lo, hi, left, right in cuts:
        # the boundary point belongs to whichever side it evaluates to
        b = lo if left != cur else hi
        at_b = _ne_at(b, params, cal, abs_tol)
        hi_closed = at_b == cur
        regions.append(Region(start, b, start_closed, hi_closed, cur))
        start, start_closed, cur = b, not hi_closed, right
    regions.append(Region(start, 1.0, start_closed, True, cur))
    return regions


def regime_at(alpha: float, params: ModelParams, calibration: Calibration | None = None) -> str | None:
    """Arbitrageur regime name at ``alpha`` (first listed equilibrium), or None."""
    ne = _ne_at(alpha, params, calibration or calibrate(params), 1e-9)
    for name, pair in REGIME_VENUES.items():
        if pair in ne or pair[::-1] in ne:
            return name
    return None


# ---------------------------------------------------------------- user 0

@dataclass(frozen=True)
class PayoffValue:
    value: float
    se: float
    provenance: Provenance


def user0_payoff(venue: Venue | str, alpha: float, params: ModelParams, regime: str = "DD",
                 calibration: Calibration | None = None) -> PayoffValue:
    """User 0's expected payoff given the venue, adoption rate and arbitrageur regime.

    Dark and the Dark/Dark lit payoff have closed forms; lit payoffs in the other
    regimes come from the simulation calibration.
    """
    venue = Venue(venue)
    if venue is Venue.NONE:
        return PayoffValue(0.0, 0.0, Provenance.ANALYTIC)
    if venue is Venue.DARK:
        return PayoffValue(alpha * (params.v0 - params.vb1), 0.0, Provenance.ANALYTIC)
    if venue is not Venue.LIT:
        raise ValueError(f"user 0 cannot choose {venue.value}")
    if regime == "DD":
        return PayoffValue((params.v0 - params.vb2) - alpha * params.q * params.c, 0.0, Provenance.ANALYTIC)
    if regime not in ("BB", "BD"):
        raise ValueError(f"unknown regime {regime!r}")
    cal = calibration or calibrate(params)
    mean, se = cal.at(regime, alpha)
    return PayoffValue(mean["user0"], (se or {}).get("user0", 0.0), Provenance.SIMULATION)


# ---------------------------------------------------------------- thresholds

@dataclass(frozen=True)
class Threshold:
    value: float | None
    method: Method
    cross_check: float | None = None
    cross_check_label: str | None = None
    note: str | None = None

    def discrepancy(self) -> float | None:
        if self.value is None or self.cross_check is None:
            return None
        return abs(self.value - self.cross_check)

    def to_dict(self) -> dict:
        return {"value": self.value, "method": self.method.value, "cross_check": self.cross_check,
                "cross_check_label": self.cross_check_label, "discrepancy": self.discrepancy(),
                "note": self.note}


@dataclass(frozen=True)
class ThresholdSet:
    alpha1: Threshold
    alpha2: Threshold
    lambda1: Threshold
    lambda2: Threshold
    lambda3: Threshold
    c1: Threshold
    theta: Threshold
    tolerance: float = 1e-6

    def discrepancies(self) -> dict:
        out = {}
        for name in ("alpha1", "alpha2", "lambda1", "lambda2", "lambda3", "c1", "theta"):
            t = getattr(self, name)
            d = t.discrepancy()
            if d is not None and d > self.tolerance:
                out[name] = {"value": t.value, "cross_check": t.cross_check, "label": t.cross_check_label}
        return out

    def to_dict(self) -> dict:
        d = {k: getattr(self, k).to_dict() for k in
             ("alpha1", "alpha2", "lambda1", "lambda2", "lambda3", "c1", "theta")}
        d["discrepancies"] = self.discrepancies()
        return d


def _bisect(f, lo=0.0, hi=1.0) -> float:
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if np.sign(flo) == np.sign(fhi):
        raise RootNotBracketed(f"no sign change on [{lo}, {hi}] (f={flo:.6g}, {fhi:.6g})")
    return float(optimize.bisect(f, lo, hi, xtol=ROOT_XTOL, maxiter=ROOT_MAXITER))


def user0_indifference(params: ModelParams, regime: str, calibration: Calibration | None = None) -> float:
    """Adoption rate at which user 0 is indifferent between dark and lit in ``regime``."""
    cal = calibration or calibrate(params)

    def f(a):
        return (user0_payoff(Venue.DARK, a, params, regime, cal).value
                - user0_payoff(Venue.LIT, a, params, regime, cal).value)

    return _bisect(f)


def _region_boundaries(regions):
    a1 = a2 = None
    for r in regions:
        has_bb = (BOTH, BOTH) in r.equilibria
        has_dd = (D, D) in r.equilibria
        if has_bb:
            a1 = r.hi
        if has_dd and a2 is None:
            a2 = r.lo
    return a1, a2


def thresholds(params: ModelParams, calibration: Calibration | None = None,
               regions: list[Region] | None = None) -> ThresholdSet:
    cal = calibration or calibrate(params)
    regions = regions if regions is not None else pure_nash_regions(params, cal)
    a1_num, a2_num = _region_boundaries(regions)
    a1_stated = float(F.alpha1_stated(params))
    a1_note = None
    if a1_num is not None and a1_num >= float(F.alpha2(params)):
        a1_note = "no Both/Dark region: Both/Both meets Dark/Dark directly"
    if a1_stated > float(F.alpha2(params)):
        extra = f"stated closed form {a1_stated:.6g} exceeds alpha2"
        a1_note = extra if a1_note is None else f"{a1_note}; {extra}"
    alpha1 = Threshold(a1_num, Method.NUMERIC, a1_stated, "stated closed form", a1_note)
    a2 = float(F.alpha2(params))
    alpha2 = Threshold(a2, Method.CLOSED_FORM, a2_num, "region boundary")

    lams = {}
    for name, regime in (("lambda1", "BB"), ("lambda2", "BD"), ("lambda3", "DD")):
        try:
            val = user0_indifference(params, regime, cal)
            note = None
        except RootNotBracketed as exc:
            val, note = None, f"corner solution: {exc}"
        lams[name] = (val, note)
    lam_stated = float(F.lambda_stated(params))
    t1 = Threshold(lams["lambda1"][0], Method.NUMERIC, note=lams["lambda1"][1])
    t2 = Threshold(lams["lambda2"][0], Method.NUMERIC, note=lams["lambda2"][1])
    t3 = Threshold(lams["lambda3"][0], Method.NUMERIC, lam_stated,
                   "stated closed form (derived for the Dark/Dark regime)", lams["lambda3"][1])
    return ThresholdSet(
        alpha1=alpha1, alpha2=alpha2, lambda1=t1, lambda2=t2, lambda3=t3,
        c1=Threshold(float(F.c1(params)), Method.CLOSED_FORM),
        theta=Threshold(float(F.theta(params)), Method.CLOSED_FORM),
    )


# ---------------------------------------------------------------- SPE

class Regime(str, enum.Enum):
    FULL = "FullAdoption"
    PARTIAL = "PartialAdoption"


@dataclass(frozen=True)
class Candidate:
    alpha: float
    regime: str
    in_region: bool
    lit_to_dark_stable: bool
    dark_to_lit_stable: bool
    r_dark: float
    r_lit: float
    miner_total: float

    @property
    def stable(self) -> bool:
        return self.in_region and self.lit_to_dark_stable and self.dark_to_lit_stable

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "regime": self.regime, "in_region": self.in_region,
                "lit_to_dark_stable": self.lit_to_dark_stable, "dark_to_lit_stable": self.dark_to_lit_stable,
                "r_dark": self.r_dark, "r_lit": self.r_lit, "miner_total": self.miner_total,
                "stable": self.stable}


@dataclass
class EquilibriumReport:
    regime: Regime
    alpha_star: float
    user0_venue: Venue
    arb_venues: tuple
    arb_regime: str  # formulas regime name
    r_dark: float
    r_lit: float
    welfare: dict
    aggregate_welfare: float
    transfer: float = 0.0
    thresholds: ThresholdSet | None = None
    candidates: list = field(default_factory=list)
    certificate: object | None = None
    notes: list = field(default_factory=list)

    def profile(self, params: ModelParams, alpha: float | None = None):
        """Strategy profile that plays this equilibrium."""
        arbs = self.arb_venues if self.arb_venues else (D, D)
        return standard_profile(params, self.alpha_star if alpha is None else alpha, self.user0_venue, arbs,
                                transfer=self.transfer)

    def to_dict(self) -> dict:
        return {
            "regime": self.regime.value,
            "alpha_star": self.alpha_star,
            "user0_venue": self.user0_venue.value,
            "arb_venues": [v.value for v in self.arb_venues],
            "arb_regime": self.arb_regime,
            "r_dark": self.r_dark,
            "r_lit": self.r_lit,
            "welfare": self.welfare,
            "aggregate_welfare": self.aggregate_welfare,
            "transfer": self.transfer,
            "thresholds": None if self.thresholds is None else self.thresholds.to_dict(),
            "candidates": [c.to_dict() for c in self.candidates],
            "certificate": None if self.certificate is None else self.certificate.to_dict(),
            "notes": list(self.notes),
        }


def _role_welfare(params, regime: str, alpha: float, transfer: float = 0.0) -> dict:
    r_dark, r_lit = (float(x) for x in F.miner_revenue(params, regime, transfer=transfer))
    a1, a2 = (float(x) for x in F.arb_payoffs(params, regime, alpha))
    if regime == "full":
        u0 = float(params.v0 - params.vb1 - transfer)
    else:
        u0 = float(F.user0_lit(params, regime, alpha))
    return {
        "miner_dark": r_dark,
        "miner_lit": r_lit,
        "miner_expected": alpha * r_dark + (1 - alpha) * r_lit,
        "user0": u0,
        "users": float(F.users_surplus(params, regime)),
        "arb1": a1,
        "arb2": a2,
    }


def _no_arbitrage(params: ModelParams) -> bool:
    try:
        validate(params)
        return params.p == 0
    except ParamsError as exc:
        soft = {Violation.ARB_PROFIT_TOO_LOW, Violation.GAMMA_OUT_OF_RANGE}
        if set(exc.codes) <= soft and params.c <= params.vb2:
            return True
        raise


def full_adoption_report(params: ModelParams, transfer: float = 0.0, note: str | None = None) -> EquilibriumReport:
    w = _role_welfare(params, "full", 1.0, transfer)
    return EquilibriumReport(
        regime=Regime.FULL, alpha_star=1.0, user0_venue=D, arb_venues=(D, D), arb_regime="full",
        r_dark=w["miner_dark"], r_lit=w["miner_lit"], welfare=w,
        aggregate_welfare=float(F.aggregate_welfare(params, "full")), transfer=transfer,
        notes=[note] if note else [],
    )


def _candidates(params, ths: ThresholdSet, regions, cal, transfer: float):
    B = params.B
    deviate_dark = B * params.vb1 + transfer  # user 0 moves dark once alpha passes lambda
    cands = []
    for name, regime in (("lambda1", "BB"), ("lambda2", "BD"), ("lambda3", "DD")):
        lam = getattr(ths, name).value
        if lam is None:
            continue
        here = regime_at(lam, params, cal)
        r_dark, r_lit = (float(x) for x in F.miner_revenue(params, regime))
        cands.append(Candidate(
            alpha=lam, regime=regime, in_region=here == regime,
            lit_to_dark_stable=deviate_dark <= r_lit,
            dark_to_lit_stable=r_lit <= r_dark,
            r_dark=r_dark, r_lit=r_lit, miner_total=lam * r_dark + (1 - lam) * r_lit,
        ))
    r_dark, r_lit = (float(x) for x in F.miner_revenue(params, "full", transfer=transfer))
    cands.append(Candidate(alpha=1.0, regime="full", in_region=True, lit_to_dark_stable=True,
                           dark_to_lit_stable=r_lit <= r_dark, r_dark=r_dark, r_lit=r_lit, miner_total=r_dark))
    return cands


def spe(params: ModelParams, calibration: Calibration | None = None, *, transfer: float = 0.0,
        certify: int | None = None, certify_seed: int = DEFAULT_CAL_SEED, workers: int = 1) -> EquilibriumReport:
    """Subgame perfect equilibrium of the adoption game.

    With ``transfer`` > 0, user 0 pays that amount to an adopting winning miner
    who executes user 0's dark order.  With ``certify`` set to an episode count the
    report carries a deviation certificate from
    :func:`darkvenue.sim.verify.verify_equilibrium` (which does not raise here;
    check ``report.certificate.passed``).
    """
    rep = _solve(params, calibration, transfer)
    if certify:
        from .sim.verify import verify_equilibrium
        rep.certificate = verify_equilibrium(rep, params, certify, certify_seed, calibration=calibration,
                                             workers=workers, raise_on_fail=False)
    return rep


def _solve(params: ModelParams, calibration: Calibration | None, transfer: float) -> EquilibriumReport:
    if _no_arbitrage(params):
        lam = float((params.v0 - params.vb2) / (params.v0 - params.vb1))
        w = _role_welfare(params, "no_arb", lam)
        return EquilibriumReport(
            regime=Regime.PARTIAL, alpha_star=lam, user0_venue=L, arb_venues=(), arb_regime="no_arb",
            r_dark=w["miner_dark"], r_lit=w["miner_lit"], welfare=w,
            aggregate_welfare=float(F.aggregate_welfare(params, "no_arb")),
            notes=["no profitable arbitrage (c <= v(B-2) or p = 0); treated as a no-arbitrage game"],
        )
    if params.c > F.c1(params):
        return full_adoption_report(params, transfer, "c > c1: user 0 avoids the lit venue")
    cal = calibration or calibrate(params)
    regions = pure_nash_regions(params, cal)
    ths = thresholds(params, cal, regions)
    cands = _candidates(params, ths, regions, cal, transfer)
    stable = [c for c in cands if c.stable]
    best = max(stable, key=lambda c: (c.miner_total, -c.alpha))
    if best.regime == "full":
        rep = full_adoption_report(params, transfer)
        rep.notes.append("full adoption maximizes aggregate miner payoff among stable candidates")
    else:
        w = _role_welfare(params, best.regime, best.alpha)
        rep = EquilibriumReport(
            regime=Regime.PARTIAL, alpha_star=best.alpha, user0_venue=L,
            arb_venues=REGIME_VENUES[best.regime], arb_regime=best.regime,
            r_dark=best.r_dark, r_lit=best.r_lit, welfare=w,
            aggregate_welfare=float(F.aggregate_welfare(params, best.regime, best.alpha)),
        )
    rep.thresholds = ths
    rep.candidates = cands
    rep.transfer = transfer if rep.regime is Regime.FULL else 0.0
    return rep


def threshold_sensitivities(params: ModelParams, h: float = 1e-4, calibration_episodes: int | None = None,
                            seed: int = DEFAULT_CAL_SEED) -> dict:
    """Central finite differences in p of every threshold.

    Calibrated thresholds are re-estimated at p-h and p+h on common random
    numbers (same seed) so their difference is not swamped by sampling noise.
    """
    if not h > 0:
        raise InvalidStep(f"step h={h} must be positive")
    if not (0.0 < params.p - h and params.p + h < 1.0):
        raise InvalidStep(f"p +- h must stay inside (0, 1); p={params.p}, h={h}")
    n = calibration_episodes or DEFAULT_CAL_EPISODES
    lo, hi = params.replace(detect_prob=params.p - h), params.replace(detect_prob=params.p + h)
    tl = thresholds(lo, calibrate(lo, n, seed))
    th = thresholds(hi, calibrate(hi, n, seed))
    out = {}
    for name in ("alpha1", "alpha2", "lambda1", "lambda2", "lambda3", "c1"):
        a, b = getattr(tl, name).value, getattr(th, name).value
        if a is None or b is None:
            out[name] = {"derivative": None, "sign": None}
            continue
        d = (b - a) / (2 * h)
        out[name] = {"derivative": d, "sign": int(np.sign(d))}
    return out


def report_from_dict(d: dict) -> EquilibriumReport:
    """Rebuild the parts of a report needed to replay or certify it (thresholds are not restored)."""
    return EquilibriumReport(
        regime=Regime(d["regime"]), alpha_star=float(d["alpha_star"]), user0_venue=Venue(d["user0_venue"]),
        arb_venues=tuple(Venue(v) for v in d.get("arb_venues", [])), arb_regime=d["arb_regime"],
        r_dark=float(d["r_dark"]), r_lit=float(d["r_lit"]), welfare=dict(d.get("welfare", {})),
        aggregate_welfare=float(d.get("aggregate_welfare", float("nan"))),
        transfer=float(d.get("transfer", 0.0)), notes=list(d.get("notes", [])),
    )
