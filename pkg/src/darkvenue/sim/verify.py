"""Best-response certificate for a claimed equilibrium.

Every unilateral deviation on a finite strategy menu is simulated against the
claimed profile on common random numbers; the certificate passes when no
deviation gains more than ``max(3*SE, abs_tol)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import formulas as F
from ..model import DARK_RULES, BiddingRule, ModelParams, Venue, standard_profile
from .engine import DEFAULT_NONCE_RULE, run_gains

USER0_MENU = (Venue.LIT, Venue.DARK)


@dataclass(frozen=True)
class DeviationCheck:
    agent: str
    deviation: str
    gain: float
    se: float
    threshold: float

    @property
    def profitable(self) -> bool:
        return self.gain > self.threshold

    def to_dict(self) -> dict:
        return {"agent": self.agent, "deviation": self.deviation, "gain": self.gain, "se": self.se,
                "threshold": self.threshold, "profitable": self.profitable}


@dataclass
class Certificate:
    passed: bool
    n_episodes: int
    seed: int
    fee_grid: int
    abs_tol: float
    checks: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def worst(self) -> DeviationCheck | None:
        if not self.checks:
            return None
        return max(self.checks, key=lambda c: c.gain - c.threshold)

    def to_dict(self, full: bool = False) -> dict:
        worst = self.worst()
        d = {"passed": self.passed, "n_episodes": self.n_episodes, "seed": self.seed,
             "fee_grid": self.fee_grid, "abs_tol": self.abs_tol, "n_checks": len(self.checks),
             "worst": None if worst is None else worst.to_dict(), "notes": list(self.notes)}
        if full:
            d["checks"] = [c.to_dict() for c in self.checks]
        return d


class CertificateFailed(RuntimeError):
    def __init__(self, deviation: DeviationCheck, certificate: Certificate):
        self.deviation = deviation
        self.certificate = certificate
        super().__init__(f"profitable deviation for {deviation.agent}: {deviation.deviation} "
                         f"gains {deviation.gain:.6g} (threshold {deviation.threshold:.6g})")


def default_abs_tol(params: ModelParams) -> float:
    """Largest saving from undercutting the equilibrium fee.

    Non-frontrunnable users bid their valuation capped at the floor, so user 0
    only has to outbid the best excluded competitor, which bids at least v(B).
    The model treats the valuation gaps between v(B-2) and v(B) as negligible.
    """
    return max(1e-6, params.vb2 - params.v(params.B))


def _user0_menu(base, params, grid):
    out = []
    for ven in USER0_MENU:
        for f in grid:
            fees = (float(f),) + base.user_fee[1:]
            venues = (ven,) + base.user_venue[1:]
            out.append((f"user0 {ven.value} fee={f:.6g}", base.replace(user_venue=venues, user_fee=fees)))
    venues = (Venue.NONE,) + base.user_venue[1:]
    out.append(("user0 None", base.replace(user_venue=venues, user_fee=(0.0,) + base.user_fee[1:])))
    return out


def _arb_menu(base, j, grid):
    named = list(DARK_RULES)
    rules = []
    for d in named + [float(g) for g in grid]:
        rules.append((Venue.DARK, BiddingRule(dark=d)))
    for lit in ["escalate"] + [float(g) for g in grid]:
        rules.append((Venue.LIT, BiddingRule(lit=lit)))
    for d in named + [float(g) for g in grid]:
        rules.append((Venue.BOTH, BiddingRule(dark=d, lit="escalate")))
    own_dark = base.arb_rule[j].dark if base.arb_rule[j].dark is not None else "truthful"
    for g in grid:
        rules.append((Venue.BOTH, BiddingRule(dark=own_dark, lit=float(g))))
    out = []
    for ven, rule in rules:
        if ven is base.arb_venue[j] and rule == base.arb_rule[j]:
            continue
        venues = list(base.arb_venue)
        rr = list(base.arb_rule)
        venues[j], rr[j] = ven, rule
        label = f"arb{j + 1} {ven.value} dark={rule.dark} lit={rule.lit}"
        out.append((label, base.replace(arb_venue=tuple(venues), arb_rule=tuple(rr))))
    return out


def verify_equilibrium(report, params: ModelParams, n_episodes: int, seed: int, *, fee_grid: int = 64,
                       abs_tol: float | None = None, delta: float = 1e-3, calibration=None,
                       nonce_rule: str = DEFAULT_NONCE_RULE, workers: int = 1,
                       raise_on_fail: bool = True) -> Certificate:
    """Check that no agent class gains from a unilateral deviation."""
    from ..equilibrium import calibrate, regime_at, REGIME_VENUES, user0_payoff

    if n_episodes < 2:
        raise ValueError("need at least 2 episodes for standard errors")
    tol = default_abs_tol(params) if abs_tol is None else abs_tol
    base = report.profile(params)
    grid = np.linspace(0.0, params.c, fee_grid)
    cert = Certificate(passed=True, n_episodes=n_episodes, seed=seed, fee_grid=fee_grid, abs_tol=tol)

    jobs = []  # (label, agent, profile, force, column, base_column)
    for label, prof in _user0_menu(base, params, grid):
        jobs.append((label, "user0", prof, None, "user0", "user0"))
    if base.user_venue[0] is Venue.LIT and params.p > 0:
        for j in (0, 1):
            for label, prof in _arb_menu(base, j, grid):
                jobs.append((label, f"arb{j + 1}", prof, None, f"arb{j + 1}", f"arb{j + 1}"))
    else:
        cert.notes.append("no lit opportunity for arbitrageurs: every arbitrageur deviation earns zero")

    # miners: compare the venue they are in with the one a marginal mass could move to
    cal = calibration
    a = report.alpha_star

    def shifted(alpha):
        nonlocal cal
        if cal is None and params.c > params.vb2:
            cal = calibrate(params)
        regime = regime_at(alpha, params, cal) if cal is not None else "no_arb"
        arbs = REGIME_VENUES.get(regime, (Venue.DARK, Venue.DARK))
        if regime == "no_arb":
            lit = float(F.user0_lit(params, "no_arb"))
        else:
            lit = user0_payoff(Venue.LIT, alpha, params, regime, cal).value
        pay = {Venue.LIT: lit, Venue.DARK: float(F.user0_dark(params, alpha, report.transfer)), Venue.NONE: 0.0}
        u0 = max(pay, key=pay.get)
        return standard_profile(params, alpha, u0, arbs, transfer=report.transfer)

    miner_jobs = []
    if a < 1.0:
        dev = shifted(min(1.0, a + delta))
        miner_jobs.append(("lit miner moves to dark", dev, True, "miner", False))
    if a > 0.0:
        dev = shifted(max(0.0, a - delta))
        miner_jobs.append(("dark miner moves to lit", dev, False, "miner", True))

    devs = [(prof, force, col, bcol) for _, _, prof, force, col, bcol in jobs]
    if devs:
        gains, ses = run_gains((base, None), devs, params, n_episodes, seed,
                               nonce_rule=nonce_rule, workers=workers)
        for (label, agent, *_), g, s in zip(jobs, gains, ses):
            cert.checks.append(DeviationCheck(agent, label, float(g), float(s), max(3 * float(s), tol)))
    for label, prof, force, col, base_force in miner_jobs:
        g, s = run_gains((base, base_force), [(prof, force, col, col)], params, n_episodes, seed,
                         nonce_rule=nonce_rule, workers=workers)
        cert.checks.append(DeviationCheck("miner", label, float(g[0]), float(s[0]), max(3 * float(s[0]), tol)))

    bad = [c for c in cert.checks if c.profitable]
    cert.passed = not bad
    if bad and raise_on_fail:
        raise CertificateFailed(max(bad, key=lambda c: c.gain - c.threshold), cert)
    return cert
