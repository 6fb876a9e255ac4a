"""Welfare accounting per role, with and without the dark venue, and the transfer scheme."""
from __future__ import annotations

from dataclasses import dataclass, replace

from . import formulas as F
from .equilibrium import EquilibriumReport, Regime, spe
from .model import ModelParams


@dataclass(frozen=True)
class WelfareReport:
    regime: str
    with_dark: bool
    source: str
    alpha: float
    miner_dark: float
    miner_lit: float
    miner_expected: float
    user0: float
    users: float
    arb1: float
    arb2: float
    aggregate_welfare: float
    min_fee: float
    total_fee: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _bench_regime(params: ModelParams) -> str:
    return "benchmark_absent" if params.c > F.c1(params) else "benchmark"


def welfare_report(report: EquilibriumReport | None, params: ModelParams, with_dark: bool = True,
                   source: str = "model") -> WelfareReport:
    """Expected payoff of every role.

    With ``with_dark`` false the benchmark without a dark venue is reported
    (``report`` is then ignored).  ``source`` picks the expression set, see
    :mod:`darkvenue.formulas`.
    """
    if source not in F.SOURCES:
        raise ValueError(f"source must be one of {F.SOURCES}")
    if with_dark:
        if report is None:
            raise ValueError("with_dark needs an equilibrium report")
        regime, alpha, transfer = report.arb_regime, report.alpha_star, report.transfer
    else:
        regime, alpha, transfer = _bench_regime(params), 0.0, 0.0

    r_dark, r_lit = (float(x) for x in F.miner_revenue(params, regime, source, transfer))
    a1, a2 = (float(x) for x in F.arb_payoffs(params, regime, alpha, source))
    if regime == "full":
        u0 = float(params.v0 - params.vb1 - transfer)
    elif regime == "benchmark_absent":
        u0 = 0.0
    elif source == "stated" and regime in ("DD", "BB", "BD"):
        # at the indifference point the lit payoff is quoted at the full frontrun risk
        u0 = float(params.v0 - params.vb2 - params.q * params.c)
    else:
        u0 = float(F.user0_lit(params, regime, alpha))
    expected = alpha * r_dark + (1 - alpha) * r_lit
    return WelfareReport(
        regime=regime, with_dark=with_dark, source=source, alpha=float(alpha),
        miner_dark=r_dark, miner_lit=r_lit, miner_expected=expected,
        user0=u0, users=float(F.users_surplus(params, regime)), arb1=a1, arb2=a2,
        aggregate_welfare=float(F.aggregate_welfare(params, regime, alpha, source)),
        min_fee=float(F.min_fee(params, regime)), total_fee=expected,
    )


@dataclass
class TransferResult:
    theta: float
    before: EquilibriumReport
    after: EquilibriumReport
    user0_before: float
    user0_after: float
    miners_before: float
    miners_after: float

    @property
    def user0_gain(self) -> float:
        return self.user0_after - self.user0_before

    @property
    def miners_gain(self) -> float:
        return self.miners_after - self.miners_before

    def to_dict(self) -> dict:
        return {"theta": self.theta, "before": self.before.to_dict(), "after": self.after.to_dict(),
                "user0_before": self.user0_before, "user0_after": self.user0_after,
                "miners_before": self.miners_before, "miners_after": self.miners_after,
                "user0_gain": self.user0_gain, "miners_gain": self.miners_gain}


def apply_transfer(params: ModelParams, calibration=None, before: EquilibriumReport | None = None) -> TransferResult:
    """User 0 pays ``theta = q*c`` to an adopting miner who executes user 0's dark order.

    When full adoption already holds without it, ``theta`` is 0 and the
    equilibrium is unchanged.  User 0's payoff is net of the transfer; the
    miners' payoff is the expected fee revenue ``alpha*r_dark + (1-alpha)*r_lit``
    including the transfer.
    """
    before = before if before is not None else spe(params, calibration)
    if before.regime is Regime.FULL or params.p == 0:
        after = replace(before, notes=list(before.notes) + ["transfer not needed: theta = 0"])
        theta = 0.0
    else:
        theta = float(F.theta(params))
        after = spe(params, calibration, transfer=theta)

    def miners(rep):
        return rep.alpha_star * rep.r_dark + (1 - rep.alpha_star) * rep.r_lit

    return TransferResult(theta=theta, before=before, after=after,
                          user0_before=float(before.welfare["user0"]), user0_after=float(after.welfare["user0"]),
                          miners_before=miners(before), miners_after=miners(after))
