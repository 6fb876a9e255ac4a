"""Closed-form payoffs, fees and welfare per equilibrium regime.

Every function does plain arithmetic on its inputs, so passing exact rationals
(``fractions.Fraction``) yields exact results.  ``P`` is any object with the
attributes of :class:`~darkvenue.model.ModelParams` used here (``B``, ``v0``,
``c``, ``p``, ``gamma``, ``vb2``, ``vb1``, ``q`` and ``v(i)``).

Two expression sets exist.  ``model`` follows the game rules as simulated
(and is what the solver uses); ``stated`` reproduces the commonly quoted
expressions, which differ from ``model`` in a few places (noted inline).

Regimes: ``benchmark`` (no dark venue, user 0 submits), ``benchmark_absent``
(no dark venue, user 0 stays out), ``DD``/``BB``/``BD`` (arbitrageur venue
pairs Dark/Dark, Both/Both, Both/Dark with user 0 on the lit venue), ``full``
(everyone in the dark venue, user 0 dark) and ``no_arb`` (c too small to
arbitrage).
"""
from __future__ import annotations

REGIMES = ("benchmark", "benchmark_absent", "DD", "BB", "BD", "full", "no_arb")
SOURCES = ("model", "stated")


def vsum(P, lo: int, hi: int):
    """Sum of valuations v(lo) + ... + v(hi)."""
    total = 0
    for i in range(lo, hi + 1):
        total = total + P.v(i)
    return total


def c1(P):
    """Largest arbitrage profit at which user 0 still uses the lit venue (infinite without detection)."""
    if P.q == 0:
        return float("inf")
    return (P.v0 - P.vb2) / P.q


def theta(P):
    return P.q * P.c


def alpha2(P):
    return 1 / (2 - P.p)


def alpha1_stated(P):
    p, g = P.p, P.gamma
    return (p * g - 2 * g) / (p * g + p - 2 * g - 1)


def alpha1_matrix(P):
    """Indifference between Dark and Both against a Both rival."""
    D = P.c - P.vb2
    L = P.c - P.gamma * P.vb2
    return L * (2 - P.p) / (2 * (1 - P.p) * D + L * (2 - P.p))


def lambda_stated(P):
    p, c, x, y, v0 = P.p, P.c, P.vb2, P.vb1, P.v0
    return (v0 - y) / (-c * p**2 + 2 * c * p + y * p**2 - 2 * y * p - y - x * p**2 + 2 * x * p + v0)


def frontrun_prob(P, regime: str, alpha=0):
    q, p = P.q, P.p
    return {
        "benchmark": q, "BB": q, "DD": alpha * q, "BD": alpha * q + (1 - alpha) * p,
        "benchmark_absent": 0, "full": 0, "no_arb": 0,
    }[regime]


def user0_lit(P, regime: str, alpha=0):
    """User 0's expected payoff on the lit venue in a regime."""
    if regime == "no_arb":
        return P.v0 - P.vb2
    return P.v0 - P.vb2 - P.c * frontrun_prob(P, regime, alpha)


def user0_dark(P, alpha, transfer=0):
    return alpha * (P.v0 - P.vb1 - transfer)


def miner_revenue(P, regime: str, source: str = "model", transfer=0) -> tuple:
    """``(r_dark, r_lit)``: winning miner's expected fees with and without adoption."""
    B, x, y, c, p, q, g = P.B, P.vb2, P.vb1, P.c, P.p, P.q, P.gamma
    base = (B - 1) * x + (1 - p) ** 2 * y
    if regime in ("benchmark",):
        r = base + q * g * x
        return r, r
    if regime == "benchmark_absent":
        r = B * P.v(B)
        return r, r
    if regime == "full":
        if source == "stated":
            return B * y + transfer, B * P.v(B + 1)
        return B * y + transfer, (B - 1) * y + P.v(B)
    if regime == "no_arb":
        r = (B - 1) * x + y
        return r, r
    if regime == "DD":
        return base + q * c - 2 * p * (1 - p) * (c - x), (B - 1) * x + y
    if regime == "BB":
        return base + q * c, base + q * g * x
    if regime == "BD":
        if source == "stated":
            return base + q * (c - x), base + q * g * x
        # dark miner: the Both arbitrageur's lit bid tips off the rival (both pay c);
        # a lone Dark detector pays the floor; lit miner sees only the Both one
        return base + p * c + p * (1 - p) * x, (B - 1) * x + p * x + (1 - p) * y
    raise ValueError(f"unknown regime {regime!r}")


def arb_payoffs(P, regime: str, alpha=0, source: str = "model") -> tuple:
    x, c, p, q, g = P.vb2, P.c, P.p, P.q, P.gamma
    D, L = c - x, c - g * x
    if regime in ("benchmark",):
        return (L * q / 2,) * 2
    if regime == "DD":
        return (alpha * p * (1 - p) * D,) * 2
    if regime == "BB":
        return ((1 - alpha) * q * L / 2,) * 2
    if regime == "BD":
        if source == "stated":
            return L * (1 - alpha) * q / 2, L * (1 - alpha) / 2 + alpha * D * q
        return (1 - alpha) * p * D, alpha * p * (1 - p) * D
    return (0, 0)


def users_surplus(P, regime: str):
    """Total surplus of the non-frontrunnable users."""
    B = P.B
    if regime in ("benchmark_absent",):
        return vsum(P, 1, B) - B * P.v(B)
    if regime == "full":
        return vsum(P, 1, B - 1) - (B - 1) * P.vb1
    return vsum(P, 1, B - 2) - (B - 2) * P.vb2


def aggregate_welfare(P, regime: str, alpha=0, source: str = "model"):
    """Expected sum of valuations of the user transactions that make it into the block."""
    B, p, q = P.B, P.p, P.q
    if regime == "benchmark_absent":
        return vsum(P, 1, B)
    if regime in ("full", "no_arb"):
        return vsum(P, 0, B - 1)
    if source == "stated":
        bench = (1 - p) ** 2 * vsum(P, 0, B - 2) + q * vsum(P, 0, B - 1)
        if regime == "DD":
            return (1 - alpha) * vsum(P, 0, B - 1) + alpha * bench
        return bench
    # an included arbitrage order displaces user B-1
    return vsum(P, 0, B - 1) - frontrun_prob(P, regime, alpha) * P.vb1


def min_fee(P, regime: str):
    if regime == "benchmark_absent":
        return P.v(P.B)
    if regime == "full":
        return P.vb1
    return P.vb2
