"""Constant-product AMM arithmetic and sandwich sizing under a victim's slippage bound."""
from __future__ import annotations

import math
from dataclasses import dataclass

FEE_KEEP = 0.997

VARIANTS = ("verbatim", "fee_adjusted")


class ConstraintViolated(ValueError):
    pass


@dataclass(frozen=True)
class PoolState:
    """Reserves seen by a trader selling the input token: ``r1`` in, ``r2`` out."""

    r1: float
    r2: float

    def __post_init__(self):
        if not (self.r1 > 0 and self.r2 > 0):
            raise ValueError(f"reserves must be positive, got ({self.r1}, {self.r2})")

    def swap(self, x: float, *, credit: float | None = None) -> tuple[float, "PoolState"]:
        """Sell ``x`` of the input token. ``credit`` is what the input reserve grows by."""
        out = swap_output(self, x)
        grow = x if credit is None else credit
        return out, PoolState(self.r1 + grow, self.r2 - out)

    def flipped(self) -> "PoolState":
        return PoolState(self.r2, self.r1)


@dataclass(frozen=True)
class VictimOrder:
    input_amount: float
    min_output: float


@dataclass(frozen=True)
class ArbitragePlan:
    front_input: float
    front_output: float
    victim_output: float
    back_output: float

    @property
    def revenue(self) -> float:
        return self.back_output - self.front_input


@dataclass(frozen=True)
class MaxInputResult:
    closed_form: float
    exact: float
    bisection: float
    variant: str

    @property
    def rel_diff(self) -> float:
        """Relative gap between the printed closed form and the bisection root."""
        scale = max(abs(self.bisection), 1e-300)
        if self.bisection == 0.0 and self.closed_form == 0.0:
            return 0.0
        return abs(self.closed_form - self.bisection) / scale

    def agrees(self, rtol: float = 1e-6) -> bool:
        return self.rel_diff <= rtol


@dataclass(frozen=True)
class FrontrunResult:
    x_opt: float
    revenue_opt: float
    x_max: float
    revenue_at_max: float
    method: str

    @property
    def frontrunnable(self) -> bool:
        return self.revenue_opt > 0.0


def swap_output(pool: PoolState, x: float) -> float:
    if x < 0:
        raise ValueError("swap input must be nonnegative")
    xf = FEE_KEEP * x
    return xf * pool.r2 / (pool.r1 + xf)


def _credit(x: float, variant: str) -> float:
    if variant == "verbatim":
        return x
    if variant == "fee_adjusted":
        return FEE_KEEP * x
    raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")


def victim_output(pool: PoolState, v: float, x: float, variant: str = "verbatim") -> float:
    """Victim's output after a front-running sale of ``x``."""
    y = FEE_KEEP * x * pool.r2 / (pool.r1 + FEE_KEEP * x)
    return v * FEE_KEEP * (pool.r2 - y) / ((pool.r1 + _credit(x, variant)) + FEE_KEEP * v)


def victim_constraint(pool: PoolState, victim: VictimOrder, x: float, variant: str = "verbatim") -> bool:
    if x < 0:
        raise ValueError("front-run size must be nonnegative")
    return victim_output(pool, victim.input_amount, x, variant) >= victim.min_output


def paper_max_input(r1: float, r2: float, v: float, m: float) -> float:
    """Published closed form with its printed constants (not re-derived)."""
    t = math.sqrt(
        9000000 * r1**2 * m
        + 3976036000000 * r1 * r2 * v
        - 5964054000 * r1 * m * v
        + 988053892081 * m * v**2
    )
    return 5.01505e-7 * t / math.sqrt(m) - 1.0015 * r1 - 0.4985 * v


def exact_max_input(pool: PoolState, victim: VictimOrder, variant: str = "verbatim") -> float:
    """Largest admissible front-run size from the constraint's quadratic, full precision."""
    r1, r2 = pool.r1, pool.r2
    v, m = victim.input_amount, victim.min_output
    f = FEE_KEEP
    if victim_output(pool, v, 0.0, variant) < m:
        return 0.0
    k = f * v * r1 * r2 / m
    if variant == "verbatim":
        # (r1 + f v + x)(r1 + f x) = k
        a = r1 + f * v
        qa, qb, qc = f, f * a + r1, a * r1 - k
        disc = qb * qb - 4 * qa * qc
        return max(0.0, -2 * qc / (qb + math.sqrt(disc)))
    if variant == "fee_adjusted":
        # z = r1 + f x solves z^2 + f v z - k = 0
        b = f * v
        z = 2 * k / (b + math.sqrt(b * b + 4 * k))
        return max(0.0, (z - r1) / f)
    raise ValueError(f"unknown variant {variant!r}")


def bisect_max_input(pool: PoolState, victim: VictimOrder, variant: str = "verbatim",
                     rtol: float = 1e-12, max_iter: int = 400) -> float:
    """Largest x keeping the victim's bound satisfied, by bisection on the constraint."""
    if not victim_constraint(pool, victim, 0.0, variant):
        return 0.0
    lo, hi = 0.0, max(pool.r1, 1.0)
    while victim_constraint(pool, victim, hi, variant):
        lo, hi = hi, hi * 2.0
        if hi > 1e300:
            return math.inf
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if victim_constraint(pool, victim, mid, variant):
            lo = mid
        else:
            hi = mid
        if hi - lo <= rtol * hi:
            break
    return lo


def max_input(pool: PoolState, victim: VictimOrder, variant: str = "verbatim") -> MaxInputResult:
    """Largest front-run size that still lets the victim trade.

    Returns the printed closed form next to an exact quadratic root and a
    bisection root so that any disagreement is visible rather than hidden.
    """
    if not victim_constraint(pool, victim, 0.0, variant):
        return MaxInputResult(0.0, 0.0, 0.0, variant)
    closed = max(0.0, paper_max_input(pool.r1, pool.r2, victim.input_amount, victim.min_output))
    return MaxInputResult(
        closed_form=closed,
        exact=exact_max_input(pool, victim, variant),
        bisection=bisect_max_input(pool, victim, variant),
        variant=variant,
    )


def arbitrage_revenue(pool: PoolState, victim: VictimOrder, x: float, variant: str = "verbatim",
                      *, check: bool = True) -> ArbitragePlan:
    """Run front leg, victim and back leg in sequence and report the round trip."""
    if check and not victim_constraint(pool, victim, x, variant):
        # allow the bisection root itself, which can sit one ulp past the boundary
        if victim_output(pool, victim.input_amount, x, variant) < victim.min_output * (1 - 1e-12):
            raise ConstraintViolated(f"victim fails its slippage bound at x={x}")
    y, after_front = pool.swap(x, credit=_credit(x, variant))
    out_v, after_victim = after_front.swap(victim.input_amount)
    back = swap_output(after_victim.flipped(), y)
    return ArbitragePlan(front_input=x, front_output=y, victim_output=out_v, back_output=back)


_GOLDEN = (math.sqrt(5) - 1) / 2


def _golden_max(f, lo: float, hi: float, tol: float) -> tuple[float, float]:
    a, b = lo, hi
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1, f2 = f(x1), f(x2)
    while b - a > tol:
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLDEN * (b - a)
            f2 = f(x2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLDEN * (b - a)
            f1 = f(x1)
    x = 0.5 * (a + b)
    return x, f(x)


def best_frontrun(pool: PoolState, victim: VictimOrder, variant: str = "verbatim",
                  *, scan: int = 64, tol: float = 1e-12) -> FrontrunResult:
    """Revenue-maximizing front-run size on ``[0, max_input]``.

    The upper end is the exact quadratic root; bisection would report a
    rounding-sized positive bound when the victim's limit binds at zero.
    """
    x_max = exact_max_input(pool, victim, variant)
    if x_max <= 0.0 or not math.isfinite(x_max):
        return FrontrunResult(0.0, 0.0, max(x_max, 0.0) if math.isfinite(x_max) else x_max,
                              0.0, "empty")

    def rev(x):
        return arbitrage_revenue(pool, victim, x, variant, check=False).revenue

    grid = [x_max * i / scan for i in range(scan + 1)]
    vals = [rev(x) for x in grid]
    k = max(range(len(vals)), key=vals.__getitem__)
    diffs = [b - a for a, b in zip(vals, vals[1:])]
    slack = 1e-12 * max(1.0, max(abs(v) for v in vals))
    rising = [d > -slack for d in diffs[:k]]
    falling = [d < slack for d in diffs[k:]]
    unimodal = all(rising) and all(falling)
    span_tol = tol * max(x_max, 1.0)
    if unimodal:
        lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, scan)]
        x, r = _golden_max(rev, lo, hi, span_tol)
        method = "golden"
    else:
        dense = [x_max * i / (scan * 64) for i in range(scan * 64 + 1)]
        dvals = [rev(x) for x in dense]
        j = max(range(len(dvals)), key=dvals.__getitem__)
        lo, hi = dense[max(j - 1, 0)], dense[min(j + 1, len(dense) - 1)]
        x, r = _golden_max(rev, lo, hi, span_tol)
        method = "grid+golden"
    # endpoints are admissible too
    for cand in (0.0, x_max):
        rc = rev(cand)
        if rc > r:
            x, r = cand, rc
    return FrontrunResult(x_opt=x, revenue_opt=r, x_max=x_max, revenue_at_max=rev(x_max), method=method)
