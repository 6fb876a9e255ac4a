import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from darkvenue.amm import (
    ConstraintViolated, PoolState, VictimOrder, arbitrage_revenue, best_frontrun, bisect_max_input,
    exact_max_input, max_input, paper_max_input, swap_output, victim_constraint, victim_output,
)

POOL = PoolState(1000.0, 1000.0)


def three_swaps(r1, r2, v, x):
    """Front leg, victim and back leg traced by hand with the raw 0.997 fee."""
    y = 0.997 * x * r2 / (r1 + 0.997 * x)
    r1, r2 = r1 + x, r2 - y
    out_v = 0.997 * v * r2 / (r1 + 0.997 * v)
    r1, r2 = r1 + v, r2 - out_v
    back = 0.997 * y * r1 / (r2 + 0.997 * y)
    return back - x


def test_swap_examples():
    assert swap_output(POOL, 0.0) == 0.0
    assert swap_output(POOL, 10.0) == pytest.approx(9.97 * 1000 / 1009.97, abs=1e-6)
    assert swap_output(POOL, 10.0) == pytest.approx(9.871580, abs=1e-6)
    with pytest.raises(ValueError):
        PoolState(0.0, 1.0)


def test_constraint_boundary():
    m0 = victim_output(POOL, 10.0, 0.0)
    assert victim_constraint(POOL, VictimOrder(10.0, m0), 0.0)
    assert not victim_constraint(POOL, VictimOrder(10.0, m0 * (1 + 1e-9)), 0.0)
    assert max_input(POOL, VictimOrder(10.0, m0 * (1 + 1e-9))).bisection == 0.0


def test_max_input_at_binding_bound():
    m0 = victim_output(POOL, 10.0, 0.0)
    assert exact_max_input(POOL, VictimOrder(10.0, m0)) == pytest.approx(0.0, abs=1e-9)


def test_max_input_grows_as_bound_loosens():
    xs = [exact_max_input(POOL, VictimOrder(10.0, m)) for m in (1e-2, 1e-4, 1e-6)]
    assert xs[0] < xs[1] < xs[2]
    assert xs[2] > 1e5


def test_golden_fixture():
    golden = bisect_max_input(POOL, VictimOrder(10.0, 9.0))
    assert victim_constraint(POOL, VictimOrder(10.0, 9.0), golden)
    assert not victim_constraint(POOL, VictimOrder(10.0, 9.0), golden * (1 + 1e-9))
    assert exact_max_input(POOL, VictimOrder(10.0, 9.0)) == pytest.approx(golden, rel=1e-10)
    # the printed closed form lands near, not on, the root
    assert paper_max_input(1000.0, 1000.0, 10.0, 9.0) == pytest.approx(golden, rel=1e-3)


pools = st.tuples(st.floats(10.0, 1e6), st.floats(10.0, 1e6))


@settings(max_examples=200)
@given(pools, st.floats(1e-3, 0.5), st.floats(0.001, 0.3), st.sampled_from(["verbatim", "fee_adjusted"]))
def test_exact_root_matches_bisection(reserves, frac, slip, variant):
    pool = PoolState(*reserves)
    v = frac * pool.r1
    m = victim_output(pool, v, 0.0, variant) * (1 - slip)
    res = max_input(pool, VictimOrder(v, m), variant)
    assert res.exact == pytest.approx(res.bisection, rel=1e-9)
    assert victim_constraint(pool, VictimOrder(v, m), res.bisection, variant)


def test_revenue_matches_hand_trace():
    victim = VictimOrder(50.0, 40.0)
    x = bisect_max_input(POOL, victim)
    plan = arbitrage_revenue(POOL, victim, x)
    assert plan.revenue == pytest.approx(three_swaps(1000.0, 1000.0, 50.0, x), rel=1e-12)
    assert plan.revenue > 0
    assert arbitrage_revenue(POOL, victim, 0.0).revenue == 0.0


def test_round_trip_without_victim_loses():
    for x in (0.1, 10.0, 500.0):
        assert arbitrage_revenue(POOL, VictimOrder(0.0, 0.0), x).revenue < 0


def test_revenue_rejects_inadmissible_size():
    victim = VictimOrder(50.0, 40.0)
    x = bisect_max_input(POOL, victim)
    with pytest.raises(ConstraintViolated):
        arbitrage_revenue(POOL, victim, x * 1.01)


def test_best_frontrun_matches_dense_grid():
    victim = VictimOrder(50.0, 40.0)
    best = best_frontrun(POOL, victim)
    grid = np.linspace(0.0, best.x_max, 100_001)
    top = max(three_swaps(1000.0, 1000.0, 50.0, x) for x in grid)
    assert best.revenue_opt >= top - 1e-9
    assert best.revenue_opt == pytest.approx(top, abs=1e-9)


def test_best_frontrun_empty():
    m0 = victim_output(POOL, 10.0, 0.0)
    best = best_frontrun(POOL, VictimOrder(10.0, m0 * 1.01))
    assert best.x_opt == 0.0 and best.revenue_opt == 0.0 and not best.frontrunnable


@settings(max_examples=50, deadline=None)
@given(pools, st.floats(1e-3, 0.2), st.floats(0.001, 0.2))
def test_best_frontrun_beats_endpoints(reserves, frac, slip):
    pool = PoolState(*reserves)
    v = frac * pool.r1
    victim = VictimOrder(v, victim_output(pool, v, 0.0) * (1 - slip))
    best = best_frontrun(pool, victim)
    assert 0.0 <= best.x_opt <= best.x_max
    assert best.revenue_opt >= max(0.0, best.revenue_at_max) - 1e-12 * max(1.0, abs(best.revenue_at_max))
    assert math.isfinite(best.revenue_opt)
