from fractions import Fraction as Fr

import pytest
from hypothesis import given, strategies as st

from darkvenue import formulas as F

from conftest import ExactParams, game

fr = st.fractions(min_value=Fr(1, 100), max_value=Fr(99, 100), max_denominator=100)


def exact(p=Fr(1, 2), c=10, v0=20, gamma=Fr(401, 400)):
    return ExactParams(5, (10, 9, 8, Fr(795, 100), Fr(79, 10), 6), v0, c, p, gamma)


def test_threshold_examples():
    P = ExactParams(5, (10, 9, 1, Fr(9, 10), Fr(8, 10), Fr(7, 10)), 10, 4, Fr(1, 2), Fr(21, 20))
    assert F.alpha2(P) == Fr(2, 3)
    assert F.c1(P) == 12
    assert F.theta(P) == 3


def test_no_detection_means_no_threshold():
    assert F.c1(game(p=0.0)) == float("inf")


@given(fr)
def test_alpha2_closed_form(p):
    P = exact(p=p)
    assert F.alpha2(P) == 1 / (2 - p)


@given(fr)
def test_alpha1_matrix_is_dark_both_indifference(p):
    P = exact(p=p)
    a = F.alpha1_matrix(P)
    D, L = P.c - P.vb2, P.c - P.gamma * P.vb2
    # Dark vs a Both rival against Both vs a Both rival
    assert a * p * (1 - p) * D == (1 - a) * P.q * L / 2


@given(fr, st.integers(9, 40))
def test_lambda_stated_simplified_form(p, c):
    P = exact(p=p, c=c)
    x, y = P.vb2, P.vb1
    assert F.lambda_stated(P) == (P.v0 - y) / (P.v0 - y + P.q * (P.c + x - y))


def test_benchmark_miner_revenue_expression():
    P = exact()
    x, y, p, B = P.vb2, P.vb1, P.p, P.B
    expected = x * (B - 1) + (1 - p) ** 2 * y + (1 - (1 - p) ** 2) * P.gamma * x
    assert F.miner_revenue(P, "benchmark") == (expected, expected)


def test_stated_equilibrium_revenues():
    P = exact()
    x, y, p, c, B = P.vb2, P.vb1, P.p, P.c, P.B
    base = x * (B - 1) + (1 - p) ** 2 * y
    q = 1 - (1 - p) ** 2
    assert F.miner_revenue(P, "DD", "stated")[0] == base + q * c - 2 * p * (1 - p) * (c - x)
    assert F.miner_revenue(P, "DD", "stated")[1] == x * (B - 1) + y
    assert F.miner_revenue(P, "BB", "stated") == (base + q * c, base + q * P.gamma * x)
    assert F.miner_revenue(P, "BD", "stated") == (base + q * (c - x), base + q * P.gamma * x)


@pytest.mark.parametrize("regime", F.REGIMES)
def test_fraction_inputs_stay_exact(regime):
    P = exact()
    for val in (*F.miner_revenue(P, regime), F.aggregate_welfare(P, regime, Fr(1, 3)),
                F.users_surplus(P, regime), F.min_fee(P, regime), *F.arb_payoffs(P, regime, Fr(1, 3))):
        assert isinstance(val, (int, Fr))


def test_unknown_regime():
    with pytest.raises(ValueError):
        F.miner_revenue(exact(), "XY")


@given(fr, st.fractions(0, 1, max_denominator=50))
def test_welfare_never_exceeds_full_adoption(p, alpha):
    P = exact(p=p)
    top = F.aggregate_welfare(P, "full")
    assert top == F.vsum(P, 0, P.B - 1)
    for regime in ("DD", "BB", "BD", "benchmark"):
        assert F.aggregate_welfare(P, regime, alpha) <= top


def test_frontrun_probability_by_regime():
    P = exact(p=Fr(1, 4))
    a = Fr(1, 3)
    assert F.frontrun_prob(P, "BB") == P.q
    assert F.frontrun_prob(P, "DD", a) == a * P.q
    assert F.frontrun_prob(P, "BD", a) == a * P.q + (1 - a) * P.p
    assert F.user0_lit(P, "no_arb") == P.v0 - P.vb2
