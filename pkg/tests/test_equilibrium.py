import json

import numpy as np
import pytest

from darkvenue import formulas as F
from darkvenue.equilibrium import (
    InvalidStep, Provenance, Regime, analytic_cells, arb_payoff_matrix, calibrate, pure_nash_regions,
    regime_at, report_from_dict, spe, threshold_sensitivities, thresholds, user0_indifference, user0_payoff,
)
from darkvenue.model import ModelParams, ParamsError, Venue, with_implied_gamma

from conftest import game

D, L, BOTH = Venue.DARK, Venue.LIT, Venue.BOTH


def unit(c=2.0, p=0.5, v0=10.0, gamma=1.05):
    # v(B-2) = 1 with B = 4
    return ModelParams(4, (1.5, 1.0, 0.99, 0.98, 0.97), v0, c, p, 0.01, 0.5, gamma)


@pytest.fixture(scope="module")
def cal_part(partial_game):
    return calibrate(partial_game, 100_000, 20240601)


def test_matrix_cell_examples():
    cells = analytic_cells(0.8, unit())
    assert cells[(D, D)] == pytest.approx((0.2, 0.2))
    assert analytic_cells(0.3, unit())[(L, L)] == pytest.approx((0.35625, 0.35625))
    assert analytic_cells(0.0, unit())[(D, D)] == (0.0, 0.0)


def test_matrix_provenance_and_symmetry(partial_game, cal_part):
    M = arb_payoff_matrix(0.3, partial_game, cal_part)
    assert M.provenance[(L, BOTH)] is Provenance.SIMULATION
    assert M.provenance[(D, D)] is Provenance.ANALYTIC
    assert M.symmetric()
    with pytest.raises(ValueError):
        arb_payoff_matrix(1.5, partial_game, cal_part)


def test_equilibria_at_extremes(partial_game, cal_part):
    assert arb_payoff_matrix(0.95, partial_game, cal_part).pure_nash() == [(D, D)]
    assert (BOTH, BOTH) in arb_payoff_matrix(0.05, partial_game, cal_part).pure_nash()


def test_regions_cover_unit_interval(partial_game, cal_part):
    regions = pure_nash_regions(partial_game, cal_part)
    assert regions[0].lo == 0.0 and regions[-1].hi == 1.0
    for a, b in zip(regions, regions[1:]):
        assert a.hi == b.lo and a.hi_closed != b.lo_closed
    a2 = float(F.alpha2(partial_game))
    # Dark/Dark needs alpha strictly above alpha2
    assert regime_at(a2 + 1e-6, partial_game, cal_part) == "DD"
    assert regime_at(a2 - 1e-6, partial_game, cal_part) != "DD"
    ths = thresholds(partial_game, cal_part, regions)
    assert ths.alpha2.value == pytest.approx(2 / 3)
    assert ths.alpha2.discrepancy() < 1e-9


def test_user0_payoff_examples():
    P = ModelParams(5, (10, 9, 8, 7, 6, 5), 10.0, 9.0, 0.5, 0.01, 0.5, 1.05)
    assert user0_payoff(D, 1.0, P).value == pytest.approx(3.0)
    assert user0_payoff(Venue.NONE, 0.4, P).value == 0.0
    Q = ModelParams(5, (10, 9, 8, 7, 6, 5), 10.0, 1.0, 0.5, 0.01, 0.5, 1.05)
    assert user0_payoff(L, 0.0, Q, "BB", calibrate(game(), 2000, 1)).provenance is Provenance.SIMULATION
    assert F.user0_lit(Q, "benchmark") == pytest.approx(1.25)


def test_dark_dark_indifference_closed_form(partial_game, cal_part):
    P = partial_game
    lam = user0_indifference(P, "DD", cal_part)
    assert lam == pytest.approx((P.v0 - P.vb2) / (P.q * P.c + P.v0 - P.vb1), abs=1e-9)


def test_spe_full_adoption_above_c1():
    P = with_implied_gamma(unit(c=13.0))
    assert F.c1(P) == pytest.approx(12.0)
    rep = spe(P)
    assert rep.regime is Regime.FULL and rep.alpha_star == 1.0 and rep.user0_venue is D


def test_spe_partial_below_c1(partial_game, cal_part):
    rep = spe(partial_game, cal_part)
    assert rep.regime is Regime.PARTIAL
    assert 0 < rep.alpha_star < 1 and rep.user0_venue is L
    assert any(c.stable for c in rep.candidates)


def test_spe_without_arbitrage_room():
    P = ModelParams(5, (10, 9, 8, 7, 6, 5), 9.5, 0.0, 0.5, 0.01, 0.5, 1.05)
    rep = spe(P)
    assert rep.arb_regime == "no_arb" and rep.user0_venue is L
    assert rep.welfare["arb1"] == rep.welfare["arb2"] == 0.0
    with pytest.raises(ParamsError):
        spe(P.replace(detect_prob=2.0))


def test_report_round_trip(partial_game, cal_part):
    rep = spe(partial_game, cal_part)
    back = report_from_dict(json.loads(json.dumps(rep.to_dict())))
    assert back.regime is rep.regime and back.alpha_star == rep.alpha_star
    assert back.arb_venues == rep.arb_venues


def test_sensitivity_step_checks(partial_game):
    with pytest.raises(InvalidStep):
        threshold_sensitivities(partial_game, h=0.0)
    with pytest.raises(InvalidStep):
        threshold_sensitivities(partial_game.replace(detect_prob=0.999), h=0.01)


def test_sensitivity_signs(partial_game):
    s = threshold_sensitivities(partial_game, h=1e-3, calibration_episodes=50_000)
    assert s["alpha2"]["derivative"] == pytest.approx(1 / (2 - partial_game.p) ** 2, rel=1e-6)
    assert s["c1"]["sign"] == -1
    for name in ("lambda1", "lambda2", "lambda3"):
        assert s[name]["sign"] == -1


def test_calibration_is_seeded(partial_game):
    a = calibrate.__wrapped__(partial_game, 3000, 4)
    b = calibrate.__wrapped__(partial_game, 3000, 4)
    assert a is not b
    assert np.array_equal(a.mean, b.mean) and np.array_equal(a.cov, b.cov)
    assert not np.array_equal(a.mean, calibrate.__wrapped__(partial_game, 3000, 5).mean)
