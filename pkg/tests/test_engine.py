import numpy as np
import pytest

from darkvenue.model import ModelParams, Venue, standard_profile
from darkvenue.sim.engine import (
    Moments, column_names, episode, estimate_payoffs, paired_gain, run_gains, run_moments, trace,
)

from conftest import game

D, L, BOTH, NONE = Venue.DARK, Venue.LIT, Venue.BOTH, Venue.NONE
PAIRS = [(D, D), (D, L), (L, L), (BOTH, BOTH), (BOTH, D), (BOTH, L), (D, BOTH)]


def small(p=0.5, alpha_c=2.0):
    return ModelParams(4, (1.5, 1.0, 0.9, 0.8, 0.7), 3.0, alpha_c, p, 0.01, 0.5, 1.05)


def outcome_row(out, B):
    names = column_names(B)
    vals = dict(out.payoffs)
    vals.update(miner=out.miner_fee_revenue, welfare=out.welfare, frontrun=float(out.frontrun),
                adopted=float(out.adopted), detect1=float(out.detection_draws[0]),
                detect2=float(out.detection_draws[1]))
    return np.array([vals[k] for k in names])


@pytest.mark.parametrize("user0", [L, D, NONE])
@pytest.mark.parametrize("arbs", PAIRS)
def test_vectorized_kernel_matches_reference(user0, arbs):
    P = game(p=0.6)
    prof = standard_profile(P, 0.5, user0, arbs)
    rows = trace(prof, P, 200, seed=3)
    for i in range(rows.shape[0]):
        ref = episode(prof, P, 3, i)
        ref.block.check(P.B)
        assert np.allclose(rows[i], outcome_row(ref, P.B), atol=1e-12), (i, arbs, user0)


@pytest.mark.parametrize("rule", ["higher_fee", "dark_first"])
def test_kernel_matches_reference_under_both_nonce_rules(rule):
    P = game(p=0.8)
    prof = standard_profile(P, 0.5, L, (BOTH, BOTH))
    rows = trace(prof, P, 150, seed=9, nonce_rule=rule)
    for i in range(rows.shape[0]):
        assert np.allclose(rows[i], outcome_row(episode(prof, P, 9, i, nonce_rule=rule), P.B))


def test_deterministic_across_chunks_and_workers():
    P = game()
    prof = standard_profile(P, 0.4, L, (BOTH, D))
    a = run_moments([(prof, None)], P, 5000, seed=1, chunk_size=5000)
    b = run_moments([(prof, None)], P, 5000, seed=1, chunk_size=700, workers=2)
    assert np.allclose(a.mean, b.mean, rtol=1e-12, atol=1e-12)
    c = estimate_payoffs(prof, P, 5000, 1)
    d = estimate_payoffs(prof, P, 5000, 1)
    assert c == d


def test_dark_dark_cell_example():
    P = small()
    est = estimate_payoffs(standard_profile(P, 0.8, L, (D, D)), P, 1_000_000, seed=2)
    for arb in ("arb1", "arb2"):
        assert abs(est.mean[arb] - 0.2) < 3 * est.se[arb]


def test_single_episode_has_no_se():
    P = small()
    est = estimate_payoffs(standard_profile(P, 0.8, L), P, 1, seed=2)
    assert est.se is None


def test_full_adoption_dark_user_never_frontrun():
    P = game()
    prof = standard_profile(P, 1.0, D, (D, D))
    est = estimate_payoffs(prof, P, 20_000, seed=4)
    assert est.mean["frontrun"] == 0.0
    assert est.mean["user0"] == pytest.approx(P.v0 - P.vb1)


def test_no_detection_no_arbitrage():
    P = game(p=0.0)
    for arbs in PAIRS:
        est = estimate_payoffs(standard_profile(P, 0.5, L, arbs), P, 5000, seed=5)
        assert est.mean["arb1"] == est.mean["arb2"] == 0.0
        assert est.mean["user0"] == pytest.approx(P.v0 - P.vb2)


def test_lit_auction_winner_frontruns_user():
    P = game(p=1.0)
    prof = standard_profile(P, 0.0, L, (BOTH, BOTH))
    for i in range(50):
        out = episode(prof, P, 6, i)
        assert out.frontrun and not out.adopted
        assert out.payoffs["user0"] == pytest.approx(P.v0 - P.vb2 - P.c)
        winner = out.block.frontrun_event[0]
        assert out.payoffs[winner] == pytest.approx(P.c - out.fees_paid[winner])


def test_paired_gain_and_run_gains_agree():
    P = game()
    base = standard_profile(P, 0.5, L, (D, D))
    dev = standard_profile(P, 0.5, L, (L, D))
    g, se = paired_gain(base, dev, "arb1", P, 20_000, seed=8, force_adoption=True)
    mean, ses = run_gains((base, True), [(dev, True, "arb1", "arb1")], P, 20_000, 8)
    assert mean[0] == pytest.approx(g, abs=1e-12)
    assert ses[0] == pytest.approx(se, rel=1e-6)


def test_moments_merge_equals_pooled():
    X = np.random.default_rng(0).normal(size=(1000, 3))
    m = Moments.of(X[:300]).merge(Moments.of(X[300:]))
    assert np.allclose(m.mean, X.mean(axis=0))
    assert np.allclose(m.cov(), np.cov(X.T))
    assert Moments.of(X[:1]).cov() is None
