"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -v``; the lines are repeated in the
terminal summary under "acceptance criteria".
"""
import itertools
import json
import math
import random
import subprocess
import sys
import time
from fractions import Fraction as Fr

import numpy as np
import pytest
from scipy import integrate

from darkvenue import formulas as F
from darkvenue import mixed
from darkvenue.amm import VARIANTS, PoolState, VictimOrder, max_input, victim_output
from darkvenue.detect import generate_corpus, identify_arbitrages, ols
from darkvenue.equilibrium import Regime, analytic_cells, calibrate, spe, threshold_sensitivities
from darkvenue.model import ModelParams, Venue, standard_profile
from darkvenue.sim.engine import affine_estimate
from darkvenue.sim.verify import verify_equilibrium
from darkvenue.welfare import apply_transfer, welfare_report

from conftest import ExactParams, game

SEED = 20240601
L = Venue.LIT

# c <= c1 fixtures; the p = 0.2 one settles in the Dark/Dark regime, the rest in Both/Both
PARTIAL_FIXTURES = [dict(), dict(v0=16.0), dict(c=12.0, p=0.3), dict(v0=25.0, c=14.0, p=0.6),
                    dict(v0=18.0, c=9.0, p=0.4), dict(p=0.2), dict(v0=30.0, c=15.0, p=0.8)]


# ---------------------------------------------------------------- 1

def _mixed_params(p, c, floor):
    vals = (floor + 1, floor, floor * 0.75, floor * 0.5, floor * 0.25)
    return ModelParams(4, vals, floor + 5, c, p, 0.01, 0.5, 1.0 + 1e-9)


def test_mixed_strategy(record):
    t0 = time.perf_counter()
    worst_mass = worst_pay = 0.0
    for p, spread, floor in itertools.product((0.1, 0.5, 0.9), (0.5, 2.0, 10.0), (1.0, 8.0, 50.0)):
        P = _mixed_params(p, floor + spread, floor)
        lo, hi = mixed.support(P)
        dens = lambda g: mixed.density(g, P)
        mass, _ = integrate.quad(dens, lo, hi, epsabs=1e-13, epsrel=1e-13)
        worst_mass = max(worst_mass, abs(mass - 1.0))
        target = (1 - p) * (P.c - floor)
        for b in np.linspace(lo, hi, 7):
            win, _ = integrate.quad(dens, lo, b, epsabs=1e-13, epsrel=1e-13) if b > lo else (0.0, 0.0)
            # the rival detects with probability p and then bids from the distribution
            pay = (P.c - b) * ((1 - p) + p * win)
            worst_pay = max(worst_pay, abs(pay - target))
    elapsed = time.perf_counter() - t0
    ok = worst_mass <= 1e-9 and worst_pay <= 1e-9 and elapsed < 1.0
    record(1, ok, f"27-point grid, max |mass-1|={worst_mass:.2e}, max |payoff-(1-p)(c-v)|={worst_pay:.2e}, "
                  f"{elapsed:.2f}s")
    assert ok


# ---------------------------------------------------------------- 2

def test_matrix_matches_simulation(record):
    t0 = time.perf_counter()
    worst, n_cmp, misses = 0.0, 0, []
    for p, c in itertools.product((0.2, 0.5, 0.8), (10.0, 14.0, 20.0)):
        P = game(c=c, p=p)
        for cell in analytic_cells(0.5, P):
            # adoption forced off and on gives every alpha on common random numbers
            est = affine_estimate(standard_profile(P, 0.5, L, cell), P, 1_000_000, SEED)
            for alpha in (0.1, 0.5, 0.9):
                expect = analytic_cells(alpha, P)[cell]
                mean, se = est.at(alpha)
                for j, arb in enumerate(("arb1", "arb2")):
                    diff = mean[arb] - expect[j]
                    z = abs(diff) / se[arb] if se[arb] > 0 else (0.0 if abs(diff) < 1e-12 else math.inf)
                    worst = max(worst, z)
                    n_cmp += 1
                    if z > 3:
                        misses.append((p, c, cell, alpha, arb, round(z, 2)))
    elapsed = time.perf_counter() - t0
    ok = not misses
    record(2, ok, f"{n_cmp} cell payoffs over 27 (alpha,p,c) points at N=1e6, worst {worst:.2f} SE, "
                  f"{len(misses)} beyond 3 SE, {elapsed:.0f}s")
    assert ok, misses


# ---------------------------------------------------------------- 3

def test_adoption_regimes(record):
    full_p, part_p = game(v0=12.0), game()
    full = spe(full_p)
    cert_full = verify_equilibrium(full, full_p, 100_000, SEED, raise_on_fail=False)
    cal = calibrate(part_p, 100_000, SEED)
    part = spe(part_p, cal)
    cert_part = verify_equilibrium(part, part_p, 100_000, SEED, calibration=cal, raise_on_fail=False)
    ok_full = full.regime is Regime.FULL and full.alpha_star == 1.0 and cert_full.passed
    ok_part = (part.regime is Regime.PARTIAL and part.alpha_star < 1 and part.user0_venue is L
               and cert_part.passed)
    w = cert_part.worst()
    record(3, ok_full and ok_part,
           f"c>c1 ({full_p.c} > {F.c1(full_p):.3f}): {full.regime.value}, certificate "
           f"{'passed' if cert_full.passed else 'failed'}; c<=c1 ({part_p.c} <= {F.c1(part_p):.3f}): "
           f"{part.regime.value} alpha*={part.alpha_star:.6f} user0 {part.user0_venue.value}, certificate "
           f"{'passed' if cert_part.passed else 'failed'} (worst gain {w.gain:.4f} vs threshold {w.threshold:.4f})")
    assert ok_full and ok_part


# ---------------------------------------------------------------- 4

def _exact_point(rng, above_c1):
    x = Fr(rng.randint(500, 1500), 100)
    g1, g2 = (Fr(rng.randint(1, 40), 1000) * x for _ in range(2))
    vals = (x + 3, x + 1, x, x - g1, x - g1 - g2, x - g1 - g2 - 1)
    p = Fr(rng.randint(5, 95), 100)
    gamma = 1 + Fr(1, 100) / x  # the lit auction's multiplier for eps = 0.01, lambda = 1/2
    v0 = x + Fr(rng.randint(100, 2000), 100)
    c1 = (v0 - x) / (1 - (1 - p) ** 2)
    if above_c1:
        c = c1 + Fr(rng.randint(1, 1000), 100)
    else:
        lo = gamma * x
        if c1 <= lo:
            return None
        c = lo + (c1 - lo) * Fr(rng.randint(1, 1000), 1000)
    return ExactParams(5, vals, v0, c, p, gamma)


def _points(rng, above_c1, n=10):
    out = []
    while len(out) < n:
        P = _exact_point(rng, above_c1)
        if P is not None:
            out.append(P)
    return out


def test_fee_reproduction(record):
    rng = random.Random(SEED)
    exact_ok, above_ok = True, True
    below = {"DD": 0, "BB": 0, "BD": 0}
    model_below = {"DD": 0, "BD": 0}
    for P in _points(rng, True):
        B = P.B
        assert F.c1(P) < P.c
        exact_ok &= F.min_fee(P, "benchmark_absent") == P.v(B) and F.min_fee(P, "full") == P.v(B - 1)
        exact_ok &= F.miner_revenue(P, "benchmark_absent")[0] == B * P.v(B)
        exact_ok &= F.miner_revenue(P, "full")[0] == B * P.v(B - 1)
        above_ok &= P.v(B - 1) >= P.v(B) and B * P.v(B - 1) >= B * P.v(B)
    for P in _points(rng, False):
        x, y, p, c, B = P.vb2, P.vb1, P.p, P.c, P.B
        q = 1 - (1 - p) ** 2
        base = x * (B - 1) + (1 - p) ** 2 * y
        bench = base + q * P.gamma * x
        quoted = {"DD": base + q * c - 2 * p * (1 - p) * (c - x), "BB": base + q * c, "BD": base + q * (c - x)}
        exact_ok &= F.miner_revenue(P, "benchmark")[0] == bench
        exact_ok &= all(F.min_fee(P, r) == x for r in ("benchmark", "DD", "BB", "BD"))
        for regime, expr in quoted.items():
            exact_ok &= F.miner_revenue(P, regime, "stated")[0] == expr
            below[regime] += expr < bench
        for regime in model_below:
            model_below[regime] += F.miner_revenue(P, regime, "model")[0] < bench
    ok = exact_ok and above_ok and not any(below.values())
    record(4, ok, f"exact formula equality {'holds' if exact_ok else 'BROKEN'} at 10+10 rational points; "
                  f"c>c1 fee increase {'holds' if above_ok else 'fails'}; c<=c1 quoted dark-miner fee below the "
                  f"no-dark fee at {below} of 10 points (simulated-rule fees: {model_below})")
    assert ok


# ---------------------------------------------------------------- 5

def test_aggregate_welfare(record):
    exact_full, strict_below = True, True
    rng = random.Random(SEED + 5)
    for P in _points(rng, False):
        top = F.vsum(P, 0, P.B - 1)
        exact_full &= F.aggregate_welfare(P, "full") == top
        for regime in ("DD", "BB", "BD"):
            strict_below &= F.aggregate_welfare(P, regime, Fr(1, 2)) < top
    decreases, partial_seen, n = [], 0, 0
    for v0, c, p in itertools.product((12.0, 16.0, 20.0, 26.0, 34.0), (9.0, 12.0, 16.0, 22.0), (0.1, 0.3, 0.5, 0.7, 0.9)):
        P = game(v0=v0, c=c, p=p)
        cal = calibrate(P, 20_000, SEED) if c <= F.c1(P) else None
        rep = spe(P, cal)
        n += 1
        for source in F.SOURCES:
            with_dark = welfare_report(rep, P, True, source).aggregate_welfare
            without = welfare_report(None, P, False, source).aggregate_welfare
            if with_dark < without - 1e-12:
                decreases.append((v0, c, p, source))
        if rep.regime is Regime.PARTIAL:
            partial_seen += 1
            top = sum(P.v(i) for i in range(P.B))
            strict_below &= rep.aggregate_welfare < top
    ok = exact_full and strict_below and not decreases
    record(5, ok, f"full adoption welfare exact: {exact_full}; partial strictly below: {strict_below} "
                  f"({partial_seen} partial equilibria in the sweep); dark venue lowers welfare at "
                  f"{len(decreases)} of {n} sweep points")
    assert ok, decreases


# ---------------------------------------------------------------- 6

def test_transfer(record):
    rows, ok = [], True
    for kw in PARTIAL_FIXTURES:
        P = game(**kw)
        cal = calibrate(P, 100_000, SEED)
        res = apply_transfer(P, cal)
        flipped = res.before.regime is Regime.PARTIAL and res.after.regime is Regime.FULL
        theta_ok = res.theta == pytest.approx(float(F.theta(P)), rel=1e-12)
        user_ok = res.user0_after >= res.user0_before
        miner_ok = res.miners_after > res.miners_before
        cert = verify_equilibrium(res.after, P, 100_000, SEED, calibration=cal, raise_on_fail=False)
        good = flipped and theta_ok and user_ok and miner_ok and cert.passed
        ok &= good
        rows.append(f"{kw or 'base'} [{res.before.arb_regime}] user0 {res.user0_before:.4f}->{res.user0_after:.4f}"
                    f" miners {res.miners_before:.3f}->{res.miners_after:.3f} cert "
                    f"{'ok' if cert.passed else 'failed'}{'' if good else ' <-- FAILS'}")
    record(6, ok, f"{sum('FAILS' not in r for r in rows)}/{len(rows)} c<=c1 fixtures satisfy every condition; "
                  + "; ".join(rows))
    assert ok


# ---------------------------------------------------------------- 7

def test_threshold_signs(record):
    points = [dict(), dict(v0=16.0), dict(c=12.0, p=0.3), dict(v0=25.0, c=14.0, p=0.6), dict(v0=18.0, c=9.0, p=0.4)]
    alpha_ok, signs = True, []
    for kw in points:
        P = game(**kw)
        s = threshold_sensitivities(P, h=1e-3)
        alpha_ok &= s["alpha2"]["derivative"] == pytest.approx(1 / (2 - P.p) ** 2, rel=1e-6)
        signs.append(tuple(s[k]["sign"] for k in ("lambda1", "lambda2", "lambda3")))
    lam_ok = all(sg == (-1, -1, -1) for sg in signs)
    ok = alpha_ok and lam_ok
    record(7, ok, f"d(alpha2)/dp matches 1/(2-p)^2: {alpha_ok}; (lambda1, lambda2, lambda3) signs {signs}")
    assert ok


# ---------------------------------------------------------------- 8

def _closed_form_exact_constants(r1, r2, v, m):
    """The printed closed form with its rounded decimals replaced by the exact fee expressions."""
    f = 0.997
    t = math.sqrt(9000000 * r1**2 * m + 3976036000000 * r1 * r2 * v - 5964054000 * r1 * m * v
                  + 988053892081 * m * v**2)
    return t / (2 * 997 * 1000 * math.sqrt(m)) - (1 + f) / (2 * f) * r1 - f / 2 * v


def test_max_input_closed_form(record):
    t0 = time.perf_counter()
    rng = np.random.default_rng(SEED)
    n = 10_000
    r1 = 10 ** rng.uniform(2, 8, n)
    r2 = 10 ** rng.uniform(2, 8, n)
    frac = 10 ** rng.uniform(-4, math.log10(0.5), n)
    slip = rng.uniform(0.001, 0.2, n)
    rates, worst, restored = {}, {}, {}
    for variant in VARIANTS:
        bad = bad_restored = 0
        top = 0.0
        for i in range(n):
            pool, v = PoolState(r1[i], r2[i]), frac[i] * r1[i]
            m = victim_output(pool, v, 0.0, variant) * (1 - slip[i])
            res = max_input(pool, VictimOrder(v, m), variant)
            bad += not res.agrees(1e-6)
            top = max(top, res.rel_diff)
            alt = _closed_form_exact_constants(r1[i], r2[i], v, m)
            bad_restored += abs(alt - res.bisection) > 1e-6 * res.bisection
        rates[variant], worst[variant], restored[variant] = bad / n, top, int(bad_restored) / n
    elapsed = time.perf_counter() - t0
    ok = rates["verbatim"] == 0.0 and elapsed < 10
    record(8, ok, f"printed closed form vs bisection at 1e-6 on 1e4 tuples: discrepancy rate "
                  f"{rates} (worst rel {max(worst.values()):.2e}); with exact constants (1+f)/(2f), f/2, "
                  f"1/(2*997*1000) the rate is {restored}, i.e. the formula is the verbatim variant and the "
                  f"printed decimals are rounded; {elapsed:.1f}s")
    assert ok


# ---------------------------------------------------------------- 9

def test_detector_exactness(record):
    corpus = generate_corpus(100_000, 1_000, seed=SEED)
    found = {(m.front.block_number, m.front.tx_index, m.victim.tx_index, m.back.tx_index)
             for m in identify_arbitrages(corpus.events)}
    tp = len(found & corpus.truth)
    precision = tp / len(found) if found else 0.0
    recall = tp / len(corpus.truth)
    ok = precision == 1.0 and recall == 1.0 and len(corpus.events) == 100_000
    record(9, ok, f"{len(corpus.events)} events, {corpus.n_sandwiches} planted sandwiches plus "
                  f"{sum(corpus.n_distractors.values())} distractors ({len(corpus.truth)} victim rows): "
                  f"precision {precision}, recall {recall}")
    assert ok


# ---------------------------------------------------------------- 10

def _cli(*args):
    proc = subprocess.run([sys.executable, "-m", "darkvenue", *map(str, args)], capture_output=True)
    assert proc.returncode == 0, proc.stderr.decode()
    return proc.stdout


def test_determinism(record, tmp_path):
    part = tmp_path / "part.json"
    part.write_text(json.dumps(game().to_dict()))
    prof = tmp_path / "prof.json"
    prof.write_text(json.dumps({"alpha": 0.5, "user0": "Lit", "arbs": ["Both", "Dark"]}))
    checks = {}

    first = _cli("equilibrium", "--params", part, "--transfer", "--certify-episodes", 5000)
    seed = json.loads(first)["seed"]
    checks["equilibrium"] = first == _cli("equilibrium", "--params", part, "--transfer", "--certify-episodes",
                                          5000, "--seed", seed)

    def twice(name, args, files=()):
        outs = []
        for _ in range(2):
            out = _cli(*args)
            outs.append((out, [f.read_bytes() for f in files]))
        checks[name] = outs[0] == outs[1]
        return outs[0][0]

    tr = tmp_path / "trace.csv"
    out = twice("simulate", ["simulate", "--params", part, "--profile", prof, "--episodes", 20_000, "--seed", 7,
                             "--trace", tr], [tr])
    checks["simulate seed embedded"] = json.loads(out)["seed"] == 7
    twice("verify", ["verify", "--params", part, "--episodes", 5000, "--seed", 11, "--fee-grid", 16])
    ev = tmp_path / "ev.csv"
    twice("synthetic", ["synthetic", "--output", ev, "--events", 20_000, "--sandwiches", 200, "--seed", 3,
                        "--with-reserves"], [ev])
    twice("stats", ["stats", "--input", ev])
    sw = tmp_path / "sweep.csv"
    twice("sweep", ["equilibrium", "--params", part, "--grid", "p=0.3:0.7:3", "--sweep-out", sw,
                    "--calibration-episodes", 20_000], [sw])
    ok = all(checks.values())
    record(10, ok, "byte-identical reruns: " + ", ".join(f"{k}={v}" for k, v in checks.items()))
    assert ok


# ---------------------------------------------------------------- 11

def test_ols(record):
    # exact fits
    x = np.arange(1.0, 21.0)
    fit_err = 0.0
    res = ols(3.0 - 0.25 * x, x)
    fit_err = max(fit_err, abs(res.coefficient("x1") + 0.25), abs(res.coefficient("const") - 3.0))
    days = np.repeat(["a", "b", "c", "d"], 5)
    shift = {"a": 0.0, "b": 1.5, "c": -4.0, "d": 10.0}
    res = ols(2.0 + 7.0 * x + np.array([shift[d] for d in days]), x, days=days, fixed_effects=True)
    fit_err = max(fit_err, abs(res.coefficient("x1") - 7.0), abs(res.coefficient("const") - 2.0))
    exact_ok = fit_err <= 1e-10

    # recovery on noisy data
    rng = np.random.default_rng(SEED)
    n = 10_000
    X = rng.normal(size=(n, 2))
    y = 1.0 + X @ np.array([0.5, -2.0]) + rng.normal(size=n)
    res = ols(y, X, ["a", "b"])
    z = [abs(res.coefficient(k) - t) / res.se[res.names.index(k)] for k, t in (("const", 1.0), ("a", 0.5), ("b", -2.0))]
    recover_ok = max(z) <= 3

    # clustered standard errors against the sandwich formula written out directly
    rng = np.random.default_rng(SEED + 11)
    n = 50
    g = np.repeat(np.arange(7), [8, 7, 7, 7, 7, 7, 7])
    X = rng.normal(size=(n, 2))
    y = X @ np.array([1.0, -1.0]) + rng.normal(size=n) + 0.5 * g
    res = ols(y, X, cluster=g)
    Z = np.column_stack([np.ones(n), X])
    k = Z.shape[1]
    bread = np.linalg.inv(Z.T @ Z)
    beta = bread @ Z.T @ y
    u = y - Z @ beta
    meat = sum(np.outer(Z[g == c].T @ u[g == c], Z[g == c].T @ u[g == c]) for c in np.unique(g))
    G = len(np.unique(g))
    V = (G / (G - 1)) * ((n - 1) / (n - k)) * bread @ meat @ bread
    cl_err = float(np.max(np.abs(res.cluster_se - np.sqrt(np.diag(V)))))
    cluster_ok = cl_err <= 1e-9
    ok = exact_ok and recover_ok and cluster_ok
    record(11, ok, f"exact-fit error {fit_err:.1e}; recovery max |z| {max(z):.2f}; "
                   f"cluster SE vs direct sandwich max diff {cl_err:.1e}")
    assert ok
