"""Command line entry point: ``darkvenue <command> ...``.

Exit codes: 0 success, 1 domain error (JSON on stderr), 2 usage error.
Every JSON artifact carries ``schema_version`` plus the resolved config and seed.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import enum
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import formulas as F

SCHEMA_VERSION = 1
SIG_DIGITS = 9

PARAM_ALIASES = {
    "B": "block_capacity", "c": "arb_profit", "v0": "frontrunnable_valuation", "p": "detect_prob",
    "eps": "min_increment", "lam": "auction_continuation", "gamma": "lit_fee_multiplier",
}


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- serialization

def fmt_float(x: float) -> float | None:
    if not math.isfinite(x):
        return None
    return float(f"{x:.{SIG_DIGITS}g}")


def clean(obj):
    """Make ``obj`` JSON-ready: round floats to 9 significant digits, map enums and tuples."""
    if isinstance(obj, bool) or obj is None:
        return obj
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, (float, np.floating)):
        return fmt_float(float(obj))
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [clean(v) for v in obj.tolist()]
    if dataclasses.is_dataclass(obj):
        return clean(obj.to_dict() if hasattr(obj, "to_dict") else dataclasses.asdict(obj))
    return str(obj)


def dumps(obj) -> str:
    return json.dumps(clean(obj), indent=2, sort_keys=False) + "\n"


def fmt_cell(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, (float, np.floating)):
        return "" if not math.isfinite(x) else f"{float(x):.{SIG_DIGITS}g}"
    return str(x)


def artifact(command: str, config: dict, seed, **payload) -> dict:
    return {"schema_version": SCHEMA_VERSION, "command": command, "version": __version__,
            "config": config, "seed": seed, **payload}


def emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------- helpers

def _check_input(path: str, flag: str) -> str:
    if not Path(path).is_file():
        raise UsageError(f"{flag}: no such file: {path}")
    return path


def _check_output(path: str | None, flag: str) -> str | None:
    if path is not None and not Path(path).resolve().parent.is_dir():
        raise UsageError(f"{flag}: directory does not exist for {path}")
    return path


def _load_params(path: str):
    from .model import load_params, assumption_warnings
    params = load_params(_check_input(path, "--params"))
    return params, assumption_warnings(params)


def _parse_grid(spec: str) -> tuple[str, np.ndarray]:
    try:
        name, rng = spec.split("=")
        lo, hi, n = rng.split(":")
        values = np.linspace(float(lo), float(hi), int(n))
    except ValueError:
        raise UsageError(f"--grid: expected NAME=LO:HI:N, got {spec!r}") from None
    return PARAM_ALIASES.get(name, name), values


# ---------------------------------------------------------------- commands

def cmd_equilibrium(args) -> int:
    from .equilibrium import calibrate, spe
    from .welfare import apply_transfer, welfare_report

    params, warnings = _load_params(args.params)
    _check_output(args.out, "--out")
    _check_output(args.sweep_out, "--sweep-out")
    config = {"params": params.to_dict(), "transfer": args.transfer, "certify_episodes": args.certify_episodes,
              "calibration_episodes": args.calibration_episodes, "source": args.source}
    if args.grid:
        name, values = _parse_grid(args.grid)
        if name not in params.to_dict():
            raise UsageError(f"--grid: unknown parameter {name!r}")
        if not args.sweep_out:
            raise UsageError("--grid needs --sweep-out")
        return _sweep(params, name, values, args)

    cal = None
    if params.c > params.vb2 and params.c <= F.c1(params):
        cal = calibrate(params, args.calibration_episodes, args.seed)
    rep = spe(params, cal, certify=args.certify_episodes or None, certify_seed=args.seed, workers=args.workers)
    payload = {"report": rep.to_dict(),
               "welfare": {"with_dark": welfare_report(rep, params, True, args.source).to_dict(),
                           "without_dark": welfare_report(None, params, False, args.source).to_dict()},
               "warnings": warnings}
    if args.transfer:
        tr = apply_transfer(params, cal, before=rep)
        if args.certify_episodes and tr.after is not rep:
            from .sim.verify import verify_equilibrium
            tr.after.certificate = verify_equilibrium(tr.after, params, args.certify_episodes, args.seed,
                                                      calibration=cal, workers=args.workers,
                                                      raise_on_fail=False)
        payload["transfer"] = tr.to_dict()
    emit(dumps(artifact("equilibrium", config, args.seed, **payload)), args.out)
    return 0


SWEEP_FIELDS = ("index", "value", "regime", "alpha_star", "arb_regime", "user0_venue", "r_dark", "r_lit",
                "c1", "theta", "alpha1", "alpha2", "lambda1", "lambda2", "lambda3", "aggregate_welfare", "error")


def _sweep(params, name, values, args) -> int:
    """One CSV row per grid point, appended as soon as it is solved; ``--resume`` skips done indices."""
    from .equilibrium import calibrate, spe

    path = Path(args.sweep_out)
    done = set()
    if args.resume and path.exists():
        with open(path, newline="") as fh:
            done = {int(r["index"]) for r in csv.DictReader(fh)}
    mode = "a" if done else "w"
    with open(path, mode, newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SWEEP_FIELDS)
        if mode == "w":
            w.writeheader()
        for i, val in enumerate(values):
            if i in done:
                continue
            row = {"index": i, "value": val}
            try:
                cast = int(val) if name == "block_capacity" else float(val)
                P = params.replace(**{name: cast})
                cal = None
                if P.vb2 < P.c <= F.c1(P):
                    cal = calibrate(P, args.calibration_episodes, args.seed)
                rep = spe(P, cal)
                ths = rep.thresholds
                row.update(regime=rep.regime.value, alpha_star=rep.alpha_star, arb_regime=rep.arb_regime,
                           user0_venue=rep.user0_venue.value, r_dark=rep.r_dark, r_lit=rep.r_lit,
                           c1=F.c1(P), theta=F.theta(P), aggregate_welfare=rep.aggregate_welfare)
                if ths is not None:
                    for k in ("alpha1", "alpha2", "lambda1", "lambda2", "lambda3"):
                        row[k] = getattr(ths, k).value
            except (ValueError, ArithmeticError) as exc:
                row["error"] = f"{type(exc).__name__}: {exc}"
            w.writerow({k: fmt_cell(v) for k, v in row.items()})
            fh.flush()
    summary = artifact("equilibrium", {"params": params.to_dict(), "grid": args.grid, "sweep_out": str(path),
                                       "calibration_episodes": args.calibration_episodes},
                       args.seed, points=len(values), skipped=len(done))
    emit(dumps(summary), args.out)
    return 0


TRACE_COLUMNS = ("episode", "adopted", "detect1", "detect2", "frontrun", "user0_payoff", "arb1_payoff",
                 "arb2_payoff", "miner_revenue")


def cmd_simulate(args) -> int:
    from .model import load_profile
    from .sim.engine import column_names, estimate_payoffs, trace

    params, warnings = _load_params(args.params)
    _check_input(args.profile, "--profile")
    _check_output(args.trace, "--trace")
    _check_output(args.out, "--out")
    if args.episodes < 1:
        raise UsageError("--episodes must be positive")
    profile = load_profile(args.profile, params)
    force = {"on": True, "off": False, None: None}[args.force_adoption]
    est = estimate_payoffs(profile, params, args.episodes, args.seed, force_adoption=force,
                           nonce_rule=args.nonce_rule, workers=args.workers)
    if args.trace:
        rows = trace(profile, params, args.episodes, args.seed, force_adoption=force, nonce_rule=args.nonce_rule)
        names = column_names(params.B)
        pick = [names.index(k) for k in ("adopted", "detect1", "detect2", "frontrun", "user0", "arb1", "arb2", "miner")]
        with open(args.trace, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(TRACE_COLUMNS)
            for i, r in enumerate(rows):
                vals = r[pick]
                w.writerow([i] + [int(v) for v in vals[:4]] + [fmt_cell(v) for v in vals[4:]])
    config = {"params": params.to_dict(), "profile": profile.to_dict(), "episodes": args.episodes,
              "force_adoption": args.force_adoption, "nonce_rule": args.nonce_rule, "trace": args.trace}
    emit(dumps(artifact("simulate", config, args.seed, mean=est.mean, se=est.se,
                        n_episodes=est.n_episodes, warnings=warnings)), args.out)
    return 0


def cmd_verify(args) -> int:
    from .equilibrium import report_from_dict, spe
    from .sim.verify import CertificateFailed, verify_equilibrium

    params, _ = _load_params(args.params)
    _check_output(args.out, "--out")
    if args.report:
        with open(_check_input(args.report, "--report")) as fh:
            d = json.load(fh)
        rep = report_from_dict(d.get("report", d))
    else:
        rep = spe(params)
    config = {"params": params.to_dict(), "report": rep.to_dict(), "episodes": args.episodes,
              "fee_grid": args.fee_grid, "abs_tol": args.abs_tol}
    try:
        cert = verify_equilibrium(rep, params, args.episodes, args.seed, fee_grid=args.fee_grid,
                                  abs_tol=args.abs_tol, workers=args.workers)
    except CertificateFailed as exc:
        _error(exc, deviation=exc.deviation.to_dict(), certificate=exc.certificate.to_dict())
        return 1
    emit(dumps(artifact("verify", config, args.seed, certificate=cert.to_dict(full=args.full))), args.out)
    return 0


def cmd_detect(args) -> int:
    from .detect import classify_frontrunnable, identify_arbitrages, load_events, unique_pairs

    events = load_events(_check_input(args.input, "--input"))
    _check_output(args.matches_out, "--matches-out")
    _check_output(args.out, "--out")
    matches = identify_arbitrages(events, rel_tol=args.rel_tol)
    pairs = unique_pairs(matches)
    if args.matches_out:
        with open(args.matches_out, "w", newline="") as fh:
            fields = ("block_number", "pool_id", "front_index", "victim_index", "back_index", "front_hash",
                      "victim_hash", "back_hash", "revenue", "profit", "cost_to_revenue")
            w = csv.DictWriter(fh, fieldnames=fields)
            w.writeheader()
            for m in matches:
                w.writerow({k: fmt_cell(v) for k, v in m.to_row().items()})
    summary = {"n_events": len(events), "n_matches": len(matches), "n_arbitrages": len(pairs),
               "total_revenue": float(sum(m.revenue for m in pairs)),
               "total_profit": float(sum(m.profit for m in pairs))}
    if args.classify:
        cls = classify_frontrunnable(events, args.variant)
        summary["classification"] = {s: sum(c.status == s for c in cls)
                                     for s in ("frontrunnable", "not_frontrunnable", "unclassifiable")}
    config = {"input": args.input, "rel_tol": args.rel_tol, "matches_out": args.matches_out,
              "classify": args.classify, "variant": args.variant}
    emit(dumps(artifact("detect", config, None, summary=summary)), args.out)
    return 0


def cmd_frontrunnable(args) -> int:
    from .amm import PoolState, VictimOrder, best_frontrun, max_input

    pool, victim = PoolState(args.r1, args.r2), VictimOrder(args.v, args.m)
    mi = max_input(pool, victim, args.variant)
    best = best_frontrun(pool, victim, args.variant)
    config = {"r1": args.r1, "r2": args.r2, "v": args.v, "m": args.m, "variant": args.variant}
    out = {"max_input": {"closed_form": mi.closed_form, "exact": mi.exact, "bisection": mi.bisection,
                         "rel_diff": mi.rel_diff, "agrees_1e-6": mi.agrees()},
           "x_opt": best.x_opt, "revenue_opt": best.revenue_opt, "revenue_at_max": best.revenue_at_max,
           "method": best.method, "frontrunnable": best.frontrunnable}
    emit(dumps(artifact("frontrunnable", config, None, result=out)), args.out)
    return 0


def cmd_synthetic(args) -> int:
    from .detect import generate_corpus, write_events

    _check_output(args.output, "--output")
    _check_output(args.out, "--out")
    for flag, val in (("--events", args.events), ("--sandwiches", args.sandwiches)):
        if val < 0:
            raise UsageError(f"{flag} must be nonnegative")
    corpus = generate_corpus(args.events, args.sandwiches, args.seed, with_reserves=args.with_reserves)
    write_events(corpus.events, args.output)
    config = {"events": args.events, "sandwiches": args.sandwiches, "with_reserves": args.with_reserves,
              "output": args.output}
    summary = {"n_events": len(corpus.events), "n_truth_rows": len(corpus.truth),
               "n_distractors": corpus.n_distractors}
    emit(dumps(artifact("synthetic", config, args.seed, summary=summary)), args.out)
    return 0


def _stats_tables(events, denominator, variant):
    from .detect import classify_frontrunnable, daily_series, identify_arbitrages, ols, summary_table, unique_pairs
    from .detect.stats import EmptyInput

    matches = identify_arbitrages(events)
    cls = classify_frontrunnable(events, variant)
    daily = daily_series(events, matches, cls, denominator=denominator)
    pairs = unique_pairs(matches)
    columns = {
        "frontrun_probability": [d.frontrun_probability for d in daily],
        "dark_proportion": [d.dark_proportion for d in daily],
        "revenue": [m.revenue for m in pairs],
        "profit": [m.profit for m in pairs],
        "cost_to_revenue": [m.cost_to_revenue for m in pairs],
    }
    table = {}
    for k, vals in columns.items():
        try:
            table[k] = summary_table(vals).to_dict()
        except EmptyInput:
            table[k] = None
    regressions = {}
    rows = [m for m in pairs if m.cost_to_revenue is not None and m.front.day is not None]
    if rows:
        days = [m.front.day for m in rows]
        dark = np.array([float(m.front.is_dark) for m in rows])
        for dep in ("cost_to_revenue", "profit"):
            y = np.array([getattr(m, dep) for m in rows])
            try:
                res = ols(y, dark, ["dark"], days=days, fixed_effects=True,
                          cluster=days if len(set(days)) > 1 else None)
                regressions[dep] = {"coef": res.coefficient("dark"), "se": res.se[res.names.index("dark")],
                                    "cluster_se": None if res.cluster_se is None
                                    else res.cluster_se[res.names.index("dark")],
                                    "r2": res.r2, "n": res.n}
            except ValueError as exc:
                regressions[dep] = {"error": str(exc)}
    return daily, table, regressions


def cmd_stats(args) -> int:
    from .detect import load_events

    events = load_events(_check_input(args.input, "--input"))
    _check_output(args.out, "--out")
    _check_output(args.daily_out, "--daily-out")
    daily, table, regressions = _stats_tables(events, args.denominator, args.variant)
    if args.daily_out:
        with open(args.daily_out, "w", newline="") as fh:
            rows = [d.to_dict() for d in daily]
            w = csv.DictWriter(fh, fieldnames=list(rows[0]) if rows else ["day"])
            w.writeheader()
            for r in rows:
                w.writerow({k: fmt_cell(v) for k, v in r.items()})
    if args.format == "text":
        lines = [f"{'variable':<22}{'N':>8}{'Mean':>14}{'SD':>14}{'10th':>14}{'50th':>14}{'90th':>14}"]
        for k, s in table.items():
            if s is None:
                lines.append(f"{k:<22}{0:>8}")
                continue
            lines.append(f"{k:<22}{s['n']:>8}" + "".join(f"{fmt_cell(s[c]):>14}"
                                                         for c in ("mean", "sd", "p10", "p50", "p90")))
        lines.append("")
        lines.append(f"{'regression (dark)':<22}{'coef':>14}{'SE':>14}{'cluster SE':>14}{'R2':>14}{'N':>8}")
        for k, r in regressions.items():
            if "error" in r:
                lines.append(f"{k:<22}{r['error']}")
                continue
            lines.append(f"{k:<22}" + "".join(f"{fmt_cell(r[c]):>14}" for c in ("coef", "se", "cluster_se", "r2"))
                         + f"{r['n']:>8}")
        emit("\n".join(lines) + "\n", args.out)
        return 0
    config = {"input": args.input, "denominator": args.denominator, "variant": args.variant,
              "daily_out": args.daily_out}
    emit(dumps(artifact("stats", config, None, summary=table, regressions=regressions,
                        days=len(daily))), args.out)
    return 0


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    from .equilibrium import DEFAULT_CAL_EPISODES, DEFAULT_CAL_SEED
    from .sim.engine import DEFAULT_NONCE_RULE
    from .sim.block import NONCE_RULES
    from .amm import VARIANTS

    ap = argparse.ArgumentParser(prog="darkvenue", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("equilibrium", help="solve the adoption game for a parameter file")
    p.add_argument("--params", required=True)
    p.add_argument("--seed", type=int, default=DEFAULT_CAL_SEED,
                   help="seed for the calibration and the certificate (default %(default)s)")
    p.add_argument("--calibration-episodes", type=int, default=DEFAULT_CAL_EPISODES)
    p.add_argument("--certify-episodes", type=int, default=10_000,
                   help="episodes for the deviation certificate; 0 skips it")
    p.add_argument("--transfer", action="store_true", help="also solve with the full-adoption transfer")
    p.add_argument("--source", choices=F.SOURCES, default="model")
    p.add_argument("--grid", help="sweep one parameter, NAME=LO:HI:N")
    p.add_argument("--sweep-out", help="CSV written row by row during a sweep")
    p.add_argument("--resume", action="store_true", help="skip grid indices already in --sweep-out")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_equilibrium)

    p = sub.add_parser("simulate", help="Monte Carlo payoffs of a strategy profile")
    p.add_argument("--params", required=True)
    p.add_argument("--profile", required=True)
    p.add_argument("--episodes", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--trace", help="per-episode CSV")
    p.add_argument("--force-adoption", choices=("on", "off"))
    p.add_argument("--nonce-rule", choices=NONCE_RULES, default=DEFAULT_NONCE_RULE)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="deviation certificate for an equilibrium report")
    p.add_argument("--params", required=True)
    p.add_argument("--report", help="equilibrium JSON; solved afresh when omitted")
    p.add_argument("--episodes", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--fee-grid", type=int, default=64)
    p.add_argument("--abs-tol", type=float)
    p.add_argument("--full", action="store_true", help="list every deviation checked")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("detect", help="find sandwich arbitrages in a swap CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--matches-out")
    p.add_argument("--rel-tol", type=float, help="relative tolerance on the leg amounts (default exact)")
    p.add_argument("--classify", action="store_true", help="also classify frontrunnable swaps")
    p.add_argument("--variant", choices=VARIANTS, default="verbatim")
    p.add_argument("--out")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("frontrunnable", help="sandwich sizing for one swap")
    for name in ("r1", "r2", "v", "m"):
        p.add_argument(name, type=float)
    p.add_argument("--variant", choices=VARIANTS, default="verbatim")
    p.add_argument("--out")
    p.set_defaults(func=cmd_frontrunnable)

    p = sub.add_parser("stats", help="summary and regression tables over a swap CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--denominator", choices=("lit", "all"), default="lit")
    p.add_argument("--variant", choices=VARIANTS, default="verbatim")
    p.add_argument("--format", choices=("json", "text"), default="json")
    p.add_argument("--daily-out")
    p.add_argument("--out")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("synthetic", help="write a swap CSV with planted sandwiches and distractors")
    p.add_argument("--output", required=True)
    p.add_argument("--events", type=int, default=100_000)
    p.add_argument("--sandwiches", type=int, default=1_000)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--with-reserves", action="store_true", help="add reserves and slippage bounds")
    p.add_argument("--out")
    p.set_defaults(func=cmd_synthetic)
    return ap


def _error(exc: BaseException, **extra) -> None:
    d = {"schema_version": SCHEMA_VERSION, "error": type(exc).__name__, "message": str(exc), **extra}
    codes = getattr(exc, "codes", None)
    if codes:
        d["codes"] = [getattr(c, "value", str(c)) for c in codes]
    sys.stderr.write(dumps(d))


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        ap.print_usage(sys.stderr)
        sys.stderr.write(f"{ap.prog} {args.command}: error: {exc}\n")
        return 2
    except (ValueError, KeyError, ArithmeticError, OSError, RuntimeError) as exc:
        _error(exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
