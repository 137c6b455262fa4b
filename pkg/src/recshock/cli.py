"""Command-line front end: ``recshock generate | run | verify | accounting``.

Exit codes: 0 success, 1 tolerance or accounting failure, 2 usage/input error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from .ingest import FilterConfig, IngestError, file_sha256
from .pipeline import RunOptions, run_pipeline, write_outputs
from .schema import parse_day
from .shocks import DEFAULT_BETA_GRID, ShockCriteria
from .synthgen import PRESETS, GroundTruth, generate, load_config, verify_accounting

log = logging.getLogger("recshock")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _date_range(text: str) -> tuple[str, str]:
    try:
        lo, hi = text.split(":")
        parse_day(lo), parse_day(hi)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected START:END as ISO dates, got {text!r}")
    return lo, hi


def _fraction(text: str) -> float:
    x = float(text)
    if not 0.0 <= x <= 1.0:
        raise argparse.ArgumentTypeError(f"must be in [0, 1], got {x}")
    return x


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="recshock", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic log, ground-truth sidecar and catalog")
    src = g.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", type=Path, help="key = value config file")
    src.add_argument("--preset", choices=sorted(PRESETS))
    g.add_argument("--out", type=Path, required=True)
    g.add_argument("--seed", type=int, help="override the config seed")
    g.add_argument("--workers", type=int, default=1)

    r = sub.add_parser("run", help="detect shocks and estimate causal click-through rates")
    r.add_argument("--log", type=Path, required=True)
    r.add_argument("--catalog", type=Path, required=True)
    r.add_argument("--out", type=Path, required=True)
    r.add_argument("--beta", type=_fraction, default=0.7)
    r.add_argument("--beta-sweep", action="store_true",
                   help=f"also report every beta in {list(DEFAULT_BETA_GRID)}")
    r.add_argument("--window", type=int, default=7, choices=(3, 5, 7, 14))
    r.add_argument("--baseline", choices=("mean", "median"), default="mean")
    r.add_argument("--exclude-dates", type=_date_range, action="append", default=[],
                   metavar="START:END", help="drop shocks in this closed date range (repeatable)")
    r.add_argument("--shock-multiple", type=float, default=5.0,
                   help="multiple of median and previous-day traffic")
    r.add_argument("--mean-multiple", type=float, default=5.0,
                   help="multiple of the previous week's mean traffic")
    r.add_argument("--min-users", type=int, default=10)
    r.add_argument("--nonzero-mode", choices=("per_side", "combined"), default="per_side")
    r.add_argument("--exclude-shock-day", action="store_true",
                   help="check recommended demand over [t0, t*) instead of [t0, t*]")
    r.add_argument("--session-timeout", type=float, default=30.0, help="minutes")
    r.add_argument("--bot-visits", type=float, default=100.0)
    r.add_argument("--bot-rule", choices=("mean", "max"), default="mean")
    r.add_argument("--min-product-visits", type=int, default=5)
    r.add_argument("--min-category-size", type=int, default=100)
    r.add_argument("--min-category-shocks", type=int, default=1)
    r.add_argument("--weighted", action="store_true", help="weight shocks by their traffic rise")
    r.add_argument("--dump-series", action="store_true")

    v = sub.add_parser("verify", help="compare a report with the generator's ground truth")
    v.add_argument("--log", type=Path, required=True)
    v.add_argument("--truth", type=Path, required=True)
    v.add_argument("--report", type=Path, required=True)
    v.add_argument("--rho-tol", type=float, default=0.15, help="relative tolerance on rho")
    v.add_argument("--lambda-tol", type=float, default=0.05, help="absolute tolerance on lambda")

    a = sub.add_parser("accounting", help="check a log against its sidecar day by day")
    a.add_argument("--log", type=Path, required=True)
    a.add_argument("--truth", type=Path, required=True)
    return p


def cmd_generate(args) -> int:
    if args.config is not None:
        if not args.config.is_file():
            raise UsageError(f"config file not found: {args.config}")
        config = load_config(args.config)
    else:
        config = PRESETS[args.preset]
    if args.seed is not None:
        from dataclasses import replace

        config = replace(config, seed=args.seed)
    paths = generate(config, args.out, workers=args.workers)
    print(f"wrote {paths.log}, {paths.truth} and {paths.catalog}")
    return EXIT_OK


def cmd_run(args) -> int:
    for path in (args.log, args.catalog):
        if not path.is_file():
            raise UsageError(f"input not found: {path}")
    options = RunOptions(
        filters=FilterConfig(
            session_timeout=args.session_timeout * 60,
            bot_visits_per_day=args.bot_visits,
            bot_rule=args.bot_rule,
            min_product_visits=args.min_product_visits,
            min_category_size=args.min_category_size,
        ),
        criteria=ShockCriteria(
            median_multiple=args.shock_multiple,
            prev_multiple=args.shock_multiple,
            mean_multiple=args.mean_multiple,
            min_users=args.min_users,
            nonzero_mode=args.nonzero_mode,
        ),
        beta=args.beta,
        sweep=args.beta_sweep,
        window=args.window,
        baseline=args.baseline,
        exclude=args.exclude_dates,
        include_shock_day=not args.exclude_shock_day,
        weighted=args.weighted,
        min_category_shocks=args.min_category_shocks,
    )
    result = run_pipeline(args.log, args.catalog, options)
    write_outputs(result, args.out, dump_series=args.dump_series)
    h = result.report.headline
    if h["n_shocks"] == 0:
        print(f"no eligible shocks at beta={args.beta} ({result.report.n_detected} detected); empty report written")
        return EXIT_OK
    lam = "n/a" if h["lambda"] is None else f"{h['lambda']:.4f}"
    print(f"beta={h['beta']:g} shocks={h['n_shocks']} of {result.report.n_detected} detected")
    print(f"rho={h['rho']:.4f} (se {h['rho_se']:.4f})  lambda={lam}")
    return EXIT_OK


def _compare(name: str, est: Optional[float], true: Optional[float], tol: float, relative: bool) -> bool:
    if est is None or true is None:
        print(f"{name:<16} estimate={est} truth={true}  no data")
        return False
    err = abs(est - true)
    rel = err / abs(true) if true else float("inf")
    ok = (rel if relative else err) <= tol
    kind = "rel" if relative else "abs"
    print(f"{name:<16} estimate={est:.5f} truth={true:.5f} abs_err={err:.5f} rel_err={rel:.3%} "
          f"[{kind} tol {tol:g}] {'ok' if ok else 'FAIL'}")
    return ok


def cmd_verify(args) -> int:
    for path in (args.log, args.truth, args.report):
        if not path.is_file():
            raise UsageError(f"input not found: {path}")
    truth = GroundTruth.load(args.truth)
    report = json.loads(args.report.read_text(encoding="utf-8"))
    log_sha = file_sha256(args.log)
    if log_sha != truth.log_sha256 or report.get("log_sha256") != log_sha:
        raise UsageError("log, sidecar and report do not belong together (sha256 mismatch)")

    keys = [(s["product_id"], parse_day(s["shock_day"]))
            for s in report["shocks"] if s["eligible"] and not s["degenerate"]]
    head = report["headline"]
    true_rho = sum(truth.true_rho(p) for p, _ in keys) / len(keys) if keys else None
    true_frac = truth.causal_fraction(keys)
    print(f"shocks compared: {len(keys)} at beta={report['beta']:g}")
    ok_rho = _compare("causal rate", head["rho"], true_rho, args.rho_tol, relative=True)
    ok_lam = _compare("causal fraction", head["lambda"], true_frac, args.lambda_tol, relative=False)
    return EXIT_OK if ok_rho and ok_lam else EXIT_FAIL


def cmd_accounting(args) -> int:
    for path in (args.log, args.truth):
        if not path.is_file():
            raise UsageError(f"input not found: {path}")
    result = verify_accounting(args.log, args.truth)
    if result.ok:
        print("accounting ok")
        return EXIT_OK
    for line in result.diffs:
        print(line)
    return EXIT_FAIL


COMMANDS = {"generate": cmd_generate, "run": cmd_run, "verify": cmd_verify, "accounting": cmd_accounting}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, IngestError, OSError, ValueError, KeyError) as exc:
        print(f"recshock {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
