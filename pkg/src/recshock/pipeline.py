"""End-to-end batch run over a closed study range, plus report/figure writers."""

from __future__ import annotations

import csv
import json
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from os import PathLike
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

from .estimator import (
    ShockEstimate,
    aggregate_rho,
    category_rollup,
    estimate_all,
    estimate_lambda,
    exclude_dates,
    naive_estimate,
)
from .ingest import (
    FilterConfig,
    IngestSummary,
    dedup_within_session,
    filter_products,
    filter_users,
    load_catalog,
    read_events,
    sessionize,
    study_range_of,
)
from .schema import DailyProductSeries, EdgeSeries, EstimateReport, Shock, day_to_iso, parse_day
from .series import (
    EdgeKey,
    build_edge_series,
    build_product_series,
    edges_by_focal,
    write_edge_series_csv,
    write_product_series_csv,
)
from .shocks import DEFAULT_BETA_GRID, ShockCriteria, detect_all, sweep_beta, write_shocks_csv

log = logging.getLogger(__name__)

SHOCK_SIZE_BIN = 50


@dataclass
class RunOptions:
    filters: FilterConfig = field(default_factory=FilterConfig)
    criteria: ShockCriteria = field(default_factory=ShockCriteria)
    beta: float = 0.7
    sweep: bool = False
    beta_grid: Sequence[float] = DEFAULT_BETA_GRID
    window: int = 7
    lambda_window: int = 7
    baseline: str = "mean"
    exclude: Sequence[tuple[str, str]] = ()
    include_shock_day: bool = True
    weighted: bool = False
    min_category_shocks: int = 1
    study_range: Optional[tuple[int, int]] = None

    def grid(self) -> list[float]:
        if not self.sweep:
            return [float(self.beta)]
        return sorted({float(b) for b in self.beta_grid} | {float(self.beta)})


@dataclass
class PipelineResult:
    summary: IngestSummary
    series: dict[str, DailyProductSeries]
    edges: dict[EdgeKey, EdgeSeries]
    shocks: list[Shock]
    estimates: list[ShockEstimate]
    report: EstimateReport
    catalog: Mapping[str, str]


def run_pipeline(
    log_path: Union[str, PathLike],
    catalog: Union[str, PathLike, Mapping[str, str]],
    options: RunOptions = RunOptions(),
) -> PipelineResult:
    if not 0.0 <= options.beta <= 1.0:
        raise ValueError(f"beta must be in [0, 1], got {options.beta}")
    if not isinstance(catalog, Mapping):
        catalog = load_catalog(catalog)
    f = options.filters

    events, summary = read_events(log_path, f.max_malformed_rate)
    if not events:
        raise ValueError(f"{log_path}: no events")
    study_range = options.study_range or study_range_of(events)
    sessions = sessionize(events, f.session_timeout)
    summary.sessions = len(sessions)
    summary.users = len({s.user_id for s in sessions})

    excluded_users = filter_users(sessions, study_range, f)
    summary.users_excluded = len(excluded_users)
    kept = []
    for s in sessions:
        if s.user_id in excluded_users:
            summary.events_excluded_users += len(s.events)
        else:
            kept.append(dedup_within_session(s))
    summary.events_after_dedup = sum(len(s.events) for s in kept)

    series = build_product_series(kept, study_range)
    edges = build_edge_series(kept, study_range)
    excluded_products = filter_products(series, catalog, f)
    summary.products = len(series)
    summary.products_excluded = len(excluded_products)
    summary.products_missing_catalog = sum(1 for p in series if p not in catalog)
    series = {p: s for p, s in series.items() if p not in excluded_products}
    edges = {
        k: e for k, e in edges.items()
        if k[0] not in excluded_products and k[1] not in excluded_products
    }
    by_focal = edges_by_focal(edges)

    detected = detect_all(series, options.criteria)
    n_detected = len(detected)
    shocks = detected
    for lo, hi in options.exclude:
        shocks = exclude_dates(shocks, lo, hi)
    _, shocks = sweep_beta(shocks, by_focal, series, options.grid(), 7, options.include_shock_day)
    estimates = estimate_all(shocks, by_focal, series, options.window, options.baseline)

    report = build_report(estimates, by_focal, series, catalog, options, n_detected, summary.log_sha256)
    return PipelineResult(summary, series, edges, shocks, estimates, report, catalog)


def _finite(x: Optional[float]) -> Optional[float]:
    return x if x is not None and math.isfinite(x) else None


def build_report(
    estimates: Sequence[ShockEstimate],
    by_focal: Mapping[str, Sequence[EdgeSeries]],
    series: Mapping[str, DailyProductSeries],
    catalog: Mapping[str, str],
    options: RunOptions,
    n_detected: int,
    log_sha256: Optional[str] = None,
) -> EstimateReport:
    rows = []
    for beta in options.grid():
        chosen = [e for e in estimates if e.shock.eligible(beta) and not e.degenerate]
        agg = aggregate_rho(chosen, options.weighted)
        rows.append({
            "beta": beta,
            "n_shocks": len(chosen),
            "rho_mean": agg.mean if agg else None,
            "rho_se": agg.se if agg else None,
            "lambda": estimate_lambda(chosen, by_focal, series, options.lambda_window),
            "naive_outbound": naive_estimate(by_focal, series, "outbound", [e.shock for e in chosen],
                                             options.lambda_window),
        })
    at_beta = [e for e in estimates if e.shock.eligible(options.beta)]
    per_shock = [
        {
            "product_id": e.shock.product_id,
            "shock_day": day_to_iso(e.shock.shock_day),
            "category": catalog.get(e.shock.product_id),
            "v_shock": e.shock.v_shock,
            "v_prev": e.shock.v_prev,
            "delta_v": e.delta_v,
            "rho_i": e.rho_i,
            "pre_v": e.pre_v_total,
            "pre_r": e.pre_r_total,
            "shock_day_clicks": e.shock_day_clicks,
            "critical_beta": _finite(e.shock.critical_beta),
            "eligible": e.shock.eligible(options.beta),
            "degenerate": e.degenerate,
            "flags": list(e.shock.flags),
        }
        for e in estimates
    ]
    return EstimateReport(
        beta=float(options.beta),
        window=options.window,
        per_shock=per_shock,
        per_beta=rows,
        categories=category_rollup(at_beta, catalog, options.min_category_shocks),
        naive_inbound=naive_estimate(by_focal, series, "inbound"),
        naive_outbound=next(r["naive_outbound"] for r in rows if r["beta"] == float(options.beta)),
        n_detected=n_detected,
        excluded_ranges=[(day_to_iso(parse_day(a)), day_to_iso(parse_day(b))) for a, b in options.exclude],
        log_sha256=log_sha256,
    )


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return f"{x:.10g}"
    return str(x)


def _write_csv(path: Path, header: list[str], rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


OUTPUT_FILES = (
    "ingest_summary.json", "shocks.csv", "report.json", "rho_vs_beta.csv", "lambda_vs_beta.csv",
    "category_rollup.csv", "shock_size_hist.csv", "clickthrough_hist.csv",
)


def write_outputs(result: PipelineResult, out_dir: Union[str, PathLike], dump_series: bool = False) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = result.report

    (out / "ingest_summary.json").write_text(result.summary.to_json(), encoding="utf-8")
    write_shocks_csv(result.shocks, out / "shocks.csv")
    (out / "report.json").write_text(
        json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    _write_csv(out / "rho_vs_beta.csv", ["beta", "n_shocks", "rho_mean", "rho_se"],
               ((r["beta"], r["n_shocks"], r["rho_mean"], r["rho_se"]) for r in report.per_beta))
    _write_csv(out / "lambda_vs_beta.csv", ["beta", "n_shocks", "lambda", "naive_outbound"],
               ((r["beta"], r["n_shocks"], r["lambda"], r["naive_outbound"]) for r in report.per_beta))
    _write_csv(out / "category_rollup.csv", ["category", "n_shocks", "mean_rho", "naive_rate"],
               ((c.category, c.n_shocks, c.mean_rho, c.naive_rate) for c in report.categories))

    sizes = Counter(s.v_shock // SHOCK_SIZE_BIN for s in result.shocks)
    _write_csv(out / "shock_size_hist.csv", ["bin_lo", "bin_hi", "n_shocks"],
               ((b * SHOCK_SIZE_BIN, (b + 1) * SHOCK_SIZE_BIN, sizes[b]) for b in range(max(sizes, default=-1) + 1)))
    clicks = Counter(e.shock_day_clicks for e in result.estimates)
    _write_csv(out / "clickthrough_hist.csv", ["clicks", "n_shocks"],
               ((c, clicks[c]) for c in sorted(clicks)))

    written = [out / name for name in OUTPUT_FILES]
    if dump_series:
        write_product_series_csv(result.series, out / "product_series.csv")
        write_edge_series_csv(result.edges, out / "edge_series.csv")
        written += [out / "product_series.csv", out / "edge_series.csv"]
    return written
