"""Synthetic clickstreams with known causal click-through rates.

Each focal product ``i`` is generated together with its own recommended
products ``j`` (no other product recommends them). Per day::

    u_i, u_j   latent demand (log-normal day factors, correlation kappa)
    v_i        ~ Poisson(u_i + shock burst)
    d_j        ~ Poisson(u_j)          # correlated shocks also burst u_j
    v'_ij      = min(Poisson(gamma_ij * u_j), v_i)     convenience views
    causal_ij  ~ Binomial(v_i - v'_ij, rho_ij)
    conv_ij    ~ Binomial(v'_ij, sigma_ij)
    r_ij       = causal_ij + conv_ij

Every count is written out as individual pageview events, and the counts are
written to a ground-truth sidecar alongside the log.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from os import PathLike
from pathlib import Path
from typing import Iterable, Optional, Union

import numpy as np

from .ingest import FilterConfig, dedup_within_session, file_sha256, filter_users, read_events, sessionize
from .schema import GeneratorConfig, SECONDS_PER_DAY, day_to_iso, parse_day
from .series import build_edge_series, build_product_series

log = logging.getLogger(__name__)

LOG_NAME = "events.jsonl"
TRUTH_NAME = "truth.jsonl"
CATALOG_NAME = "catalog.csv"

DIRECT_CODES = (
    "sr_1_1", "sr_1_2", "sr_1_4", "sr_2_7", "nb_sb_noss_1", "nb_sb_noss_2",
    "olp_home", "cart_1", "ext:google.com", "ext:bookbub.com",
)

# Sessions start between 01:00 and 23:00 UTC so they never straddle midnight.
_DAY_OPEN, _DAY_CLOSE = 3600, 23 * 3600


# ---------------------------------------------------------------------------
# config text format

_TUPLE_STR = {"categories"}


def parse_config(text: str) -> GeneratorConfig:
    """Parse the flat ``key = value`` config format (``#`` starts a comment).

    ``categories`` is a comma list, ``rho_by_category`` is ``cat=rate,...``
    and ``shock_schedule`` is ``group:day:magnitude[:label],...``.
    """
    fields = {f.name: f for f in dataclasses.fields(GeneratorConfig)}
    kwargs = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in fields:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
        kwargs[key] = _parse_value(key, value, fields[key].default)
    return GeneratorConfig(**kwargs)


def _parse_value(key: str, value: str, default):
    if key in _TUPLE_STR:
        return tuple(s.strip() for s in value.split(",") if s.strip())
    if key == "rho_by_category":
        out = {}
        for item in filter(None, (s.strip() for s in value.split(","))):
            cat, rate = item.split("=")
            out[cat.strip()] = float(rate)
        return out
    if key == "shock_schedule":
        out = []
        for item in filter(None, (s.strip() for s in value.split(","))):
            parts = item.split(":")
            label = parts[3] if len(parts) > 3 else "constant"
            out.append((int(parts[0]), int(parts[1]), float(parts[2]), label))
        return tuple(out)
    if isinstance(default, bool):
        return value.lower() in ("1", "true", "yes")
    if isinstance(default, int):
        return int(value)
    if isinstance(default, float):
        return float(value)
    return value


def format_config(config: GeneratorConfig) -> str:
    lines = []
    for f in dataclasses.fields(config):
        value = getattr(config, f.name)
        if f.name in _TUPLE_STR:
            text = ",".join(value)
        elif f.name == "rho_by_category":
            text = ",".join(f"{k}={v!r}" for k, v in sorted(value.items()))
        elif f.name == "shock_schedule":
            text = ",".join(f"{g}:{d}:{m!r}:{lab}" for g, d, m, lab in value)
        else:
            text = str(value)
        lines.append(f"{f.name} = {text}")
    return "\n".join(lines) + "\n"


def load_config(path: Union[str, PathLike]) -> GeneratorConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


# Scenario presets. Parameter choices are ours; real traffic was never fitted.
PRESETS: dict[str, GeneratorConfig] = {
    # constant recommended demand, one recommendation per focal product
    "recovery": GeneratorConfig(
        seed=11, n_focal=500, recs_per_focal=1, n_days=42, categories=("books", "toys"),
        focal_base_rate=10.0, rec_base_rate=10.0, rho_min=0.01, rho_max=0.06,
        sigma_min=0.3, sigma_max=0.6, gamma_min=0.1, gamma_max=0.3,
        shock_min=100.0, shock_max=600.0,
    ),
    # sigma near 1 with few convenience views: most clicks are convenience clicks
    "convenience": GeneratorConfig(
        seed=23, n_focal=300, recs_per_focal=2, n_days=42, categories=("books", "toys"),
        focal_base_rate=10.0, rec_base_rate=4.0, rho_min=0.01, rho_max=0.06,
        sigma_min=0.8, sigma_max=1.0, gamma_min=0.3, gamma_max=0.3,
        shock_min=100.0, shock_max=600.0,
    ),
    # 20% of shocks also burst demand for the recommended products
    "mixed": GeneratorConfig(
        seed=37, n_focal=400, recs_per_focal=2, n_days=42, categories=("books", "toys"),
        focal_base_rate=10.0, rec_base_rate=3.0, rho_min=0.01, rho_max=0.06,
        sigma_min=0.4, sigma_max=0.6, gamma_min=0.2, gamma_max=0.2,
        shock_min=150.0, shock_max=600.0, correlated_fraction=0.2, correlated_burst=0.6,
    ),
    # small, noisy and mixed; includes bots, sellers and duplicate views
    "noisy": GeneratorConfig(
        seed=5, n_focal=200, recs_per_focal=3, n_days=60, categories=("books", "ebooks"),
        focal_base_rate=6.0, rec_base_rate=3.0, demand_noise=0.3, kappa=0.5,
        rho_min=0.01, rho_max=0.05, sigma_min=0.5, sigma_max=0.9, gamma_min=0.2, gamma_max=0.4,
        shock_fraction=0.8, shocks_per_product=2, shock_min=40.0, shock_max=600.0,
        correlated_fraction=0.15, n_bot_users=3, n_seller_users=3, duplicate_view_prob=0.05,
    ),
}


# ---------------------------------------------------------------------------
# generation

def focal_id(group: int) -> str:
    return f"F{group:05d}"


def rec_id(group: int, k: int) -> str:
    return f"R{group:05d}-{k + 1}"


def group_category(config: GeneratorConfig, group: int) -> str:
    return config.categories[group % len(config.categories)]


def _event(ts: int, user: str, product: str, category: str, ref: str, src: Optional[str] = None) -> tuple:
    return (ts, user, product, category, ref, src)


def _line(ev: tuple) -> str:
    ts, user, product, category, ref, src = ev
    rec = {"ts": ts, "user": user, "product": product, "category": category, "ref": ref}
    if src is not None:
        rec["src"] = src
    return json.dumps(rec, separators=(",", ":"))


def _shock_days(config: GeneratorConfig, rng: np.random.Generator, group: int) -> list[tuple[int, float, str]]:
    if config.shock_schedule:
        return sorted((d, m, lab) for g, d, m, lab in config.shock_schedule if g == group)
    if rng.random() >= config.shock_fraction:
        return []
    lo, hi = 8, config.n_days - 9
    days: list[int] = []
    for _ in range(100 * config.shocks_per_product):
        if len(days) == config.shocks_per_product:
            break
        d = int(rng.integers(lo, hi + 1))
        if all(abs(d - o) > 15 for o in days):
            days.append(d)
    out = []
    for d in sorted(days):
        m = float(rng.uniform(config.shock_min, config.shock_max))
        label = "correlated" if rng.random() < config.correlated_fraction else "constant"
        out.append((d, m, label))
    return out


def _generate_group(config: GeneratorConfig, group: int, seed: np.random.SeedSequence) -> tuple[list[str], list[dict]]:
    """Events and truth records of one focal product and its recommendations."""
    rng = np.random.default_rng(seed)
    k = config.recs_per_focal
    T = config.n_days
    start_day = parse_day(config.start_date)
    cat = group_category(config, group)
    fid = focal_id(group)
    rids = [rec_id(group, m) for m in range(k)]

    if cat in config.rho_by_category:
        rho = np.full(k, config.rho_by_category[cat])
    else:
        rho = rng.uniform(config.rho_min, config.rho_max, k)
    sigma = rng.uniform(config.sigma_min, config.sigma_max, k)
    gamma = rng.uniform(config.gamma_min, config.gamma_max, k)
    shocks = _shock_days(config, rng, group)

    s = config.demand_noise
    z_i = rng.standard_normal(T)
    u_i = config.focal_base_rate * np.exp(s * z_i - s * s / 2)
    z_j = config.kappa * z_i + math.sqrt(1 - config.kappa**2) * rng.standard_normal((k, T))
    u_j = config.rec_base_rate * np.exp(s * z_j - s * s / 2)
    burst = np.zeros(T)
    label_of = {}
    for d, m, label in shocks:
        burst[d] += m
        label_of[d] = label
        if label == "correlated":
            u_j[:, d] += config.correlated_burst * m

    v_i = rng.poisson(u_i + burst)
    d_j = rng.poisson(u_j)
    conv_views = np.minimum(rng.poisson(gamma[:, None] * u_j), v_i)
    causal = rng.binomial(v_i - conv_views, rho[:, None])
    convenience = rng.binomial(conv_views, sigma[:, None])

    truth: list[dict] = []
    for m in range(k):
        truth.append({"kind": "edge", "focal": fid, "recommended": rids[m], "category": cat,
                      "rho": float(rho[m]), "sigma": float(sigma[m]), "gamma": float(gamma[m])})
    for d, mag, label in shocks:
        truth.append({"kind": "shock", "product": fid, "day": day_to_iso(start_day + d),
                      "magnitude": round(mag, 6), "label": label})

    lines: list[str] = []
    dup = config.duplicate_view_prob
    for t in range(T):
        day = start_day + t
        iso = day_to_iso(day)
        base_ts = day * SECONDS_PER_DAY
        n_view = int(v_i[t])
        n_direct = d_j[:, t]
        n_sessions = n_view + int(n_direct.sum())
        if config.n_users:
            if n_sessions > config.n_users:
                raise ValueError(f"n_users={config.n_users} too small for {n_sessions} sessions in one day")
            users = [f"p{u}" for u in rng.choice(config.n_users, n_sessions, replace=False)]
        else:
            users = [f"g{group}d{t}n{n}" for n in range(n_sessions)]
        starts = base_ts + rng.integers(_DAY_OPEN, _DAY_CLOSE, n_sessions)
        codes = rng.integers(len(DIRECT_CODES), size=n_sessions)
        dups = rng.random(n_sessions) < dup if dup else np.zeros(n_sessions, bool)

        events = []
        for n in range(n_view):
            ts = int(starts[n])
            events.append(_event(ts, users[n], fid, cat, DIRECT_CODES[codes[n]]))
            if dups[n]:
                events.append(_event(ts + 5, users[n], fid, cat, DIRECT_CODES[codes[n]]))
        for m in range(k):
            cv = int(conv_views[m, t])
            clickers = np.concatenate((
                rng.choice(cv, int(convenience[m, t]), replace=False),
                cv + rng.choice(n_view - cv, int(causal[m, t]), replace=False),
            ))
            ref = f"pd_sim_b_{m + 1}"
            click_dups = rng.random(len(clickers)) < dup if dup else np.zeros(len(clickers), bool)
            for c, again in zip(clickers, click_dups):
                ts = int(starts[c]) + 30 * (m + 1)
                events.append(_event(ts, users[c], rids[m], cat, ref, fid))
                if again:
                    events.append(_event(ts + 7, users[c], rids[m], cat, ref, fid))
        n = n_view
        for m in range(k):
            for _ in range(int(n_direct[m])):
                ts = int(starts[n])
                events.append(_event(ts, users[n], rids[m], cat, DIRECT_CODES[codes[n]]))
                if dups[n]:
                    events.append(_event(ts + 5, users[n], rids[m], cat, DIRECT_CODES[codes[n]]))
                n += 1
        events.sort(key=lambda ev: ev[:5])
        lines.extend(_line(ev) for ev in events)

        label = label_of.get(t)
        truth.append({"kind": "focal_day", "focal": fid, "day": iso,
                      "u_focal": round(float(u_i[t]), 6), "burst": round(float(burst[t]), 6),
                      "v_focal": n_view, "shock": label})
        for m in range(k):
            truth.append({
                "kind": "day", "focal": fid, "recommended": rids[m], "day": iso,
                "u_rec": round(float(u_j[m, t]), 6), "conv_views": int(conv_views[m, t]),
                "d_rec": int(d_j[m, t]), "causal": int(causal[m, t]),
                "convenience": int(convenience[m, t]),
                "r": int(causal[m, t] + convenience[m, t]), "shock": label,
            })
    return lines, truth


def _generate_noise_users(config: GeneratorConfig, seed: np.random.SeedSequence) -> list[str]:
    """Bots and sellers, all of which the ingest filters must remove."""
    rng = np.random.default_rng(seed)
    start_day = parse_day(config.start_date)
    events = []
    for b in range(config.n_bot_users):
        user = f"bot{b}"
        for t in range(config.n_days):
            base_ts = (start_day + t) * SECONDS_PER_DAY + _DAY_OPEN
            groups = rng.integers(config.n_focal, size=config.bot_visits_per_day)
            for n, g in enumerate(groups):
                events.append(_event(base_ts + 240 * n, user, focal_id(int(g)), group_category(config, int(g)), "sr_1_1"))
    for s in range(config.n_seller_users):
        user = f"seller{s}"
        t = int(rng.integers(config.n_days))
        base_ts = (start_day + t) * SECONDS_PER_DAY + _DAY_OPEN
        for n in range(6):
            events.append(_event(base_ts + 60 * n, user, "sellercentral", "sellercentral", "nav_home"))
        for n in range(3):
            g = int(rng.integers(config.n_focal))
            events.append(_event(base_ts + 600 + 60 * n, user, focal_id(g), group_category(config, g), "sr_1_1"))
    events.sort(key=lambda ev: (ev[1], ev[0]))
    return [_line(ev) for ev in events]


@dataclass(frozen=True)
class GeneratedPaths:
    log: Path
    truth: Path
    catalog: Path


def _group_task(args):
    return _generate_group(*args)


def generate(
    config: GeneratorConfig,
    out_dir: Union[str, PathLike],
    workers: int = 1,
) -> GeneratedPaths:
    """Write ``events.jsonl``, ``truth.jsonl`` and ``catalog.csv`` under ``out_dir``.

    Output is byte-identical for a given config, whatever ``workers`` is: every
    focal group draws from its own child seed and groups are written in id order.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seeds = np.random.SeedSequence(config.seed).spawn(config.n_focal + 1)
    tasks = [(config, g, seeds[g]) for g in range(config.n_focal)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_group_task, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    else:
        results = [_group_task(t) for t in tasks]

    paths = GeneratedPaths(out / LOG_NAME, out / TRUTH_NAME, out / CATALOG_NAME)
    with open(paths.log, "w", encoding="utf-8", newline="\n") as fh:
        for lines, _ in results:
            fh.write("\n".join(lines))
            if lines:
                fh.write("\n")
        noise = _generate_noise_users(config, seeds[config.n_focal])
        if noise:
            fh.write("\n".join(noise) + "\n")

    start_day = parse_day(config.start_date)
    meta = {
        "kind": "meta",
        "log_sha256": file_sha256(paths.log),
        "study_range": [day_to_iso(start_day), day_to_iso(start_day + config.n_days - 1)],
        "config": format_config(config),
    }
    with open(paths.truth, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(meta, sort_keys=True) + "\n")
        for _, truth in results:
            for rec in truth:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")

    with open(paths.catalog, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["product_id", "category"])
        for g in range(config.n_focal):
            cat = group_category(config, g)
            w.writerow([focal_id(g), cat])
            for m in range(config.recs_per_focal):
                w.writerow([rec_id(g, m), cat])
    log.info("generated %d focal groups into %s", config.n_focal, out)
    return paths


# ---------------------------------------------------------------------------
# ground truth

@dataclass(frozen=True)
class EdgeTruth:
    category: str
    rho: float
    sigma: float
    gamma: float


@dataclass(frozen=True)
class EdgeDay:
    u_rec: float
    conv_views: int
    d_rec: int
    causal: int
    convenience: int
    r: int


@dataclass
class GroundTruth:
    log_sha256: str
    study_range: tuple[int, int]
    config_text: str
    edges: dict[tuple[str, str], EdgeTruth]
    shocks: dict[tuple[str, int], tuple[float, str]]
    focal_days: dict[tuple[str, int], tuple[float, int]]
    edge_days: dict[tuple[str, str, int], EdgeDay]

    @classmethod
    def load(cls, path: Union[str, PathLike]) -> "GroundTruth":
        meta = None
        edges, shocks, focal_days, edge_days = {}, {}, {}, {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                rec = json.loads(line)
                kind = rec["kind"]
                if kind == "meta":
                    meta = rec
                elif kind == "edge":
                    edges[rec["focal"], rec["recommended"]] = EdgeTruth(
                        rec["category"], rec["rho"], rec["sigma"], rec["gamma"])
                elif kind == "shock":
                    shocks[rec["product"], parse_day(rec["day"])] = (rec["magnitude"], rec["label"])
                elif kind == "focal_day":
                    focal_days[rec["focal"], parse_day(rec["day"])] = (rec["u_focal"], rec["v_focal"])
                elif kind == "day":
                    edge_days[rec["focal"], rec["recommended"], parse_day(rec["day"])] = EdgeDay(
                        rec["u_rec"], rec["conv_views"], rec["d_rec"], rec["causal"],
                        rec["convenience"], rec["r"])
                else:
                    raise ValueError(f"{path}: unknown record kind {kind!r}")
        if meta is None:
            raise ValueError(f"{path}: missing meta record")
        lo, hi = meta["study_range"]
        return cls(meta["log_sha256"], (parse_day(lo), parse_day(hi)), meta["config"],
                   edges, shocks, focal_days, edge_days)

    @property
    def config(self) -> GeneratorConfig:
        return parse_config(self.config_text)

    def out_edges(self, focal: str) -> list[tuple[str, str]]:
        return [key for key in self.edges if key[0] == focal]

    def true_rho(self, focal: str) -> float:
        """Per-focal causal rate: sum of the true rates of its outgoing edges (0 if none)."""
        return sum(t.rho for (i, _), t in self.edges.items() if i == focal)

    def label(self, product: str, day: int) -> Optional[str]:
        hit = self.shocks.get((product, day))
        return None if hit is None else hit[1]

    def click_totals(self, shock_keys: Iterable[tuple[str, int]], window: int = 7) -> tuple[int, int]:
        """(causal, all) recommendation clicks over the pre-shock windows of the given shocks."""
        by_focal = defaultdict(list)
        for i, j in self.edges:
            by_focal[i].append(j)
        causal = total = 0
        for product, day in shock_keys:
            for j in by_focal.get(product, ()):
                for t in range(day - window, day):
                    ed = self.edge_days.get((product, j, t))
                    if ed is not None:
                        causal += ed.causal
                        total += ed.r
        return causal, total

    def causal_fraction(self, shock_keys: Iterable[tuple[str, int]], window: int = 7) -> Optional[float]:
        causal, total = self.click_totals(shock_keys, window)
        return causal / total if total else None


# ---------------------------------------------------------------------------
# accounting check

@dataclass
class AccountingResult:
    ok: bool
    diffs: list[str]

    def __bool__(self) -> bool:
        return self.ok


def verify_accounting(
    log_path: Union[str, PathLike],
    truth: Union[GroundTruth, str, PathLike],
    filters: FilterConfig = FilterConfig(),
    max_diffs: int = 50,
) -> AccountingResult:
    """Rebuild daily counts from the log and check them against the sidecar.

    Checks, per day: focal views; recommended direct views; click-throughs
    per edge; ``v_j = d_j + r_ij``; ``r_ij = causal + convenience``. The log
    goes through sessionization, the user filters and dedup first, so bots,
    sellers and duplicate views are accounted for.
    """
    if not isinstance(truth, GroundTruth):
        truth = GroundTruth.load(truth)
    diffs: list[str] = []
    if file_sha256(log_path) != truth.log_sha256:
        diffs.append("log sha256 differs from the one recorded in the sidecar")

    events, _ = read_events(log_path, filters.max_malformed_rate)
    sessions = sessionize(events, filters.session_timeout)
    excluded = filter_users(sessions, truth.study_range, filters)
    sessions = [dedup_within_session(s) for s in sessions if s.user_id not in excluded]
    series = build_product_series(sessions, truth.study_range)
    edges = build_edge_series(sessions, truth.study_range)

    def views(pid: str, day: int):
        s = series.get(pid)
        c = s.days.get(day) if s else None
        return (c.v, c.d) if c else (0, 0)

    for (fid, day), (_, v_true) in sorted(truth.focal_days.items()):
        v, d = views(fid, day)
        if v != v_true:
            diffs.append(f"{fid} {day_to_iso(day)}: focal views {v} != truth {v_true}")
        if d != v:
            diffs.append(f"{fid} {day_to_iso(day)}: focal has {v - d} inbound recommendation views")
    for (i, j, day), ed in sorted(truth.edge_days.items()):
        tag = f"{i}->{j} {day_to_iso(day)}"
        e = edges.get((i, j))
        r = e.days.get(day, 0) if e else 0
        v, d = views(j, day)
        if ed.causal + ed.convenience != ed.r:
            diffs.append(f"{tag}: sidecar causal {ed.causal} + convenience {ed.convenience} != r {ed.r}")
        if r != ed.r:
            diffs.append(f"{tag}: clicks {r} != truth {ed.r}")
        if d != ed.d_rec:
            diffs.append(f"{tag}: direct views of {j} {d} != truth {ed.d_rec}")
        if v != d + r:
            diffs.append(f"{tag}: v {v} != d {d} + r {r}")
    for key in sorted(set(edges) - set(truth.edges)):
        diffs.append(f"edge {key[0]}->{key[1]} in log but not in sidecar")
    known = {i for i, _ in truth.focal_days} | {j for _, j in truth.edges}
    for pid in sorted(set(series) - known):
        diffs.append(f"product {pid} in log but not in sidecar")
    return AccountingResult(not diffs, diffs[:max_diffs])
