"""Wald-ratio estimates of causal click-through rates and the causal click fraction.

For a shock on focal product ``i`` at day ``t*`` with pre-shock window
``[t*-W, t*)``::

    delta_v   = v_i[t*]  - baseline(v_i over window)
    delta_r_j = r_ij[t*] - baseline(r_ij over window)
    rho_i     = sum_j delta_r_j / delta_v

and over a set of shocks with one-week pre-shock windows::

    lambda = sum_i rho_i * sum_pre v_i  /  sum_i sum_j sum_pre r_ij
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .schema import CategoryRollup, DailyProductSeries, EdgeSeries, RhoAggregate, Shock, parse_day

WINDOWS = (3, 5, 7, 14)


@dataclass(frozen=True)
class ShockEstimate:
    shock: Shock
    delta_v: float
    delta_r: Mapping[str, float]
    rho_i: float
    pre_v_total: int
    pre_r_total: int
    shock_day_clicks: int = 0
    degenerate: bool = False

    @property
    def rho_ij(self) -> dict[str, float]:
        if self.degenerate:
            return {}
        return {j: dr / self.delta_v for j, dr in self.delta_r.items()}

    @property
    def naive_rate(self) -> Optional[float]:
        """Observed outbound conversion over the pre-shock window."""
        if self.pre_v_total == 0:
            return None
        return self.pre_r_total / self.pre_v_total


def _window_values(days: Mapping[int, int], start: int, stop: int) -> np.ndarray:
    return np.array([days.get(t, 0) for t in range(start, stop)], dtype=float)


def _baseline(values: np.ndarray, how: str) -> float:
    if len(values) == 0:
        return 0.0
    if how == "mean":
        return float(values.mean())
    if how == "median":
        return float(np.median(values))
    raise ValueError(f"unknown baseline {how!r}")


def estimate_rho(
    shock: Shock,
    edges: Sequence[EdgeSeries],
    focal: DailyProductSeries,
    window: int = 7,
    baseline: str = "mean",
) -> ShockEstimate:
    """Per-shock causal click-through rate from the jump over the pre-shock baseline.

    Window days before the study range are not used. Negative per-edge jumps
    are kept. A non-positive ``delta_v`` marks the estimate degenerate.
    """
    t = shock.shock_day
    start = max(t - window, focal.study_range[0])
    v_days = {d: c.v for d, c in focal.days.items()}
    v_pre = _window_values(v_days, start, t)
    delta_v = v_days.get(t, 0) - _baseline(v_pre, baseline)

    delta_r = {}
    pre_r = 0
    clicks = 0
    for e in edges:
        r_pre = _window_values(e.days, start, t)
        delta_r[e.recommended_product_id] = e.days.get(t, 0) - _baseline(r_pre, baseline)
        pre_r += int(r_pre.sum())
        clicks += e.days.get(t, 0)

    degenerate = not delta_v > 0
    rho = 0.0 if degenerate else sum(delta_r.values()) / delta_v
    return ShockEstimate(
        shock=shock,
        delta_v=delta_v,
        delta_r=delta_r,
        rho_i=rho,
        pre_v_total=int(v_pre.sum()),
        pre_r_total=pre_r,
        shock_day_clicks=clicks,
        degenerate=degenerate,
    )


def estimate_all(
    shocks: Iterable[Shock],
    edges_by_focal: Mapping[str, Sequence[EdgeSeries]],
    series: Mapping[str, DailyProductSeries],
    window: int = 7,
    baseline: str = "mean",
) -> list[ShockEstimate]:
    return [
        estimate_rho(s, edges_by_focal.get(s.product_id, ()), series[s.product_id], window, baseline)
        for s in shocks
    ]


def aggregate_rho(estimates: Iterable[ShockEstimate], weighted: bool = False) -> Optional[RhoAggregate]:
    """Mean per-shock rate and its standard error; None when there is nothing to average.

    Unweighted by default (sample std / sqrt(n), zero for a single shock).
    ``weighted=True`` weights each shock by its ``delta_v``.
    """
    usable = [e for e in estimates if not e.degenerate]
    if not usable:
        return None
    rho = np.array([e.rho_i for e in usable])
    n = len(rho)
    if not weighted:
        se = float(rho.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        return RhoAggregate(float(rho.mean()), se, n)
    w = np.array([e.delta_v for e in usable])
    mean = float(np.sum(w * rho) / w.sum())
    se = float(np.sqrt(np.sum(w**2 * (rho - mean) ** 2)) / w.sum()) if n > 1 else 0.0
    return RhoAggregate(mean, se, n)


def estimate_lambda(
    estimates: Iterable[ShockEstimate],
    edges_by_focal: Mapping[str, Sequence[EdgeSeries]],
    series: Mapping[str, DailyProductSeries],
    window: int = 7,
) -> Optional[float]:
    """Upper bound on the share of pre-shock recommendation clicks that are causal.

    Sums over all shocks before dividing, so shocks with no pre-shock clicks
    still count. None when no shock has any pre-shock click.
    """
    num = 0.0
    den = 0
    for est in estimates:
        if est.degenerate:
            continue
        t = est.shock.shock_day
        focal = series[est.shock.product_id]
        start = max(t - window, focal.study_range[0])
        pre_v = sum(focal.days[d].v for d in range(start, t) if d in focal.days)
        num += est.rho_i * pre_v
        for e in edges_by_focal.get(est.shock.product_id, ()):
            den += sum(e.days.get(d, 0) for d in range(start, t))
    if den == 0:
        return None
    return num / den


def naive_estimate(
    edges_by_focal: Mapping[str, Sequence[EdgeSeries]],
    series: Mapping[str, DailyProductSeries],
    scope: str = "inbound",
    shocks: Optional[Iterable[Shock]] = None,
    window: int = 7,
) -> Optional[float]:
    """Click-counting estimate of recommender impact.

    ``inbound``: share of all views that arrived through any recommendation.
    ``outbound``: mean over ``shocks`` of the focal product's pd_sim conversion
    rate (clicks per view) in the week before the shock.
    """
    if scope == "inbound":
        total = sum(c.v for s in series.values() for c in s.days.values())
        if total == 0:
            return None
        rec = sum(c.v - c.d for s in series.values() for c in s.days.values())
        return rec / total
    if scope == "outbound":
        if shocks is None:
            raise ValueError("outbound scope needs the shocked products")
        rates = []
        for s in shocks:
            focal = series[s.product_id]
            start = max(s.shock_day - window, focal.study_range[0])
            v = sum(focal.days[d].v for d in range(start, s.shock_day) if d in focal.days)
            if v == 0:
                continue
            r = sum(e.days.get(d, 0) for e in edges_by_focal.get(s.product_id, ()) for d in range(start, s.shock_day))
            rates.append(r / v)
        return float(np.mean(rates)) if rates else None
    raise ValueError(f"unknown scope {scope!r}")


def category_rollup(
    estimates: Iterable[ShockEstimate],
    catalog: Mapping[str, str],
    min_shocks: int = 1,
) -> list[CategoryRollup]:
    """Mean ``rho_i`` and mean naive conversion per product category.

    Categories with fewer than ``min_shocks`` shocks are pooled into ``other``.
    """
    groups: dict[str, list[ShockEstimate]] = defaultdict(list)
    for e in estimates:
        if not e.degenerate:
            groups[catalog.get(e.shock.product_id, "unknown")].append(e)
    merged: dict[str, list[ShockEstimate]] = defaultdict(list)
    for cat, ests in groups.items():
        merged[cat if len(ests) >= min_shocks else "other"].extend(ests)

    out = []
    for cat in sorted(merged, key=lambda c: (-len(merged[c]), c)):
        ests = merged[cat]
        naive = [e.naive_rate for e in ests if e.naive_rate is not None]
        out.append(CategoryRollup(
            category=cat,
            mean_rho=float(np.mean([e.rho_i for e in ests])),
            naive_rate=float(np.mean(naive)) if naive else None,
            n_shocks=len(ests),
        ))
    return out


def exclude_dates(shocks: Iterable[Shock], start, end) -> list[Shock]:
    """Drop shocks whose day falls in the closed interval ``[start, end]``.

    ``start > end`` is an empty range and removes nothing.
    """
    lo, hi = parse_day(start), parse_day(end)
    return [s for s in shocks if not lo <= s.shock_day <= hi]


def user_affinity(categories: Iterable[str], category: str) -> Optional[float]:
    """Fraction of a user's pageviews that fall in ``category``; None with no history."""
    total = 0
    hits = 0
    for c in categories:
        total += 1
        hits += c == category
    if total == 0:
        return None
    return hits / total


@dataclass
class AffinityProfile:
    """Per-user category shares, built once and queried per visit."""

    counts: dict[str, dict[str, int]] = field(default_factory=dict)

    @classmethod
    def from_events(cls, events) -> "AffinityProfile":
        counts: dict[str, dict[str, int]] = defaultdict(lambda: defaultdict(int))
        for e in events:
            if not e.is_marker:
                counts[e.user_id][e.category] += 1
        return cls({u: dict(c) for u, c in counts.items()})

    def affinity(self, user_id: str, category: str) -> Optional[float]:
        c = self.counts.get(user_id)
        if not c:
            return None
        return c.get(category, 0) / sum(c.values())
