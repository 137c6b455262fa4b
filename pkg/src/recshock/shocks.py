"""Shock detection and the recommended-demand constancy filter.

A shock day ``t*`` on product ``i`` needs, with the default thresholds:

* ``v[t*] >= 5 * median(v)`` over the whole study range (zero days included,
  lower median for even lengths),
* ``v[t*] >= 5 * v[t*-1]`` and ``v[t*] >= 5 * mean(v[t*-7:t*])``,
* at least 10 unique users on ``t*``,
* non-zero views on at least 5 of the 7 days before and 5 of the 7 days after.

Days within ``edge_margin`` days of either end of the study range never
qualify. The constancy filter then keeps a shock at level ``beta`` when every
recommended product ``j`` satisfies
``max(d_j) - min(d_j) <= (1 - beta) * (v[t*] - v[t*-1])`` over ``[t*-7, t*]``.
"""

from __future__ import annotations

import csv
import dataclasses
from dataclasses import dataclass
from os import PathLike
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from .schema import DailyProductSeries, EdgeSeries, Shock, day_to_iso

DEFAULT_BETA_GRID = tuple(round(0.1 * k, 1) for k in range(11))

# Absorbs float error in (1 - beta) so that e.g. beta=0.9 admits a spread of exactly 10% of the rise.
_REL_EPS = 1e-9


@dataclass(frozen=True)
class ShockCriteria:
    median_multiple: float = 5.0
    prev_multiple: float = 5.0
    mean_multiple: float = 5.0
    pre_window: int = 7
    min_users: int = 10
    nonzero_days: int = 5
    nonzero_window: int = 7
    nonzero_mode: str = "per_side"  # or "combined": nonzero_days across both sides together
    edge_margin: int = 7

    def __post_init__(self):
        if self.nonzero_mode not in ("per_side", "combined"):
            raise ValueError(f"unknown nonzero_mode {self.nonzero_mode!r}")
        if self.pre_window < 1 or self.nonzero_window < 1:
            raise ValueError("windows must be at least one day")


def lower_median(values: np.ndarray) -> float:
    s = np.sort(values)
    return float(s[(len(s) - 1) // 2])


def detect_shocks(series: DailyProductSeries, criteria: ShockCriteria = ShockCriteria()) -> list[Shock]:
    """All shock days of one product, in day order.

    Shocks on the same product whose pre/post windows overlap are both flagged
    ``overlap`` but kept.
    """
    v = series.views
    users = series.users
    n = len(v)
    W, K = criteria.pre_window, criteria.nonzero_window
    lo = max(criteria.edge_margin, W, K, 1)
    hi = n - 1 - max(criteria.edge_margin, K)
    if hi < lo:
        return []

    median = lower_median(v)
    csum = np.concatenate(([0], np.cumsum(v)))
    nz = np.concatenate(([0], np.cumsum(v > 0)))
    t = np.arange(lo, hi + 1)
    vt = v[t]
    pre_sum = csum[t] - csum[t - W]
    before = nz[t] - nz[t - K]
    after = nz[t + K + 1] - nz[t + 1]
    if criteria.nonzero_mode == "per_side":
        enough_days = (before >= criteria.nonzero_days) & (after >= criteria.nonzero_days)
    else:
        enough_days = (before + after) >= criteria.nonzero_days
    ok = (
        (vt >= criteria.median_multiple * median)
        & (vt >= criteria.prev_multiple * v[t - 1])
        # compare sums rather than means to stay in exact integer arithmetic
        & (vt * W >= criteria.mean_multiple * pre_sum)
        & (users[t] >= criteria.min_users)
        & enough_days
    )

    first = series.study_range[0]
    shocks = [
        Shock(
            product_id=series.product_id,
            shock_day=first + int(ti),
            v_shock=int(v[ti]),
            v_prev=int(v[ti - 1]),
            pre_window_mean=float(pre_sum[k]) / W,
            median_views=median,
            unique_users_shock=int(users[ti]),
        )
        for k, ti in enumerate(t)
        if ok[k]
    ]
    return _flag_overlaps(shocks, W, K)


def _flag_overlaps(shocks: list[Shock], pre: int, post: int) -> list[Shock]:
    overlapping = set()
    for a, b in zip(shocks, shocks[1:]):
        if b.shock_day - a.shock_day <= pre + post:
            overlapping.update((a.shock_day, b.shock_day))
    return [
        dataclasses.replace(s, flags=s.flags + ("overlap",)) if s.shock_day in overlapping else s
        for s in shocks
    ]


def detect_all(
    series: Mapping[str, DailyProductSeries], criteria: ShockCriteria = ShockCriteria()
) -> list[Shock]:
    out = []
    for pid in sorted(series):
        out.extend(detect_shocks(series[pid], criteria))
    return out


def demand_spread(
    shock: Shock,
    rec: Optional[DailyProductSeries],
    window: int = 7,
    include_shock_day: bool = True,
) -> int:
    """``max - min`` of a recommended product's direct views over the pre-shock window."""
    if rec is None:
        return 0
    end = shock.shock_day if include_shock_day else shock.shock_day - 1
    vals = [rec.days[t].d if t in rec.days else 0 for t in range(shock.shock_day - window, end + 1)]
    return max(vals) - min(vals)


def max_spread(
    shock: Shock,
    edges: Sequence[EdgeSeries],
    rec_series: Mapping[str, DailyProductSeries],
    window: int = 7,
    include_shock_day: bool = True,
) -> int:
    return max(
        (demand_spread(shock, rec_series.get(e.recommended_product_id), window, include_shock_day) for e in edges),
        default=0,
    )


def beta_filter(
    shock: Shock,
    edges: Sequence[EdgeSeries],
    rec_series: Mapping[str, DailyProductSeries],
    beta: float,
    window: int = 7,
    include_shock_day: bool = True,
) -> bool:
    """True when every recommended product's direct traffic is constant enough at ``beta``.

    A focal product without out-edges passes vacuously.
    """
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must be in [0, 1], got {beta}")
    allowed = (1.0 - beta) * shock.rise
    allowed += _REL_EPS * max(abs(shock.rise), 1)
    return all(
        demand_spread(shock, rec_series.get(e.recommended_product_id), window, include_shock_day) <= allowed
        for e in edges
    )


def critical_beta(spread: int, rise: int) -> float:
    """Largest beta at which a shock with this worst-case spread still passes."""
    if rise <= 0:
        return 1.0 if spread == 0 else float("-inf")
    return 1.0 - spread / rise


def sweep_beta(
    shocks: Iterable[Shock],
    edges_by_focal: Mapping[str, Sequence[EdgeSeries]],
    series: Mapping[str, DailyProductSeries],
    beta_grid: Sequence[float] = DEFAULT_BETA_GRID,
    window: int = 7,
    include_shock_day: bool = True,
) -> tuple[dict[float, int], list[Shock]]:
    """Evaluate the constancy filter on every shock at every grid level.

    Returns the retained count per level and the shocks with ``eligible_beta``,
    ``critical_beta`` and a ``no_edges`` flag filled in.
    """
    grid = [float(b) for b in beta_grid]
    if grid != sorted(grid):
        raise ValueError("beta_grid must be sorted ascending")
    counts = {b: 0 for b in grid}
    out = []
    for s in shocks:
        edges = edges_by_focal.get(s.product_id, ())
        eligible = {b: beta_filter(s, edges, series, b, window, include_shock_day) for b in grid}
        for b, ok in eligible.items():
            counts[b] += ok
        flags = s.flags
        if not edges and "no_edges" not in flags:
            flags = flags + ("no_edges",)
        spread = max_spread(s, edges, series, window, include_shock_day)
        out.append(dataclasses.replace(
            s, eligible_beta=eligible, critical_beta=critical_beta(spread, s.rise), flags=flags
        ))
    return counts, out


SHOCK_CSV_HEADER = [
    "product_id", "shock_day", "v_shock", "v_prev", "pre_mean", "median",
    "unique_users", "min_passing_beta", "flags",
]


def write_shocks_csv(shocks: Iterable[Shock], path: Union[str, PathLike]):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SHOCK_CSV_HEADER)
        for s in shocks:
            crit = "" if s.critical_beta is None else f"{s.critical_beta:.6g}"
            w.writerow([
                s.product_id, day_to_iso(s.shock_day), s.v_shock, s.v_prev,
                f"{s.pre_window_mean:.6g}", f"{s.median_views:g}", s.unique_users_shock,
                crit, "|".join(s.flags),
            ])
