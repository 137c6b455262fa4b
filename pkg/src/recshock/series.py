"""Daily per-product view series and per-edge click-through series."""

from __future__ import annotations

import csv
from collections import Counter, defaultdict
from os import PathLike
from typing import Iterable, Mapping, Union

from .referrer import is_direct
from .schema import (
    DailyProductSeries,
    DayCounts,
    EdgeSeries,
    ReferrerClass,
    Session,
    day_to_iso,
    parse_day,
)

EdgeKey = tuple[str, str]


def build_product_series(
    sessions: Iterable[Session], study_range: tuple[int, int]
) -> dict[str, DailyProductSeries]:
    """Count views ``v``, direct views ``d`` and unique users per product and UTC day.

    Seller/author portal events are not product pageviews and are skipped, as
    are events outside ``study_range``.
    """
    first, last = study_range
    v: Counter[tuple[str, int]] = Counter()
    d: Counter[tuple[str, int]] = Counter()
    users: dict[tuple[str, int], set[str]] = defaultdict(set)
    categories: dict[str, str] = {}
    for s in sessions:
        for e in s.events:
            if e.is_marker:
                continue
            day = e.day
            if not first <= day <= last:
                continue
            key = (e.product_id, day)
            v[key] += 1
            if is_direct(e.referrer_class):
                d[key] += 1
            users[key].add(e.user_id)
            categories.setdefault(e.product_id, e.category)

    per_product: dict[str, dict[int, DayCounts]] = defaultdict(dict)
    for (pid, day), n in v.items():
        per_product[pid][day] = DayCounts(n, d[pid, day], len(users[pid, day]))
    return {
        pid: DailyProductSeries(pid, categories[pid], dict(sorted(days.items())), study_range)
        for pid, days in sorted(per_product.items())
    }


def build_edge_series(
    sessions: Iterable[Session], study_range: tuple[int, int]
) -> dict[EdgeKey, EdgeSeries]:
    """Daily pd_sim click-throughs per (focal, recommended) pair; other widgets are ignored."""
    first, last = study_range
    r: Counter[tuple[str, str, int]] = Counter()
    for s in sessions:
        for e in s.events:
            if e.referrer_class is not ReferrerClass.REC_SIM:
                continue
            day = e.day
            if first <= day <= last:
                r[e.source_product_id, e.product_id, day] += 1
    per_edge: dict[EdgeKey, dict[int, int]] = defaultdict(dict)
    for (i, j, day), n in r.items():
        per_edge[i, j][day] = n
    return {
        key: EdgeSeries(key[0], key[1], dict(sorted(days.items())))
        for key, days in sorted(per_edge.items())
    }


def edges_by_focal(edges: Mapping[EdgeKey, EdgeSeries]) -> dict[str, list[EdgeSeries]]:
    out: dict[str, list[EdgeSeries]] = defaultdict(list)
    for (i, _), e in sorted(edges.items()):
        out[i].append(e)
    return dict(out)


def inbound_recommendation_views(series: DailyProductSeries) -> int:
    """Views arriving through any recommendation widget (``v - d``)."""
    return sum(c.v - c.d for c in series.days.values())


def write_product_series_csv(series: Mapping[str, DailyProductSeries], path: Union[str, PathLike]):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["product_id", "day", "v", "d", "unique_users"])
        for pid in sorted(series):
            for day, c in sorted(series[pid].days.items()):
                w.writerow([pid, day_to_iso(day), c.v, c.d, c.unique_users])


def write_edge_series_csv(edges: Mapping[EdgeKey, EdgeSeries], path: Union[str, PathLike]):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["focal", "recommended", "day", "r"])
        for key in sorted(edges):
            for day, n in sorted(edges[key].days.items()):
                w.writerow([key[0], key[1], day_to_iso(day), n])


def read_product_series_csv(
    path: Union[str, PathLike],
    study_range: tuple[int, int],
    catalog: Mapping[str, str] = {},
) -> dict[str, DailyProductSeries]:
    days: dict[str, dict[int, DayCounts]] = defaultdict(dict)
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            days[row["product_id"]][parse_day(row["day"])] = DayCounts(
                int(row["v"]), int(row["d"]), int(row["unique_users"])
            )
    return {
        pid: DailyProductSeries(pid, catalog.get(pid, ""), dict(sorted(d.items())), study_range)
        for pid, d in sorted(days.items())
    }


def read_edge_series_csv(path: Union[str, PathLike]) -> dict[EdgeKey, EdgeSeries]:
    days: dict[EdgeKey, dict[int, int]] = defaultdict(dict)
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            days[row["focal"], row["recommended"]][parse_day(row["day"])] = int(row["r"])
    return {k: EdgeSeries(k[0], k[1], dict(sorted(d.items()))) for k, d in sorted(days.items())}
