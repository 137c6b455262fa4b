"""Log reading, sessionization, within-session dedup and bot/seller/product filters."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from collections import Counter, defaultdict
from dataclasses import asdict, dataclass, field
from os import PathLike
from typing import Iterable, Mapping, Optional, Union

from .referrer import classify_referrer, looks_offsite
from .schema import (
    AUTHOR_MARKERS,
    SELLER_MARKERS,
    ClickEvent,
    DailyProductSeries,
    Session,
    day_to_iso,
)

log = logging.getLogger(__name__)

SESSION_TIMEOUT = 30 * 60


class IngestError(RuntimeError):
    """Raised when a log is too corrupt to analyse."""


@dataclass
class FilterConfig:
    session_timeout: float = SESSION_TIMEOUT
    bot_visits_per_day: float = 100.0
    bot_rule: str = "mean"  # "mean" over the study range, or "max" over single days
    seller_max_visits: int = 5
    author_max_visits: int = 0
    min_product_visits: int = 5
    min_category_size: int = 100
    max_malformed_rate: float = 0.10

    def __post_init__(self):
        if self.bot_rule not in ("mean", "max"):
            raise ValueError(f"bot_rule must be 'mean' or 'max', got {self.bot_rule!r}")


@dataclass
class IngestSummary:
    lines_read: int = 0
    lines_malformed: int = 0
    events_read: int = 0
    sessions: int = 0
    users: int = 0
    users_excluded: int = 0
    events_excluded_users: int = 0
    events_after_dedup: int = 0
    products: int = 0
    products_excluded: int = 0
    products_missing_catalog: int = 0
    study_range: Optional[list[str]] = None
    log_sha256: Optional[str] = None
    malformed_examples: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"


def parse_event(line: str) -> ClickEvent:
    """Parse one NDJSON log line (fields ``ts user product category ref src``)."""
    rec = json.loads(line)
    if not isinstance(rec, dict):
        raise ValueError("log line is not a JSON object")
    ref = rec["ref"]
    if not isinstance(ref, str) or not ref:
        raise ValueError("missing referral code")
    cls, _ = classify_referrer(ref, looks_offsite(ref))
    src = rec.get("src")
    return ClickEvent(
        timestamp=float(rec["ts"]),
        user_id=str(rec["user"]),
        product_id=str(rec["product"]),
        category=str(rec["category"]),
        referrer_raw=ref,
        referrer_class=cls,
        source_product_id=None if src is None else str(src),
    )


def format_event(event: ClickEvent) -> str:
    rec = {
        "ts": event.timestamp,
        "user": event.user_id,
        "product": event.product_id,
        "category": event.category,
        "ref": event.referrer_raw,
    }
    if event.source_product_id is not None:
        rec["src"] = event.source_product_id
    return json.dumps(rec, separators=(",", ":"))


def file_sha256(path: Union[str, PathLike]) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def read_events(
    source: Union[str, PathLike, Iterable[str]],
    max_malformed_rate: float = 0.10,
) -> tuple[list[ClickEvent], IngestSummary]:
    """Read an NDJSON log, skipping malformed lines.

    ``source`` is a path or an iterable of lines. Raises IngestError when more
    than ``max_malformed_rate`` of the non-blank lines fail to parse.
    """
    summary = IngestSummary()
    if isinstance(source, (str, PathLike)):
        summary.log_sha256 = file_sha256(source)
        with open(source, encoding="utf-8") as fh:
            events = _parse_lines(fh, summary)
    else:
        events = _parse_lines(source, summary)
    if summary.lines_read and summary.lines_malformed / summary.lines_read > max_malformed_rate:
        raise IngestError(
            f"{summary.lines_malformed} of {summary.lines_read} lines malformed "
            f"(limit {max_malformed_rate:.0%}); first: {summary.malformed_examples[:3]}"
        )
    summary.events_read = len(events)
    if events:
        first, last = study_range_of(events)
        summary.study_range = [day_to_iso(first), day_to_iso(last)]
    return events, summary


def _parse_lines(lines: Iterable[str], summary: IngestSummary) -> list[ClickEvent]:
    events = []
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        summary.lines_read += 1
        try:
            events.append(parse_event(line))
        except (ValueError, KeyError, TypeError) as exc:
            summary.lines_malformed += 1
            if len(summary.malformed_examples) < 10:
                summary.malformed_examples.append(f"line {lineno}: {exc}")
    if summary.lines_malformed:
        log.warning("skipped %d malformed log lines", summary.lines_malformed)
    return events


def load_catalog(path: Union[str, PathLike]) -> dict[str, str]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"product_id", "category"} <= set(reader.fieldnames):
            raise ValueError(f"{path}: catalog header must be 'product_id,category'")
        return {row["product_id"]: row["category"] for row in reader}


def study_range_of(events: Iterable[ClickEvent]) -> tuple[int, int]:
    days = [e.day for e in events]
    if not days:
        raise ValueError("no events")
    return min(days), max(days)


def _event_order(e: ClickEvent):
    return (e.timestamp, e.product_id, e.referrer_raw, e.source_product_id or "")


def sessionize(events: Iterable[ClickEvent], timeout: float = SESSION_TIMEOUT) -> list[Session]:
    """Group events per user and split on inactivity gaps of at least ``timeout`` seconds.

    Output is sorted by ``(user_id, start)`` so it does not depend on input order.
    """
    by_user: dict[str, list[ClickEvent]] = defaultdict(list)
    for e in events:
        by_user[e.user_id].append(e)
    sessions = []
    for user in sorted(by_user):
        evs = sorted(by_user[user], key=_event_order)
        current = [evs[0]]
        for prev, e in zip(evs, evs[1:]):
            if e.timestamp - prev.timestamp >= timeout:
                sessions.append(Session(user, tuple(current)))
                current = []
            current.append(e)
        sessions.append(Session(user, tuple(current)))
    return sessions


def _dedup_key(e: ClickEvent):
    if e.referrer_class.is_recommendation:
        return ("rec", e.source_product_id, e.product_id)
    return ("view", e.product_id)


def dedup_within_session(session: Session) -> Session:
    """Keep only the first visit to each product and the first click on each
    (source, product) recommendation link within the session."""
    seen = set()
    kept = []
    for e in session.events:
        key = _dedup_key(e)
        if key not in seen:
            seen.add(key)
            kept.append(e)
    if len(kept) == len(session.events):
        return session
    return Session(session.user_id, tuple(kept))


def filter_users(
    sessions: Iterable[Session],
    study_range: tuple[int, int],
    config: FilterConfig = FilterConfig(),
) -> set[str]:
    """User ids to drop as bots, sellers or authors/publishers.

    Bots average more than ``bot_visits_per_day`` visits per day over the whole
    study range (or exceed it on any single day with ``bot_rule="max"``).
    Sellers have more than ``seller_max_visits`` seller-portal events; authors
    have more than ``author_max_visits`` (default: any) author-portal events.
    """
    n_days = study_range[1] - study_range[0] + 1
    visits: Counter[str] = Counter()
    daily: Counter[tuple[str, int]] = Counter()
    seller: Counter[str] = Counter()
    author: Counter[str] = Counter()
    for s in sessions:
        for e in s.events:
            visits[e.user_id] += 1
            if config.bot_rule == "max":
                daily[e.user_id, e.day] += 1
            if e.category in SELLER_MARKERS:
                seller[e.user_id] += 1
            elif e.category in AUTHOR_MARKERS:
                author[e.user_id] += 1

    if config.bot_rule == "mean":
        bots = {u for u, n in visits.items() if n / n_days > config.bot_visits_per_day}
    else:
        bots = {u for (u, _), n in daily.items() if n > config.bot_visits_per_day}
    sellers = {u for u, n in seller.items() if n > config.seller_max_visits}
    authors = {u for u, n in author.items() if n > config.author_max_visits}
    return bots | sellers | authors


def filter_products(
    series: Mapping[str, DailyProductSeries],
    catalog: Mapping[str, str],
    config: FilterConfig = FilterConfig(),
) -> set[str]:
    """Product ids to drop: too few visits, a sparse category, or absent from the catalog.

    Thresholds are inclusive: exactly ``min_product_visits`` visits and exactly
    ``min_category_size`` catalog items are enough to stay.
    """
    category_size = Counter(catalog.values())
    excluded = set()
    missing = 0
    for pid, s in series.items():
        cat = catalog.get(pid)
        if cat is None:
            missing += 1
            excluded.add(pid)
        elif s.total_views() < config.min_product_visits or category_size[cat] < config.min_category_size:
            excluded.add(pid)
    if missing:
        log.info("%d products missing from the catalog were excluded", missing)
    return excluded

