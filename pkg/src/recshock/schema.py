"""Domain types shared across the pipeline.

Days are integer UTC day numbers (days since 1970-01-01). Study ranges are
inclusive ``(first_day, last_day)`` pairs. All types are immutable once built.
"""

from __future__ import annotations

import datetime as _dt
import enum
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, NamedTuple, Optional

import numpy as np

SECONDS_PER_DAY = 86400
_EPOCH = _dt.date(1970, 1, 1)

#: Category markers carried by non-product events (seller/author portals).
SELLER_MARKERS = frozenset({"sellercentral", "catalog-retail"})
AUTHOR_MARKERS = frozenset({"authorcentral", "kdp"})
MARKER_CATEGORIES = SELLER_MARKERS | AUTHOR_MARKERS


def day_of(ts: float) -> int:
    """UTC day number of a unix timestamp."""
    return int(ts // SECONDS_PER_DAY)


def day_to_date(day: int) -> _dt.date:
    return _EPOCH + _dt.timedelta(days=day)


def day_to_iso(day: int) -> str:
    return day_to_date(day).isoformat()


def parse_day(value) -> int:
    """Accept an int day number, a ``date`` or an ISO ``YYYY-MM-DD`` string."""
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, _dt.date):
        return (value - _EPOCH).days
    return (_dt.date.fromisoformat(str(value).strip()) - _EPOCH).days


class ReferrerClass(str, enum.Enum):
    SEARCH_RESULT = "SearchResult"
    SEARCH_BOX = "SearchBox"
    REC_SIM = "RecSim"
    REC_OTHER = "RecOther"
    EXTERNAL = "External"
    DIRECT_OTHER = "DirectOther"

    @property
    def is_recommendation(self) -> bool:
        return self in (ReferrerClass.REC_SIM, ReferrerClass.REC_OTHER)


@dataclass(frozen=True, slots=True)
class ClickEvent:
    """One logged product pageview."""

    timestamp: float
    user_id: str
    product_id: str
    category: str
    referrer_raw: str
    referrer_class: ReferrerClass
    source_product_id: Optional[str] = None

    def __post_init__(self):
        if not self.timestamp > 0:
            raise ValueError(f"timestamp must be positive, got {self.timestamp!r}")
        has_source = self.source_product_id is not None
        if has_source != self.referrer_class.is_recommendation:
            raise ValueError(
                f"source product must be present exactly for recommendation clicks "
                f"(class={self.referrer_class.value}, src={self.source_product_id!r})"
            )
        if has_source and self.source_product_id == self.product_id:
            raise ValueError(f"self-recommendation click on {self.product_id!r}")

    @property
    def day(self) -> int:
        return day_of(self.timestamp)

    @property
    def is_marker(self) -> bool:
        return self.category in MARKER_CATEGORIES


@dataclass(frozen=True, slots=True)
class Session:
    user_id: str
    events: tuple[ClickEvent, ...]

    def __post_init__(self):
        if not self.events:
            raise ValueError("empty session")

    @property
    def session_key(self) -> tuple[str, float]:
        return (self.user_id, self.events[0].timestamp)

    @property
    def start(self) -> float:
        return self.events[0].timestamp


class DayCounts(NamedTuple):
    v: int
    d: int
    unique_users: int


def _dense(counts: Mapping[int, int], study_range: tuple[int, int]) -> np.ndarray:
    first, last = study_range
    out = np.zeros(last - first + 1, dtype=np.int64)
    for day, c in counts.items():
        if first <= day <= last:
            out[day - first] = c
    return out


@dataclass(frozen=True)
class DailyProductSeries:
    """Daily total views ``v``, direct views ``d`` and unique users of a product.

    Days missing from ``days`` have zero counts.
    """

    product_id: str
    category: str
    days: Mapping[int, DayCounts]
    study_range: tuple[int, int]

    def __post_init__(self):
        for day, c in self.days.items():
            if c.d > c.v or c.d < 0 or c.unique_users < 0:
                raise ValueError(f"{self.product_id}: invalid counts {c} on day {day}")

    @property
    def n_days(self) -> int:
        return self.study_range[1] - self.study_range[0] + 1

    @cached_property
    def views(self) -> np.ndarray:
        return _dense({t: c.v for t, c in self.days.items()}, self.study_range)

    @cached_property
    def direct(self) -> np.ndarray:
        return _dense({t: c.d for t, c in self.days.items()}, self.study_range)

    @cached_property
    def users(self) -> np.ndarray:
        return _dense({t: c.unique_users for t, c in self.days.items()}, self.study_range)

    def total_views(self) -> int:
        return sum(c.v for c in self.days.values())


@dataclass(frozen=True)
class EdgeSeries:
    """Daily pd_sim click-through counts from a focal to a recommended product."""

    focal_product_id: str
    recommended_product_id: str
    days: Mapping[int, int]

    def __post_init__(self):
        if any(r < 0 for r in self.days.values()):
            raise ValueError("negative click-through count")

    def dense(self, study_range: tuple[int, int]) -> np.ndarray:
        return _dense(self.days, study_range)

    def total(self) -> int:
        return sum(self.days.values())


@dataclass(frozen=True)
class Shock:
    """A detected natural experiment on a product.

    ``eligible_beta`` maps each evaluated constancy level to whether the shock
    survives the filter there; ``critical_beta`` is the largest level at which
    it passes (``1 - max spread / rise``), or None before filtering.
    """

    product_id: str
    shock_day: int
    v_shock: int
    v_prev: int
    pre_window_mean: float
    median_views: float
    unique_users_shock: int
    eligible_beta: Mapping[float, bool] = field(default_factory=dict)
    critical_beta: Optional[float] = None
    flags: tuple[str, ...] = ()

    @property
    def key(self) -> tuple[str, int]:
        return (self.product_id, self.shock_day)

    @property
    def rise(self) -> int:
        return self.v_shock - self.v_prev

    def eligible(self, beta: float) -> bool:
        return bool(self.eligible_beta.get(float(beta), False))


@dataclass(frozen=True)
class RhoAggregate:
    mean: float
    se: float
    n: int


@dataclass(frozen=True)
class CategoryRollup:
    category: str
    mean_rho: float
    naive_rate: Optional[float]
    n_shocks: int


@dataclass(frozen=True)
class EstimateReport:
    """Everything the estimation stage reports.

    ``per_beta`` rows hold ``beta, n_shocks, rho_mean, rho_se, lambda``;
    aggregates with no data are None.
    """

    beta: float
    window: int
    per_shock: list[dict]
    per_beta: list[dict]
    categories: list[CategoryRollup]
    naive_inbound: Optional[float]
    naive_outbound: Optional[float]
    n_detected: int
    excluded_ranges: list[tuple[str, str]] = field(default_factory=list)
    log_sha256: Optional[str] = None

    def row(self, beta: float) -> Optional[dict]:
        for r in self.per_beta:
            if math.isclose(r["beta"], beta):
                return r
        return None

    @property
    def headline(self) -> dict:
        r = self.row(self.beta) or {}
        return {
            "beta": self.beta,
            "n_shocks": r.get("n_shocks", 0),
            "rho": r.get("rho_mean"),
            "rho_se": r.get("rho_se"),
            "lambda": r.get("lambda"),
            "naive_outbound": self.naive_outbound,
        }

    def to_dict(self) -> dict:
        return {
            "beta": self.beta,
            "window": self.window,
            "log_sha256": self.log_sha256,
            "headline": self.headline,
            "n_detected": self.n_detected,
            "excluded_ranges": [list(r) for r in self.excluded_ranges],
            "naive_inbound": self.naive_inbound,
            "naive_outbound": self.naive_outbound,
            "per_beta": self.per_beta,
            "categories": [
                {
                    "category": c.category,
                    "mean_rho": c.mean_rho,
                    "naive_rate": c.naive_rate,
                    "n_shocks": c.n_shocks,
                }
                for c in self.categories
            ],
            "shocks": self.per_shock,
        }


def _check_rate(name: str, value: float):
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must be in [0, 1], got {value}")


@dataclass(frozen=True)
class GeneratorConfig:
    """Parameters of the synthetic clickstream generator.

    Each focal product gets ``recs_per_focal`` recommended products of its own,
    so every recommended product has exactly one inbound recommender. Per-edge
    rates are drawn uniformly from their ``[min, max]`` ranges unless
    ``rho_by_category`` pins a category's causal rate.
    """

    seed: int = 0
    n_focal: int = 100
    recs_per_focal: int = 2
    n_days: int = 42
    start_date: str = "2013-09-01"
    categories: tuple[str, ...] = ("books", "toys")
    focal_base_rate: float = 10.0
    rec_base_rate: float = 3.0
    demand_noise: float = 0.0
    kappa: float = 0.0
    rho_min: float = 0.01
    rho_max: float = 0.06
    rho_by_category: Mapping[str, float] = field(default_factory=dict)
    sigma_min: float = 0.3
    sigma_max: float = 0.6
    gamma_min: float = 0.1
    gamma_max: float = 0.3
    shock_fraction: float = 1.0
    shocks_per_product: int = 1
    shock_min: float = 100.0
    shock_max: float = 600.0
    correlated_fraction: float = 0.0
    correlated_burst: float = 0.6
    shock_schedule: tuple[tuple[int, int, float, str], ...] = ()
    n_users: int = 0
    n_bot_users: int = 0
    bot_visits_per_day: int = 150
    n_seller_users: int = 0
    duplicate_view_prob: float = 0.0

    def __post_init__(self):
        for name in ("kappa", "rho_min", "rho_max", "sigma_min", "sigma_max",
                     "gamma_min", "gamma_max", "shock_fraction", "correlated_fraction",
                     "correlated_burst", "duplicate_view_prob"):
            _check_rate(name, getattr(self, name))
        for cat, rho in self.rho_by_category.items():
            _check_rate(f"rho_by_category[{cat}]", rho)
        for lo, hi in (("rho_min", "rho_max"), ("sigma_min", "sigma_max"),
                       ("gamma_min", "gamma_max"), ("shock_min", "shock_max")):
            if getattr(self, lo) > getattr(self, hi):
                raise ValueError(f"{lo} exceeds {hi}")
        if self.shock_min <= 0:
            raise ValueError("shock magnitudes must be positive")
        if self.n_focal < 1 or self.recs_per_focal < 0 or self.n_days < 16:
            raise ValueError("need n_focal >= 1, recs_per_focal >= 0 and n_days >= 16")
        if self.focal_base_rate <= 0 or self.rec_base_rate <= 0 or self.demand_noise < 0:
            raise ValueError("base demand rates must be positive")
        if not self.categories:
            raise ValueError("at least one category is required")
        for group, day, magnitude, label in self.shock_schedule:
            if not 0 <= group < self.n_focal or not 0 <= day < self.n_days:
                raise ValueError(f"scheduled shock ({group}, {day}) out of range")
            if magnitude <= 0:
                raise ValueError("shock magnitudes must be positive")
            if label not in ("constant", "correlated"):
                raise ValueError(f"unknown shock label {label!r}")
        _dt.date.fromisoformat(self.start_date)

    @property
    def n_products(self) -> int:
        return self.n_focal * (1 + self.recs_per_focal)
