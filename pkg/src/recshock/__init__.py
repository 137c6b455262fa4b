"""Causal impact of recommendations from traffic shocks in clickstream logs."""

from .estimator import (
    ShockEstimate,
    aggregate_rho,
    category_rollup,
    estimate_lambda,
    estimate_rho,
    exclude_dates,
    naive_estimate,
    user_affinity,
)
from .ingest import dedup_within_session, filter_products, filter_users, read_events, sessionize
from .pipeline import RunOptions, run_pipeline, write_outputs
from .referrer import classify_referrer, is_direct
from .schema import (
    ClickEvent,
    DailyProductSeries,
    EdgeSeries,
    GeneratorConfig,
    ReferrerClass,
    Session,
    Shock,
)
from .series import build_edge_series, build_product_series
from .shocks import ShockCriteria, beta_filter, detect_shocks, sweep_beta
from .synthgen import GroundTruth, generate, verify_accounting

__version__ = "0.1.0"

__all__ = [
    "ShockEstimate",
    "aggregate_rho",
    "category_rollup",
    "estimate_lambda",
    "estimate_rho",
    "exclude_dates",
    "naive_estimate",
    "user_affinity",
    "dedup_within_session",
    "filter_products",
    "filter_users",
    "read_events",
    "sessionize",
    "RunOptions",
    "run_pipeline",
    "write_outputs",
    "classify_referrer",
    "is_direct",
    "ClickEvent",
    "DailyProductSeries",
    "EdgeSeries",
    "GeneratorConfig",
    "ReferrerClass",
    "Session",
    "Shock",
    "build_edge_series",
    "build_product_series",
    "ShockCriteria",
    "beta_filter",
    "detect_shocks",
    "sweep_beta",
    "GroundTruth",
    "generate",
    "verify_accounting",
]
