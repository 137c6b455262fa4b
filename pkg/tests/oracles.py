"""Straightforward re-implementations used as test oracles.

Written day by day with plain Python and exact fractions, independently of the
vectorised code they check.
"""

import statistics
from fractions import Fraction


def dense(series, attr="v"):
    first, last = series.study_range
    out = []
    for day in range(first, last + 1):
        c = series.days.get(day)
        out.append(getattr(c, attr) if c is not None else 0)
    return out


def shock_predicates(series, k, multiple=5, min_users=10, need=5, side=7, margin=7):
    """Named truth values of every shock predicate for day index ``k``."""
    v = dense(series, "v")
    users = dense(series, "unique_users")
    n = len(v)
    in_range = k >= margin and n - 1 - k >= margin and k >= side and k + side <= n - 1
    if not in_range:
        return {"in_range": False}
    week = v[k - 7:k]
    return {
        "in_range": True,
        "median": v[k] >= multiple * statistics.median_low(v),
        "prev_day": v[k] >= multiple * v[k - 1],
        "prev_week": Fraction(v[k]) >= multiple * Fraction(sum(week), len(week)),
        "users": users[k] >= min_users,
        "before": sum(1 for x in v[k - side:k] if x > 0) >= need,
        "after": sum(1 for x in v[k + 1:k + 1 + side] if x > 0) >= need,
    }


def is_shock_day(series, k, **kw):
    return all(shock_predicates(series, k, **kw).values())


def spread(rec_series, shock_day, window=7):
    vals = []
    for day in range(shock_day - window, shock_day + 1):
        c = rec_series.days.get(day) if rec_series is not None else None
        vals.append(c.d if c is not None else 0)
    return max(vals) - min(vals)
