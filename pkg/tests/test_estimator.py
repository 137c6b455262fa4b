import math

import numpy as np
import pytest

from conftest import DAY0, edge_series, ev, product_series
from recshock.estimator import (
    AffinityProfile,
    aggregate_rho,
    category_rollup,
    estimate_lambda,
    estimate_rho,
    exclude_dates,
    naive_estimate,
    user_affinity,
)
from recshock.schema import Shock

T = 10  # shock day offset


def shock(pid="F", day=T, v=102):
    return Shock(pid, DAY0 + day, v, 2, 2.0, 2.0, 50)


def focal(pre=2, at=102, pid="F", n=20):
    views = [pre] * n
    views[T] = at
    return product_series(pid, views)


def test_no_edges_gives_zero():
    e = estimate_rho(shock(), [], focal())
    assert e.rho_i == 0.0 and not e.degenerate


def test_wald_ratio_example():
    clicks = [0] * 20
    clicks[T] = 3
    e = estimate_rho(shock(), [edge_series("F", "J", clicks)], focal())
    assert e.delta_v == 100
    assert e.rho_i == pytest.approx(0.03)
    assert e.rho_ij == {"J": pytest.approx(0.03)}
    assert e.shock_day_clicks == 3


def test_baseline_is_window_mean():
    views = [0] * 20
    views[3:T] = [1, 2, 3, 4, 5, 6, 7]  # mean 4
    views[T] = 104
    clicks = [0] * 20
    clicks[3:T] = [0, 0, 0, 7, 0, 0, 0]  # mean 1
    clicks[T] = 6
    e = estimate_rho(shock(), [edge_series("F", "J", clicks)], product_series("F", views))
    assert e.delta_v == 100 and e.delta_r["J"] == 5
    assert (e.pre_v_total, e.pre_r_total) == (28, 7)
    med = estimate_rho(shock(), [edge_series("F", "J", clicks)], product_series("F", views), baseline="median")
    assert med.delta_v == 100 and med.delta_r["J"] == 6


@pytest.mark.parametrize("w", [3, 5, 7, 14])
def test_window_lengths(w):
    views = [0] * 40
    for k in range(40):
        views[k] = k % 3
    views[20] = 200
    s = Shock("F", DAY0 + 20, 200, 1, 1.0, 1.0, 50)
    e = estimate_rho(s, [], product_series("F", views), window=w)
    assert e.delta_v == pytest.approx(200 - np.mean(views[20 - w:20]))


def test_negative_delta_r_kept():
    clicks = [2] * 20
    clicks[T] = 0
    e = estimate_rho(shock(), [edge_series("F", "J", clicks)], focal())
    assert e.rho_i == pytest.approx(-2 / 100)


def test_degenerate_when_no_rise():
    e = estimate_rho(shock(v=2), [], focal(at=2))
    assert e.degenerate
    assert aggregate_rho([e]) is None


def _est(rho, dv=100.0):
    from recshock.estimator import ShockEstimate

    return ShockEstimate(shock(), dv, {}, rho, 0, 0)


def test_aggregate_examples():
    one = aggregate_rho([_est(0.03)])
    assert (one.mean, one.se, one.n) == (0.03, 0.0, 1)
    agg = aggregate_rho([_est(0.02), _est(0.04)])
    assert (agg.mean, agg.se, agg.n) == (pytest.approx(0.03), pytest.approx(0.01), 2)
    assert aggregate_rho([]) is None


def test_aggregate_weighted():
    agg = aggregate_rho([_est(0.02, 300), _est(0.06, 100)], weighted=True)
    assert agg.mean == pytest.approx(0.03)


def test_lambda_all_clicks_causal():
    # rho_i = 0.03 with 100 pre-shock views and 3 pre-shock clicks
    from recshock.estimator import ShockEstimate

    views = [0] * 20
    views[3:T] = [14, 14, 14, 14, 14, 15, 15]
    views[T] = 200
    clicks = [0] * 20
    clicks[3:6] = [1, 1, 1]
    f = product_series("F", views)
    edges = {"F": [edge_series("F", "J", clicks)]}
    e = ShockEstimate(shock(v=200), 100.0, {"J": 3.0}, 0.03, 100, 3)
    assert estimate_lambda([e], edges, {"F": f}) == pytest.approx(1.0)


def test_lambda_constructed_exact_one():
    # every pre-shock day has r = rho * v with the same rho as the shock jump
    rho = 0.05
    views = [20, 40, 60, 20, 40, 60, 20, 40, 60, 20, 420] + [20] * 9
    clicks = [int(rho * v) for v in views]
    f = product_series("F", views)
    edges = [edge_series("F", "J", clicks)]
    e = estimate_rho(shock(v=420), edges, f)
    assert e.rho_i == pytest.approx(rho)
    assert estimate_lambda([e], {"F": edges}, {"F": f}) == pytest.approx(1.0)


def test_lambda_sums_before_dividing():
    a = focal(pid="A")
    b = focal(pid="B")
    clicks_a = [1] * 20
    ea = estimate_rho(shock("A"), [edge_series("A", "J", clicks_a)], a)
    eb = estimate_rho(shock("B"), [], b)  # no pre-shock clicks at all
    by_focal = {"A": [edge_series("A", "J", clicks_a)]}
    lam = estimate_lambda([ea, eb], by_focal, {"A": a, "B": b})
    assert lam == pytest.approx((ea.rho_i * 14 + eb.rho_i * 14) / 7)
    assert estimate_lambda([eb], {}, {"B": b}) is None


def test_naive_inbound_ratio():
    views = product_series("J", [100], direct=[70])
    assert naive_estimate({}, {"J": views}, "inbound") == pytest.approx(0.30)
    assert naive_estimate({}, {}, "inbound") is None


def test_naive_outbound_mean_rate():
    f = focal()
    clicks = [0] * 20
    clicks[3:T] = [1, 0, 1, 0, 1, 0, 0]  # 3 clicks on 14 pre-shock views
    edges = {"F": [edge_series("F", "J", clicks)]}
    assert naive_estimate(edges, {"F": f}, "outbound", [shock()]) == pytest.approx(3 / 14)
    with pytest.raises(ValueError):
        naive_estimate(edges, {"F": f}, "outbound")


def test_category_rollup():
    ests = [_est(0.02), _est(0.04)]
    one = category_rollup(ests, {"F": "books"})
    assert len(one) == 1 and one[0].mean_rho == pytest.approx(aggregate_rho(ests).mean)
    assert category_rollup([], {}) == []


def test_category_rollup_separates_and_merges():
    from recshock.estimator import ShockEstimate

    ests = [ShockEstimate(shock(p), 100.0, {}, r, 0, 0) for p, r in
            [("A", 0.02), ("A", 0.02), ("B", 0.06), ("B", 0.06), ("C", 0.5)]]
    catalog = {"A": "books", "B": "toys", "C": "tools"}
    rows = {r.category: r for r in category_rollup(ests, catalog, min_shocks=2)}
    assert rows["books"].mean_rho == pytest.approx(0.02)
    assert rows["toys"].mean_rho == pytest.approx(0.06)
    assert rows["other"].n_shocks == 1 and "tools" not in rows


def test_exclude_dates():
    shocks = [shock(day=d) for d in (5, 10, 15)]
    assert exclude_dates(shocks, "2013-11-05", "2013-11-04") == shocks  # empty range
    assert [s.shock_day - DAY0 for s in exclude_dates(shocks, "2013-10-31", "2013-11-01")] == [5, 15]
    assert exclude_dates(shocks, "2013-10-01", "2013-12-31") == []
    assert aggregate_rho([]) is None


def test_affinity():
    assert user_affinity(["books"] * 4, "books") == 1.0
    assert user_affinity(["books"] * 4, "toys") == 0.0
    four = ["a", "b", "c", "d"] * 3
    assert all(user_affinity(four, c) == 0.25 for c in "abcd")
    assert user_affinity([], "a") is None

    events = [ev(0, "u", "P", category="books"), ev(5, "u", "Q", category="toys"),
              ev(9, "u", "K", category="kdp")]
    prof = AffinityProfile.from_events(events)
    assert prof.affinity("u", "books") == 0.5
    assert prof.affinity("nobody", "books") is None


def test_estimators_deterministic():
    clicks = [1, 0, 2] * 6 + [0, 0]
    clicks[T] = 9
    edges = [edge_series("F", "J", clicks)]
    a = estimate_rho(shock(), edges, focal())
    b = estimate_rho(shock(), edges, focal())
    assert a == b and math.isfinite(a.rho_i)
