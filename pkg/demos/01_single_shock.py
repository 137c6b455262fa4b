"""
One shock, by hand
==================

A focal product sits at about 20 views a day until a mention elsewhere sends
it 400 visitors. Its single recommendation gets a click or two a day, most of
them from people who would have found it anyway. The jump in clicks on the
shock day, divided by the jump in views, is the causal click-through rate.
"""

import numpy as np

from recshock.estimator import estimate_lambda, estimate_rho
from recshock.schema import DailyProductSeries, DayCounts, EdgeSeries, parse_day
from recshock.shocks import detect_shocks, sweep_beta

first = parse_day("2014-03-01")
rng = np.random.default_rng(0)

views = rng.poisson(20, 30)
views[15] += 400
clicks = rng.binomial(views, 0.02) + rng.poisson(1.0, 30)  # causal + convenience
direct_j = rng.poisson(8, 30)  # demand for the recommended item stays flat

focal = DailyProductSeries(
    "focal", "books",
    {first + t: DayCounts(int(v), int(v), int(v)) for t, v in enumerate(views)},
    (first, first + 29),
)
rec = DailyProductSeries(
    "rec", "books",
    {first + t: DayCounts(int(d + r), int(d), int(d + r)) for t, (d, r) in enumerate(zip(direct_j, clicks))},
    (first, first + 29),
)
edge = EdgeSeries("focal", "rec", {first + t: int(r) for t, r in enumerate(clicks) if r})

shocks = detect_shocks(focal)
print("shock days:", [s.shock_day - first for s in shocks])

# the recommended item's direct demand must stay flat around the shock
_, shocks = sweep_beta(shocks, {"focal": [edge]}, {"rec": rec})
s = shocks[0]
print(f"passes the constancy filter up to beta = {s.critical_beta:.2f}")

est = estimate_rho(s, [edge], focal)
print(f"delta v = {est.delta_v:.1f}, delta r = {est.delta_r['rec']:.1f}, rho = {est.rho_i:.4f}")

# pre-shock the focal page converts much better than 2%, because of the
# convenience clicks; lambda is the share of those clicks we can call causal
print(f"naive pre-shock rate = {est.naive_rate:.4f}")
print(f"lambda = {estimate_lambda([est], {'focal': [edge]}, {'focal': focal}):.2f}")
