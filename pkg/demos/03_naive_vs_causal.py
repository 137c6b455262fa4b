"""
Counting clicks versus counting causes
======================================

Counting recommendation clicks says how much traffic *passes through*
recommendations. In the ``convenience`` scenario most of those visitors would
have reached the product anyway, so the click count overstates the
recommender's effect several times over.
"""

import tempfile

from recshock.pipeline import RunOptions, run_pipeline
from recshock.synthgen import PRESETS, GroundTruth, generate

paths = generate(PRESETS["convenience"], tempfile.mkdtemp())
result = run_pipeline(paths.log, paths.catalog, RunOptions())
report = result.report
row = report.row(0.7)

print(f"share of all views arriving via recommendations: {report.naive_inbound:.1%}")
print(f"naive click-through on shocked products:         {row['naive_outbound']:.3f}")
print(f"causal click-through from shocks:                {row['rho_mean']:.3f} (se {row['rho_se']:.3f})")
print(f"ratio:                                           {row['naive_outbound'] / row['rho_mean']:.1f}x")

truth = GroundTruth.load(paths.truth)
keys = [e.shock.key for e in result.estimates if e.shock.eligible(0.7)]
print(f"\nestimated causal share of clicks (lambda): {row['lambda']:.3f}")
print(f"true causal share from the generator:      {truth.causal_fraction(keys):.3f}")

for c in report.categories:
    print(f"  {c.category:<8} shocks={c.n_shocks:4d} rho={c.mean_rho:.4f} naive={c.naive_rate:.4f}")
