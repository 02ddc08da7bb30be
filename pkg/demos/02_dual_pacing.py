"""
Pacing channel exposure with signed prices
==========================================

Over a stream of requests the dual layer nudges each channel's price after
every page: down (a subsidy) when the channel runs behind its floor, up when
it runs ahead of its cap. Here channel 2 is the weakest but is promised 30%
of all exposure.
"""

import numpy as np

from mirec.harness import RunConfig, run_stream

config = RunConfig.from_dict({
    "seed": 0,
    "horizon": 3000,
    "n_slots": 10,
    "channels": [{"lower_share": 0.0}, {"lower_share": 0.2}, {"lower_share": 0.3}],
    "scorer": {"channel_bias": [0.0, -1.0, -3.0], "candidates_per_channel": 20},
})
result = run_stream(config)
report = result.report

# price trajectory at a few checkpoints
mu = np.array([r.mu for r in result.records])
for t in (1, 10, 100, 1000, 3000):
    print(f"t={t:5d}  mu={np.round(mu[t - 1], 3)}")

for c in report.completeness:
    floor = config.channels[c.channel].lower_share
    print(f"channel {c.channel}: share {c.achieved_share:.4f} (floor {floor:.2f}), shortfall {c.lower_violation:.3%}")
print(f"total utility {report.utility:.1f}, clicks {report.clicks}, upper violations {report.upper_violations}")
