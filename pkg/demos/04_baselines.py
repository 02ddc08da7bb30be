"""
Dual pacing against the Fixed and beta-WPO baselines
====================================================

All three methods see the same request streams. Fixed deals slots to channels
in a repeating pattern; beta-WPO merges channels by priority-weighted scores
with a feedback loop on the weights; the dual allocator prices exposure.
"""

from dataclasses import replace

from mirec.harness import compare, setting
from mirec.harness.config import ChannelConfig

config = replace(setting(1, horizon=3000), channels=tuple(ChannelConfig(s) for s in (0.30, 0.20, 0.15, 0.10)))
out = compare(config, ["me2a", "wpo", "fixed"], seeds=[0, 1])

for name, s in out.items():
    shortfalls = " ".join(f"{v:.2%}" for v in s.violation_by_channel)
    print(f"{name:6s} utility {s.utility:9.1f}  lift vs fixed {s.lift:+.2%}  floor shortfall [{shortfalls}]")
