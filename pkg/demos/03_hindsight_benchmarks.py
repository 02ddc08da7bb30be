"""
How far from the hindsight optimum?
===================================

On tiny instances (two channels, two slots) the exact hindsight optimum is
computable by dynamic programming over channel counts. On larger ones the
dual function evaluated on a price grid gives an upper bound instead. Regret
is the gap between a benchmark and what the online allocator collected.
"""

from mirec import budgets_from_shares
from mirec.harness import RunConfig, run_stream
from mirec.harness.simulate import attach_benchmark, slot_weights
from mirec.oracle import dual_upper_bound, regret

config = RunConfig.from_dict({
    "seed": 3,
    "horizon": 150,
    "n_slots": 2,
    "channels": [{"lower_share": 0.0}, {"lower_share": 0.4}],
    "scorer": {"channel_bias": [-1.0, -2.0], "candidates_per_channel": 2, "items_per_channel": 50},
})

result = run_stream(config, keep_requests=True)
truth = [r.with_utilities(r.realized_utilities) for r in result.requests]
with_dp = attach_benchmark(result.report, truth, config, "dp")
ledger = budgets_from_shares(config.channel_specs(), config.horizon, config.exposure_model())
bound = dual_upper_bound(truth, ledger, slot_weights(config))

print(f"online utility      {result.report.utility:.3f}")
print(f"hindsight optimum   {with_dp.benchmark_value:.3f}  regret {with_dp.regret:.3f}")
print(f"dual upper bound    {bound.value:.3f}  regret {regret(result.report.utility, bound.value):.3f}"
      f"  (best of {bound.n_points} prices, at mu={bound.mu.round(3)})")
