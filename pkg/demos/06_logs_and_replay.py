"""
Step logs, recorded streams and replay
======================================

Every run writes one record per request. The run report can be rebuilt from
that log alone, and a recorded request stream can be replayed (optionally
shuffled) under a different method.
"""

import tempfile
from pathlib import Path

from mirec.harness import read_step_log, report_from_log, run_stream, setting, write_step_log
from mirec.harness.logs import write_stream

workdir = Path(tempfile.mkdtemp())
config = setting(1, seed=7, horizon=500)

first = run_stream(config, keep_requests=True)
write_step_log(first.records, workdir / "steps.jsonl")
write_stream(first.requests, workdir / "stream.jsonl")
print("first step record:", first.records[0])

rebuilt = report_from_log(read_step_log(workdir / "steps.jsonl"), "me2a", 7)
rebuilt.wallclock_ms = first.report.wallclock_ms
print("report rebuilt from log matches:", rebuilt == first.report)

replay = config.override(**{"stream.mode": "replay", "stream.path": str(workdir / "stream.jsonl")})
for method in ("me2a", "wpo"):
    r = run_stream(replay.override(**{"allocator.method": method})).report
    print(f"replayed with {method}: utility {r.utility:.2f}")
shuffled = run_stream(replay.override(**{"stream.shuffle_seed": 1})).report
print(f"shuffled order: utility {shuffled.utility:.2f}, shortfall {shuffled.violation_max:.3%}")
