"""Step logs (JSON lines), recorded request streams, and the summary CSV."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Iterable, Iterator, Optional, Union

import numpy as np

from ..domain import Request

SUMMARY_COLUMNS = ("method", "T", "seed", "utility", "regret", "underspend", "violation_max", "tau_freeze", "wallclock_ms")


@dataclass(frozen=True)
class StepRecord:
    """One period of a run.

    ``mu`` is the method's per-channel control state after the period's update
    (prices for me2a, priority weights for wpo, zeros for fixed). ``frozen``
    lists channels removed by the upper-limit filter before the decision.
    """

    t: int
    horizon: int
    mu: list
    g: list
    f: float
    clicks: int
    items: list
    remaining_max: list
    remaining_min: list
    frozen: list


_STEP_FIELDS = tuple(f.name for f in fields(StepRecord))


def write_step_log(records: Iterable[StepRecord], path: Union[str, Path]):
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(asdict(rec), separators=(",", ":")))
            fh.write("\n")


def read_step_log(path: Union[str, Path]) -> list[StepRecord]:
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            data = json.loads(line)
            if set(data) != set(_STEP_FIELDS):
                raise ValueError(f"{path}:{lineno}: step record fields {sorted(data)} do not match {_STEP_FIELDS}")
            out.append(StepRecord(**data))
    return out


def write_stream(requests: Iterable[Request], path: Union[str, Path]):
    """Persist requests (estimated and, when known, true utilities) one per line."""
    with open(path, "w") as fh:
        for r in requests:
            rec = {
                "t": int(r.t),
                "user_key": int(r.user_key),
                "item_ids": r.item_ids.tolist(),
                "channels": r.channels.tolist(),
                "utilities": r.utilities.tolist(),
                "true_utilities": None if r.true_utilities is None else r.true_utilities.tolist(),
            }
            fh.write(json.dumps(rec, separators=(",", ":")))
            fh.write("\n")


def read_stream(path: Union[str, Path]) -> Iterator[Request]:
    with open(path) as fh:
        for line in fh:
            if not line.strip():
                continue
            d = json.loads(line)
            truth = d.get("true_utilities")
            yield Request(
                t=d["t"],
                item_ids=np.array(d["item_ids"], dtype=np.int64),
                channels=np.array(d["channels"], dtype=np.int64),
                utilities=np.array(d["utilities"], dtype=float),
                user_key=d.get("user_key", 0),
                true_utilities=None if truth is None else np.array(truth, dtype=float),
            )


def summary_row(report, method: Optional[str] = None) -> dict:
    return {
        "method": method or report.method,
        "T": report.horizon,
        "seed": report.seed,
        "utility": report.utility,
        "regret": "" if report.regret is None else report.regret,
        "underspend": report.underspend,
        "violation_max": report.violation_max,
        "tau_freeze": "" if report.tau_freeze is None else report.tau_freeze,
        "wallclock_ms": report.wallclock_ms,
    }


def write_summary(rows: Iterable[dict], path: Union[str, Path], append: bool = False):
    path = Path(path)
    new = not (append and path.exists())
    with open(path, "a" if append else "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS)
        if new:
            writer.writeheader()
        for row in rows:
            writer.writerow({k: row[k] for k in SUMMARY_COLUMNS})
