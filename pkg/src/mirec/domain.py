"""Core data model: channels, candidates, requests, page layouts and the exposure ledger.

Requests and layouts are array-backed (one numpy array per field) because the
simulator builds one of each per period; the ``candidates``/``slots`` properties
give the per-item dataclass view when that is more convenient.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence

import numpy as np

EMPTY = -1  # item id / channel marker for an unfilled slot


class InfeasibleLayout(Exception):
    """Too few admissible candidates to fill every slot of a page."""


class OverdraftError(Exception):
    """A layout would push a channel past its upper exposure budget."""


@dataclass(frozen=True)
class ChannelSpec:
    id: int
    upper_share: float = 1.0
    lower_share: float = 0.0

    def __post_init__(self):
        if self.id < 0:
            raise ValueError(f"channel id must be non-negative, got {self.id}")
        if not 0.0 <= self.lower_share <= self.upper_share <= 1.0:
            raise ValueError(
                f"channel {self.id}: need 0 <= lower_share <= upper_share <= 1, "
                f"got lower={self.lower_share}, upper={self.upper_share}"
            )


@dataclass(frozen=True)
class Candidate:
    item_id: int
    channel: int
    utility: float

    def __post_init__(self):
        if not (np.isfinite(self.utility) and self.utility >= 0):
            raise ValueError(f"utility must be finite and non-negative, got {self.utility}")


@dataclass(frozen=True, eq=False)
class Request:
    """One user arrival.

    ``utilities`` are the estimates the allocator acts on. ``true_utilities``
    (when known, e.g. in a synthetic world) are used only for metrics.
    """

    t: int
    item_ids: np.ndarray
    channels: np.ndarray
    utilities: np.ndarray
    user_key: int = 0
    true_utilities: Optional[np.ndarray] = None

    def __post_init__(self):
        if len(self.item_ids) == 0:
            raise ValueError("request has no candidates")
        if not (len(self.item_ids) == len(self.channels) == len(self.utilities)):
            raise ValueError("item_ids, channels and utilities must align")

    @classmethod
    def from_candidates(cls, t: int, candidates: Sequence[Candidate], user_key: int = 0) -> "Request":
        return cls(
            t=t,
            item_ids=np.array([c.item_id for c in candidates], dtype=np.int64),
            channels=np.array([c.channel for c in candidates], dtype=np.int64),
            utilities=np.array([c.utility for c in candidates], dtype=float),
            user_key=user_key,
        )

    def __len__(self) -> int:
        return len(self.item_ids)

    @property
    def candidates(self) -> list[Candidate]:
        return [
            Candidate(int(i), int(c), float(u))
            for i, c, u in zip(self.item_ids, self.channels, self.utilities)
        ]

    @property
    def realized_utilities(self) -> np.ndarray:
        return self.utilities if self.true_utilities is None else self.true_utilities

    def subset(self, keep: np.ndarray) -> "Request":
        """Request restricted to the candidates selected by ``keep`` (mask or index)."""
        return replace(
            self,
            item_ids=self.item_ids[keep],
            channels=self.channels[keep],
            utilities=self.utilities[keep],
            true_utilities=None if self.true_utilities is None else self.true_utilities[keep],
        )

    def with_utilities(self, utilities: np.ndarray) -> "Request":
        return replace(self, utilities=np.asarray(utilities, dtype=float))


@dataclass(frozen=True, eq=False)
class PageLayout:
    """Slot ``n`` holds candidate ``index[n]`` of the request it was built from."""

    index: np.ndarray
    item_ids: np.ndarray
    channels: np.ndarray
    utilities: np.ndarray

    @classmethod
    def from_request(cls, request: Request, index: Iterable[int]) -> "PageLayout":
        index = np.asarray(index, dtype=np.int64)
        return cls(
            index=index,
            item_ids=request.item_ids[index],
            channels=request.channels[index],
            utilities=request.utilities[index],
        )

    @classmethod
    def from_item_ids(cls, request: Request, item_ids: Sequence[Optional[int]]) -> "PageLayout":
        """Build a layout by item id; ``None`` leaves the slot empty, unknown ids keep channel -1."""
        pos = {int(i): k for k, i in enumerate(request.item_ids)}
        index, ids, chans, utils = [], [], [], []
        for item in item_ids:
            k = pos.get(item) if item is not None else None
            index.append(EMPTY if k is None else k)
            ids.append(EMPTY if item is None else int(item))
            chans.append(EMPTY if k is None else int(request.channels[k]))
            utils.append(0.0 if k is None else float(request.utilities[k]))
        return cls(np.array(index), np.array(ids), np.array(chans), np.array(utils, dtype=float))

    def __len__(self) -> int:
        return len(self.item_ids)

    @property
    def slots(self) -> list[Candidate]:
        return [
            Candidate(int(i), int(c), float(u))
            for i, c, u in zip(self.item_ids, self.channels, self.utilities)
        ]


@dataclass(frozen=True, eq=False)
class ExposureModel:
    """Per-slot exposure mass. ``uniform`` counts impressions; ``position_decayed`` discounts lower slots."""

    kind: str
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "weights", w)
        if self.kind not in ("uniform", "position_decayed"):
            raise ValueError(f"unknown exposure model kind {self.kind!r}")
        if w.ndim != 1 or len(w) == 0:
            raise ValueError("weights must be a non-empty vector")
        if np.any(w <= 0) or np.any(w > 1):
            raise ValueError("exposure weights must lie in (0, 1]")
        if self.kind == "uniform" and np.any(w != 1.0):
            raise ValueError("uniform model requires unit weights")
        if np.any(np.diff(w) > 0):
            raise ValueError("position_decayed weights must be non-increasing")

    @classmethod
    def uniform(cls, n_slots: int) -> "ExposureModel":
        return cls("uniform", np.ones(n_slots))

    @classmethod
    def position_decayed(cls, n_slots: int) -> "ExposureModel":
        # DCG-style discount: 1, 0.63, 0.5, ...
        return cls("position_decayed", 1.0 / np.log2(np.arange(n_slots) + 2.0))

    @property
    def n_slots(self) -> int:
        return len(self.weights)

    @property
    def page_mass(self) -> float:
        return float(self.weights.sum())

    def __eq__(self, other):
        if not isinstance(other, ExposureModel):
            return NotImplemented
        return self.kind == other.kind and np.array_equal(self.weights, other.weights)


@dataclass(frozen=True, eq=False)
class ExposureLedger:
    initial_max: np.ndarray
    initial_min: np.ndarray
    total_budget: float
    consumed: np.ndarray = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "initial_max", np.asarray(self.initial_max, dtype=float))
        object.__setattr__(self, "initial_min", np.asarray(self.initial_min, dtype=float))
        if self.consumed is None:
            object.__setattr__(self, "consumed", np.zeros_like(self.initial_max))
        else:
            object.__setattr__(self, "consumed", np.asarray(self.consumed, dtype=float))

    @property
    def n_channels(self) -> int:
        return len(self.initial_max)

    @property
    def remaining_max(self) -> np.ndarray:
        return self.initial_max - self.consumed

    @property
    def remaining_min(self) -> np.ndarray:
        """Signed distance to the lower budget; negative once a floor is exceeded."""
        return self.initial_min - self.consumed

    def __eq__(self, other):
        if not isinstance(other, ExposureLedger):
            return NotImplemented
        return (
            self.total_budget == other.total_budget
            and np.array_equal(self.initial_max, other.initial_max)
            and np.array_equal(self.initial_min, other.initial_min)
            and np.array_equal(self.consumed, other.consumed)
        )


@dataclass(frozen=True)
class ChannelCompleteness:
    channel: int
    achieved_share: float
    lower_violation: float
    upper_headroom: float


def validate_layout(layout: PageLayout, request: Request, n_slots: Optional[int] = None) -> Optional[str]:
    """Check a layout against the slot-assignment constraints.

    Returns None when every slot holds exactly one candidate of ``request`` and
    no candidate occupies two slots, otherwise a message naming the first
    violated constraint and slot.
    """
    if n_slots is not None and len(layout) != n_slots:
        return f"layout has {len(layout)} slots, page requires {n_slots}"
    known = set(int(i) for i in request.item_ids)
    seen: dict[int, int] = {}
    for n, item in enumerate(layout.item_ids):
        item = int(item)
        if item == EMPTY:
            return f"slot {n} is empty (every slot must hold one item)"
        if item not in known:
            return f"slot {n} holds item {item}, which is not a candidate of request t={request.t}"
        if item in seen:
            return f"item {item} assigned to slots {seen[item]} and {n} (an item may fill at most one slot)"
        seen[item] = n
    return None


def consumption(layout: PageLayout, model: ExposureModel, n_channels: int) -> np.ndarray:
    """Per-channel exposure mass g(x) of a page."""
    return np.bincount(layout.channels, weights=model.weights[: len(layout)], minlength=n_channels)


def consume(ledger: ExposureLedger, layout: PageLayout, model: ExposureModel) -> tuple[ExposureLedger, np.ndarray]:
    g = consumption(layout, model, ledger.n_channels)
    consumed = ledger.consumed + g
    # relative slack only absorbs float rounding of non-integer weights
    over = consumed > ledger.initial_max * (1 + 1e-12) + 1e-12
    if np.any(over):
        m = int(np.flatnonzero(over)[0])
        raise OverdraftError(
            f"channel {m}: consumption {consumed[m]} exceeds upper budget {ledger.initial_max[m]}"
        )
    return replace(ledger, consumed=consumed), g


def budgets_from_shares(specs: Sequence[ChannelSpec], horizon: int, model: ExposureModel) -> ExposureLedger:
    ids = [s.id for s in specs]
    if ids != list(range(len(specs))):
        raise ValueError(f"channel specs must be indexed 0..M-1 in order, got {ids}")
    lower = np.array([s.lower_share for s in specs])
    if lower.sum() > 1 + 1e-12:
        raise ValueError(f"lower shares sum to {lower.sum():.6g} > 1")
    upper = np.array([s.upper_share for s in specs])
    total = horizon * model.page_mass
    return ExposureLedger(initial_max=upper * total, initial_min=lower * total, total_budget=total)


def completeness(ledger: ExposureLedger) -> list[ChannelCompleteness]:
    """End-of-run report per channel.

    ``lower_violation`` is the relative shortfall below the lower budget;
    ``upper_headroom`` is the unused upper budget as a share of the total.
    """
    out = []
    for m in range(ledger.n_channels):
        lo, used = ledger.initial_min[m], ledger.consumed[m]
        violation = max(0.0, (lo - used) / lo) if lo > 0 else 0.0
        out.append(
            ChannelCompleteness(
                channel=m,
                achieved_share=float(used / ledger.total_budget) if ledger.total_budget else 0.0,
                lower_violation=float(violation),
                upper_headroom=float((ledger.initial_max[m] - used) / ledger.total_budget)
                if ledger.total_budget
                else 0.0,
            )
        )
    return out
