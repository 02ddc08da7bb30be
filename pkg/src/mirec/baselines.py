"""Comparison allocators: fixed slot patterns and priority-weighted list merging (beta-WPO)."""

from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Sequence

import numpy as np

from .domain import InfeasibleLayout, PageLayout, Request


@dataclass(frozen=True)
class FixedPattern:
    slot_to_channel: tuple

    def counts(self, n_channels: int) -> np.ndarray:
        return np.bincount(np.asarray(self.slot_to_channel, dtype=np.int64), minlength=n_channels)


@dataclass(frozen=True, eq=False)
class BetaWeights:
    beta: np.ndarray
    kappa: float = 0.0
    beta_lo: float = 1e-3
    beta_hi: float = 1e3

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=float)
        object.__setattr__(self, "beta", beta)
        if self.kappa < 0:
            raise ValueError("kappa must be non-negative")
        if not 0 < self.beta_lo <= self.beta_hi:
            raise ValueError("need 0 < beta_lo <= beta_hi")
        if np.any(beta < self.beta_lo) or np.any(beta > self.beta_hi):
            raise ValueError("beta outside clamp bounds")


def fixed_patterns(shares: Sequence[float], n_slots: int, max_period: int = 100) -> list[FixedPattern]:
    """Cycle of page patterns whose long-run channel mix tracks ``shares``.

    Slots are dealt one at a time to the channel furthest behind its share
    (ties to the lower channel id), so after any number of slots every
    channel's count is within one slot of its target. The cycle length is the
    smallest number of pages over which every target is a whole number of
    slots, capped at ``max_period``.
    """
    shares = np.asarray(shares, dtype=float)
    if np.any(shares < 0) or not np.isclose(shares.sum(), 1.0):
        raise ValueError("pattern shares must be non-negative and sum to 1")
    period = 1
    for s in shares:
        period = np.lcm(period, Fraction(float(s) * n_slots).limit_denominator(max_period).denominator)
    period = int(min(period, max_period))

    given = np.zeros(len(shares))
    dealt = 0
    patterns = []
    for _ in range(period):
        page = []
        for _ in range(n_slots):
            dealt += 1
            m = int(np.argmax(shares * dealt - given))
            given[m] += 1
            page.append(m)
        patterns.append(FixedPattern(tuple(page)))
    return patterns


def fixed_allocate(request: Request, pattern: FixedPattern) -> PageLayout:
    """Fill slot ``n`` with the best unused candidate of the channel the pattern assigns to it."""
    order = np.lexsort((request.item_ids, -request.utilities))
    queues: dict[int, list[int]] = {}
    for k in order:
        queues.setdefault(int(request.channels[k]), []).append(int(k))
    index = []
    taken: dict[int, int] = {}
    for n, m in enumerate(pattern.slot_to_channel):
        pos = taken.get(m, 0)
        queue = queues.get(m, [])
        if pos >= len(queue):
            raise InfeasibleLayout(f"t={request.t}: pattern needs more channel-{m} candidates than offered (slot {n})")
        index.append(queue[pos])
        taken[m] = pos + 1
    return PageLayout.from_request(request, index)


def wpo_allocate(request: Request, betas: BetaWeights, n_slots: int) -> PageLayout:
    """Merge channel lists by ``beta[channel] * utility`` and keep the top ``n_slots``."""
    if len(request) < n_slots:
        raise InfeasibleLayout(f"t={request.t}: {len(request)} candidates for {n_slots} slots")
    key = betas.beta[request.channels] * request.utilities
    order = np.lexsort((request.item_ids, -key))
    return PageLayout.from_request(request, order[:n_slots])


def wpo_feedback(betas: BetaWeights, achieved_share: np.ndarray, target_share: np.ndarray) -> BetaWeights:
    """Proportional correction: channels behind target get a larger priority weight."""
    err = np.asarray(target_share) - np.asarray(achieved_share)
    beta = np.clip(betas.beta * (1.0 + betas.kappa * err), betas.beta_lo, betas.beta_hi)
    return replace(betas, beta=beta)
