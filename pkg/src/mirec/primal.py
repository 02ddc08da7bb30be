"""Per-request layout optimisation under fixed channel prices.

Given prices ``mu`` the page value is separable over slots:
``s[n, i] = wf[n] * u[i] - mu[c(i)] * wg[n]`` and the best page is a maximum
weight matching of slots to candidates. Ties are broken towards the
lexicographically smallest sequence of item ids.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np
from scipy.optimize import linear_sum_assignment

from .domain import ExposureLedger, ExposureModel, InfeasibleLayout, PageLayout, Request

SOLVERS = ("auto", "assignment", "separable", "brute")


@dataclass(frozen=True, eq=False)
class SlotWeights:
    """Position weights for utility (``utility``) and exposure consumption (``exposure``)."""

    utility: np.ndarray
    exposure: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "utility", np.asarray(self.utility, dtype=float))
        object.__setattr__(self, "exposure", np.asarray(self.exposure, dtype=float))
        if self.utility.shape != self.exposure.shape:
            raise ValueError("utility and exposure weights must have the same length")

    @classmethod
    def from_model(cls, model: ExposureModel, utility: Optional[np.ndarray] = None) -> "SlotWeights":
        return cls(model.weights if utility is None else utility, model.weights)

    @classmethod
    def equal(cls, weights) -> "SlotWeights":
        return cls(weights, weights)

    @property
    def n_slots(self) -> int:
        return len(self.utility)

    def proportionality(self) -> Optional[float]:
        """k with utility == k * exposure, if such k > 0 exists and exposure is non-increasing."""
        return self._proportionality

    @cached_property
    def _proportionality(self) -> Optional[float]:
        if np.any(np.diff(self.exposure) > 0):
            return None
        k = self.utility[0] / self.exposure[0]
        if k > 0 and np.allclose(self.utility, k * self.exposure, rtol=1e-12, atol=0):
            return float(k)
        return None


@dataclass(frozen=True)
class LayoutValue:
    f: float
    g: np.ndarray
    value: float


def frozen_channels(ledger: ExposureLedger, model: ExposureModel) -> np.ndarray:
    """Channels whose remaining upper budget cannot absorb a full page."""
    return ledger.remaining_max < model.page_mass


def filter_exhausted(request: Request, ledger: ExposureLedger, model: ExposureModel) -> Request:
    frozen = frozen_channels(ledger, model)
    if frozen.any():
        request = request.subset(~frozen[request.channels])
    if len(request) < model.n_slots:
        raise InfeasibleLayout(
            f"t={request.t}: {len(request)} candidates survive the upper-limit filter, "
            f"{model.n_slots} slots to fill"
        )
    return request


def adjusted_scores(request: Request, mu: np.ndarray, weights: SlotWeights) -> np.ndarray:
    """(N, |I|) matrix of utility gain minus exposure cost for every slot/candidate pair."""
    price = np.asarray(mu)[request.channels]
    return np.multiply.outer(weights.utility, request.utilities) - np.multiply.outer(weights.exposure, price)


def _check_size(request: Request, weights: SlotWeights):
    if len(request) < weights.n_slots:
        raise InfeasibleLayout(f"t={request.t}: {len(request)} candidates for {weights.n_slots} slots")


def assign(scores: np.ndarray) -> np.ndarray:
    """Column chosen for each row in a maximum-weight rectangular assignment."""
    rows, cols = linear_sum_assignment(scores, maximize=True)
    out = np.empty(scores.shape[0], dtype=np.int64)
    out[rows] = cols
    return out


def solve_assignment(request: Request, mu: np.ndarray, weights: SlotWeights) -> PageLayout:
    _check_size(request, weights)
    # columns in item-id order so the (deterministic) solver resolves ties by id
    order = np.argsort(request.item_ids, kind="stable")
    scores = adjusted_scores(request, mu, weights)[:, order]
    return PageLayout.from_request(request, order[assign(scores)])


def solve_separable(request: Request, mu: np.ndarray, weights: SlotWeights) -> PageLayout:
    """Sort-based solver, exact when utility and exposure weights are proportional."""
    _check_size(request, weights)
    k = weights.proportionality()
    if k is None:
        raise ValueError("separable solver needs proportional, non-increasing slot weights")
    key = k * request.utilities - np.asarray(mu)[request.channels]
    order = np.lexsort((request.item_ids, -key))
    return PageLayout.from_request(request, order[: weights.n_slots])


def brute_force_layout(request: Request, mu: np.ndarray, weights: SlotWeights) -> PageLayout:
    """Exhaustive search over injective slot maps. Test oracle; keep N <= 5, |I| <= 8."""
    _check_size(request, weights)
    n = weights.n_slots
    perms = np.array(list(itertools.permutations(range(len(request)), n)), dtype=np.int64).reshape(-1, n)
    scores = adjusted_scores(request, mu, weights)
    values = scores[np.arange(n), perms].sum(axis=1)
    best = values.max()
    tied = perms[values == best]
    ids = request.item_ids[tied]
    pick = np.lexsort(ids.T[::-1])[0]
    return PageLayout.from_request(request, tied[pick])


def layout_value(layout: PageLayout, mu: np.ndarray, weights: SlotWeights) -> LayoutValue:
    mu = np.asarray(mu, dtype=float)
    n = len(layout)
    f = float(weights.utility[:n] @ layout.utilities)
    g = np.bincount(layout.channels, weights=weights.exposure[:n], minlength=len(mu))
    return LayoutValue(f=f, g=g, value=f - float(mu @ g))


def solve(request: Request, mu: np.ndarray, weights: SlotWeights, solver: str = "auto") -> PageLayout:
    if solver == "auto":
        solver = "separable" if weights.proportionality() is not None else "assignment"
    if solver == "assignment":
        return solve_assignment(request, mu, weights)
    if solver == "separable":
        return solve_separable(request, mu, weights)
    if solver == "brute":
        return brute_force_layout(request, mu, weights)
    raise ValueError(f"unknown solver {solver!r}; expected one of {SOLVERS}")
