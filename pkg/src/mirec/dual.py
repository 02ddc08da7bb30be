"""Signed per-channel exposure prices and their mirror-descent updates.

``mu[m] > 0`` taxes channel ``m`` (it is running ahead of its upper budget),
``mu[m] < 0`` subsidises it (it is behind its lower budget).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable

import numpy as np

from .domain import ExposureLedger, Request
from .primal import SlotWeights, layout_value, solve

PACING_MODES = ("static", "adaptive")
UPDATE_RULES = ("free", "projected")


@dataclass(frozen=True, eq=False)
class DualState:
    mu: np.ndarray
    step_eta: float
    pacing: str = "static"
    update_rule: str = "free"
    reference: str = "quadratic"

    def __post_init__(self):
        object.__setattr__(self, "mu", np.asarray(self.mu, dtype=float))
        if not np.all(np.isfinite(self.mu)):
            raise ValueError("mu must be finite")
        if not self.step_eta > 0:
            raise ValueError(f"step_eta must be positive, got {self.step_eta}")
        if self.pacing not in PACING_MODES:
            raise ValueError(f"pacing must be one of {PACING_MODES}")
        if self.update_rule not in UPDATE_RULES:
            raise ValueError(f"update_rule must be one of {UPDATE_RULES}")
        if self.reference != "quadratic":
            raise ValueError("only the quadratic reference function is implemented")
        if self.update_rule == "projected" and np.any(self.mu < 0):
            raise ValueError("projected rule requires mu >= 0")

    @classmethod
    def zeros(cls, n_channels: int, step_eta: float, **kwargs) -> "DualState":
        return cls(np.zeros(n_channels), step_eta, **kwargs)


@dataclass(frozen=True, eq=False)
class PacingTargets:
    """Per-request exposure the channel should receive to stay on its upper / lower pace."""

    rho_max: np.ndarray
    rho_min: np.ndarray


def step_schedule(c: float, horizon: int) -> float:
    if c <= 0 or horizon < 1:
        raise ValueError("need c > 0 and horizon >= 1")
    return c / math.sqrt(horizon)


def pacing_targets(mode: str, ledger: ExposureLedger, t: int, horizon: int) -> PacingTargets:
    """Targets used for the gradient at period ``t`` (1-based), given the ledger after period ``t``.

    ``static`` spreads the initial budgets evenly; ``adaptive`` spreads what is
    left over the periods still to come.
    """
    if mode == "static":
        return PacingTargets(ledger.initial_max / horizon, ledger.initial_min / horizon)
    if mode == "adaptive":
        left = max(horizon - t, 1)
        return PacingTargets(
            np.maximum(ledger.remaining_max, 0.0) / left,
            np.maximum(ledger.remaining_min, 0.0) / left,
        )
    raise ValueError(f"unknown pacing mode {mode!r}")


def subgradient(mu: np.ndarray, g: np.ndarray, targets: PacingTargets) -> np.ndarray:
    """Danskin subgradient of the signed dual; ``mu == 0`` takes the upper branch."""
    return np.where(np.asarray(mu) >= 0, targets.rho_max, targets.rho_min) - g


def update(state: DualState, grad: np.ndarray) -> DualState:
    # quadratic reference => Bregman step is a plain gradient step
    mu = state.mu - state.step_eta * np.asarray(grad)
    if state.update_rule == "projected":
        mu = np.maximum(mu, 0.0)
    return replace(state, mu=mu)


def dual_budget_term(mu: np.ndarray, ledger: ExposureLedger) -> float:
    mu = np.asarray(mu, dtype=float)
    return float(np.maximum(mu, 0) @ ledger.initial_max - np.maximum(-mu, 0) @ ledger.initial_min)


def empirical_dual(
    mu: np.ndarray,
    requests: Iterable[Request],
    ledger: ExposureLedger,
    weights: SlotWeights,
    solver: str = "auto",
) -> float:
    """Dual objective at fixed prices over a whole stream; an upper bound on the hindsight optimum."""
    mu = np.asarray(mu, dtype=float)
    total = 0.0
    for req in requests:
        total += layout_value(solve(req, mu, weights, solver), mu, weights).value
    return total + dual_budget_term(mu, ledger)
