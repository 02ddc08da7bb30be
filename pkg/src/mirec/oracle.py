"""Regret benchmarks: exact hindsight optimum for tiny instances, dual upper bound otherwise."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .domain import ExposureLedger, PageLayout, Request
from .dual import dual_budget_term, empirical_dual
from .primal import SlotWeights

# exact DP limits
DP_MAX_CHANNELS = 2
DP_MAX_HORIZON = 200
DP_MAX_SLOTS = 3
DP_MAX_CANDIDATES = 6

_TOL = 1e-9


class InfeasibleInstance(Exception):
    """No layout sequence meets every upper and lower exposure budget."""


@dataclass(frozen=True, eq=False)
class HindsightInstance:
    requests: Sequence[Request]
    ledger: ExposureLedger
    weights: SlotWeights

    @property
    def horizon(self) -> int:
        return len(self.requests)

    def within_dp_bounds(self) -> bool:
        return (
            self.ledger.n_channels <= DP_MAX_CHANNELS
            and self.horizon <= DP_MAX_HORIZON
            and self.weights.n_slots <= DP_MAX_SLOTS
            and max(len(r) for r in self.requests) <= DP_MAX_CANDIDATES
            and bool(np.all(self.weights.exposure == 1.0))
        )


@dataclass(frozen=True, eq=False)
class HindsightResult:
    value: float
    layouts: list


@dataclass(frozen=True, eq=False)
class DualBound:
    value: float
    mu: np.ndarray
    n_points: int


def _best_by_count(request: Request, weights: SlotWeights, channel: int):
    """Best utility (and layout index) for each possible number of ``channel`` items on the page."""
    n = weights.n_slots
    best = np.full(n + 1, -np.inf)
    best_idx: list = [None] * (n + 1)
    best_ids: list = [None] * (n + 1)
    for perm in itertools.permutations(range(len(request)), n):
        idx = np.array(perm)
        k = int(np.count_nonzero(request.channels[idx] == channel))
        f = float(weights.utility @ request.utilities[idx])
        ids = tuple(request.item_ids[idx].tolist())
        if f > best[k] or (f == best[k] and ids < best_ids[k]):
            best[k], best_idx[k], best_ids[k] = f, idx, ids
    return best, best_idx


def hindsight_opt_dp(instance: HindsightInstance) -> HindsightResult:
    """Best total utility over all feasible layout sequences, by DP over cumulative channel-0 exposure.

    Exposure must be uniform so that the cumulative count is an integer state;
    with two channels the channel-1 count is implied by the page totals.
    """
    if not instance.within_dp_bounds():
        raise ValueError("instance outside exact DP bounds (M<=2, T<=200, N<=3, |I|<=6, uniform exposure)")
    ledger, n, horizon = instance.ledger, instance.weights.n_slots, instance.horizon
    tables = [_best_by_count(r, instance.weights, channel=0) for r in instance.requests]

    size = n * horizon + 1
    value = np.zeros(1)
    choice = []
    for best, _ in tables:
        nxt = np.full(len(value) + n, -np.inf)
        arg = np.full(len(value) + n, -1, dtype=np.int64)
        for k in range(n + 1):
            if best[k] == -np.inf:
                continue
            cand = value + best[k]
            seg = slice(k, k + len(value))
            better = cand > nxt[seg]
            nxt[seg] = np.where(better, cand, nxt[seg])
            arg[seg] = np.where(better, k, arg[seg])
        value = nxt
        choice.append(arg)
    assert len(value) == size

    c0 = np.arange(size, dtype=float)
    counts = np.stack([c0, n * horizon - c0]) if ledger.n_channels == 2 else c0[None, :]
    ok = np.all(
        (counts >= ledger.initial_min[:, None] - _TOL) & (counts <= ledger.initial_max[:, None] + _TOL), axis=0
    )
    if ledger.n_channels == 1:
        ok &= c0 == n * horizon
    ok &= np.isfinite(value)
    if not ok.any():
        raise InfeasibleInstance("no layout sequence satisfies every exposure budget")
    masked = np.where(ok, value, -np.inf)
    state = int(np.argmax(masked))
    total = float(masked[state])

    layouts = []
    for t in range(horizon - 1, -1, -1):
        k = int(choice[t][state])
        layouts.append(PageLayout.from_request(instance.requests[t], tables[t][1][k]))
        state -= k
    layouts.reverse()
    return HindsightResult(total, layouts)


def _layout_table(request: Request, weights: SlotWeights, n_channels: int):
    """Distinct consumption vectors of a request with the best utility reaching each."""
    n = weights.n_slots
    perms = np.array(list(itertools.permutations(range(len(request)), n)), dtype=np.int64)
    f = request.utilities[perms] @ weights.utility
    chans = request.channels[perms]
    g = np.stack([(chans == m) @ weights.exposure for m in range(n_channels)], axis=1)
    keys, inv = np.unique(g, axis=0, return_inverse=True)
    best = np.full(len(keys), -np.inf)
    np.maximum.at(best, inv.ravel(), f)
    return best, keys


def _as_points(mu_grid, n_channels: int) -> np.ndarray:
    if isinstance(mu_grid, (list, tuple)):
        if len(mu_grid) != n_channels:
            raise ValueError(f"product grid needs one axis per channel ({n_channels})")
        mesh = np.meshgrid(*[np.asarray(a, dtype=float) for a in mu_grid], indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)
    pts = np.atleast_2d(np.asarray(mu_grid, dtype=float))
    if pts.shape[1] != n_channels:
        raise ValueError(f"grid points must have {n_channels} coordinates")
    return pts


def dual_values(
    requests: Sequence[Request],
    ledger: ExposureLedger,
    weights: SlotWeights,
    points: np.ndarray,
    solver: str = "auto",
) -> np.ndarray:
    """Dual objective at each row of ``points``."""
    small = weights.n_slots <= DP_MAX_SLOTS and max(len(r) for r in requests) <= 8
    if not small:
        return np.array([empirical_dual(p, requests, ledger, weights, solver) for p in points])
    total = np.zeros(len(points))
    for req in requests:
        best, g = _layout_table(req, weights, ledger.n_channels)
        total += np.max(best[None, :] - points @ g.T, axis=1)
    return total + np.array([dual_budget_term(p, ledger) for p in points])


def default_mu_grid(u_max: float, n_channels: int, points: int = 41) -> list:
    return [np.linspace(-u_max, u_max, points) for _ in range(n_channels)]


def dual_upper_bound(
    requests: Sequence[Request],
    ledger: ExposureLedger,
    weights: SlotWeights,
    mu_grid: Union[list, np.ndarray, None] = None,
    refine: bool = True,
    solver: str = "auto",
) -> DualBound:
    """Smallest dual objective over a price grid; each grid value upper-bounds the hindsight optimum.

    ``mu_grid`` is either a list with one 1-D axis per channel (taken as a
    product grid) or an explicit ``(P, M)`` ndarray of points. With ``refine`` a second product
    grid of the same resolution is laid one cell around the best point.
    """
    m = ledger.n_channels
    if mu_grid is None:
        u_max = max(float(np.max(r.utilities)) for r in requests) * float(np.max(weights.utility))
        u_max /= float(np.min(weights.exposure))
        mu_grid = default_mu_grid(max(u_max, 1e-12), m)
    pts = _as_points(mu_grid, m)
    if len(pts) == 0:
        raise ValueError("empty price grid")
    vals = dual_values(requests, ledger, weights, pts, solver)
    i = int(np.argmin(vals))
    best_val, best_mu, n_points = float(vals[i]), pts[i], len(pts)
    product = isinstance(mu_grid, (list, tuple))
    if refine and product:
        fine = []
        for axis, centre in zip(mu_grid, best_mu):
            axis = np.asarray(axis, dtype=float)
            step = float(np.max(np.diff(axis))) if len(axis) > 1 else 0.0
            fine.append(np.linspace(centre - step, centre + step, len(axis)) if step > 0 else np.array([centre]))
        fpts = _as_points(fine, m)
        fvals = dual_values(requests, ledger, weights, fpts, solver)
        j = int(np.argmin(fvals))
        n_points += len(fpts)
        if fvals[j] < best_val:
            best_val, best_mu = float(fvals[j]), fpts[j]
    return DualBound(best_val, np.array(best_mu), n_points)


def regret(run_utility: float, benchmark_value: float) -> float:
    return benchmark_value - run_utility


def benchmark(
    requests: Sequence[Request],
    ledger: ExposureLedger,
    weights: SlotWeights,
    extra_points: Optional[np.ndarray] = None,
) -> tuple[str, float]:
    """Pick the tightest available benchmark: exact DP when in bounds and feasible, else a dual bound.

    For more than two channels the product grid is too large; the dual is then
    evaluated at zero prices and at ``extra_points`` (e.g. the run's average
    and final prices), each of which is a valid bound.
    """
    inst = HindsightInstance(requests, ledger, weights)
    if inst.within_dp_bounds():
        try:
            return "dp", hindsight_opt_dp(inst).value
        except InfeasibleInstance:
            pass
    if ledger.n_channels <= 2:
        return "dual_grid", dual_upper_bound(requests, ledger, weights).value
    pts = [np.zeros(ledger.n_channels)]
    if extra_points is not None:
        pts.extend(np.atleast_2d(extra_points))
    return "dual_points", dual_upper_bound(requests, ledger, weights, np.array(pts), refine=False).value
