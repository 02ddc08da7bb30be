"""Online allocation loop, multi-run grids and method comparisons."""

from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np

from .. import baselines, dual, oracle, primal, scorer
from ..domain import (
    ExposureLedger,
    InfeasibleLayout,
    Request,
    budgets_from_shares,
    completeness,
    consume,
)
from .config import RunConfig
from .logs import StepRecord, read_stream

log = logging.getLogger(__name__)


@dataclass
class RunReport:
    method: str
    seed: int
    horizon: int
    steps: int
    utility: float
    clicks: int
    consumed: list
    initial_max: list
    initial_min: list
    completeness: list
    underspend: float
    underspend_by_channel: list
    violation_max: float
    upper_violations: int
    tau_freeze: Optional[int]
    final_mu: list
    mean_mu: list
    error: Optional[str] = None
    benchmark: Optional[str] = None
    benchmark_value: Optional[float] = None
    regret: Optional[float] = None
    wallclock_ms: float = field(default=0.0, compare=False)

    def with_benchmark(self, kind: str, value: float) -> "RunReport":
        return replace(self, benchmark=kind, benchmark_value=value, regret=oracle.regret(self.utility, value))


@dataclass
class RunResult:
    report: RunReport
    records: list
    requests: Optional[list] = None


def report_from_log(records: Sequence[StepRecord], method: str, seed: int, error: Optional[str] = None) -> RunReport:
    """Everything in a report except wall-clock and the benchmark is a function of the step log."""
    if not records:
        raise ValueError("empty step log")
    g = np.array([r.g for r in records], dtype=float)
    consumed = np.zeros(g.shape[1])
    for row in g:
        consumed = consumed + row
    last = records[-1]
    initial_max = np.array(last.remaining_max) + consumed
    initial_min = np.array(last.remaining_min) + consumed
    horizon = last.horizon
    total = horizon * float(np.sum(g[0]))
    ledger = ExposureLedger(initial_max, initial_min, total, consumed)
    comp = completeness(ledger)
    short = np.maximum(initial_min - consumed, 0.0)
    utility = 0.0
    clicks = 0
    for r in records:
        utility += r.f
        clicks += r.clicks
    tau = next((r.t for r in records if r.frozen), None)
    mus = np.array([r.mu for r in records], dtype=float)
    return RunReport(
        method=method,
        seed=seed,
        horizon=horizon,
        steps=len(records),
        utility=utility,
        clicks=clicks,
        consumed=consumed.tolist(),
        initial_max=initial_max.tolist(),
        initial_min=initial_min.tolist(),
        completeness=comp,
        underspend=float(short.sum()),
        underspend_by_channel=short.tolist(),
        violation_max=max(c.lower_violation for c in comp),
        upper_violations=int(np.count_nonzero(consumed > initial_max)),
        tau_freeze=tau,
        final_mu=mus[-1].tolist(),
        mean_mu=mus.mean(axis=0).tolist(),
        error=error,
    )


# -- allocators --------------------------------------------------------


def target_shares(config: RunConfig) -> np.ndarray:
    """Channel mix the baselines steer towards: lower shares, remainder split by upper headroom."""
    if config.baseline.target_shares is not None:
        return np.asarray(config.baseline.target_shares, dtype=float)
    lo = np.array([c.lower_share for c in config.channels])
    hi = np.array([c.upper_share for c in config.channels])
    spare = 1.0 - lo.sum()
    room = hi - lo
    if spare > 0 and room.sum() > 0:
        lo = lo + spare * room / room.sum()
    return lo


class ME2A:
    name = "me2a"

    def __init__(self, config: RunConfig, weights: primal.SlotWeights):
        a = config.allocator
        self.weights = weights
        self.solver = a.solver
        self.horizon = config.horizon
        eta = dual.step_schedule(a.step_c, config.horizon)
        self.state = dual.DualState.zeros(config.n_channels, eta, pacing=a.pacing, update_rule=a.update_rule)

    def decide(self, request: Request, t: int):
        return primal.solve(request, self.state.mu, self.weights, self.solver)

    def observe(self, t: int, g: np.ndarray, ledger: ExposureLedger):
        targets = dual.pacing_targets(self.state.pacing, ledger, t, self.horizon)
        self.state = dual.update(self.state, dual.subgradient(self.state.mu, g, targets))

    @property
    def control(self) -> np.ndarray:
        return self.state.mu


class Fixed:
    name = "fixed"

    def __init__(self, config: RunConfig, weights: primal.SlotWeights):
        self.patterns = baselines.fixed_patterns(target_shares(config), config.n_slots)
        self._zeros = np.zeros(config.n_channels)

    def decide(self, request: Request, t: int):
        return baselines.fixed_allocate(request, self.patterns[(t - 1) % len(self.patterns)])

    def observe(self, t, g, ledger):
        pass

    @property
    def control(self) -> np.ndarray:
        return self._zeros


class WPO:
    name = "wpo"

    def __init__(self, config: RunConfig, weights: primal.SlotWeights):
        b = config.baseline
        self.n_slots = config.n_slots
        self.page_mass = float(np.sum(weights.exposure))
        self.targets = target_shares(config)
        self.betas = baselines.BetaWeights(
            np.full(config.n_channels, b.beta_init), b.kappa, b.beta_lo, b.beta_hi
        )

    def decide(self, request: Request, t: int):
        return baselines.wpo_allocate(request, self.betas, self.n_slots)

    def observe(self, t, g, ledger):
        achieved = ledger.consumed / (t * self.page_mass)
        self.betas = baselines.wpo_feedback(self.betas, achieved, self.targets)

    @property
    def control(self) -> np.ndarray:
        return self.betas.beta


ALLOCATORS = {cls.name: cls for cls in (ME2A, Fixed, WPO)}


# -- streams -------------------------------------------------------------


def build_world(config: RunConfig) -> scorer.SyntheticWorld:
    s = config.scorer
    return scorer.SyntheticWorld.build(
        seed=config.seed,
        channel_bias=s.channel_bias,
        candidates_per_channel=s.candidates_per_channel,
        items_per_channel=s.items_per_channel,
        user_dim=s.user_dim,
        noise_sigma=s.noise_sigma,
    )


def slot_weights(config: RunConfig) -> primal.SlotWeights:
    return primal.SlotWeights.from_model(config.exposure_model(), config.exposure.utility_weights)


def request_stream(config: RunConfig, world: Optional[scorer.SyntheticWorld] = None) -> Iterator[Request]:
    """Requests with estimated utilities; i.i.d. synthetic or replayed from a stream file."""
    if config.stream.mode == "replay":
        recorded = list(read_stream(config.stream.path))
        if len(recorded) < config.horizon:
            raise ValueError(f"stream file has {len(recorded)} requests, horizon is {config.horizon}")
        recorded = recorded[: config.horizon]
        if config.stream.shuffle_seed is not None:
            perm = np.random.default_rng(config.stream.shuffle_seed).permutation(len(recorded))
            recorded = [recorded[i] for i in perm]
        for t, r in enumerate(recorded, 1):
            yield replace(r, t=t)
        return
    world = world or build_world(config)
    for t in range(1, config.horizon + 1):
        r = scorer.draw_request(world, t)
        yield r.with_utilities(scorer.estimate(world, r))


# -- single run ----------------------------------------------------------


def run_stream(
    config: RunConfig,
    requests: Optional[Iterable[Request]] = None,
    benchmark: str = "none",
    keep_requests: bool = False,
) -> RunResult:
    """Run one method over one stream.

    Per period: filter channels that cannot absorb a full page, solve for the
    page, charge the ledger, then let the method update its control state.
    ``benchmark`` is ``none``, ``auto`` (DP when small enough, else a dual
    bound) or ``dp``.
    """
    started = time.perf_counter()
    model = config.exposure_model()
    weights = slot_weights(config)
    ledger = budgets_from_shares(config.channel_specs(), config.horizon, model)
    world = build_world(config) if config.stream.mode == "iid" else None
    if requests is None:
        requests = request_stream(config, world)
    allocator = ALLOCATORS[config.allocator.method](config, weights)
    mass = model.page_mass
    keep = keep_requests or benchmark != "none"
    seen = []
    records = []
    error = None
    for t, req in enumerate(requests, 1):
        if t > config.horizon:
            break
        if keep:
            seen.append(req)
        frozen = ledger.remaining_max < mass
        frozen_ids = np.flatnonzero(frozen).tolist()
        try:
            avail = primal.filter_exhausted(req, ledger, model)
            layout = allocator.decide(avail, t)
        except InfeasibleLayout as exc:
            error = str(exc)
            log.warning("run aborted: %s", error)
            break
        ledger, g = consume(ledger, layout, model)
        truth = avail.realized_utilities[layout.index]
        f = float(weights.utility @ truth)
        if world is not None:
            clicks = int(scorer.realize_feedback(world, layout, avail, model.weights).sum())
        else:
            clicks = 0
        allocator.observe(t, g, ledger)
        records.append(
            StepRecord(
                t=t,
                horizon=config.horizon,
                mu=allocator.control.tolist(),
                g=g.tolist(),
                f=f,
                clicks=clicks,
                items=layout.item_ids.tolist(),
                remaining_max=ledger.remaining_max.tolist(),
                remaining_min=ledger.remaining_min.tolist(),
                frozen=frozen_ids,
            )
        )
    report = report_from_log(records, allocator.name, config.seed, error)
    if benchmark != "none":
        truth_reqs = [r.with_utilities(r.realized_utilities) for r in seen[: len(records)]]
        report = attach_benchmark(report, truth_reqs, config, benchmark)
    report.wallclock_ms = (time.perf_counter() - started) * 1e3
    return RunResult(report, records, seen if keep_requests else None)


def attach_benchmark(report: RunReport, requests: Sequence[Request], config: RunConfig, kind: str = "auto") -> RunReport:
    model = config.exposure_model()
    ledger = budgets_from_shares(config.channel_specs(), len(requests), model)
    weights = slot_weights(config)
    if kind == "dp":
        value = oracle.hindsight_opt_dp(oracle.HindsightInstance(requests, ledger, weights)).value
        return report.with_benchmark("dp", value)
    extra = np.array([report.final_mu, report.mean_mu]) if report.method == "me2a" else None
    name, value = oracle.benchmark(requests, ledger, weights, extra)
    return report.with_benchmark(name, value)


# -- grids ---------------------------------------------------------------


@dataclass
class SweepResult:
    reports: list
    table: dict  # T -> {"eta", "regret", "underspend"}
    regret_slope: float
    underspend_slope: float


def loglog_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Least-squares slope of log y against log x; NaN unless every y is positive."""
    ys = np.asarray(ys, dtype=float)
    if len(ys) < 2 or np.any(~np.isfinite(ys)) or np.any(ys <= 0):
        return float("nan")
    return float(np.polyfit(np.log(np.asarray(xs, dtype=float)), np.log(ys), 1)[0])


def _sweep_job(args):
    config, benchmark = args
    return run_stream(config, benchmark=benchmark).report


def sweep(
    config: RunConfig,
    horizons: Sequence[int],
    seeds: Sequence[int],
    benchmark: str = "none",
    n_jobs: int = 1,
) -> SweepResult:
    """Run every (T, seed) pair with step size c/sqrt(T); fit log-log slopes of the per-T means."""
    jobs = [(config.override(horizon=int(T), seed=int(s)), benchmark) for T in horizons for s in seeds]
    if n_jobs == 1:
        reports = [_sweep_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            reports = list(pool.map(_sweep_job, jobs))
    table = {}
    for T in horizons:
        rs = [r for r in reports if r.horizon == T]
        regrets = [r.regret for r in rs if r.regret is not None]
        table[int(T)] = {
            "eta": dual.step_schedule(config.allocator.step_c, int(T)),
            "regret": float(np.mean(regrets)) if regrets else float("nan"),
            "underspend": float(np.mean([r.underspend for r in rs])),
        }
    ts = list(table)
    return SweepResult(
        reports=reports,
        table=table,
        regret_slope=loglog_slope(ts, [table[T]["regret"] for T in ts]),
        underspend_slope=loglog_slope(ts, [table[T]["underspend"] for T in ts]),
    )


@dataclass
class MethodSummary:
    method: str
    utility: float
    clicks: float
    violation_by_channel: list
    violation_max: float
    lift: Optional[float]
    reports: list


def compare(
    config: RunConfig,
    methods: Sequence[str] = ("me2a", "wpo", "fixed"),
    seeds: Optional[Sequence[int]] = None,
) -> dict:
    """Run each method on the same streams; lift is relative to the fixed baseline when it is included."""
    seeds = [config.seed] if seeds is None else list(seeds)
    out = {}
    for method in methods:
        reports = [
            run_stream(config.override(**{"allocator.method": method, "seed": int(s)})).report for s in seeds
        ]
        viol = np.mean([[c.lower_violation for c in r.completeness] for r in reports], axis=0)
        out[method] = MethodSummary(
            method=method,
            utility=float(np.mean([r.utility for r in reports])),
            clicks=float(np.mean([r.clicks for r in reports])),
            violation_by_channel=viol.tolist(),
            violation_max=float(max(max(c.lower_violation for c in r.completeness) for r in reports)),
            lift=None,
            reports=reports,
        )
    if "fixed" in out:
        base = out["fixed"].utility
        for s in out.values():
            s.lift = s.utility / base - 1.0 if base > 0 else None
    return out

