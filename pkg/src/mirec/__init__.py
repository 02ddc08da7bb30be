"""Two-layer online exposure allocation for multi-channel recommendation pages.

The allocation layer keeps one signed price per channel and updates it by
mirror descent so that cumulative exposure stays between per-channel lower and
upper budgets; the page layer picks the slot assignment that maximises utility
minus priced exposure for each request.
"""

from .domain import (
    Candidate,
    ChannelSpec,
    ExposureLedger,
    ExposureModel,
    InfeasibleLayout,
    OverdraftError,
    PageLayout,
    Request,
    budgets_from_shares,
    completeness,
    consume,
    validate_layout,
)
from .dual import DualState, PacingTargets, empirical_dual, step_schedule, subgradient, update
from .primal import SlotWeights, brute_force_layout, layout_value, solve, solve_assignment, solve_separable

__version__ = "0.1.0"
