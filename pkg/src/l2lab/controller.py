"""Online fee machinery: per-period accumulators, projected updates, regimes.

The controller keeps two fee sequences: the budget-balance fee (driven by
the per-period PnL accumulator X) and the congestion fee (driven by the
target-minus-arrivals accumulator Y).  A regime flag ``delta`` records
which rule produced the active fee; the selection mechanism switches
regimes on the sign of the opposite accumulator, updating each sequence
from the observation recorded the last time that regime's fee was active.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .processes import DemandModel

__all__ = [
    "FeeBounds",
    "StepSchedule",
    "PeriodStats",
    "ControllerState",
    "project",
    "step_size",
    "accumulate_block",
    "update_budget_fee",
    "update_congestion_fee",
    "select_next",
    "make_controller",
]


@dataclass(frozen=True)
class FeeBounds:
    """All controller fees and oracle searches live in [lo, hi]."""

    lo: float
    hi: float

    def __post_init__(self):
        if not 0.0 <= self.lo < self.hi:
            raise ValueError(f"need 0 <= lo < hi, got [{self.lo}, {self.hi}]")

    @classmethod
    def from_demand(cls, demand: DemandModel) -> "FeeBounds":
        return cls(0.0, demand.lambda0 / (2.0 * demand.k))


@dataclass(frozen=True)
class StepSchedule:
    kind: str    # 'constant' or 'decreasing'
    base: float

    def __post_init__(self):
        if self.kind not in ("constant", "decreasing"):
            raise ValueError(f"kind must be 'constant' or 'decreasing', got {self.kind!r}")
        if self.base <= 0:
            raise ValueError(f"base must be positive, got {self.base}")


def step_size(schedule: StepSchedule, n: int) -> float:
    """Magnitude of the n-th update of a regime (n starts at 0)."""
    if n < 0:
        raise ValueError(f"update count must be nonnegative, got {n}")
    if schedule.kind == "constant":
        return schedule.base
    return schedule.base / (n + 1)


def project(x: float, bounds: FeeBounds) -> float:
    """Clamp a fee candidate onto the admissible interval."""
    return min(bounds.hi, max(bounds.lo, x))


@dataclass
class PeriodStats:
    """Accumulators over one posting period."""

    x: float = 0.0            # cumulative PnL (ETH)
    y: float = 0.0            # cumulative target-minus-arrivals (tx)
    tau: int = 0              # period length (blocks)
    delay_blocks: int = 0     # total tx-blocks of waiting
    forced: bool = False      # closed at tau_max without a post


def accumulate_block(
    stats: PeriodStats,
    arrivals: int,
    fee: float,
    block_cost: float,
    lambda_bar: float,
    queue_after_post: int,
) -> PeriodStats:
    """Fold one block into the period accumulators (mutates and returns stats).

    queue_after_post is the number of transactions still waiting once this
    block's posting decision has been applied; it drives delay accounting.
    """
    stats.x += arrivals * fee - block_cost
    stats.y += lambda_bar - arrivals
    stats.tau += 1
    stats.delay_blocks += queue_after_post
    return stats


@dataclass
class ControllerState:
    g: float                  # active fee (ETH/tx)
    delta: int                # 1 = budget-balance regime, 0 = congestion
    f_last: float             # budget fee iterate (fee at the last budget-regime period)
    p_last: float             # congestion fee iterate
    x_last: float             # mean per-posting X recorded at the last budget-regime period
    y_last: float             # mean per-posting Y recorded at the last congestion-regime period
    i: int                    # budget updates taken
    j: int                    # congestion updates taken
    kappa: int                # posting periods observed per update
    bounds: FeeBounds
    step_f: StepSchedule
    step_p: StepSchedule

    def __post_init__(self):
        if self.kappa < 1:
            raise ValueError(f"kappa must be >= 1, got {self.kappa}")
        if self.delta not in (0, 1):
            raise ValueError(f"delta must be 0 or 1, got {self.delta}")


def make_controller(
    demand: DemandModel,
    step_f: StepSchedule,
    step_p: StepSchedule,
    kappa: int = 1,
) -> ControllerState:
    """Fresh controller: midpoint fee, budget regime, zero bootstrap observations.

    Until a regime has been observed once, its stored observation is 0, so
    the first update of that regime is a no-op move from the initial fee.
    """
    bounds = FeeBounds.from_demand(demand)
    g0 = 0.5 * (bounds.lo + bounds.hi)
    return ControllerState(
        g=g0, delta=1, f_last=g0, p_last=g0, x_last=0.0, y_last=0.0,
        i=0, j=0, kappa=kappa, bounds=bounds, step_f=step_f, step_p=step_p,
    )


def update_budget_fee(state: ControllerState, x_obs: float) -> float:
    """Projected budget update from the stored budget iterate; increments i."""
    fee = project(state.f_last - step_size(state.step_f, state.i) * x_obs, state.bounds)
    state.i += 1
    state.f_last = fee
    state.g = fee
    return fee


def update_congestion_fee(state: ControllerState, y_obs: float) -> float:
    """Projected congestion update from the stored congestion iterate; increments j."""
    fee = project(state.p_last - step_size(state.step_p, state.j) * y_obs, state.bounds)
    state.j += 1
    state.p_last = fee
    state.g = fee
    return fee


def select_next(state: ControllerState, batch: list[PeriodStats]) -> tuple[int, float]:
    """Adaptive regime decision from a batch of kappa periods run at fee state.g.

    The batch refreshes the active regime's iterate and observation first
    (the active fee is, by definition, the last time that regime's fee was
    live); the sign test then either keeps the regime and updates it from
    the fresh observation, or switches and updates the other sequence from
    its stored one.
    """
    if len(batch) != state.kappa:
        raise ValueError(f"batch must contain exactly kappa={state.kappa} periods, got {len(batch)}")
    xsum = sum(s.x for s in batch)
    ysum = sum(s.y for s in batch)

    if state.delta == 1:
        state.f_last = state.g
        state.x_last = xsum / state.kappa
        if ysum < 0:
            delta_next = 0
            fee = update_congestion_fee(state, state.y_last)
        else:
            delta_next = 1
            fee = update_budget_fee(state, state.x_last)
    else:
        state.p_last = state.g
        state.y_last = ysum / state.kappa
        if xsum < 0:
            delta_next = 1
            fee = update_budget_fee(state, state.x_last)
        else:
            delta_next = 0
            fee = update_congestion_fee(state, state.y_last)

    state.delta = delta_next
    return delta_next, fee
