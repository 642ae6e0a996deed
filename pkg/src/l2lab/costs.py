"""Per-block cost function, analytic cost bound, and compensation accounting.

Units: ``a`` is ETH per waiting transaction per block; ``b0`` and ``b1`` are
gas-unit quantities that get multiplied by the gas price (ETH per gas unit),
so ``(b0 + b1*s) * p`` is ETH.
"""

from __future__ import annotations

from dataclasses import dataclass

from .processes import DemandModel

__all__ = ["CostParams", "stage_cost", "cost_upper_bound", "compensation_owed"]


@dataclass(frozen=True)
class CostParams:
    a: float        # delay penalty per waiting tx per block (ETH)
    b0: float       # fixed posting cost coefficient (gas units)
    b1: float       # marginal posting cost coefficient (gas units per tx)
    gamma: float    # discount factor

    def __post_init__(self):
        if self.a <= 0:
            raise ValueError(f"a must be positive, got {self.a}")
        if self.b0 < 0 or self.b1 < 0:
            raise ValueError("b0 and b1 must be nonnegative")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must be in (0, 1), got {self.gamma}")


def stage_cost(q: int, s: int, p: float, params: CostParams) -> float:
    """Cost of posting s of q queued transactions at gas price p.

    a*(q - s) delay penalty on what keeps waiting, plus (b0 + b1*s)*p
    posting cost charged only when s > 0.
    """
    if s < 0 or s > q:
        raise ValueError(f"need 0 <= s <= q, got s={s}, q={q}")
    if p <= 0:
        raise ValueError(f"price must be positive, got {p}")
    cost = params.a * (q - s)
    if s > 0:
        cost += (params.b0 + params.b1 * s) * p
    return cost


def cost_upper_bound(f: float, params: CostParams, demand: DemandModel, mu: float) -> float:
    """Decreasing linear bound on the expected per-block cost at fee f.

    Posting everything every block costs (b0 + b1*lambda(f))*mu in
    expectation, which no policy chosen to minimize cost should exceed.
    """
    if not 0.0 <= f <= demand.fee_cap:
        raise ValueError(f"fee must be in [0, lambda0/k], got {f}")
    return (params.b0 + params.b1 * demand.lambda0 - params.b1 * demand.k * f) * mu


def compensation_owed(total_delay_blocks: int, params: CostParams) -> float:
    """Refund owed for a period: a per transaction per block of delay.

    total_delay_blocks sums, over all transactions, the number of blocks
    each one waited; equivalently the sum over blocks of the post-posting
    queue length.
    """
    if total_delay_blocks < 0:
        raise ValueError(f"delay must be nonnegative, got {total_delay_blocks}")
    return params.a * total_delay_blocks
