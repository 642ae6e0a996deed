"""Closed-loop block and posting-period simulation core.

Price noise and arrival noise come from separate substreams of one
``RngStream``, so two runs that share a stream see identical price paths
and identical per-block uniforms regardless of the fee being probed.
Arrival counts are produced by exact inverse transform from those
uniforms, which makes paths at different fees monotonically coupled
(common random numbers).

``PeriodEngine`` steps one posting period at a time and carries price and
queue state across periods; ``run_blocks_fixed_fee`` is a leaner bulk loop
for long fixed-fee cost estimates.
"""

from __future__ import annotations

from bisect import bisect_left
from dataclasses import dataclass, field

import numpy as np

from .controller import PeriodStats
from .costs import CostParams
from .errors import DivergingQueue
from .mdp import MdpSolution
from .processes import (
    ROLE_ARRIVALS,
    ROLE_PRICE,
    DemandModel,
    PriceModel,
    RngStream,
    ar1_path,
    arrival_rate,
    iid_path,
    poisson_cdf_table,
)

__all__ = ["PeriodEngine", "BulkResult", "run_blocks_fixed_fee"]

_CHUNK = 8192


class PeriodEngine:
    """Steps posting periods, holding queue/price state between them.

    One engine owns one trajectory: the price path advances exactly once
    per block and survives fee changes, posting decisions follow the
    threshold table of whatever solution is passed per period.
    """

    def __init__(
        self,
        price_model: PriceModel,
        demand: DemandModel,
        cost: CostParams,
        lambda_bar: float,
        rng: RngStream,
        tau_max: int = 10_000,
        q0: int = 0,
        p0: float | None = None,
        chunk: int = _CHUNK,
    ):
        self.price_model = price_model
        self.demand = demand
        self.cost = cost
        self.lambda_bar = lambda_bar
        self.tau_max = tau_max
        self.chunk = chunk
        self.queue = q0
        self.price = price_model.mu if p0 is None else p0
        self._price_gen = rng.substream(ROLE_PRICE).generator()
        self._arr_gen = rng.substream(ROLE_ARRIVALS).generator()
        self._prices: list[float] = []
        self._uniforms: list[float] = []
        self._pos = 0
        self._fee_cache: dict[float, tuple[list[float], int]] = {}
        self._thr_cache: dict[int, tuple[list[float], list[int]]] = {}
        # trajectory-level totals
        self.total_blocks = 0
        self.total_arrivals = 0
        self.total_posted = 0
        self.total_delay = 0
        self.total_cost = 0.0
        self.forced_closes = 0

    def _refill(self):
        zs = self._price_gen.standard_normal(self.chunk)
        if self.price_model.mode == "iid":
            prices = iid_path(self.price_model, zs)
        else:
            prices = ar1_path(self.price_model, self.price, zs)
        self._prices = prices.tolist()
        self._uniforms = self._arr_gen.random(self.chunk).tolist()
        self._pos = 0

    def _arrival_table(self, fee: float) -> tuple[list[float], int]:
        entry = self._fee_cache.get(fee)
        if entry is None:
            cdf = poisson_cdf_table(arrival_rate(self.demand, fee))
            entry = (cdf.tolist(), len(cdf) - 1)
            self._fee_cache[fee] = entry
        return entry

    def _threshold_table(self, solution: MdpSolution) -> tuple[list[float], list[int]]:
        entry = self._thr_cache.get(id(solution))
        if entry is None:
            entry = (solution.grid.midpoints.tolist(), solution.thresholds.tolist())
            self._thr_cache[id(solution)] = entry
        return entry

    def run_period(self, fee: float, solution: MdpSolution) -> PeriodStats:
        """One posting period at the given fee under the solution's thresholds.

        Per block: arrivals join the queue, the price steps, the policy
        posts everything iff queue > Q*(price), the block's stage cost is
        charged (including the posting block's), and X/Y/delay accumulate.
        Ends at the first post, or force-closes at tau_max.
        """
        cdf, max_a = self._arrival_table(fee)
        mids, thrs = self._threshold_table(solution)
        a, b0, b1 = self.cost.a, self.cost.b0, self.cost.b1
        lb = self.lambda_bar
        q = self.queue
        x = 0.0
        y = 0.0
        tau = 0
        delay = 0
        arrivals_sum = 0
        cost_sum = 0.0
        forced = False
        pos = self._pos
        prices = self._prices
        uniforms = self._uniforms
        n_buf = len(prices)
        p = self.price

        while True:
            if pos == n_buf:
                self._pos = pos
                self._refill()
                prices, uniforms, pos, n_buf = self._prices, self._uniforms, 0, self.chunk
            u = uniforms[pos]
            p = prices[pos]
            pos += 1
            arr = bisect_left(cdf, u)
            if arr > max_a:
                arr = max_a
            q += arr
            tau += 1
            arrivals_sum += arr
            if q > thrs[bisect_left(mids, p)]:
                c = (b0 + b1 * q) * p
                x += arr * fee - c
                y += lb - arr
                cost_sum += c
                self.total_posted += q
                q = 0
                break
            c = a * q
            x += arr * fee - c
            y += lb - arr
            cost_sum += c
            delay += q
            if tau == self.tau_max:
                forced = True
                self.forced_closes += 1
                break

        self._pos = pos
        self.queue = q
        self.price = p
        self.total_blocks += tau
        self.total_arrivals += arrivals_sum
        self.total_delay += delay
        self.total_cost += cost_sum
        return PeriodStats(x=x, y=y, tau=tau, delay_blocks=delay, forced=forced)

    def run_periods(self, fee: float, solution: MdpSolution, n_periods: int) -> list[PeriodStats]:
        return [self.run_period(fee, solution) for _ in range(n_periods)]

    def run_periods_until_blocks(self, fee: float, solution: MdpSolution, n_blocks: int) -> list[PeriodStats]:
        """Complete periods until at least n_blocks have elapsed."""
        start = self.total_blocks
        out = []
        while self.total_blocks - start < n_blocks:
            out.append(self.run_period(fee, solution))
        return out


@dataclass
class BulkResult:
    blocks: int
    total_cost: float
    total_arrivals: int
    total_posted: int
    total_delay: int
    n_posts: int
    end_queue: int
    end_price: float
    batch_costs: np.ndarray = field(default_factory=lambda: np.empty(0))
    blocks_over_cap: int = 0


def run_blocks_fixed_fee(
    fee: float,
    solution: MdpSolution,
    price_model: PriceModel,
    demand: DemandModel,
    cost: CostParams,
    n_blocks: int,
    price_gen: np.random.Generator,
    arr_gen: np.random.Generator,
    q0: int = 0,
    p0: float | None = None,
    n_batches: int = 0,
) -> BulkResult:
    """Fixed-fee closed loop over n_blocks; optionally batch the per-block costs.

    With n_batches > 0, per-block costs are summed into n_batches equal
    contiguous batches (the remainder folds into the last one) for
    batch-means standard errors.
    """
    cdf = poisson_cdf_table(arrival_rate(demand, fee))
    max_a = len(cdf) - 1
    grid = solution.grid
    thr_arr = solution.thresholds
    a, b0, b1 = cost.a, cost.b0, cost.b1
    q_cap = solution.policy.shape[0] - 1

    q = q0
    p = price_model.mu if p0 is None else p0
    total_cost = 0.0
    total_arr = 0
    total_posted = 0
    total_delay = 0
    n_posts = 0
    over_cap = 0
    n_batches = min(n_batches, n_blocks)
    batch_len = (n_blocks // n_batches) if n_batches > 0 else 0
    batch_costs = [0.0] * n_batches if n_batches > 0 else []
    done = 0

    while done < n_blocks:
        m = min(_CHUNK, n_blocks - done)
        us = arr_gen.random(m)
        arrs = np.minimum(np.searchsorted(cdf, us, side="left"), max_a).tolist()
        zs = price_gen.standard_normal(m)
        if price_model.mode == "iid":
            prices = iid_path(price_model, zs)
        else:
            prices = ar1_path(price_model, p, zs)
        thrs = thr_arr[grid.indices_of(prices)].tolist()
        price_list = prices.tolist()

        for t in range(m):
            arr = arrs[t]
            pt = price_list[t]
            q += arr
            if q > thrs[t]:
                c = (b0 + b1 * q) * pt
                total_posted += q
                n_posts += 1
                q = 0
            else:
                c = a * q
                total_delay += q
                if q >= q_cap:
                    over_cap += 1
            total_cost += c
            total_arr += arr
            if batch_len:
                b = (done + t) // batch_len
                if b >= n_batches:
                    b = n_batches - 1
                batch_costs[b] += c
        p = price_list[-1]
        done += m

    if n_batches > 0:
        sizes = np.full(n_batches, batch_len, dtype=float)
        sizes[-1] = n_blocks - batch_len * (n_batches - 1)
        batches = np.asarray(batch_costs) / sizes
    else:
        batches = np.empty(0)
    return BulkResult(
        blocks=n_blocks, total_cost=total_cost, total_arrivals=total_arr,
        total_posted=total_posted, total_delay=total_delay, n_posts=n_posts,
        end_queue=q, end_price=p, batch_costs=batches, blocks_over_cap=over_cap,
    )


def check_not_pinned(result: BulkResult, q_cap: int):
    """Raise when a burn-in run spent essentially all blocks above the queue cap."""
    if result.blocks > 0 and result.blocks_over_cap >= 0.9 * result.blocks:
        raise DivergingQueue(
            f"queue pinned at truncation boundary {q_cap} for "
            f"{result.blocks_over_cap}/{result.blocks} burn-in blocks"
        )
