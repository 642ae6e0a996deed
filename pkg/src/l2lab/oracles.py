"""Target-fee oracles: closed-form congestion fee and Monte-Carlo budget fee.

The congestion fee p* is exact: (lambda0 - lambda_bar)/k.  The budget fee
f* has no closed form because the expected per-block cost under the
optimal posting policy is an MDP-dependent stationary average, so it is
estimated by closed-loop simulation (burn-in, batch-means errors) and
root-found by bisection on the expected-PnL sign with common random
numbers across probe fees.  This path is deliberately independent of the
online controller so it can serve as its ground truth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .controller import FeeBounds
from .costs import CostParams
from .engine import PeriodEngine, check_not_pinned, run_blocks_fixed_fee
from .errors import ConditionViolated, InsufficientPeriods, NoSignChange
from .mdp import MdpConfig, MdpSolution, build_price_grid, solve
from .processes import (
    ROLE_ARRIVALS,
    ROLE_PRICE,
    DemandModel,
    PriceModel,
    RngStream,
    arrival_rate,
)

__all__ = [
    "PnlEstimate",
    "SwitchMatrix",
    "ExistenceCheck",
    "FStarResult",
    "RenewalReport",
    "SolutionCache",
    "congestion_fee_closed_form",
    "check_existence_condition",
    "estimate_expected_cost",
    "expected_pnl",
    "pnl_curve",
    "find_budget_balance_fee",
    "renewal_check",
    "stationary_split",
]

REL_GAP_EPSILON = 1e-12  # ETH; keeps rel_gap finite when both sides sit at zero


@dataclass(frozen=True)
class PnlEstimate:
    fee: float
    revenue: float        # lambda(fee) * fee, exact (ETH/block)
    expected_cost: float  # Monte-Carlo estimate (ETH/block)
    pnl: float            # revenue - expected_cost
    std_err: float

    def __post_init__(self):
        if self.std_err < 0:
            raise ValueError("std_err must be nonnegative")


@dataclass(frozen=True)
class SwitchMatrix:
    """Regime-flag transition probabilities at frozen optimal fees.

    Rows index the current regime (0 = congestion, 1 = budget); p01 is the
    probability of moving from congestion to budget, etc.
    """

    p00: float
    p01: float
    p10: float
    p11: float

    def __post_init__(self):
        for name in ("p00", "p01", "p10", "p11"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if abs(self.p00 + self.p01 - 1.0) > 1e-12 or abs(self.p10 + self.p11 - 1.0) > 1e-12:
            raise ValueError("rows must sum to 1")


@dataclass(frozen=True)
class ExistenceCheck:
    holds: bool
    margin: float  # lambda0^2/(4k) - (b0 + b1*lambda0)*mu


@dataclass(frozen=True)
class FStarResult:
    fee: float
    pnl: float
    std_err: float
    probes: int
    bracket: tuple[float, float]


@dataclass(frozen=True)
class RenewalReport:
    lhs: float       # mean per-period X
    rhs: float       # mean period length x mean per-block pnl
    lhs_se: float
    rhs_se: float
    rel_gap: float
    n_periods: int
    mean_tau: float


def congestion_fee_closed_form(demand: DemandModel, lambda_bar: float) -> float:
    """p* = (lambda0 - lambda_bar)/k, valid for lambda_bar in [lambda0/2, lambda0]."""
    if lambda_bar < demand.lambda0 / 2.0:
        raise ConditionViolated(
            f"target rate {lambda_bar} below lambda0/2 = {demand.lambda0 / 2.0}; "
            "the congestion fee would leave the admissible interval"
        )
    if lambda_bar > demand.lambda0:
        raise ConditionViolated(
            f"target rate {lambda_bar} above lambda0 = {demand.lambda0}; "
            "no nonnegative fee can raise arrivals to the target"
        )
    return (demand.lambda0 - lambda_bar) / demand.k


def check_existence_condition(demand: DemandModel, cost: CostParams, mu: float) -> ExistenceCheck:
    """Budget-balance existence: lambda0^2/(4k) >= (b0 + b1*lambda0)*mu."""
    margin = demand.lambda0 ** 2 / (4.0 * demand.k) - (cost.b0 + cost.b1 * demand.lambda0) * mu
    return ExistenceCheck(holds=margin >= 0.0, margin=margin)


class SolutionCache:
    """Memoized MDP solutions keyed by exact fee, warm-started from neighbors."""

    def __init__(self, price_model: PriceModel, demand: DemandModel, cost: CostParams, config: MdpConfig):
        self.grid = build_price_grid(price_model, config)
        self.demand = demand
        self.cost = cost
        self.config = config
        self._solutions: dict[float, MdpSolution] = {}

    def for_fee(self, fee: float) -> MdpSolution:
        sol = self._solutions.get(fee)
        if sol is None:
            warm = None
            if self._solutions:
                nearest = min(self._solutions, key=lambda f: abs(f - fee))
                warm = self._solutions[nearest].value
            sol = solve(self.grid, self.demand, fee, self.cost, self.config, initial_value=warm)
            self._solutions[fee] = sol
        return sol

    def __len__(self) -> int:
        return len(self._solutions)


def estimate_expected_cost(
    fee: float,
    solution: MdpSolution,
    price_model: PriceModel,
    demand: DemandModel,
    cost: CostParams,
    n_blocks: int,
    rng: RngStream,
    n_batches: int = 50,
) -> tuple[float, float]:
    """Time-average stage cost per block under the solved policy at this fee.

    Simulates n_blocks after a burn-in of n_blocks/10 and returns the mean
    with its batch-means standard error.  Passing the same RngStream for
    different fees yields common random numbers: identical price paths and
    monotonically coupled arrival paths.
    """
    if n_blocks < 1:
        raise ValueError("n_blocks must be positive")
    price_gen = rng.substream(ROLE_PRICE).generator()
    arr_gen = rng.substream(ROLE_ARRIVALS).generator()
    burn = n_blocks // 10
    q_cap = solution.policy.shape[0] - 1
    q, p = 0, None
    if burn > 0:
        warmup = run_blocks_fixed_fee(
            fee, solution, price_model, demand, cost, burn, price_gen, arr_gen, q0=0, p0=None,
        )
        check_not_pinned(warmup, q_cap)
        q, p = warmup.end_queue, warmup.end_price
    main = run_blocks_fixed_fee(
        fee, solution, price_model, demand, cost, n_blocks, price_gen, arr_gen,
        q0=q, p0=p, n_batches=n_batches,
    )
    mean = main.total_cost / n_blocks
    if len(main.batch_costs) > 1:
        se = float(np.std(main.batch_costs, ddof=1) / math.sqrt(len(main.batch_costs)))
    else:
        se = 0.0
    return mean, se


def expected_pnl(
    fee: float,
    solution: MdpSolution,
    price_model: PriceModel,
    demand: DemandModel,
    cost: CostParams,
    n_blocks: int,
    rng: RngStream,
    n_batches: int = 50,
) -> PnlEstimate:
    """Expected per-block profit: exact fee revenue minus estimated cost."""
    revenue = arrival_rate(demand, fee) * fee
    mean_cost, se = estimate_expected_cost(
        fee, solution, price_model, demand, cost, n_blocks, rng, n_batches,
    )
    return PnlEstimate(fee=fee, revenue=revenue, expected_cost=mean_cost, pnl=revenue - mean_cost, std_err=se)


def pnl_curve(
    fees: list[float],
    cache: SolutionCache,
    price_model: PriceModel,
    n_blocks: int,
    rng: RngStream,
) -> list[PnlEstimate]:
    """PnL estimates over a fee grid under common random numbers."""
    return [
        expected_pnl(f, cache.for_fee(f), price_model, cache.demand, cache.cost, n_blocks, rng)
        for f in fees
    ]


def find_budget_balance_fee(
    demand: DemandModel,
    cost: CostParams,
    price_model: PriceModel,
    mdp_config: MdpConfig,
    n_blocks: int,
    rng: RngStream,
    fee_tol: float = 1e-8,
    cache: SolutionCache | None = None,
) -> FStarResult:
    """Bisection for the budget-balance fee f* on [0, lambda0/(2k)].

    Probes share one RngStream (common random numbers) and one memoized
    solution cache.  Terminates when either the bracket width drops to
    fee_tol or a probe's pnl sits within one standard error of zero;
    the returned fee is the final bracket midpoint in the former case.
    """
    existence = check_existence_condition(demand, cost, price_model.mu)
    if not existence.holds:
        raise ConditionViolated(
            f"budget-balance existence condition fails: margin {existence.margin:.6e} < 0",
            margin=existence.margin,
        )
    if cache is None:
        cache = SolutionCache(price_model, demand, cost, mdp_config)
    bounds = FeeBounds.from_demand(demand)

    def probe(fee: float) -> PnlEstimate:
        return expected_pnl(fee, cache.for_fee(fee), price_model, demand, cost, n_blocks, rng)

    probes = 0
    lo, hi = bounds.lo, bounds.hi
    est_lo = probe(lo)
    probes += 1
    if est_lo.pnl >= -est_lo.std_err:
        return FStarResult(fee=lo, pnl=est_lo.pnl, std_err=est_lo.std_err, probes=probes, bracket=(lo, lo))
    est_hi = probe(hi)
    probes += 1
    if est_hi.pnl < -3.0 * est_hi.std_err:
        raise NoSignChange(
            f"pnl({hi:.6e}) = {est_hi.pnl:.6e} is negative beyond noise ({est_hi.std_err:.2e})",
            diagnostics={"pnl_lo": est_lo.pnl, "pnl_hi": est_hi.pnl, "std_err_hi": est_hi.std_err},
        )
    if abs(est_hi.pnl) <= est_hi.std_err:
        return FStarResult(fee=hi, pnl=est_hi.pnl, std_err=est_hi.std_err, probes=probes, bracket=(hi, hi))

    while hi - lo > fee_tol:
        mid = 0.5 * (lo + hi)
        est = probe(mid)
        probes += 1
        if abs(est.pnl) <= est.std_err:
            return FStarResult(fee=mid, pnl=est.pnl, std_err=est.std_err, probes=probes, bracket=(lo, hi))
        if est.pnl > 0:
            hi = mid
        else:
            lo = mid
    mid = 0.5 * (lo + hi)
    est = probe(mid)
    probes += 1
    return FStarResult(fee=mid, pnl=est.pnl, std_err=est.std_err, probes=probes, bracket=(lo, hi))


def renewal_check(
    fee: float,
    solution: MdpSolution,
    price_model: PriceModel,
    demand: DemandModel,
    cost: CostParams,
    lambda_bar: float,
    n_blocks: int,
    rng: RngStream,
    tau_max: int = 10_000,
) -> RenewalReport:
    """Check E[X per period] against E[tau] * E[per-block pnl].

    The right-hand side prices revenue at the exact rate lambda(fee) while
    the left-hand side uses observed arrivals, so the two sides are
    estimated from genuinely different statistics of the same trajectory.
    """
    engine = PeriodEngine(price_model, demand, cost, lambda_bar, rng, tau_max=tau_max)
    periods = [s for s in engine.run_periods_until_blocks(fee, solution, n_blocks) if not s.forced]
    if len(periods) < 100:
        raise InsufficientPeriods(f"only {len(periods)} posting periods observed; need at least 100")

    lam_rev = arrival_rate(demand, fee) * fee
    xs = np.array([s.x for s in periods])
    taus = np.array([s.tau for s in periods], dtype=float)
    # per-period cost back out of x: arrivals in a period are (lambda_bar*tau - y)
    arrivals = np.array([lambda_bar * s.tau - s.y for s in periods])
    costs = fee * arrivals - xs
    rhs_terms = lam_rev * taus - costs

    n = len(periods)
    lhs = float(xs.mean())
    rhs = float(rhs_terms.mean())
    lhs_se = float(xs.std(ddof=1) / math.sqrt(n))
    rhs_se = float(rhs_terms.std(ddof=1) / math.sqrt(n))
    rel_gap = abs(lhs - rhs) / (abs(rhs) + REL_GAP_EPSILON)
    return RenewalReport(
        lhs=lhs, rhs=rhs, lhs_se=lhs_se, rhs_se=rhs_se,
        rel_gap=rel_gap, n_periods=n, mean_tau=float(taus.mean()),
    )


def stationary_split(m: SwitchMatrix) -> tuple[float, float]:
    """Long-run regime shares (pi_f, pi_p) of the two-state flag chain.

    With rows indexed from-state and delta = 1 the budget regime, balance
    gives pi_f * p10 = pi_p * p01, hence pi_f = p01/(p01 + p10).
    """
    denom = m.p01 + m.p10
    if denom == 0.0:
        raise ValueError("p01 = p10 = 0: both regimes absorbing, no unique stationary split")
    pi_f = m.p01 / denom
    return pi_f, 1.0 - pi_f
