"""Closed-loop experiment orchestration.

Wires the price process, arrivals, threshold posting policy, and the fee
controller into reproducible scenario runs; estimates the regime switch
matrix at frozen fees; sweeps the batch size kappa.

Fees visited by the controller are quantized onto a lattice for MDP
lookup only (the controller itself keeps its continuous fee), so the
expensive solves are memoized and shared across replicas.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .controller import (
    ControllerState,
    PeriodStats,
    StepSchedule,
    make_controller,
    select_next,
    update_budget_fee,
    update_congestion_fee,
)
from .costs import CostParams
from .engine import PeriodEngine
from .errors import ConditionViolated
from .mdp import MdpConfig, MdpSolution
from .oracles import SolutionCache, SwitchMatrix, stationary_split
from .processes import DemandModel, PriceModel, PriceState, RngStream

__all__ = [
    "ScenarioConfig",
    "Trajectory",
    "SCENARIO_NAMES",
    "scenario_variant",
    "run_posting_period",
    "run_scenario",
    "estimate_switch_matrix",
    "kappa_sweep",
]

SCENARIO_NAMES = {
    "iid-dec": ("iid", "decreasing"),
    "iid-const": ("iid", "constant"),
    "ar1-dec": ("ar1", "decreasing"),
    "ar1-const": ("ar1", "constant"),
}

TRAJECTORY_COLUMNS = [
    "update_index", "block_index", "delta", "g", "f_last", "p_last",
    "x_obs", "y_obs", "tau", "i", "j", "i_frac", "j_frac",
]


@dataclass(frozen=True)
class ScenarioConfig:
    price: PriceModel
    demand: DemandModel
    cost: CostParams
    mdp: MdpConfig
    step_kind: str = "decreasing"
    step_f: float = 2e-3
    step_p: float = 2.5e-7
    kappa: int = 1
    lambda_bar: float = 120.0
    horizon_updates: int = 50_000
    seed: int = 20260810
    replicas: int = 10
    tau_max: int = 10_000
    regime: str = "adaptive"   # 'adaptive', 'congestion', or 'budget'
    fee_lattice: int = 256

    def __post_init__(self):
        if self.horizon_updates < 1:
            raise ValueError("horizon_updates must be >= 1")
        if self.replicas < 1:
            raise ValueError("replicas must be >= 1")
        if self.kappa < 1:
            raise ValueError("kappa must be >= 1")
        if self.regime not in ("adaptive", "congestion", "budget"):
            raise ValueError(f"unknown regime {self.regime!r}")
        lam0 = self.demand.lambda0
        if not lam0 / 2.0 <= self.lambda_bar <= lam0:
            warnings.warn(
                f"lambda_bar={self.lambda_bar} outside [lambda0/2, lambda0] = "
                f"[{lam0 / 2.0}, {lam0}]; the congestion fee has no admissible root",
                stacklevel=2,
            )

    @property
    def price_mode(self) -> str:
        return self.price.mode


def scenario_variant(name: str, base: ScenarioConfig) -> ScenarioConfig:
    """Resolve one of the four named scenarios from a base configuration."""
    if name not in SCENARIO_NAMES:
        raise ValueError(f"unknown scenario {name!r}; valid: {', '.join(sorted(SCENARIO_NAMES))}")
    mode, step_kind = SCENARIO_NAMES[name]
    return replace(base, price=replace(base.price, mode=mode), step_kind=step_kind)


@dataclass
class Trajectory:
    """Per-update records plus the replica summary."""

    replica: int
    seed: int
    columns: list[str]
    records: list[tuple]
    final_f: float
    final_p: float
    i_frac: float
    j_frac: float
    mean_queue: float
    total_compensation: float
    # conservation / diagnostic counters (not part of the summary CSV schema)
    total_arrivals: int = 0
    total_posted: int = 0
    final_queue: int = 0
    total_blocks: int = 0
    forced_closes: int = 0

    def column(self, name: str) -> np.ndarray:
        return np.asarray([rec[self.columns.index(name)] for rec in self.records])


def run_posting_period(
    fee: float,
    solution: MdpSolution,
    price_state: PriceState,
    rng: RngStream,
    price_model: PriceModel,
    demand: DemandModel,
    cost: CostParams,
    lambda_bar: float,
    queue: int = 0,
    tau_max: int = 10_000,
) -> tuple[PeriodStats, tuple[int, PriceState]]:
    """One posting period from the given state; returns stats and end state.

    One-shot convenience around PeriodEngine; loops that run many periods
    should hold a PeriodEngine so price and queue state carry across.
    """
    engine = PeriodEngine(
        price_model, demand, cost, lambda_bar, rng,
        tau_max=tau_max, q0=queue, p0=price_state.p,
    )
    stats = engine.run_period(fee, solution)
    return stats, (engine.queue, PriceState(engine.price))


class _Lattice:
    """Fee quantizer for MDP lookups."""

    def __init__(self, hi: float, points: int):
        self.hi = hi
        self.n = points

    def snap(self, fee: float) -> float:
        idx = round(fee / self.hi * (self.n - 1))
        idx = min(self.n - 1, max(0, idx))
        return idx * self.hi / (self.n - 1)


def _run_replica(cfg: ScenarioConfig, replica: int, cache: SolutionCache) -> Trajectory:
    rng = RngStream(cfg.seed).substream(replica)
    engine = PeriodEngine(
        cfg.price, cfg.demand, cfg.cost, cfg.lambda_bar, rng, tau_max=cfg.tau_max,
    )
    ctrl = make_controller(
        cfg.demand,
        StepSchedule(cfg.step_kind, cfg.step_f),
        StepSchedule(cfg.step_kind, cfg.step_p),
        kappa=cfg.kappa,
    )
    if cfg.regime == "congestion":
        ctrl.delta = 0
    lattice = _Lattice(ctrl.bounds.hi, cfg.fee_lattice)
    records = []

    for t in range(cfg.horizon_updates):
        fee = ctrl.g
        solution = cache.for_fee(lattice.snap(fee))
        batch = [engine.run_period(fee, solution) for _ in range(cfg.kappa)]
        x_obs = sum(s.x for s in batch) / cfg.kappa
        y_obs = sum(s.y for s in batch) / cfg.kappa
        tau_batch = sum(s.tau for s in batch)

        if cfg.regime == "adaptive":
            delta_applied, _ = select_next(ctrl, batch)
        elif cfg.regime == "congestion":
            ctrl.p_last = ctrl.g
            ctrl.y_last = y_obs
            update_congestion_fee(ctrl, y_obs)
            delta_applied = 0
        else:  # budget-only
            ctrl.f_last = ctrl.g
            ctrl.x_last = x_obs
            update_budget_fee(ctrl, x_obs)
            delta_applied = 1

        total = ctrl.i + ctrl.j
        records.append((
            t, engine.total_blocks, delta_applied, ctrl.g, ctrl.f_last, ctrl.p_last,
            x_obs, y_obs, tau_batch, ctrl.i, ctrl.j, ctrl.i / total, ctrl.j / total,
        ))

    blocks = max(1, engine.total_blocks)
    return Trajectory(
        replica=replica,
        seed=cfg.seed,
        columns=list(TRAJECTORY_COLUMNS),
        records=records,
        final_f=ctrl.f_last,
        final_p=ctrl.p_last,
        i_frac=ctrl.i / (ctrl.i + ctrl.j),
        j_frac=ctrl.j / (ctrl.i + ctrl.j),
        mean_queue=engine.total_delay / blocks,
        total_compensation=cfg.cost.a * engine.total_delay,
        total_arrivals=engine.total_arrivals,
        total_posted=engine.total_posted,
        final_queue=engine.queue,
        total_blocks=engine.total_blocks,
        forced_closes=engine.forced_closes,
    )


def run_scenario(cfg: ScenarioConfig, cache: SolutionCache | None = None) -> list[Trajectory]:
    """Full closed loop for every replica; deterministic per (seed, replica).

    Replicas run sequentially and share one immutable solution cache, so
    each lattice fee is solved at most once per scenario.
    """
    if cache is None:
        cache = SolutionCache(cfg.price, cfg.demand, cfg.cost, cfg.mdp)
    return [_run_replica(cfg, r, cache) for r in range(cfg.replicas)]


def estimate_switch_matrix(
    fee_f: float,
    fee_p: float,
    cfg: ScenarioConfig,
    n_batches: int,
    kappa: int,
    rng: RngStream,
    cache: SolutionCache | None = None,
) -> SwitchMatrix:
    """Regime-flag transition probabilities with fees frozen at (f*, p*).

    At the budget fee the flag stays 1 iff the batch Y sum is nonnegative;
    at the congestion fee it stays 0 iff the batch X sum is nonnegative.
    """
    if cache is None:
        cache = SolutionCache(cfg.price, cfg.demand, cfg.cost, cfg.mdp)

    def batch_fracs(fee: float, stream_role: int) -> tuple[float, float]:
        solution = cache.for_fee(fee)
        engine = PeriodEngine(
            cfg.price, cfg.demand, cfg.cost, cfg.lambda_bar,
            rng.substream(stream_role), tau_max=cfg.tau_max,
        )
        y_nonneg = 0
        x_nonneg = 0
        for _ in range(n_batches):
            batch = engine.run_periods(fee, solution, kappa)
            if sum(s.y for s in batch) >= 0:
                y_nonneg += 1
            if sum(s.x for s in batch) >= 0:
                x_nonneg += 1
        return y_nonneg / n_batches, x_nonneg / n_batches

    p11, _ = batch_fracs(fee_f, 0)
    _, p00 = batch_fracs(fee_p, 1)
    return SwitchMatrix(p00=p00, p01=1.0 - p00, p10=1.0 - p11, p11=p11)


def kappa_sweep(
    fee_f: float,
    fee_p: float,
    cfg: ScenarioConfig,
    kappas: list[int],
    n_batches: int,
    rng: RngStream,
    separation_tol: float = 1e-7,
    cache: SolutionCache | None = None,
) -> list[tuple[int, float]]:
    """Minority regime share from the stationary split, per batch size kappa."""
    if abs(fee_f - fee_p) <= separation_tol:
        raise ConditionViolated(
            f"|f* - p*| = {abs(fee_f - fee_p):.3e} within tolerance {separation_tol:.0e}; "
            "the sweep needs separated target fees"
        )
    if cache is None:
        cache = SolutionCache(cfg.price, cfg.demand, cfg.cost, cfg.mdp)
    out = []
    for idx, kappa in enumerate(kappas):
        m = estimate_switch_matrix(fee_f, fee_p, cfg, n_batches, kappa, rng.substream(idx), cache=cache)
        pi_f, pi_p = stationary_split(m)
        out.append((kappa, min(pi_f, pi_p)))
    return out
