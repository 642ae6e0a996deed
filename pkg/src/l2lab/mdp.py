"""Posting MDP on a discretized (queue, price) grid.

The queue axis is truncated at ``q_max`` (arrival mass beyond the boundary
lumps into the boundary state) and the price axis is a Tauchen-style grid:
uniformly spaced points spanning ``grid_width_sds`` stationary standard
deviations around the mean, with one-step Gaussian transition mass
integrated over midpoint-bounded cells and tails lumped into the edge
cells.

``solve`` runs policy iteration restricted to the binary action set
{hold, post-everything}; ``bellman_backup_full`` is the independent
full-action oracle used to verify that restriction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.special import ndtr

from .costs import CostParams
from .errors import NonConvergence, ThresholdViolation
from .processes import DemandModel, PriceModel, arrival_rate, stationary_std

__all__ = [
    "PriceGrid",
    "MdpConfig",
    "MdpSolution",
    "build_price_grid",
    "arrival_kernel",
    "solve",
    "extract_thresholds",
    "bellman_backup_full",
    "full_action_table",
]


@dataclass(frozen=True)
class MdpConfig:
    q_max: int = 200            # queue truncation (tx)
    n_price: int = 101          # price grid size
    grid_width_sds: float = 4.0  # half-width in stationary stds
    tol: float = 1e-12          # policy-evaluation sup-norm tolerance (ETH)
    max_iters: int = 200_000    # total sweep budget across the whole solve

    def __post_init__(self):
        if self.q_max < 1:
            raise ValueError(f"q_max must be >= 1, got {self.q_max}")
        if self.n_price < 3:
            raise ValueError(f"n_price must be >= 3, got {self.n_price}")
        if self.tol <= 0:
            raise ValueError(f"tol must be positive, got {self.tol}")


@dataclass(frozen=True)
class PriceGrid:
    points: np.ndarray       # strictly increasing prices, all >= floor
    transition: np.ndarray   # row-stochastic one-step matrix
    iid: bool                # all rows identical (rank-one transitions)
    midpoints: np.ndarray = field(init=False)  # cell boundaries for lookups

    def __post_init__(self):
        object.__setattr__(self, "midpoints", 0.5 * (self.points[1:] + self.points[:-1]))

    @property
    def n(self) -> int:
        return len(self.points)

    def index_of(self, price: float) -> int:
        """Grid cell containing a continuous price."""
        return int(np.searchsorted(self.midpoints, price))

    def indices_of(self, prices: np.ndarray) -> np.ndarray:
        return np.searchsorted(self.midpoints, prices)


def build_price_grid(model: PriceModel, config: MdpConfig) -> PriceGrid:
    """Discretize the price process onto ``config.n_price`` cells."""
    if model.mode == "iid":
        spread = model.iid_std
    elif model.theta > 0.0:
        spread = stationary_std(model)
    elif model.sigma == 0.0:
        spread = 0.0
    else:
        raise ValueError("ar1 with theta = 0 and sigma > 0 has no stationary spread to size the grid")

    width = config.grid_width_sds * spread
    if width == 0.0:
        # zero-variance models get a token width so grid points stay distinct
        width = 1e-9 * model.mu
    lo = max(model.floor, model.mu - width)
    hi = model.mu + width
    if hi <= model.floor:
        raise ValueError(f"degenerate grid: upper bound {hi} <= floor {model.floor}")
    points = np.linspace(lo, hi, config.n_price)
    mids = 0.5 * (points[1:] + points[:-1])

    if model.mode == "iid":
        means = np.full(config.n_price, model.mu)
        sd = model.iid_std
    else:
        means = model.theta * model.mu + (1.0 - model.theta) * points
        sd = model.sigma

    if sd == 0.0:
        rows = np.zeros((config.n_price, config.n_price))
        cells = np.searchsorted(mids, means)
        rows[np.arange(config.n_price), cells] = 1.0
    else:
        z = (mids[None, :] - means[:, None]) / sd
        cdf = ndtr(z)
        rows = np.diff(np.hstack([np.zeros((config.n_price, 1)), cdf, np.ones((config.n_price, 1))]), axis=1)
        rows /= rows.sum(axis=1, keepdims=True)

    return PriceGrid(points=points, transition=rows, iid=(model.mode == "iid"))


_KERNEL_CACHE: dict[tuple[float, int], np.ndarray] = {}


def arrival_kernel(rate: float, q_max: int) -> np.ndarray:
    """M[q0, q'] = P(min(q_max, q0 + A) = q') for A ~ Poisson(rate)."""
    key = (rate, q_max)
    cached = _KERNEL_CACHE.get(key)
    if cached is not None:
        return cached
    pmf = stats.poisson.pmf(np.arange(q_max + 1), rate)
    M = np.zeros((q_max + 1, q_max + 1))
    for q0 in range(q_max + 1):
        span = q_max - q0
        if span > 0:
            M[q0, q0:q_max] = pmf[:span]
        M[q0, q_max] = stats.poisson.sf(span - 1, rate)
    if len(_KERNEL_CACHE) > 512:
        _KERNEL_CACHE.clear()
    _KERNEL_CACHE[key] = M
    return M


@dataclass(frozen=True)
class MdpSolution:
    value: np.ndarray        # J[q, i] (ETH)
    policy: np.ndarray       # bool, True = post everything
    thresholds: np.ndarray   # Q*[i]: largest queue at which holding is optimal
    grid: PriceGrid
    fee: float
    rate: float
    residual: float          # max Bellman residual at convergence
    sweeps: int


def _continuation(J: np.ndarray, grid: PriceGrid, M: np.ndarray) -> np.ndarray:
    """G[q0, i] = E[J(min(q_max, q0 + A), P') | price cell i]."""
    if grid.iid:
        w = J @ grid.transition[0]
        g = M @ w
        return np.repeat(g[:, None], grid.n, axis=1)
    return M @ (J @ grid.transition.T)


def solve(
    price_grid: PriceGrid,
    demand: DemandModel,
    g: float,
    cost: CostParams,
    config: MdpConfig,
    initial_value: np.ndarray | None = None,
) -> MdpSolution:
    """Policy iteration over the binary action set {hold, post-all}.

    Ties between the two actions break toward holding, so the returned
    policy is deterministic and posts as rarely as indifference allows.
    """
    rate = arrival_rate(demand, g)
    M = arrival_kernel(rate, config.q_max)
    n, qmax = price_grid.n, config.q_max
    qs = np.arange(qmax + 1, dtype=float)
    stage_hold = cost.a * qs
    stage_post = (cost.b0 + cost.b1 * qs[:, None]) * price_grid.points[None, :]
    stage_post[0, :] = 0.0  # posting nothing from an empty queue is just holding

    J = np.zeros((qmax + 1, n)) if initial_value is None else initial_value.copy()
    policy = np.zeros((qmax + 1, n), dtype=bool)
    gamma = cost.gamma
    eps_floor = 32.0 * np.finfo(float).eps
    sweeps = 0

    for _round in range(config.max_iters):
        # policy evaluation: iterate the fixed-policy operator to tolerance
        while True:
            G = _continuation(J, price_grid, M)
            J_new = np.where(policy, stage_post + gamma * G[0][None, :], stage_hold[:, None] + gamma * G)
            diff = float(np.max(np.abs(J_new - J)))
            J = J_new
            sweeps += 1
            if not np.isfinite(diff):
                raise NonConvergence("policy evaluation produced non-finite values")
            if diff <= max(config.tol, eps_floor * float(np.max(np.abs(J)))):
                break
            if sweeps >= config.max_iters:
                raise NonConvergence(f"policy evaluation exceeded {config.max_iters} sweeps (diff={diff:.3e})")

        # greedy improvement against the evaluated value function
        G = _continuation(J, price_grid, M)
        hold_val = stage_hold[:, None] + gamma * G
        post_val = stage_post + gamma * G[0][None, :]
        new_policy = post_val < hold_val
        new_policy[0, :] = False
        if np.array_equal(new_policy, policy):
            residual = float(np.max(np.abs(np.minimum(hold_val, post_val) - J)))
            thresholds = _thresholds_from_policy(policy, qmax)
            return MdpSolution(
                value=J, policy=policy, thresholds=thresholds, grid=price_grid,
                fee=g, rate=rate, residual=residual, sweeps=sweeps,
            )
        policy = new_policy

    raise NonConvergence(f"policy not stable after {config.max_iters} iterations")


def _thresholds_from_policy(policy: np.ndarray, q_max: int) -> np.ndarray:
    """Per-column Q*: largest q with hold; validates the single-switch shape."""
    n = policy.shape[1]
    thresholds = np.empty(n, dtype=int)
    for i in range(n):
        col = policy[:, i]
        switches = int(np.sum(col[1:] != col[:-1]))
        if switches > 1 or (switches == 1 and not col[-1]):
            raise ThresholdViolation(f"policy column {i} is not single-switch hold->post", column=i)
        post_idx = np.flatnonzero(col)
        thresholds[i] = q_max if len(post_idx) == 0 else int(post_idx[0]) - 1
    return thresholds


def extract_thresholds(solution: MdpSolution) -> np.ndarray:
    """Q*[i] per price cell; raises ThresholdViolation on non-threshold policies."""
    return _thresholds_from_policy(solution.policy, solution.policy.shape[0] - 1)


def full_action_table(
    solution: MdpSolution,
    price_grid: PriceGrid,
    demand: DemandModel,
    g: float,
    cost: CostParams,
    config: MdpConfig,
) -> tuple[np.ndarray, np.ndarray]:
    """Brute-force one-step backup over every action s in 0..q, every state.

    Returns (best_action, best_value) arrays; ties break toward s = 0.
    Deliberately reuses nothing from the binary-restricted improvement step
    beyond the solved value function itself.
    """
    rate = arrival_rate(demand, g)
    M = arrival_kernel(rate, config.q_max)
    G = _continuation(solution.value, price_grid, M)
    qmax, n = config.q_max, price_grid.n
    best_action = np.zeros((qmax + 1, n), dtype=int)
    best_value = np.empty((qmax + 1, n))
    best_value[0, :] = cost.gamma * G[0, :]
    for q in range(1, qmax + 1):
        s = np.arange(q + 1, dtype=float)
        posting = (cost.b0 + cost.b1 * s) * (s > 0)
        cand = (
            cost.a * (q - s)[:, None]
            + posting[:, None] * price_grid.points[None, :]
            + cost.gamma * G[q::-1, :]
        )
        best_action[q, :] = np.argmin(cand, axis=0)
        best_value[q, :] = np.min(cand, axis=0)
    return best_action, best_value


def bellman_backup_full(
    solution: MdpSolution,
    q: int,
    i: int,
    price_grid: PriceGrid,
    demand: DemandModel,
    g: float,
    cost: CostParams,
    config: MdpConfig,
) -> tuple[int, float]:
    """Full-action Bellman backup at one state (q, price cell i)."""
    actions, values = full_action_table(solution, price_grid, demand, g, cost, config)
    return int(actions[q, i]), float(values[q, i])
