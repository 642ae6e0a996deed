"""Gas-price paths and fee-dependent Poisson transaction arrivals.

Two price modes are supported: a mean-reverting AR(1) recursion
``P' = theta*mu + (1-theta)*P + sigma*omega`` and an i.i.d. normal draw
``Normal(mu, iid_std^2)``.  Every emitted price is clamped below at
``floor`` so posting costs stay strictly positive.

Arrivals follow ``Poisson(lambda(g))`` with the linear demand curve
``lambda(g) = max(0, lambda0 - k*g)``.  Sampling is exact inverse-transform
from a cached cdf table, which makes common-random-number coupling across
fees monotone: a single uniform per block maps to arrival counts that are
nonincreasing in the fee.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "PriceModel",
    "PriceState",
    "DemandModel",
    "RngStream",
    "step_price_ar1",
    "sample_price_iid",
    "stationary_std",
    "arrival_rate",
    "sample_arrivals",
    "poisson_cdf_table",
    "ar1_path",
    "iid_path",
]

# Substream ids are derived as parent_id * 64 + (role + 1), so any tree of
# depth <= 2 with < 63 roles per node is collision-free.  Fixed convention:
SUBSTREAM_FANOUT = 64
ROLE_PRICE = 0
ROLE_ARRIVALS = 1
ROLE_AUX = 2


@dataclass(frozen=True)
class RngStream:
    """Deterministic, platform-stable random stream.

    Identical ``(seed, stream_id)`` pairs yield bit-identical draw
    sequences (PCG64 seeded from ``SeedSequence((seed, stream_id))``).
    """

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence((self.seed, self.stream_id)))

    def substream(self, role: int) -> "RngStream":
        if not 0 <= role < SUBSTREAM_FANOUT - 1:
            raise ValueError(f"substream role must be in [0, {SUBSTREAM_FANOUT - 2}], got {role}")
        return RngStream(self.seed, self.stream_id * SUBSTREAM_FANOUT + role + 1)


@dataclass(frozen=True)
class PriceModel:
    """Parameters of the L1 gas-price process (ETH per gas unit)."""

    mode: str  # 'ar1' or 'iid'
    mu: float
    theta: float = 0.0
    sigma: float = 0.0
    iid_std: float = 0.0
    floor: float = 0.0  # defaults to mu/100 when left at 0

    def __post_init__(self):
        if self.mode not in ("ar1", "iid"):
            raise ValueError(f"mode must be 'ar1' or 'iid', got {self.mode!r}")
        if self.floor == 0.0:
            object.__setattr__(self, "floor", self.mu / 100.0)
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError(f"theta must be in [0, 1], got {self.theta}")
        if self.sigma < 0 or self.iid_std < 0:
            raise ValueError("sigma and iid_std must be nonnegative")
        if not self.mu > self.floor > 0:
            raise ValueError(f"need mu > floor > 0, got mu={self.mu}, floor={self.floor}")

    def noise_std(self) -> float:
        """Std of the stationary price distribution for the active mode."""
        if self.mode == "iid":
            return self.iid_std
        if self.theta == 0.0:
            return 0.0 if self.sigma == 0.0 else math.nan
        return stationary_std(self)


@dataclass(frozen=True)
class PriceState:
    """Current L1 gas price (ETH per gas unit)."""

    p: float


@dataclass(frozen=True)
class DemandModel:
    """Linear fee-elastic arrival model: lambda(g) = max(0, lambda0 - k*g)."""

    lambda0: float  # max arrival rate (tx per L1 block)
    k: float        # fee sensitivity (tx per block per ETH)

    def __post_init__(self):
        if self.lambda0 <= 0:
            raise ValueError(f"lambda0 must be positive, got {self.lambda0}")
        if self.k <= 0:
            raise ValueError(f"k must be positive, got {self.k}")

    @property
    def fee_cap(self) -> float:
        """Fee above which no transactions arrive."""
        return self.lambda0 / self.k


def step_price_ar1(state: PriceState, model: PriceModel, omega: float) -> PriceState:
    """One AR(1) step given a standard-normal draw, clamped at the floor."""
    if model.mode != "ar1":
        raise ValueError(f"step_price_ar1 requires mode 'ar1', got {model.mode!r}")
    nxt = model.theta * model.mu + (1.0 - model.theta) * state.p + model.sigma * omega
    return PriceState(max(model.floor, nxt))


def sample_price_iid(model: PriceModel, rng: RngStream | np.random.Generator) -> PriceState:
    """Draw from Normal(mu, iid_std^2), clamped at the floor."""
    if model.mode != "iid":
        raise ValueError(f"sample_price_iid requires mode 'iid', got {model.mode!r}")
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    draw = model.mu + model.iid_std * gen.standard_normal()
    return PriceState(max(model.floor, draw))


def stationary_std(model: PriceModel) -> float:
    """Stationary std of the AR(1) recursion: sigma / sqrt(theta*(2-theta))."""
    if model.mode != "ar1":
        raise ValueError("stationary_std is defined for ar1 mode only")
    if model.theta == 0.0:
        raise ValueError("theta = 0 has no stationary distribution")
    return model.sigma / math.sqrt(model.theta * (2.0 - model.theta))


def arrival_rate(model: DemandModel, g: float) -> float:
    """Expected arrivals per block at fee g."""
    if g < 0:
        raise ValueError(f"fee must be nonnegative, got {g}")
    return max(0.0, model.lambda0 - model.k * g)


# cdf tables keyed by rate; tables extend until the tail mass is < 1e-15.
_CDF_CACHE: dict[float, np.ndarray] = {}
_CDF_CACHE_MAX = 4096


def poisson_cdf_table(rate: float) -> np.ndarray:
    """Cumulative Poisson probabilities P(A <= k) for k = 0..K.

    K is the smallest index with tail mass below 1e-15, so inverse-transform
    lookups never truncate meaningful probability.
    """
    if rate < 0:
        raise ValueError(f"rate must be nonnegative, got {rate}")
    tab = _CDF_CACHE.get(rate)
    if tab is not None:
        return tab
    if rate == 0.0:
        tab = np.array([1.0])
    else:
        terms = [math.exp(-rate)]
        k = 0
        total = terms[0]
        kmax = int(rate + 12.0 * math.sqrt(rate) + 30)
        while total < 1.0 - 1e-15 and k < kmax:
            k += 1
            terms.append(terms[-1] * rate / k)
            total += terms[-1]
        tab = np.cumsum(terms)
        tab[-1] = max(tab[-1], 1.0)
    if len(_CDF_CACHE) >= _CDF_CACHE_MAX:
        _CDF_CACHE.clear()
    _CDF_CACHE[rate] = tab
    return tab


def arrivals_from_uniforms(rate: float, uniforms: np.ndarray) -> np.ndarray:
    """Exact inverse-transform Poisson counts from uniform draws."""
    cdf = poisson_cdf_table(rate)
    counts = np.searchsorted(cdf, uniforms, side="left")
    return np.minimum(counts, len(cdf) - 1)


def sample_arrivals(model: DemandModel, g: float, rng: RngStream | np.random.Generator) -> int:
    """One Poisson(lambda(g)) draw by exact inverse transform."""
    rate = arrival_rate(model, g)
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    u = gen.random()
    return int(arrivals_from_uniforms(rate, np.asarray([u]))[0])


def ar1_path(model: PriceModel, p0: float, omegas: np.ndarray) -> np.ndarray:
    """AR(1) price path of len(omegas) steps starting after p0, floor-clamped."""
    th, mu, sg, floor = model.theta, model.mu, model.sigma, model.floor
    keep = 1.0 - th
    drift = th * mu
    out = np.empty(len(omegas))
    p = p0
    ws = omegas.tolist()
    for i, w in enumerate(ws):
        p = drift + keep * p + sg * w
        if p < floor:
            p = floor
        out[i] = p
    return out


def iid_path(model: PriceModel, normals: np.ndarray) -> np.ndarray:
    """I.i.d. price path, floor-clamped."""
    return np.maximum(model.floor, model.mu + model.iid_std * normals)
