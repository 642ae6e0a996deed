"""Sectioned key-value configuration with documented defaults.

Configs are INI files with sections [price], [demand], [cost], [mdp],
[controller], [sim].  Unknown sections or keys are hard errors; missing
keys fall back to the defaults below.  Every run writes its fully
resolved configuration next to its outputs so it can be replayed.
"""

from __future__ import annotations

import configparser
from pathlib import Path

from .costs import CostParams
from .mdp import MdpConfig
from .processes import DemandModel, PriceModel
from .simulator import ScenarioConfig
from .errors import ConfigError

__all__ = ["DEFAULTS", "resolve_config", "write_resolved", "default_scenario"]

# Price and demand values follow the calibration used throughout; cost and
# controller values are repo defaults chosen so the budget-balance fee
# exists with a comfortable margin and posting is neither always nor never
# optimal (see README "Parameter defaults").
DEFAULTS: dict[str, dict[str, object]] = {
    "price": {
        "mode": "ar1",
        "mu": 3.86e-8,
        "theta": 0.1,
        "sigma": 8.41e-9,
        "iid_std": 1.93e-8,
    },
    "demand": {
        "lambda0": 180.0,
        "k": 1.67e6,
    },
    "cost": {
        "a": 1e-7,
        "b0": 1000.0,
        "b1": 500.0,
        "gamma": 0.95,
    },
    "mdp": {
        "q_max": 200,
        "n_price": 101,
        "grid_width_sds": 4.0,
        "tol": 1e-12,
        "max_iters": 200_000,
    },
    "controller": {
        "step_kind": "decreasing",
        "step_f": 2e-3,
        "step_p": 2.5e-7,
        "kappa": 1,
        "lambda_bar": 120.0,
    },
    "sim": {
        "horizon_updates": 50_000,
        "seed": 20260810,
        "replicas": 10,
    },
}

_INT_KEYS = {"q_max", "n_price", "max_iters", "kappa", "horizon_updates", "seed", "replicas"}
_STR_KEYS = {"mode", "step_kind"}


def _coerce(section: str, key: str, raw: str):
    if key in _STR_KEYS:
        return raw.strip()
    try:
        if key in _INT_KEYS:
            return int(raw)
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r}") from exc


def _read_sections(path: str | Path) -> dict[str, dict[str, object]]:
    parser = configparser.ConfigParser()
    parser.optionxform = str  # keep key case as written
    found = parser.read(str(path))
    if not found:
        raise ConfigError(f"config file not found: {path}")
    merged: dict[str, dict[str, object]] = {s: dict(v) for s, v in DEFAULTS.items()}
    for section in parser.sections():
        if section not in DEFAULTS:
            raise ConfigError(f"unknown config section [{section}]")
        for key, raw in parser[section].items():
            if key not in DEFAULTS[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            merged[section][key] = _coerce(section, key, raw)
    return merged


def _build(merged: dict[str, dict[str, object]]) -> ScenarioConfig:
    p = merged["price"]
    price = PriceModel(
        mode=str(p["mode"]), mu=float(p["mu"]), theta=float(p["theta"]),
        sigma=float(p["sigma"]), iid_std=float(p["iid_std"]),
    )
    d = merged["demand"]
    demand = DemandModel(lambda0=float(d["lambda0"]), k=float(d["k"]))
    c = merged["cost"]
    cost = CostParams(a=float(c["a"]), b0=float(c["b0"]), b1=float(c["b1"]), gamma=float(c["gamma"]))
    m = merged["mdp"]
    mdp = MdpConfig(
        q_max=int(m["q_max"]), n_price=int(m["n_price"]),
        grid_width_sds=float(m["grid_width_sds"]), tol=float(m["tol"]), max_iters=int(m["max_iters"]),
    )
    ctl = merged["controller"]
    sim = merged["sim"]
    return ScenarioConfig(
        price=price, demand=demand, cost=cost, mdp=mdp,
        step_kind=str(ctl["step_kind"]), step_f=float(ctl["step_f"]), step_p=float(ctl["step_p"]),
        kappa=int(ctl["kappa"]), lambda_bar=float(ctl["lambda_bar"]),
        horizon_updates=int(sim["horizon_updates"]), seed=int(sim["seed"]), replicas=int(sim["replicas"]),
    )


def default_scenario() -> ScenarioConfig:
    """The fully-defaulted configuration."""
    return _build({s: dict(v) for s, v in DEFAULTS.items()})


def resolve_config(path: str | Path | None) -> ScenarioConfig:
    """Load a config file (or the defaults when path is None)."""
    if path is None:
        return default_scenario()
    return _build(_read_sections(path))


def write_resolved(cfg: ScenarioConfig, path: str | Path) -> None:
    """Write the fully-resolved configuration as INI next to run outputs."""
    parser = configparser.ConfigParser()
    parser.optionxform = str
    parser["price"] = {
        "mode": cfg.price.mode,
        "mu": repr(cfg.price.mu),
        "theta": repr(cfg.price.theta),
        "sigma": repr(cfg.price.sigma),
        "iid_std": repr(cfg.price.iid_std),
    }
    parser["demand"] = {"lambda0": repr(cfg.demand.lambda0), "k": repr(cfg.demand.k)}
    parser["cost"] = {
        "a": repr(cfg.cost.a), "b0": repr(cfg.cost.b0),
        "b1": repr(cfg.cost.b1), "gamma": repr(cfg.cost.gamma),
    }
    parser["mdp"] = {
        "q_max": str(cfg.mdp.q_max), "n_price": str(cfg.mdp.n_price),
        "grid_width_sds": repr(cfg.mdp.grid_width_sds), "tol": repr(cfg.mdp.tol),
        "max_iters": str(cfg.mdp.max_iters),
    }
    parser["controller"] = {
        "step_kind": cfg.step_kind, "step_f": repr(cfg.step_f), "step_p": repr(cfg.step_p),
        "kappa": str(cfg.kappa), "lambda_bar": repr(cfg.lambda_bar),
    }
    parser["sim"] = {
        "horizon_updates": str(cfg.horizon_updates), "seed": str(cfg.seed),
        "replicas": str(cfg.replicas),
    }
    with open(path, "w") as fh:
        parser.write(fh)
