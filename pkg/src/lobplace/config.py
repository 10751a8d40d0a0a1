"""Scenario configuration: JSON round-trippable experiment descriptions.

A scenario bundles the model parameters, a grid of initial states, the
sweep kind and run settings.  Parsing preserves the exact numeric types
of the source document so that ``to_dict`` reproduces it verbatim.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

from .model import (
    IntensityKind,
    IntensityModel,
    ModelParams,
    OrderbookState,
    ReplenishKind,
    ReplenishmentModel,
)

SWEEP_KINDS = ("imbalance-grid", "horizon", "latency", "single")


class ConfigError(ValueError):
    """Raised when a scenario document is malformed."""


@dataclass(frozen=True)
class GridSpec:
    """Inclusive ranges of initial queue sizes plus the starting mid price."""

    q_before: tuple[int, int]
    q_after: tuple[int, int]
    q_opp: tuple[int, int]
    price_ticks: int

    def states(self) -> list[OrderbookState]:
        out = []
        for qb in range(self.q_before[0], self.q_before[1] + 1):
            for qa in range(self.q_after[0], self.q_after[1] + 1):
                for qo in range(self.q_opp[0], self.q_opp[1] + 1):
                    out.append(OrderbookState(qb, qa, qo, 2 * self.price_ticks))
        return out


@dataclass(frozen=True)
class ScenarioConfig:
    params: ModelParams
    grid: GridSpec
    sweep: str
    output: str
    seed: int
    n_paths: int
    horizons: Optional[tuple[int, ...]] = None
    taus: Optional[tuple[int, ...]] = None
    alphas: Optional[tuple[float, ...]] = None
    # Raw numeric values as they appeared in the source document, kept so
    # serialization round-trips exactly (6 stays 6, 6.0 stays 6.0).
    _raw_params: Optional[dict] = None

    def initial_states(self) -> list[OrderbookState]:
        states = self.grid.states()
        if not states:
            raise ConfigError("grid describes no initial states")
        return states


def _need(obj: dict, key: str, where: str):
    if key not in obj:
        raise ConfigError(f"missing key {key!r} in {where}")
    return obj[key]


def _check_keys(obj: dict, allowed: set[str], where: str) -> None:
    extra = set(obj) - allowed
    if extra:
        raise ConfigError(f"unknown keys {sorted(extra)} in {where}")


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where} must be a number")
    return value


def _integer(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where} must be an integer")
    return value


def _int_pair(value, where: str) -> tuple[int, int]:
    if not isinstance(value, list) or len(value) != 2:
        raise ConfigError(f"{where} must be a [lo, hi] pair")
    lo, hi = (_integer(v, where) for v in value)
    if lo > hi:
        raise ConfigError(f"{where} has lo > hi")
    return (lo, hi)


def params_from_dict(doc: dict) -> ModelParams:
    _check_keys(
        doc,
        {"intensity", "replenishment", "alpha", "dt", "horizon_f", "lot", "q_max"},
        "params",
    )
    intensity_doc = _need(doc, "intensity", "params")
    _check_keys(
        intensity_doc,
        {"kind", "lambda_plus_0", "lambda_minus_0", "beta_plus", "beta_minus"},
        "params.intensity",
    )
    try:
        ikind = IntensityKind(_need(intensity_doc, "kind", "params.intensity"))
    except ValueError as exc:
        raise ConfigError(f"unknown intensity kind: {intensity_doc.get('kind')!r}") from exc
    intensity = IntensityModel(
        kind=ikind,
        lambda_plus_0=_number(_need(intensity_doc, "lambda_plus_0", "intensity"), "lambda_plus_0"),
        lambda_minus_0=_number(_need(intensity_doc, "lambda_minus_0", "intensity"), "lambda_minus_0"),
        beta_plus=_number(intensity_doc.get("beta_plus", 0), "beta_plus"),
        beta_minus=_number(intensity_doc.get("beta_minus", 0), "beta_minus"),
    )
    replen_doc = _need(doc, "replenishment", "params")
    _check_keys(
        replen_doc,
        {"kind", "q_disc_0", "q_ins_0", "theta_disc", "theta_ins"},
        "params.replenishment",
    )
    try:
        rkind = ReplenishKind(_need(replen_doc, "kind", "params.replenishment"))
    except ValueError as exc:
        raise ConfigError(f"unknown replenishment kind: {replen_doc.get('kind')!r}") from exc
    replenishment = ReplenishmentModel(
        kind=rkind,
        q_disc_0=_number(_need(replen_doc, "q_disc_0", "replenishment"), "q_disc_0"),
        q_ins_0=_number(_need(replen_doc, "q_ins_0", "replenishment"), "q_ins_0"),
        theta_disc=_number(replen_doc.get("theta_disc", 0), "theta_disc"),
        theta_ins=_number(replen_doc.get("theta_ins", 0), "theta_ins"),
    )
    try:
        return ModelParams(
            intensity=intensity,
            replenishment=replenishment,
            alpha=_number(_need(doc, "alpha", "params"), "alpha"),
            dt=_number(doc.get("dt", 1.0), "dt"),
            horizon_f=_integer(_need(doc, "horizon_f", "params"), "horizon_f"),
            lot=_integer(doc.get("lot", 1), "lot"),
            q_max=_integer(doc.get("q_max", 32), "q_max"),
        )
    except ValueError as exc:
        raise ConfigError(f"invalid params: {exc}") from exc


def params_to_dict(params: ModelParams) -> dict:
    return {
        "intensity": {
            "kind": params.intensity.kind.value,
            "lambda_plus_0": params.intensity.lambda_plus_0,
            "lambda_minus_0": params.intensity.lambda_minus_0,
            "beta_plus": params.intensity.beta_plus,
            "beta_minus": params.intensity.beta_minus,
        },
        "replenishment": {
            "kind": params.replenishment.kind.value,
            "q_disc_0": params.replenishment.q_disc_0,
            "q_ins_0": params.replenishment.q_ins_0,
            "theta_disc": params.replenishment.theta_disc,
            "theta_ins": params.replenishment.theta_ins,
        },
        "alpha": params.alpha,
        "dt": params.dt,
        "horizon_f": params.horizon_f,
        "lot": params.lot,
        "q_max": params.q_max,
    }


def from_dict(doc: dict) -> ScenarioConfig:
    if not isinstance(doc, dict):
        raise ConfigError("scenario document must be a JSON object")
    _check_keys(
        doc,
        {"params", "grid", "sweep", "output", "seed", "n_paths", "horizons", "taus", "alphas"},
        "scenario",
    )
    params_doc = _need(doc, "params", "scenario")
    params = params_from_dict(params_doc)

    grid_doc = _need(doc, "grid", "scenario")
    _check_keys(grid_doc, {"q_before", "q_after", "q_opp", "price_ticks"}, "grid")
    grid = GridSpec(
        q_before=_int_pair(_need(grid_doc, "q_before", "grid"), "grid.q_before"),
        q_after=_int_pair(_need(grid_doc, "q_after", "grid"), "grid.q_after"),
        q_opp=_int_pair(_need(grid_doc, "q_opp", "grid"), "grid.q_opp"),
        price_ticks=_integer(_need(grid_doc, "price_ticks", "grid"), "grid.price_ticks"),
    )

    sweep = _need(doc, "sweep", "scenario")
    if sweep not in SWEEP_KINDS:
        raise ConfigError(f"sweep must be one of {SWEEP_KINDS}, got {sweep!r}")

    horizons = doc.get("horizons")
    if horizons is not None:
        horizons = tuple(_integer(h, "horizons") for h in horizons)
        if not horizons or any(h < 1 for h in horizons):
            raise ConfigError("horizons must be a non-empty list of positive integers")
    taus = doc.get("taus")
    if taus is not None:
        taus = tuple(_integer(t, "taus") for t in taus)
        if not taus or any(t < 1 or t > params.horizon_f for t in taus):
            raise ConfigError("every tau must lie in [1, horizon_f]")
    alphas = doc.get("alphas")
    if alphas is not None:
        alphas = tuple(_number(a, "alphas") for a in alphas)
        if not alphas or any(a < 0 for a in alphas):
            raise ConfigError("alphas must be a non-empty list of values >= 0")

    if sweep == "horizon" and horizons is None:
        raise ConfigError("sweep 'horizon' requires the 'horizons' list")
    if sweep == "latency" and (taus is None or alphas is None):
        raise ConfigError("sweep 'latency' requires the 'taus' and 'alphas' lists")

    for state in grid.states():
        try:
            state.validate(params.q_max)
        except ValueError as exc:
            raise ConfigError(f"invalid initial state in grid: {exc}") from exc

    return ScenarioConfig(
        params=params,
        grid=grid,
        sweep=sweep,
        output=str(_need(doc, "output", "scenario")),
        seed=_integer(_need(doc, "seed", "scenario"), "seed"),
        n_paths=_integer(_need(doc, "n_paths", "scenario"), "n_paths"),
        horizons=horizons,
        taus=taus,
        alphas=alphas,
        _raw_params=params_doc,
    )


def to_dict(config: ScenarioConfig) -> dict:
    doc = {
        "params": config._raw_params if config._raw_params is not None else params_to_dict(config.params),
        "grid": {
            "q_before": list(config.grid.q_before),
            "q_after": list(config.grid.q_after),
            "q_opp": list(config.grid.q_opp),
            "price_ticks": config.grid.price_ticks,
        },
        "sweep": config.sweep,
        "output": config.output,
        "seed": config.seed,
        "n_paths": config.n_paths,
    }
    if config.horizons is not None:
        doc["horizons"] = list(config.horizons)
    if config.taus is not None:
        doc["taus"] = list(config.taus)
    if config.alphas is not None:
        doc["alphas"] = list(config.alphas)
    return doc


def load(path: str) -> ScenarioConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read scenario file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    return from_dict(doc)


def dumps(config: ScenarioConfig) -> str:
    return json.dumps(to_dict(config), indent=2, sort_keys=True) + "\n"
