"""Latency cost curves: value lost when reactions happen every tau steps.

The cost at latency factor tau is the fully-reactive optimal value minus
the value of the best policy that may switch controls only at steps that
are multiples of tau.  tau = 1 recovers the reactive optimum exactly, so
its cost is exactly zero.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

from .model import ModelParams, OrderbookState
from .solver import DEFAULT_STATE_BUDGET, solve, solve_latency


@dataclass(frozen=True)
class LatencyPoint:
    tau: int
    v_tau: float
    latency_cost: float


@dataclass(frozen=True)
class LatencyCurve:
    scenario: str
    framework: str
    alpha: float
    v_reactive: float
    points: tuple[LatencyPoint, ...]


def latency_sweep(
    initial: OrderbookState,
    params: ModelParams,
    taus: Sequence[int],
    alphas: Sequence[float],
    *,
    scenario: str = "",
    state_budget: int = DEFAULT_STATE_BUDGET,
) -> list[LatencyCurve]:
    """One latency-cost curve per imbalance sensitivity value."""
    if not alphas:
        raise ValueError("alphas must be non-empty")
    for tau in taus:
        if tau < 1 or tau > params.horizon_f:
            raise ValueError(f"tau must lie in [1, horizon_f], got {tau}")

    framework = params.intensity.kind.value
    curves = []
    for alpha in alphas:
        p = replace(params, alpha=alpha)
        v = solve(initial, p, state_budget=state_budget).v0
        points = []
        for tau in taus:
            v_tau = solve_latency(initial, p, tau, state_budget=state_budget)
            points.append(LatencyPoint(tau=tau, v_tau=v_tau, latency_cost=v - v_tau))
        label = scenario or f"{framework}_alpha_{alpha}"
        curves.append(
            LatencyCurve(
                scenario=label,
                framework=framework,
                alpha=alpha,
                v_reactive=v,
                points=tuple(points),
            )
        )
    return curves
