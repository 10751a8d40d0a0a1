"""Finite-horizon backward induction over the controlled book chain.

The solver first enumerates, layer by layer, every live state reachable
from the initial state(s) under both controls, then sweeps backward:

    value[f](s) = terminal spread-cross payoff
    value[n](s) = max over controls of  sum_edges prob * (reward + value[n+1](next))

Executed and cemetery states contribute zero continuation value because
the execution payoff is banked on the edge that fills the order.

Transition rows do not depend on the price level (rewards are microprice
minus prevailing-bid differences and price enters successors only as a
shift), so rows are compiled once per queue configuration and reused
across prices, layers and initial states.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Iterator, NamedTuple, Sequence

from .kernel import Control, row, successors
from .model import (
    ExecState,
    IntensityModel,
    ModelParams,
    OrderbookState,
    ReplenishmentModel,
    imbalance,
)

DEFAULT_STATE_BUDGET = 25_000_000

StateKey = tuple[int, int, int, int]  # (q_before, q_after, q_opp, price_half_ticks), live


class SolverError(RuntimeError):
    """Internal consistency failure (e.g. a successor value is missing)."""


class ResourceLimitError(RuntimeError):
    """Raised when the reachable state space exceeds the configured budget."""


def _key(state: OrderbookState) -> StateKey:
    return (state.q_before, state.q_after, state.q_opp, state.price_half_ticks)


def _state(key: StateKey) -> OrderbookState:
    qb, qa, qo, p = key
    return OrderbookState(qb, qa, qo, p, ExecState.NOT_EXECUTED)


def terminal_value(state: OrderbookState, alpha: float) -> float:
    """Payoff of crossing the spread at the horizon: microprice - (mid + 1/2)."""
    return _terminal(state.q_before, state.q_after, state.q_opp, alpha)


def _terminal(qb: int, qa: int, qo: int, alpha: float) -> float:
    return 0.5 * alpha * imbalance(qb + qa, qo) - 0.5


# Compiled row: tuple of (qb, qa, qo, price_shift, exec, prob, reward).
CompiledEdge = tuple[int, int, int, int, int, float, float]


@lru_cache(maxsize=None)
def _row_template(
    intensity: IntensityModel,
    replenishment: ReplenishmentModel,
    alpha: float,
    dt: float,
    q_max: int,
    qb: int,
    qa: int,
    qo: int,
    control: Control,
) -> tuple[CompiledEdge, ...]:
    params = ModelParams(
        intensity=intensity,
        replenishment=replenishment,
        alpha=alpha,
        horizon_f=1,
        dt=dt,
        q_max=q_max,
    )
    state = OrderbookState(qb, qa, qo, 0, ExecState.NOT_EXECUTED)
    return tuple(
        (
            e.next.q_before,
            e.next.q_after,
            e.next.q_opp,
            e.next.price_half_ticks,
            int(e.next.exec),
            e.prob,
            e.reward,
        )
        for e in row(state, control, params)
    )


def _row_key(params: ModelParams) -> tuple:
    return (params.intensity, params.replenishment, params.alpha, params.dt, params.q_max)


def _live_layers(
    initial_keys: Iterable[StateKey], params: ModelParams, state_budget: int
) -> list[set[StateKey]]:
    """Live states reachable at each step under both controls."""
    rk = _row_key(params)
    layers = [set(initial_keys)]
    total = len(layers[0])
    for n in range(params.horizon_f):
        nxt: set[StateKey] = set()
        for qb, qa, qo, p in layers[n]:
            for control in (Control.STAY, Control.CANCEL):
                for qb2, qa2, qo2, dp, e2, _, _ in _row_template(*rk, qb, qa, qo, control):
                    if e2 == 0:
                        nxt.add((qb2, qa2, qo2, p + dp))
        total += len(nxt)
        if total > state_budget:
            raise ResourceLimitError(
                f"state budget {state_budget} exceeded while building layer {n + 1}"
            )
        layers.append(nxt)
    return layers


def _edge_sum(tmpl: tuple[CompiledEdge, ...], p: int, nxt: dict[StateKey, float]) -> float:
    acc = 0.0
    for qb2, qa2, qo2, dp, e2, pr, rw in tmpl:
        if e2 == 0:
            v = nxt.get((qb2, qa2, qo2, p + dp))
            if v is None:
                raise SolverError(f"missing successor value for {(qb2, qa2, qo2, p + dp)}")
            acc += pr * (rw + v)
        else:
            acc += pr * rw
    return acc


class ValueTable:
    """Per-layer map from live reachable states to their values, in ticks.

    Absorbed states (executed or cemetery) always have value zero and are
    not stored; ``value`` handles them uniformly.
    """

    def __init__(self, layers: Sequence[dict[StateKey, float]]):
        self._layers = list(layers)

    @property
    def horizon(self) -> int:
        return len(self._layers) - 1

    def value(self, layer: int, state: OrderbookState) -> float:
        if not state.is_live:
            return 0.0
        try:
            return self._layers[layer][_key(state)]
        except KeyError as exc:
            raise SolverError(f"state {state} not reachable at layer {layer}") from exc

    def items(self, layer: int) -> Iterator[tuple[OrderbookState, float]]:
        for key, val in self._layers[layer].items():
            yield _state(key), val


class Policy:
    """Deterministic control choice for every live reachable state."""

    def __init__(self, layers: Sequence[dict[StateKey, Control]], schedule: str = "every-step"):
        self._layers = list(layers)
        self.schedule = schedule

    @property
    def horizon(self) -> int:
        return len(self._layers)

    def control(self, layer: int, state: OrderbookState) -> Control:
        return self.control_key(layer, _key(state))

    def control_key(self, layer: int, key: StateKey) -> Control:
        try:
            return self._layers[layer][key]
        except (KeyError, IndexError) as exc:
            raise SolverError(f"policy undefined for {key} at layer {layer}") from exc

    def items(self, layer: int) -> Iterator[tuple[OrderbookState, Control]]:
        for key, control in self._layers[layer].items():
            yield _state(key), control


class ConstantPolicy:
    """Policy holding one control everywhere (the all-stay baseline)."""

    def __init__(self, fixed: Control):
        self.fixed = fixed
        self.schedule = "constant"

    def control(self, layer: int, state: OrderbookState) -> Control:
        return self.fixed

    def control_key(self, layer: int, key: StateKey) -> Control:
        return self.fixed


class SolveResult(NamedTuple):
    values: ValueTable
    policy: Policy
    v0: float


class FixedResult(NamedTuple):
    values: ValueTable
    v0: float


def reachable(
    initial: OrderbookState,
    params: ModelParams,
    *,
    state_budget: int = DEFAULT_STATE_BUDGET,
) -> list[set[OrderbookState]]:
    """Layered reachable sets (live and absorbed states) for layers 0..f."""
    initial.validate(params.q_max)
    layers = [{initial}]
    total = 1
    for n in range(params.horizon_f):
        nxt: set[OrderbookState] = set()
        for state in layers[n]:
            for control in (Control.STAY, Control.CANCEL):
                for edge in successors(state, control, params):
                    nxt.add(edge.next)
        total += len(nxt)
        if total > state_budget:
            raise ResourceLimitError(
                f"state budget {state_budget} exceeded while building layer {n + 1}"
            )
        layers.append(nxt)
    return layers


def _terminal_layer(keys: Iterable[StateKey], alpha: float) -> dict[StateKey, float]:
    return {k: _terminal(k[0], k[1], k[2], alpha) for k in keys}


def _solve_layers(
    layers: list[set[StateKey]], params: ModelParams
) -> tuple[list[dict[StateKey, float]], list[dict[StateKey, Control]]]:
    f = params.horizon_f
    rk = _row_key(params)
    values: list[dict[StateKey, float]] = [None] * (f + 1)  # type: ignore[list-item]
    policy: list[dict[StateKey, Control]] = [None] * f  # type: ignore[list-item]
    values[f] = _terminal_layer(layers[f], params.alpha)
    for n in range(f - 1, -1, -1):
        nxt = values[n + 1]
        vn: dict[StateKey, float] = {}
        pn: dict[StateKey, Control] = {}
        for key in layers[n]:
            qb, qa, qo, p = key
            v_stay = _edge_sum(_row_template(*rk, qb, qa, qo, Control.STAY), p, nxt)
            v_cancel = _edge_sum(_row_template(*rk, qb, qa, qo, Control.CANCEL), p, nxt)
            # Ties go to STAY so policies are deterministic.
            if v_cancel > v_stay:
                vn[key] = v_cancel
                pn[key] = Control.CANCEL
            else:
                vn[key] = v_stay
                pn[key] = Control.STAY
        values[n] = vn
        policy[n] = pn
    return values, policy


def _solve_layers_fixed(
    layers: list[set[StateKey]], params: ModelParams, control: Control
) -> list[dict[StateKey, float]]:
    f = params.horizon_f
    rk = _row_key(params)
    values: list[dict[StateKey, float]] = [None] * (f + 1)  # type: ignore[list-item]
    values[f] = _terminal_layer(layers[f], params.alpha)
    for n in range(f - 1, -1, -1):
        nxt = values[n + 1]
        vn: dict[StateKey, float] = {}
        for key in layers[n]:
            qb, qa, qo, p = key
            vn[key] = _edge_sum(_row_template(*rk, qb, qa, qo, control), p, nxt)
        values[n] = vn
    return values


def solve_many(
    initials: Sequence[OrderbookState],
    params: ModelParams,
    *,
    state_budget: int = DEFAULT_STATE_BUDGET,
) -> tuple[ValueTable, Policy, dict[OrderbookState, float]]:
    """Optimal solve over the union of reachable sets of several initial states.

    Values are pointwise, so sharing one backward sweep across a grid of
    initial states returns exactly the per-state solve results.
    """
    for s in initials:
        s.validate(params.q_max)
        if not s.is_live:
            raise SolverError(f"initial state {s} is not live")
    layers = _live_layers([_key(s) for s in initials], params, state_budget)
    values, policy = _solve_layers(layers, params)
    table = ValueTable(values)
    pol = Policy(policy)
    v0 = {s: values[0][_key(s)] for s in initials}
    return table, pol, v0


def solve(
    initial: OrderbookState,
    params: ModelParams,
    *,
    state_budget: int = DEFAULT_STATE_BUDGET,
) -> SolveResult:
    """Value table, optimal policy and initial value for one initial state."""
    table, policy, v0 = solve_many([initial], params, state_budget=state_budget)
    return SolveResult(table, policy, v0[initial])


def solve_fixed_many(
    initials: Sequence[OrderbookState],
    params: ModelParams,
    control: Control,
    *,
    state_budget: int = DEFAULT_STATE_BUDGET,
) -> tuple[ValueTable, dict[OrderbookState, float]]:
    for s in initials:
        s.validate(params.q_max)
        if not s.is_live:
            raise SolverError(f"initial state {s} is not live")
    layers = _live_layers([_key(s) for s in initials], params, state_budget)
    values = _solve_layers_fixed(layers, params, control)
    return ValueTable(values), {s: values[0][_key(s)] for s in initials}


def solve_fixed(
    initial: OrderbookState,
    params: ModelParams,
    control: Control,
    *,
    state_budget: int = DEFAULT_STATE_BUDGET,
) -> FixedResult:
    """Value of holding one control at every step (stay = the no-control baseline)."""
    table, v0 = solve_fixed_many([initial], params, control, state_budget=state_budget)
    return FixedResult(table, v0[initial])


def solve_latency(
    initial: OrderbookState,
    params: ModelParams,
    tau: int,
    *,
    state_budget: int = DEFAULT_STATE_BUDGET,
) -> float:
    """Optimal value when the control can change only every ``tau`` steps.

    Between decision epochs (steps n with n % tau == 0) the control chosen
    at the last epoch stays in force.  tau = 1 reproduces ``solve`` exactly,
    bit for bit.
    """
    if tau < 1 or tau > params.horizon_f:
        raise ValueError(f"tau must lie in [1, horizon_f], got {tau}")
    initial.validate(params.q_max)
    if not initial.is_live:
        raise SolverError(f"initial state {initial} is not live")

    f = params.horizon_f
    rk = _row_key(params)
    layers = _live_layers([_key(initial)], params, state_budget)

    # Value tables carried backward: at epoch layers (and at the horizon)
    # the continuation does not depend on the held control, in between it
    # does, so we carry one table per held control.
    single: dict[StateKey, float] | None = _terminal_layer(layers[f], params.alpha)
    held: dict[Control, dict[StateKey, float]] | None = None

    for n in range(f - 1, -1, -1):
        def nxt_for(control: Control) -> dict[StateKey, float]:
            if single is not None:
                return single
            assert held is not None
            return held[control]

        if n % tau == 0:
            vn: dict[StateKey, float] = {}
            for key in layers[n]:
                qb, qa, qo, p = key
                v_stay = _edge_sum(
                    _row_template(*rk, qb, qa, qo, Control.STAY), p, nxt_for(Control.STAY)
                )
                v_cancel = _edge_sum(
                    _row_template(*rk, qb, qa, qo, Control.CANCEL), p, nxt_for(Control.CANCEL)
                )
                vn[key] = v_cancel if v_cancel > v_stay else v_stay
            single, held = vn, None
        else:
            new_held: dict[Control, dict[StateKey, float]] = {}
            for control in (Control.STAY, Control.CANCEL):
                nxt = nxt_for(control)
                tbl: dict[StateKey, float] = {}
                for key in layers[n]:
                    qb, qa, qo, p = key
                    tbl[key] = _edge_sum(_row_template(*rk, qb, qa, qo, control), p, nxt)
                new_held[control] = tbl
            single, held = None, new_held

    assert single is not None  # layer 0 is always a decision epoch
    return single[_key(initial)]


def write_value_policy_csv(path: str, values: ValueTable, policy: Policy | None) -> None:
    """Dump a value table (and optionally the policy) as CSV."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["layer", "q_before", "q_after", "q_opp", "price_half_ticks", "exec", "value", "control"]
        )
        for layer in range(values.horizon + 1):
            rows = []
            for state, val in values.items(layer):
                control = ""
                if policy is not None and layer < policy.horizon:
                    control = policy.control(layer, state).value
                rows.append(
                    [
                        layer,
                        state.q_before,
                        state.q_after,
                        state.q_opp,
                        state.price_half_ticks,
                        int(state.exec),
                        repr(val),
                        control,
                    ]
                )
            rows.sort(key=lambda r: r[:6])
            writer.writerows(rows)
