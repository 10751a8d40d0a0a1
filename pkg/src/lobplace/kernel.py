"""One-step transition rows of the controlled book chain.

For a state and a control (stay in the queue, or cancel and re-join at
the tail) the kernel enumerates every successor state together with its
probability weight and the execution payoff banked on that edge.

Event weights are four-factor products: the probability that exactly one
of the four flows ticks during the step and the other three do not, e.g.
an opposite-side insertion weighs

    opp_plus*dt * (1 - opp_minus*dt) * (1 - same_plus*dt) * (1 - same_minus*dt).

Conjunctions of two or more flow events in one step are neglected, which
leaves the raw row sum slightly below one; ``normalize`` rescales it.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

from .model import (
    ExecState,
    InvalidStateError,
    ModelParams,
    OrderbookState,
    microprice,
    rates,
    replenish,
)

TICK_HALF = 1  # half a tick, in half-tick price units
TICK = 2  # one tick, in half-tick price units


class KernelError(RuntimeError):
    """Raised when a transition row cannot be built."""


class EventKind(Enum):
    OPP_ADD = "opp_add"
    OPP_CANCEL = "opp_cancel"
    SAME_ADD = "same_add"
    SAME_CANCEL = "same_cancel"
    PRICE_UP = "price_up"
    PRICE_DOWN_EXEC = "price_down_exec"
    PRICE_DOWN_NO_EXEC = "price_down_no_exec"
    EXEC_PLAIN = "exec_plain"
    NOTHING = "nothing"
    ABSORBED = "absorbed"


class Control(Enum):
    STAY = "stay"
    CANCEL = "cancel"


@dataclass(frozen=True)
class TransitionEdge:
    next: OrderbookState
    prob: float
    reward: float
    event: EventKind


def _merge(edges: list[TransitionEdge]) -> list[TransitionEdge]:
    """Collapse edges that land on the same state.

    Queue-cap clamping can make distinct events reach one successor; the
    fold keeps the first-seen event label (NOTHING is built first so cap
    overflows fold into it) and probability-averages the rewards.
    """
    by_state: dict[OrderbookState, int] = {}
    merged: list[TransitionEdge] = []
    for edge in edges:
        if edge.prob <= 0.0:
            continue
        idx = by_state.get(edge.next)
        if idx is None:
            by_state[edge.next] = len(merged)
            merged.append(edge)
        else:
            old = merged[idx]
            prob = old.prob + edge.prob
            reward = (old.prob * old.reward + edge.prob * edge.reward) / prob
            merged[idx] = replace(old, prob=prob, reward=reward)
    return merged


def successors(
    state: OrderbookState, control: Control, params: ModelParams
) -> list[TransitionEdge]:
    """Raw (pre-normalization) transition row for ``state`` under ``control``.

    Executed and cemetery states are absorbing: one edge onto the frozen
    cemetery copy with probability one.  Execution payoffs appear only on
    stay edges where the order fills, as the post-transition microprice
    minus the best bid prevailing as the fill occurs.
    """
    if not state.is_live:
        frozen = replace(state, exec=ExecState.CEMETERY)
        return [TransitionEdge(frozen, 1.0, 0.0, EventKind.ABSORBED)]

    try:
        state.validate(params.q_max)
    except InvalidStateError as exc:
        raise KernelError(str(exc)) from exc
    q_max = params.q_max
    qb, qa, qo = state.q_before, state.q_after, state.q_opp
    q_same = qb + qa
    p = state.price_half_ticks
    alpha = params.alpha
    dt = params.dt

    lam = rates(params.intensity, qo, q_same)
    sp = lam.same_plus * dt
    sm = lam.same_minus * dt
    op = lam.opp_plus * dt
    om = lam.opp_minus * dt
    w_opp_add = op * (1.0 - om) * (1.0 - sp) * (1.0 - sm)
    w_opp_cancel = om * (1.0 - op) * (1.0 - sp) * (1.0 - sm)
    w_same_add = sp * (1.0 - op) * (1.0 - om) * (1.0 - sm)
    w_same_cancel = sm * (1.0 - op) * (1.0 - om) * (1.0 - sp)
    w_nothing = (1.0 - op) * (1.0 - om) * (1.0 - sp) * (1.0 - sm)

    cancel = control == Control.CANCEL
    # Cancelling re-merges the order behind the whole same-side queue.
    base_qb = min(q_same, q_max) if cancel else qb
    base_qa = 0 if cancel else qa

    live = ExecState.NOT_EXECUTED
    edges = [
        TransitionEdge(
            OrderbookState(base_qb, base_qa, qo, p, live), w_nothing, 0.0, EventKind.NOTHING
        )
    ]

    if qo + 1 <= q_max:
        edges.append(
            TransitionEdge(
                OrderbookState(base_qb, base_qa, qo + 1, p, live),
                w_opp_add,
                0.0,
                EventKind.OPP_ADD,
            )
        )
    else:
        # Capped insertion folds into the NOTHING edge via _merge.
        edges.append(
            TransitionEdge(
                OrderbookState(base_qb, base_qa, qo, p, live),
                w_opp_add,
                0.0,
                EventKind.NOTHING,
            )
        )

    if qo > 1:
        edges.append(
            TransitionEdge(
                OrderbookState(base_qb, base_qa, qo - 1, p, live),
                w_opp_cancel,
                0.0,
                EventKind.OPP_CANCEL,
            )
        )
    else:
        # The ask depletes: price moves up one tick, a new ask is
        # discovered and fresh bids are inserted into the spread; the
        # order (re)joins behind the inserted quantity under both controls.
        q_disc, q_ins = replenish(params.replenishment, q_same, q_max)
        edges.append(
            TransitionEdge(
                OrderbookState(q_ins, 0, q_disc, p + TICK, live),
                w_opp_cancel,
                0.0,
                EventKind.PRICE_UP,
            )
        )

    same_add_qb = min(q_same + 1, q_max) if cancel else qb
    same_add_qa = 0 if cancel else min(qa + 1, q_max)
    if (cancel and q_same + 1 <= q_max) or (not cancel and qa + 1 <= q_max):
        edges.append(
            TransitionEdge(
                OrderbookState(same_add_qb, same_add_qa, qo, p, live),
                w_same_add,
                0.0,
                EventKind.SAME_ADD,
            )
        )
    else:
        edges.append(
            TransitionEdge(
                OrderbookState(base_qb, base_qa, qo, p, live),
                w_same_add,
                0.0,
                EventKind.NOTHING,
            )
        )

    if q_same == 1:
        # Last same-side lot consumed: the bid depletes and the price
        # moves down one tick.  Staying means the order fills at the old
        # bid; cancelling means it re-inserts behind the discovered queue.
        q_disc, q_ins = replenish(params.replenishment, qo, q_max)
        if cancel:
            nxt = OrderbookState(q_disc, 0, q_ins, p - TICK, live)
            edges.append(
                TransitionEdge(nxt, w_same_cancel, 0.0, EventKind.PRICE_DOWN_NO_EXEC)
            )
        else:
            nxt = OrderbookState(q_disc, 0, q_ins, p - TICK, ExecState.EXECUTED_NOW)
            reward = microprice(nxt, alpha) - (state.price_ticks - 0.5)
            edges.append(
                TransitionEdge(nxt, w_same_cancel, reward, EventKind.PRICE_DOWN_EXEC)
            )
    elif cancel:
        edges.append(
            TransitionEdge(
                OrderbookState(min(q_same - 1, q_max), 0, qo, p, live),
                w_same_cancel,
                0.0,
                EventKind.SAME_CANCEL,
            )
        )
    elif qb > 1:
        edges.append(
            TransitionEdge(
                OrderbookState(qb - 1, qa, qo, p, live),
                w_same_cancel,
                0.0,
                EventKind.SAME_CANCEL,
            )
        )
    else:
        # The consumption that leaves no lot ahead of a staying order also
        # sweeps the order itself (it has negligible size): execution at
        # the first instant the queue ahead drops below the order's size.
        # qb == 1: the consumed lot is the last one ahead; qb == 0: the
        # lot comes from behind the order.  Either way q_after >= 1 keeps
        # the queue alive, so the price holds.
        qa_next = qa if qb == 1 else qa - 1
        nxt = OrderbookState(0, qa_next, qo, p, ExecState.EXECUTED_NOW)
        reward = microprice(nxt, alpha) - (state.price_ticks - 0.5)
        edges.append(TransitionEdge(nxt, w_same_cancel, reward, EventKind.EXEC_PLAIN))

    return _merge(edges)


def normalize(edges: list[TransitionEdge]) -> list[TransitionEdge]:
    """Rescale a row so its probabilities sum to one."""
    if not edges:
        raise KernelError("cannot normalize an empty transition row")
    total = sum(edge.prob for edge in edges)
    if total <= 0.0:
        raise KernelError("cannot normalize a row with zero mass")
    return [replace(edge, prob=edge.prob / total) for edge in edges]


def row(state: OrderbookState, control: Control, params: ModelParams) -> list[TransitionEdge]:
    """Normalized transition row: the form consumed by solvers."""
    return normalize(successors(state, control, params))
