"""Order book state, flow intensities and replenishment laws.

The market is reduced to the two first limits around a one-tick spread.
A single buy limit order of negligible size sits inside the same-side
(bid) queue, splitting it into the volume ahead of it and the volume
behind it.  Mid prices are stored in integer half-ticks so that the
spread endpoints (mid +/- half a tick) and one-tick moves stay exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum, IntEnum
from typing import NamedTuple


class DomainError(ValueError):
    """Raised when a scalar formula is evaluated outside its domain."""


class InvalidStateError(ValueError):
    """Raised when an order book state violates its invariants."""


class ExecState(IntEnum):
    NOT_EXECUTED = 0
    EXECUTED_NOW = 1
    CEMETERY = -1


@dataclass(frozen=True)
class OrderbookState:
    """Book state around the tracked buy limit order.

    q_before / q_after are the lot counts ahead of and behind the order
    at the best bid, q_opp is the best ask quantity, and price_half_ticks
    is the mid price in half-ticks (a one-tick move is +/-2).
    """

    q_before: int
    q_after: int
    q_opp: int
    price_half_ticks: int
    exec: ExecState = ExecState.NOT_EXECUTED

    @property
    def q_same(self) -> int:
        return self.q_before + self.q_after

    @property
    def price_ticks(self) -> float:
        return self.price_half_ticks / 2.0

    @property
    def is_live(self) -> bool:
        return self.exec == ExecState.NOT_EXECUTED

    def validate(self, q_max: int) -> None:
        for name in ("q_before", "q_after", "q_opp"):
            value = getattr(self, name)
            if value < 0:
                raise InvalidStateError(f"{name}={value} is negative")
            if value > q_max:
                raise InvalidStateError(f"{name}={value} exceeds the cap {q_max}")
        if self.is_live:
            # A live book always shows at least one lot on each side:
            # depletion and replenishment happen in the same transition.
            if self.q_opp < 1:
                raise InvalidStateError("live state with empty opposite queue")
            if self.q_same < 1:
                raise InvalidStateError("live state with empty same-side queue")


class IntensityKind(Enum):
    CONST = "CONST"
    IMB = "IMB"


class ReplenishKind(Enum):
    CONST = "CONST"
    LINEAR = "LINEAR"


class Rates(NamedTuple):
    """Per-unit-time event intensities for the four order flows."""

    same_plus: float
    same_minus: float
    opp_plus: float
    opp_minus: float


@dataclass(frozen=True)
class IntensityModel:
    """Insertion/cancellation intensities at the two first limits.

    CONST uses the flat base rates.  IMB makes insertions herd on the own
    side's share of the visible depth and cancellations grow with the
    other side's share:

        insert(side)  = lambda_plus_0  + beta_plus  * q_side / (q_side + q_other)
        cancel(side)  = lambda_minus_0 + beta_minus * q_other / (q_side + q_other)

    Bid-ask symmetry (opposite-side rate at swapped arguments equals the
    same-side rate) holds by construction.
    """

    kind: IntensityKind
    lambda_plus_0: float
    lambda_minus_0: float
    beta_plus: float = 0.0
    beta_minus: float = 0.0

    def __post_init__(self) -> None:
        for name in ("lambda_plus_0", "lambda_minus_0", "beta_plus", "beta_minus"):
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be >= 0")

    def max_rate(self) -> float:
        """Largest intensity the model can emit (shares are in [0, 1])."""
        if self.kind == IntensityKind.CONST:
            return max(self.lambda_plus_0, self.lambda_minus_0)
        return max(self.lambda_plus_0 + self.beta_plus, self.lambda_minus_0 + self.beta_minus)


def rates(model: IntensityModel, q_opp: int, q_same: int) -> Rates:
    """Evaluate the four flow intensities at the given first-limit depths."""
    if q_opp + q_same < 1:
        raise DomainError("rates undefined on an empty book")
    if model.kind == IntensityKind.CONST:
        return Rates(
            same_plus=model.lambda_plus_0,
            same_minus=model.lambda_minus_0,
            opp_plus=model.lambda_plus_0,
            opp_minus=model.lambda_minus_0,
        )
    total = q_opp + q_same
    opp_share = q_opp / total
    same_share = q_same / total
    return Rates(
        same_plus=model.lambda_plus_0 + model.beta_plus * same_share,
        same_minus=model.lambda_minus_0 + model.beta_minus * opp_share,
        opp_plus=model.lambda_plus_0 + model.beta_plus * opp_share,
        opp_minus=model.lambda_minus_0 + model.beta_minus * same_share,
    )


@dataclass(frozen=True)
class ReplenishmentModel:
    """Quantities revealed and inserted when a first limit fully depletes.

    CONST always emits the base quantities.  LINEAR scales them with the
    depth surviving on the other side, with upper rounding:

        discovered = ceil(q_disc_0 + theta_disc * surviving)
        inserted   = ceil(q_ins_0  + theta_ins  * surviving)

    Both laws are point masses; the kernel treats them as a (degenerate)
    discrete distribution over (discovered, inserted) pairs.
    """

    kind: ReplenishKind
    q_disc_0: float
    q_ins_0: float
    theta_disc: float = 0.0
    theta_ins: float = 0.0

    def __post_init__(self) -> None:
        if self.theta_disc < 0 or self.theta_ins < 0:
            raise DomainError("liquidity coefficients must be >= 0")


def replenish(model: ReplenishmentModel, surviving_queue: int, q_max: int) -> tuple[int, int]:
    """Discovered and inserted quantities after a depletion.

    surviving_queue is the pre-transition depth of the side that did not
    deplete.  Outputs are clamped into [1, q_max].
    """
    if surviving_queue < 0:
        raise DomainError("surviving queue must be >= 0")
    if model.kind == ReplenishKind.CONST:
        q_disc = model.q_disc_0
        q_ins = model.q_ins_0
    else:
        q_disc = math.ceil(model.q_disc_0 + model.theta_disc * surviving_queue)
        q_ins = math.ceil(model.q_ins_0 + model.theta_ins * surviving_queue)
    clamp = lambda q: max(1, min(int(q), q_max))
    return clamp(q_disc), clamp(q_ins)


def imbalance(q_same: int, q_opp: int) -> float:
    """Signed depth imbalance (q_same - q_opp) / (q_same + q_opp), in [-1, 1]."""
    total = q_same + q_opp
    if total < 1:
        raise DomainError("imbalance undefined on an empty book")
    return (q_same - q_opp) / total


def microprice(state: OrderbookState, alpha: float) -> float:
    """Expected far-future mid given the current mid and imbalance, in ticks.

    mid + (alpha / 2) * imbalance; alpha is the sensitivity of future
    prices to the imbalance, so the result stays within alpha/2 of mid.
    """
    return state.price_ticks + 0.5 * alpha * imbalance(state.q_same, state.q_opp)


@dataclass(frozen=True)
class ModelParams:
    """Full parameterization of the discrete-time book chain."""

    intensity: IntensityModel
    replenishment: ReplenishmentModel
    alpha: float
    horizon_f: int
    dt: float = 1.0
    lot: int = 1
    q_max: int = 32

    def __post_init__(self) -> None:
        if self.alpha < 0:
            raise DomainError("alpha must be >= 0")
        if self.dt <= 0:
            raise DomainError("dt must be > 0")
        if self.horizon_f < 1:
            raise DomainError("horizon_f must be >= 1")
        if self.lot != 1:
            raise DomainError("only unit lots are supported")
        if self.q_max < 1:
            raise DomainError("q_max must be >= 1")
        # Every event weight is a product of terms lambda*dt and
        # (1 - lambda*dt); each rate must therefore satisfy rate*dt < 1.
        if self.intensity.max_rate() * self.dt >= 1.0:
            raise DomainError("an intensity violates rate * dt in [0, 1)")
