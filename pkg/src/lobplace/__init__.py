"""Queue-reactive order book model with optimal limit order stay/cancel control."""

from .evaluate import PolicyMetrics, SimulationResult, evaluate, simulate
from .kernel import Control, EventKind, KernelError, TransitionEdge, normalize, row, successors
from .latency import LatencyCurve, LatencyPoint, latency_sweep
from .model import (
    DomainError,
    ExecState,
    IntensityKind,
    IntensityModel,
    InvalidStateError,
    ModelParams,
    OrderbookState,
    Rates,
    ReplenishKind,
    ReplenishmentModel,
    imbalance,
    microprice,
    rates,
    replenish,
)
from .solver import (
    ConstantPolicy,
    FixedResult,
    Policy,
    ResourceLimitError,
    SolveResult,
    SolverError,
    ValueTable,
    reachable,
    solve,
    solve_fixed,
    solve_latency,
    terminal_value,
)

__all__ = [
    "ConstantPolicy",
    "Control",
    "DomainError",
    "EventKind",
    "ExecState",
    "FixedResult",
    "IntensityKind",
    "IntensityModel",
    "InvalidStateError",
    "KernelError",
    "LatencyCurve",
    "LatencyPoint",
    "ModelParams",
    "OrderbookState",
    "Policy",
    "PolicyMetrics",
    "Rates",
    "ReplenishKind",
    "ReplenishmentModel",
    "ResourceLimitError",
    "SimulationResult",
    "SolveResult",
    "SolverError",
    "TransitionEdge",
    "ValueTable",
    "evaluate",
    "imbalance",
    "latency_sweep",
    "microprice",
    "normalize",
    "rates",
    "reachable",
    "replenish",
    "row",
    "simulate",
    "solve",
    "solve_fixed",
    "solve_latency",
    "successors",
    "terminal_value",
]

__version__ = "0.1.0"
