"""Exact and Monte Carlo evaluation of a fixed stay/cancel policy.

``evaluate`` pushes the full probability mass forward layer by layer and
accumulates the expected gain, the mid price and step index at execution,
the probability-weighted share of pre-fill epochs spent staying, and the
chance of a passive fill (the complement is the forced spread-cross at
the horizon, which guarantees execution on every path).
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .kernel import Control
from .model import ModelParams, OrderbookState
from .solver import _key, _row_key, _row_template, _terminal


class EvaluationError(RuntimeError):
    """Raised when a policy does not cover a reachable state."""


@dataclass(frozen=True)
class PolicyMetrics:
    expected_gain: float  # ticks, relative to the far-future microprice
    expected_exec_mid: float  # ticks, mid price at the execution step
    expected_duration: float  # steps until execution (forced cross counts as f)
    stay_ratio: float  # mass-weighted share of pre-fill epochs with control stay
    exec_before_horizon_prob: float  # probability of a passive fill
    mass_error: float  # max per-layer deviation of total propagated mass from 1


class PathRecord(NamedTuple):
    gain: float
    exec_step: int
    exec_mid: float
    stays: int
    epochs: int
    passive_fill: bool


@dataclass(frozen=True)
class SimulationResult:
    n_paths: int
    gain_mean: float
    gain_se: float
    exec_mid_mean: float
    exec_mid_se: float
    duration_mean: float
    duration_se: float
    stay_ratio: float
    stay_ratio_se: float
    exec_before_horizon_prob: float
    exec_prob_se: float
    paths: Optional[tuple[PathRecord, ...]] = None


_ZERO_METRICS = PolicyMetrics(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)


def _policy_lookup(policy):
    lookup = getattr(policy, "control_key", None)
    if lookup is not None:
        return lookup
    # Fall back to the public interface for custom policy objects.
    from .model import ExecState

    def fallback(layer, key):
        qb, qa, qo, p = key
        return policy.control(layer, OrderbookState(qb, qa, qo, p, ExecState.NOT_EXECUTED))

    return fallback


def evaluate(initial: OrderbookState, params: ModelParams, policy) -> PolicyMetrics:
    """Exact distributional metrics of ``policy`` started from ``initial``."""
    initial.validate(params.q_max)
    if not initial.is_live:
        return _ZERO_METRICS

    f = params.horizon_f
    rk = _row_key(params)
    lookup = _policy_lookup(policy)

    mass: dict[tuple, float] = {_key(initial): 1.0}
    absorbed = 0.0
    gain = exec_mid = duration = 0.0
    stay_mass = 0.0
    live_epoch_mass = 0.0
    exec_prob = 0.0
    mass_error = 0.0

    for n in range(f):
        nxt_mass: dict[tuple, float] = {}
        for key, m in mass.items():
            qb, qa, qo, p = key
            try:
                control = lookup(n, key)
            except Exception as exc:
                raise EvaluationError(f"policy missing state {key} at layer {n}") from exc
            live_epoch_mass += m
            if control == Control.STAY:
                stay_mass += m
            for qb2, qa2, qo2, dp, e2, pr, rw in _row_template(*rk, qb, qa, qo, control):
                w = m * pr
                if e2 == 0:
                    k2 = (qb2, qa2, qo2, p + dp)
                    nxt_mass[k2] = nxt_mass.get(k2, 0.0) + w
                else:
                    gain += w * rw
                    exec_prob += w
                    duration += w * (n + 1)
                    exec_mid += w * ((p + dp) / 2.0)
                    absorbed += w
        mass = nxt_mass
        mass_error = max(mass_error, abs(1.0 - (math.fsum(mass.values()) + absorbed)))

    for key, m in mass.items():
        qb, qa, qo, p = key
        gain += m * _terminal(qb, qa, qo, params.alpha)
        duration += m * f
        exec_mid += m * (p / 2.0)

    stay_ratio = stay_mass / live_epoch_mass if live_epoch_mass > 0.0 else 0.0
    return PolicyMetrics(
        expected_gain=gain,
        expected_exec_mid=exec_mid,
        expected_duration=duration,
        stay_ratio=stay_ratio,
        exec_before_horizon_prob=exec_prob,
        mass_error=mass_error,
    )


def simulate(
    initial: OrderbookState,
    params: ModelParams,
    policy,
    n_paths: int,
    seed: int,
    *,
    collect_paths: bool = False,
) -> SimulationResult:
    """Sample ``n_paths`` trajectories under ``policy`` with per-path RNG streams.

    Each path draws from its own stream derived from (seed, path index),
    so results are reproducible bit for bit regardless of scheduling.
    """
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    initial.validate(params.q_max)

    f = params.horizon_f
    rk = _row_key(params)
    lookup = _policy_lookup(policy)
    start = _key(initial)
    live0 = initial.is_live

    # Cumulative-probability rows, cached per queue configuration.
    cum_cache: dict[tuple, tuple[list[float], tuple]] = {}

    def cum_row(qb, qa, qo, control):
        ck = (qb, qa, qo, control)
        hit = cum_cache.get(ck)
        if hit is None:
            tmpl = _row_template(*rk, qb, qa, qo, control)
            cum: list[float] = []
            acc = 0.0
            for edge in tmpl:
                acc += edge[5]
                cum.append(acc)
            hit = (cum, tmpl)
            cum_cache[ck] = hit
        return hit

    streams = np.random.SeedSequence(seed).spawn(n_paths)

    gains = np.empty(n_paths)
    steps = np.empty(n_paths)
    mids = np.empty(n_paths)
    stays = np.empty(n_paths)
    epochs = np.empty(n_paths)
    fills = np.empty(n_paths)
    records: list[PathRecord] = []

    for i in range(n_paths):
        if not live0:
            gains[i] = steps[i] = mids[i] = stays[i] = epochs[i] = fills[i] = 0.0
            if collect_paths:
                records.append(PathRecord(0.0, 0, 0.0, 0, 0, False))
            continue
        u = np.random.default_rng(streams[i]).random(f)
        key = start
        gain = 0.0
        n_stay = 0
        n_epoch = 0
        exec_step = f
        exec_mid = 0.0
        passive = False
        for n in range(f):
            qb, qa, qo, p = key
            try:
                control = lookup(n, key)
            except Exception as exc:
                raise EvaluationError(f"policy missing state {key} at layer {n}") from exc
            n_epoch += 1
            if control == Control.STAY:
                n_stay += 1
            cum, tmpl = cum_row(qb, qa, qo, control)
            idx = bisect_right(cum, u[n])
            if idx >= len(tmpl):
                idx = len(tmpl) - 1
            qb2, qa2, qo2, dp, e2, _, rw = tmpl[idx]
            if e2 != 0:
                gain = rw
                exec_step = n + 1
                exec_mid = (p + dp) / 2.0
                passive = True
                break
            key = (qb2, qa2, qo2, p + dp)
        if not passive:
            qb, qa, qo, p = key
            gain = _terminal(qb, qa, qo, params.alpha)
            exec_step = f
            exec_mid = p / 2.0
        gains[i] = gain
        steps[i] = exec_step
        mids[i] = exec_mid
        stays[i] = n_stay
        epochs[i] = n_epoch
        fills[i] = 1.0 if passive else 0.0
        if collect_paths:
            records.append(PathRecord(gain, exec_step, exec_mid, n_stay, n_epoch, passive))

    def se(arr: np.ndarray) -> float:
        if n_paths < 2:
            return 0.0
        return float(arr.std(ddof=1) / math.sqrt(n_paths))

    total_epochs = float(epochs.sum())
    if total_epochs > 0.0:
        ratio = float(stays.sum()) / total_epochs
        # Delta-method standard error for the ratio of sums.
        resid = stays - ratio * epochs
        ratio_se = se(resid) / float(epochs.mean())
    else:
        ratio = 0.0
        ratio_se = 0.0

    return SimulationResult(
        n_paths=n_paths,
        gain_mean=float(gains.mean()),
        gain_se=se(gains),
        exec_mid_mean=float(mids.mean()),
        exec_mid_se=se(mids),
        duration_mean=float(steps.mean()),
        duration_se=se(steps),
        stay_ratio=ratio,
        stay_ratio_se=ratio_se,
        exec_before_horizon_prob=float(fills.mean()),
        exec_prob_se=se(fills),
        paths=tuple(records) if collect_paths else None,
    )
