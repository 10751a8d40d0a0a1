"""End-to-end acceptance checks over the published parameter scenarios.

Each test exercises one headline property of the solver pipeline at its
stated tolerance and prints a PASS/FAIL line (run with ``pytest -s`` to
see them).  The two framework sweeps are computed once per session.
"""

import math
import time
from dataclasses import dataclass, replace
from importlib import resources

import numpy as np
import pytest
import scipy.stats

from lobplace import config as cfg
from lobplace import (
    ConstantPolicy,
    Control,
    ExecState,
    ModelParams,
    OrderbookState,
    evaluate,
    imbalance,
    simulate,
    solve,
    solve_latency,
)
from lobplace.empirics import ProfileConfig, predictive_power, simulate_market
from lobplace.kernel import successors
from lobplace.model import rates
from lobplace.solver import solve_fixed_many, solve_many

from oracle import STAY, CANCEL, oracle_value


def _params(name: str) -> ModelParams:
    path = resources.files("lobplace").joinpath("fixtures", name)
    return cfg.load(str(path)).params

CONST_PARAMS = _params("const_fig4.json")
IMB_PARAMS = _params("imb_fig4.json")

GRID = [OrderbookState(1, qa, qo, 20) for qa in range(1, 12) for qo in range(2, 13)]
LATENCY_STATE = OrderbookState(1, 2, 1, 20)  # imbalance +0.5


def report(name: str, ok: bool, detail: str) -> None:
    print(f"ACCEPTANCE {'PASS' if ok else 'FAIL'} - {name}: {detail}")
    assert ok, f"{name}: {detail}"


@dataclass(frozen=True)
class GridRow:
    state: OrderbookState
    imb: float
    v_opt: float
    v_nc: float
    gain_opt: float
    gain_nc: float
    dur_opt: float
    dur_nc: float
    mid_opt: float
    mid_nc: float
    stay_ratio: float
    first_control: Control


def _sweep(params: ModelParams) -> tuple[list[GridRow], float]:
    start = time.perf_counter()
    _, policy, v_opt = solve_many(GRID, params)
    _, v_nc = solve_fixed_many(GRID, params, Control.STAY)
    rows = []
    for state in GRID:
        m_opt = evaluate(state, params, policy)
        m_nc = evaluate(state, params, ConstantPolicy(Control.STAY))
        rows.append(
            GridRow(
                state=state,
                imb=imbalance(state.q_same, state.q_opp),
                v_opt=v_opt[state],
                v_nc=v_nc[state],
                gain_opt=m_opt.expected_gain,
                gain_nc=m_nc.expected_gain,
                dur_opt=m_opt.expected_duration,
                dur_nc=m_nc.expected_duration,
                mid_opt=m_opt.expected_exec_mid,
                mid_nc=m_nc.expected_exec_mid,
                stay_ratio=m_opt.stay_ratio,
                first_control=policy.control(0, state),
            )
        )
    rows.sort(key=lambda r: (r.imb, r.state.q_after, r.state.q_opp))
    return rows, time.perf_counter() - start


@pytest.fixture(scope="module")
def sweeps():
    return {
        "CONST": _sweep(CONST_PARAMS),
        "IMB": _sweep(IMB_PARAMS),
    }


def test_oracle_equivalence():
    """DP value equals a no-memoization expectimax tree on 27 states, f <= 4."""
    start = time.perf_counter()
    worst = 0.0
    for params in (CONST_PARAMS, IMB_PARAMS):
        for f in (1, 2, 3, 4):
            p = replace(params, horizon_f=f)
            for qb in (1, 2, 3):
                for qa in (1, 2, 3):
                    for qo in (1, 2, 3):
                        state = OrderbookState(qb, qa, qo, 20)
                        dp = solve(state, p).v0
                        tree = oracle_value(p, (qb, qa, qo, 20, 0), f)
                        worst = max(worst, abs(dp - tree))
    elapsed = time.perf_counter() - start
    report(
        "oracle equivalence",
        worst <= 1e-12 and elapsed < 10.0,
        f"max |dp - expectimax| = {worst:.2e} over 27 states x 2 frameworks x f<=4 in {elapsed:.1f}s",
    )


def test_kernel_stochasticity():
    """Normalized rows sum to 1 within 1e-15 on the capped lattice; raw residual bounded."""
    worst_sum = 0.0
    worst_residual_margin = -1.0
    for params in (CONST_PARAMS, IMB_PARAMS):
        small = replace(params, q_max=12)
        lam_max = 0.0
        states = []
        for qb in range(13):
            for qa in range(13):
                for qo in range(1, 13):
                    if qb + qa < 1:
                        continue
                    states.append(OrderbookState(qb, qa, qo, 20))
                    r = rates(small.intensity, qo, qb + qa)
                    lam_max = max(lam_max, *r)
        states.append(OrderbookState(2, 1, 3, 20, ExecState.EXECUTED_NOW))
        states.append(OrderbookState(2, 1, 3, 20, ExecState.CEMETERY))
        bound = 6.0 * (lam_max * small.dt) ** 2
        for state in states:
            for control in Control:
                raw = successors(state, control, small)
                raw_sum = math.fsum(e.prob for e in raw)
                residual = abs(raw_sum - 1.0)
                worst_residual_margin = max(worst_residual_margin, residual - bound)
                total = math.fsum(e.prob / raw_sum for e in raw)
                worst_sum = max(worst_sum, abs(total - 1.0))
    report(
        "kernel stochasticity",
        worst_sum <= 1e-15 and worst_residual_margin <= 0.0,
        f"max |normalized sum - 1| = {worst_sum:.2e}; raw residual within 6*(lam*dt)^2 "
        f"(worst margin {worst_residual_margin:.2e})",
    )


def test_policy_dominance(sweeps):
    """Optimal value dominates always-stay everywhere; strict gain at the worst imbalance."""
    ok = True
    details = []
    for name, (rows, elapsed) in sweeps.items():
        min_gap = min(r.v_opt - r.v_nc for r in rows)
        most_negative = rows[0]
        strict = most_negative.v_opt - most_negative.v_nc
        ok = ok and min_gap >= -1e-12 and strict > 1e-4 and elapsed < 60.0
        details.append(f"{name}: min gap {min_gap:.2e}, gap at imb {most_negative.imb:+.3f} = {strict:.4f}, {elapsed:.1f}s")
    report("policy dominance", ok, "; ".join(details))


def test_adverse_selection_pattern(sweeps):
    """Cancel first at the most negative imbalances, stay at the most positive."""
    ok = True
    details = []
    for name, (rows, _) in sweeps.items():
        neg = [r.first_control for r in rows[:3]]
        pos = [r.first_control for r in rows[-3:]]
        ok = ok and all(c == Control.CANCEL for c in neg) and all(c == Control.STAY for c in pos)
        details.append(
            f"{name}: neg3 {[c.value for c in neg]}, pos3 {[c.value for c in pos]}"
        )
    report("adverse-selection pattern", ok, "; ".join(details))


def test_duration_dominance(sweeps):
    """The optimal strategy never fills faster than always-stay."""
    ok = True
    details = []
    for name, (rows, _) in sweeps.items():
        min_gap = min(r.dur_opt - r.dur_nc for r in rows)
        ok = ok and min_gap >= -1e-9
        details.append(f"{name}: min duration gap {min_gap:.2e} steps")
    report("duration dominance", ok, "; ".join(details))


def test_stay_ratio_trend(sweeps):
    """Under imbalance-reactive flows the agent cancels more at negative imbalance."""
    rows, _ = sweeps["IMB"]
    neg = sum(r.stay_ratio for r in rows[:3]) / 3
    pos = sum(r.stay_ratio for r in rows[-3:]) / 3
    report(
        "stay-ratio trend",
        neg < pos,
        f"IMB: mean stay ratio at 3 most negative = {neg:.4f} < {pos:.4f} at 3 most positive",
    )


def test_horizon_monotonicity():
    """More remaining time helps, with diminishing per-step gains, at imbalance 0.5."""
    ok = True
    details = []
    horizons = (5, 10, 20)
    for name, params in (("CONST", CONST_PARAMS), ("IMB", IMB_PARAMS)):
        values = [solve(LATENCY_STATE, replace(params, horizon_f=f)).v0 for f in horizons]
        nondecreasing = values[0] <= values[1] + 1e-9 and values[1] <= values[2] + 1e-9
        rate1 = (values[1] - values[0]) / (horizons[1] - horizons[0])
        rate2 = (values[2] - values[1]) / (horizons[2] - horizons[1])
        concave = rate1 >= rate2 - 1e-9
        ok = ok and nondecreasing and concave
        details.append(
            f"{name}: V(5,10,20) = {values[0]:.4f}, {values[1]:.4f}, {values[2]:.4f}; "
            f"per-step gains {rate1:.4f} >= {rate2:.4f}"
        )
    report("horizon monotonicity", ok, "; ".join(details))


def test_latency_cost():
    """Latency is free at tau = 1, grows along the doubling chain, and rises with alpha."""
    taus = (1, 2, 4, 8)
    costs = {}
    ok = True
    details = []
    for alpha in (2.0, 4.0):
        params = replace(CONST_PARAMS, alpha=alpha)
        v = solve(LATENCY_STATE, params).v0
        c = [v - solve_latency(LATENCY_STATE, params, tau) for tau in taus]
        costs[alpha] = c
        exact_zero = c[0] == 0.0
        monotone = all(c[i] <= c[i + 1] + 1e-12 for i in range(len(c) - 1))
        ok = ok and exact_zero and monotone
        details.append(f"alpha={alpha:g}: costs {['%.5f' % x for x in c]}")
    alpha_ordered = costs[4.0][2] >= costs[2.0][2]
    ok = ok and alpha_ordered
    details.append(f"cost(tau=4): {costs[4.0][2]:.5f} @a=4 >= {costs[2.0][2]:.5f} @a=2")
    report("latency cost", ok, "; ".join(details))


def test_forward_backward_and_monte_carlo(sweeps):
    """Forward evaluation reproduces the DP value; sampling agrees within 3 SE."""
    worst = 0.0
    for name, (rows, _) in sweeps.items():
        worst = max(worst, max(abs(r.gain_opt - r.v_opt) for r in rows))
        worst = max(worst, max(abs(r.gain_nc - r.v_nc) for r in rows))
    midpoint = OrderbookState(1, 6, 7, 20)
    result = solve(midpoint, CONST_PARAMS)
    exact = evaluate(midpoint, CONST_PARAMS, result.policy).expected_gain
    start = time.perf_counter()
    sim = simulate(midpoint, CONST_PARAMS, result.policy, 100_000, seed=20130102)
    elapsed = time.perf_counter() - start
    z = abs(sim.gain_mean - exact) / sim.gain_se
    report(
        "forward/backward and Monte Carlo consistency",
        worst <= 1e-9 and z <= 3.0 and elapsed < 30.0,
        f"max |forward - dp| = {worst:.2e}; 1e5-path mean off by {z:.2f} SE in {elapsed:.1f}s",
    )


def test_linear_midrange_slope(sweeps):
    """Always-stay value is affine in imbalance mid-grid with slope near alpha/2."""
    rows, _ = sweeps["CONST"]
    n = len(rows)
    mid = rows[n // 3 : 2 * n // 3]
    x = np.array([r.imb for r in mid])
    y = np.array([r.v_nc for r in mid])
    slope = float(np.polyfit(x, y, 1)[0])
    target = CONST_PARAMS.alpha / 2
    report(
        "linear mid-range slope",
        abs(slope - target) <= 0.3 * target,
        f"CONST mid-third slope {slope:.3f} vs alpha/2 = {target:.1f} (+/-30%)",
    )


def test_model_reproduces_predictive_power():
    """Imbalance predicts future mid moves on model-generated data."""
    quotes, trades = simulate_market(IMB_PARAMS, 100_000, seed=20130102)
    bins = predictive_power(trades, quotes, ProfileConfig(future_trades=50))
    populated = [b for b in bins if b.count > 0]
    centers = [0.5 * (b.lo + b.hi) for b in populated]
    means = [b.mean_move_ticks for b in populated]
    rho = scipy.stats.spearmanr(centers, means).statistic
    report(
        "predictive power of imbalance",
        len(populated) >= 5 and rho > 0.0,
        f"Spearman rho = {rho:.3f} over {len(populated)} bins ({len(trades)} trades)",
    )
