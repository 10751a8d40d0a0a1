import math
from dataclasses import replace

import pytest

from lobplace import (
    ConstantPolicy,
    Control,
    ExecState,
    IntensityKind,
    IntensityModel,
    ModelParams,
    OrderbookState,
    ReplenishKind,
    ReplenishmentModel,
    evaluate,
    simulate,
    solve,
    solve_fixed,
    terminal_value,
)
from lobplace.evaluate import EvaluationError
from lobplace.kernel import row
from lobplace.solver import Policy

CONST = ModelParams(
    IntensityModel(IntensityKind.CONST, 0.06, 0.5),
    ReplenishmentModel(ReplenishKind.CONST, 6, 4),
    alpha=4.0,
    horizon_f=20,
    q_max=64,
)
IMB = ModelParams(
    IntensityModel(IntensityKind.IMB, 0.06, 0.5, 0.075, 0.25),
    ReplenishmentModel(ReplenishKind.LINEAR, 6, 2, 3.0, 0.5),
    alpha=4.0,
    horizon_f=20,
    q_max=64,
)


def enumerate_paths(initial, params, policy):
    """Exhaustive path expansion of the chain under ``policy``.

    Returns exact expectations (gain, exec mid, duration, stay ratio,
    passive-fill probability) by summing over every trajectory, which is
    tractable only for tiny horizons.  Independent of the layer-sweep
    bookkeeping in ``evaluate``.
    """
    f = params.horizon_f
    gain = exec_mid = duration = 0.0
    stay_mass = live_mass = fill_prob = 0.0

    def walk(state, n, mass):
        nonlocal gain, exec_mid, duration, stay_mass, live_mass, fill_prob
        if n == f:
            gain += mass * terminal_value(state, params.alpha)
            exec_mid += mass * state.price_ticks
            duration += mass * f
            return
        control = policy.control(n, state)
        live_mass += mass  # pre-fill decision epoch
        if control == Control.STAY:
            stay_mass += mass
        for edge in row(state, control, params):
            w = mass * edge.prob
            if edge.next.exec == ExecState.EXECUTED_NOW:
                gain += w * edge.reward
                exec_mid += w * edge.next.price_ticks
                duration += w * (n + 1)
                fill_prob += w
            else:
                walk(edge.next, n + 1, w)

    walk(initial, 0, 1.0)
    return {
        "gain": gain,
        "exec_mid": exec_mid,
        "duration": duration,
        "stay_ratio": stay_mass / live_mass,
        "fill_prob": fill_prob,
    }


class TestEvaluateExactness:
    @pytest.mark.parametrize("params", [CONST, IMB], ids=["const", "imb"])
    def test_matches_path_enumeration(self, params):
        p = replace(params, horizon_f=4)
        initial = OrderbookState(1, 1, 2, 20)
        result = solve(initial, p)
        for policy in (result.policy, ConstantPolicy(Control.STAY), ConstantPolicy(Control.CANCEL)):
            metrics = evaluate(initial, p, policy)
            brute = enumerate_paths(initial, p, policy)
            assert metrics.expected_gain == pytest.approx(brute["gain"], abs=1e-12)
            assert metrics.expected_exec_mid == pytest.approx(brute["exec_mid"], abs=1e-12)
            assert metrics.expected_duration == pytest.approx(brute["duration"], abs=1e-12)
            assert metrics.stay_ratio == pytest.approx(brute["stay_ratio"], abs=1e-12)
            assert metrics.exec_before_horizon_prob == pytest.approx(brute["fill_prob"], abs=1e-12)

    @pytest.mark.parametrize("params", [CONST, IMB], ids=["const", "imb"])
    def test_forward_matches_backward_value(self, params):
        for qb, qa, qo in ((1, 1, 2), (1, 5, 9), (2, 3, 4)):
            initial = OrderbookState(qb, qa, qo, 20)
            result = solve(initial, params)
            metrics = evaluate(initial, params, result.policy)
            assert metrics.expected_gain == pytest.approx(result.v0, abs=1e-9)
            assert metrics.mass_error <= 1e-12
            fixed = solve_fixed(initial, params, Control.STAY).v0
            nc = evaluate(initial, params, ConstantPolicy(Control.STAY))
            assert nc.expected_gain == pytest.approx(fixed, abs=1e-9)

    def test_basic_metric_ranges(self):
        initial = OrderbookState(1, 2, 6, 20)
        metrics = evaluate(initial, CONST, ConstantPolicy(Control.STAY))
        assert metrics.stay_ratio == 1.0
        assert 0.0 <= metrics.exec_before_horizon_prob <= 1.0
        assert 0.0 < metrics.expected_duration <= CONST.horizon_f
        cancel = evaluate(initial, CONST, ConstantPolicy(Control.CANCEL))
        assert cancel.stay_ratio == 0.0
        assert cancel.exec_before_horizon_prob == 0.0  # never fills passively

    def test_degenerate_cemetery_initial(self):
        initial = OrderbookState(1, 2, 6, 20, ExecState.CEMETERY)
        metrics = evaluate(initial, CONST, ConstantPolicy(Control.STAY))
        assert metrics.expected_gain == 0.0
        assert metrics.expected_duration == 0.0
        assert metrics.exec_before_horizon_prob == 0.0

    def test_missing_policy_state_raises(self):
        initial = OrderbookState(1, 1, 2, 20)
        empty = Policy([{} for _ in range(CONST.horizon_f)])
        with pytest.raises(EvaluationError, match="layer 0"):
            evaluate(initial, CONST, empty)


class TestSimulate:
    def test_reproducible_and_seed_sensitive(self):
        initial = OrderbookState(1, 2, 6, 20)
        policy = solve(initial, CONST).policy
        a = simulate(initial, CONST, policy, 400, seed=42, collect_paths=True)
        b = simulate(initial, CONST, policy, 400, seed=42, collect_paths=True)
        assert a == b
        assert a.paths == b.paths and len(a.paths) == 400
        c = simulate(initial, CONST, policy, 400, seed=43)
        assert c.gain_mean != a.gain_mean

    def test_mean_consistent_with_exact_value(self):
        initial = OrderbookState(1, 6, 7, 20)
        result = solve(initial, CONST)
        metrics = evaluate(initial, CONST, result.policy)
        sim = simulate(initial, CONST, result.policy, 20_000, seed=7)
        assert abs(sim.gain_mean - metrics.expected_gain) <= 5 * sim.gain_se
        assert abs(sim.duration_mean - metrics.expected_duration) <= 5 * sim.duration_se
        assert abs(sim.exec_before_horizon_prob - metrics.exec_before_horizon_prob) <= 5 * max(
            sim.exec_prob_se, 1e-9
        )

    def test_degenerate_cemetery_paths_identical(self):
        initial = OrderbookState(1, 2, 6, 20, ExecState.CEMETERY)
        sim = simulate(initial, CONST, ConstantPolicy(Control.STAY), 50, seed=1, collect_paths=True)
        assert sim.gain_mean == 0.0 and sim.duration_mean == 0.0
        assert len(set(sim.paths)) == 1

    def test_path_count_validation(self):
        with pytest.raises(ValueError):
            simulate(OrderbookState(1, 1, 2, 20), CONST, ConstantPolicy(Control.STAY), 0, seed=1)
