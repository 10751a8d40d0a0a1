"""Command-line entry point: scenario-driven experiment drivers.

Subcommands
    solve            value/policy table for a single initial state
    sweep-imbalance  optimal vs always-stay metrics across an initial-state grid
    sweep-horizon    value and stay/cancel shares vs remaining time
    latency          latency-cost curves over (tau, alpha) grids
    simulate         Monte Carlo cross-check of the optimal policy
    empirics         imbalance estimators over quote/trade CSV files
    kernel-dump      one transition row as JSON, for inspection

Exit codes: 0 success, 2 config error, 3 resource budget exceeded,
4 data error.  Outputs are deterministic given config and seed.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

from . import config as cfg
from . import empirics
from .config import ConfigError, ScenarioConfig
from .evaluate import evaluate, simulate
from .kernel import Control, normalize, successors
from .latency import latency_sweep
from .model import ExecState, ModelParams, OrderbookState, imbalance
from .solver import (
    ConstantPolicy,
    ResourceLimitError,
    solve,
    solve_fixed,
    solve_fixed_many,
    solve_many,
    write_value_policy_csv,
)

DataError = empirics.DataError


def _write_csv(path: str, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _fmt(value) -> str:
    return repr(float(value))


def _single_state(config: ScenarioConfig) -> OrderbookState:
    states = config.initial_states()
    if len(states) != 1:
        raise ConfigError(
            f"this subcommand needs a grid describing exactly one initial state, got {len(states)}"
        )
    return states[0]


def run_solve(config: ScenarioConfig, out: str) -> dict:
    state = _single_state(config)
    params = config.params
    table, policy, v0 = solve(state, params)
    v_stay = solve_fixed(state, params, Control.STAY).v0
    v_cancel = solve_fixed(state, params, Control.CANCEL).v0
    write_value_policy_csv(out, table, policy)
    return {
        "v_opt": v0,
        "v_stay": v_stay,
        "v_cancel": v_cancel,
        "first_control": policy.control(0, state).value,
        "output": out,
    }


SWEEP_HEADER = [
    "q_before",
    "q_after",
    "q_opp",
    "price_ticks",
    "imbalance",
    "v_opt",
    "v_nc",
    "improvement",
    "exec_mid_opt",
    "exec_mid_nc",
    "duration_opt",
    "duration_nc",
    "stay_ratio",
    "first_control",
]


def _sweep_row(state: OrderbookState, params: ModelParams, policy, v_opt: float, v_nc: float) -> list:
    m_opt = evaluate(state, params, policy)
    m_nc = evaluate(state, params, ConstantPolicy(Control.STAY))
    return [
        state.q_before,
        state.q_after,
        state.q_opp,
        _fmt(state.price_ticks),
        _fmt(imbalance(state.q_same, state.q_opp)),
        _fmt(v_opt),
        _fmt(v_nc),
        _fmt(v_opt - v_nc),
        _fmt(m_opt.expected_exec_mid),
        _fmt(m_nc.expected_exec_mid),
        _fmt(m_opt.expected_duration),
        _fmt(m_nc.expected_duration),
        _fmt(m_opt.stay_ratio),
        policy.control(0, state).value,
    ]


def _sweep_cell(args: tuple) -> list:
    key, params = args
    state = OrderbookState(*key)
    _, policy, v_opt = solve(state, params)
    v_nc = solve_fixed(state, params, Control.STAY).v0
    return _sweep_row(state, params, policy, v_opt, v_nc)


def run_sweep_imbalance(config: ScenarioConfig, out: str, threads: int = 1) -> dict:
    params = config.params
    states = sorted(
        config.initial_states(), key=lambda s: (s.q_before, s.q_after, s.q_opp)
    )
    if threads > 1:
        tasks = [
            ((s.q_before, s.q_after, s.q_opp, s.price_half_ticks), params) for s in states
        ]
        with ProcessPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(_sweep_cell, tasks))
    else:
        _, policy, v_opt = solve_many(states, params)
        _, v_nc = solve_fixed_many(states, params, Control.STAY)
        rows = [_sweep_row(s, params, policy, v_opt[s], v_nc[s]) for s in states]
    _write_csv(out, SWEEP_HEADER, rows)
    return {"rows": len(rows), "output": out}


def run_sweep_horizon(config: ScenarioConfig, out: str) -> dict:
    state = _single_state(config)
    if config.horizons is None:
        raise ConfigError("sweep 'horizon' requires the 'horizons' list")
    header = ["horizon_f", "imbalance", "v_opt", "v_nc", "stay_share", "cancel_share", "duration_opt"]
    rows = []
    for f in sorted(config.horizons):
        params = replace(config.params, horizon_f=f)
        _, policy, v_opt = solve(state, params)
        v_nc = solve_fixed(state, params, Control.STAY).v0
        metrics = evaluate(state, params, policy)
        rows.append(
            [
                f,
                _fmt(imbalance(state.q_same, state.q_opp)),
                _fmt(v_opt),
                _fmt(v_nc),
                _fmt(metrics.stay_ratio),
                _fmt(1.0 - metrics.stay_ratio),
                _fmt(metrics.expected_duration),
            ]
        )
    _write_csv(out, header, rows)
    return {"rows": len(rows), "output": out}


def run_latency(config: ScenarioConfig, out: str) -> dict:
    state = _single_state(config)
    if config.taus is None or config.alphas is None:
        raise ConfigError("sweep 'latency' requires the 'taus' and 'alphas' lists")
    curves = latency_sweep(state, config.params, config.taus, config.alphas)
    header = ["scenario", "framework", "alpha", "tau", "v", "v_tau", "latency_cost"]
    rows = []
    for curve in curves:
        for point in curve.points:
            rows.append(
                [
                    curve.scenario,
                    curve.framework,
                    _fmt(curve.alpha),
                    point.tau,
                    _fmt(curve.v_reactive),
                    _fmt(point.v_tau),
                    _fmt(point.latency_cost),
                ]
            )
    _write_csv(out, header, rows)
    return {"rows": len(rows), "output": out}


def run_simulate(config: ScenarioConfig, out: str, n_paths: int, seed: int) -> dict:
    params = config.params
    states = sorted(
        config.initial_states(), key=lambda s: (s.q_before, s.q_after, s.q_opp)
    )
    _, policy, v_opt = solve_many(states, params)
    header = [
        "q_before",
        "q_after",
        "q_opp",
        "imbalance",
        "n_paths",
        "gain_mean",
        "gain_se",
        "gain_exact",
        "exec_mid_mean",
        "exec_mid_se",
        "duration_mean",
        "duration_se",
        "stay_ratio",
        "stay_ratio_se",
        "exec_prob",
        "exec_prob_se",
    ]
    rows = []
    for i, state in enumerate(states):
        result = simulate(state, params, policy, n_paths, seed + i)
        rows.append(
            [
                state.q_before,
                state.q_after,
                state.q_opp,
                _fmt(imbalance(state.q_same, state.q_opp)),
                n_paths,
                _fmt(result.gain_mean),
                _fmt(result.gain_se),
                _fmt(v_opt[state]),
                _fmt(result.exec_mid_mean),
                _fmt(result.exec_mid_se),
                _fmt(result.duration_mean),
                _fmt(result.duration_se),
                _fmt(result.stay_ratio),
                _fmt(result.stay_ratio_se),
                _fmt(result.exec_before_horizon_prob),
                _fmt(result.exec_prob_se),
            ]
        )
    _write_csv(out, header, rows)
    return {"rows": len(rows), "output": out}


def run_empirics(
    quotes_path: str,
    trades_path: str,
    out_stem: str,
    agents: list[str] | None,
    profile: empirics.ProfileConfig,
) -> dict:
    quotes = empirics.read_quotes_csv(quotes_path)
    trades = empirics.read_trades_csv(trades_path)

    series, skipped = empirics.imbalance_series(quotes)
    _write_csv(
        f"{out_stem}_imbalance.csv",
        ["timestamp", "imbalance"],
        [[ts, _fmt(v)] for ts, v in series],
    )

    bins = empirics.predictive_power(trades, quotes, profile)
    _write_csv(
        f"{out_stem}_predictive_power.csv",
        ["bin_lo", "bin_hi", "count", "mean_imbalance", "mean_move_ticks", "mean_signed_move_ticks"],
        [
            [
                _fmt(b.lo),
                _fmt(b.hi),
                b.count,
                "" if b.mean_imbalance is None else _fmt(b.mean_imbalance),
                "" if b.mean_move_ticks is None else _fmt(b.mean_move_ticks),
                "" if b.mean_signed_move_ticks is None else _fmt(b.mean_signed_move_ticks),
            ]
            for b in bins
        ],
    )

    explicit = agents is not None
    if agents is None:
        agents = sorted({t.passive_agent_id for t in trades})
    agent_rows = []
    summaries = {}
    for agent in agents:
        curve = empirics.price_profile(trades, quotes, agent, profile)
        _write_csv(
            f"{out_stem}_profile_{agent}.csv",
            ["offset_ns", "value", "count"],
            [
                [off, _fmt(val), cnt]
                for off, val, cnt in zip(curve.offsets_ns, curve.values, curve.counts)
            ],
        )
        summaries[agent] = {"avg_spread_ticks": curve.avg_spread_ticks, "n_fills": curve.n_fills}
        try:
            stats = empirics.neutralized_imbalance(trades, quotes, agent)
        except DataError:
            if explicit:
                raise
            print(f"note: skipping one-sided agent {agent!r}", file=sys.stderr)
            continue
        agent_rows.append(
            [
                agent,
                stats.n_buys,
                stats.n_sells,
                _fmt(stats.buy_avg),
                _fmt(stats.sell_avg),
                _fmt(stats.neutralized),
                _fmt(stats.neutralized_sum),
                _fmt(stats.plain_avg),
                _fmt(stats.plain_avg_literal),
            ]
        )
    _write_csv(
        f"{out_stem}_agent_imbalance.csv",
        [
            "agent_id",
            "n_buys",
            "n_sells",
            "buy_avg",
            "sell_avg",
            "neutralized",
            "neutralized_sum",
            "plain_avg",
            "plain_avg_literal",
        ],
        agent_rows,
    )
    return {
        "quotes": len(quotes),
        "trades": len(trades),
        "skipped_quotes": skipped,
        "agents": summaries,
        "output_stem": out_stem,
    }


def run_kernel_dump(params: ModelParams, state: OrderbookState, control: Control) -> dict:
    raw = successors(state, control, params)
    pre_sum = sum(edge.prob for edge in raw)
    norm = normalize(raw)
    edges = []
    for raw_edge, edge in zip(raw, norm):
        edges.append(
            {
                "next": {
                    "q_before": edge.next.q_before,
                    "q_after": edge.next.q_after,
                    "q_opp": edge.next.q_opp,
                    "price_half_ticks": edge.next.price_half_ticks,
                    "exec": int(edge.next.exec),
                },
                "prob": edge.prob,
                "raw_weight": raw_edge.prob,
                "reward": edge.reward,
                "event": edge.event.value,
            }
        )
    return {
        "state": {
            "q_before": state.q_before,
            "q_after": state.q_after,
            "q_opp": state.q_opp,
            "price_half_ticks": state.price_half_ticks,
            "exec": int(state.exec),
        },
        "control": control.value,
        "pre_normalization_sum": pre_sum,
        "edges": edges,
    }


def _parse_control(text: str) -> Control:
    lowered = text.lower()
    if lowered in ("stay", "c"):
        return Control.STAY
    if lowered in ("cancel", "s"):
        return Control.CANCEL
    raise ConfigError(f"unknown control {text!r} (expected stay/c or cancel/s)")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lobplace",
        description="Queue-reactive order book model: optimal limit order stay/cancel policies.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser, needs_config: bool = True) -> None:
        p.add_argument("--config", required=needs_config, help="scenario JSON file")
        p.add_argument("--out", help="output path (overrides the scenario's 'output')")
        p.add_argument("--seed", type=int, help="seed override")
        p.add_argument("--threads", type=int, default=1, help="worker processes for grid sweeps")
        p.add_argument("--paths", type=int, help="Monte Carlo path count override")

    for name in ("solve", "sweep-imbalance", "sweep-horizon", "latency", "simulate"):
        add_common(sub.add_parser(name))

    emp = sub.add_parser("empirics")
    add_common(emp, needs_config=False)
    emp.add_argument("--quotes", required=True, help="quote CSV path")
    emp.add_argument("--trades", required=True, help="trade CSV path")
    emp.add_argument("--agents", help="comma-separated passive agent ids (default: all)")
    emp.add_argument("--future-trades", type=int, default=50)
    emp.add_argument("--offsets", help="comma-separated profile offsets in ns")

    dump = sub.add_parser("kernel-dump")
    add_common(dump)
    dump.add_argument("--state", required=True, help="q_before,q_after,q_opp,price_half_ticks,exec")
    dump.add_argument("--control", required=True, help="stay/c or cancel/s")
    return parser


def _dispatch(args: argparse.Namespace) -> dict:
    if args.command == "empirics":
        profile_kwargs = {"future_trades": args.future_trades}
        if args.offsets:
            profile_kwargs["offsets_ns"] = tuple(
                int(x) for x in args.offsets.split(",") if x.strip()
            )
        profile = empirics.ProfileConfig(**profile_kwargs)
        agents = args.agents.split(",") if args.agents else None
        out = args.out or "empirics"
        return run_empirics(args.quotes, args.trades, out, agents, profile)

    config = cfg.load(args.config)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    out = args.out or config.output

    if args.command == "solve":
        return run_solve(config, out)
    if args.command == "sweep-imbalance":
        return run_sweep_imbalance(config, out, threads=args.threads)
    if args.command == "sweep-horizon":
        return run_sweep_horizon(config, out)
    if args.command == "latency":
        return run_latency(config, out)
    if args.command == "simulate":
        n_paths = args.paths if args.paths is not None else config.n_paths
        if n_paths < 1:
            raise ConfigError("n_paths must be >= 1")
        return run_simulate(config, out, n_paths, config.seed)
    if args.command == "kernel-dump":
        parts = args.state.split(",")
        if len(parts) != 5:
            raise ConfigError("--state needs q_before,q_after,q_opp,price_half_ticks,exec")
        try:
            qb, qa, qo, p, e = (int(x) for x in parts)
            state = OrderbookState(qb, qa, qo, p, ExecState(e))
        except ValueError as exc:
            raise ConfigError(f"bad --state value: {exc}") from exc
        return run_kernel_dump(config.params, state, _parse_control(args.control))
    raise ConfigError(f"unknown command {args.command!r}")


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        summary = _dispatch(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ResourceLimitError as exc:
        print(f"resource error: {exc}", file=sys.stderr)
        return 3
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 4
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
