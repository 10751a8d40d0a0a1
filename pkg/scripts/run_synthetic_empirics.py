#!/usr/bin/env python3
"""Generate a synthetic market from the imbalance-reactive model and run
the empirics estimators over it.

Writes results/synth_quotes.csv, results/synth_trades.csv and the
estimator outputs (imbalance series, predictive-power bins, per-agent
profiles and fill-time imbalance stats) under results/synth_*.
"""

import pathlib
import sys

from lobplace import cli
from lobplace import config as cfg
from lobplace.empirics import simulate_market, write_quotes_csv, write_trades_csv

FIXTURES = pathlib.Path(__file__).resolve().parents[1] / "src" / "lobplace" / "fixtures"
RESULTS = pathlib.Path(__file__).resolve().parents[1] / "results"

N_STEPS = 100_000
SEED = 20130102


def main() -> int:
    RESULTS.mkdir(exist_ok=True)
    params = cfg.load(str(FIXTURES / "imb_fig4.json")).params
    quotes, trades = simulate_market(params, N_STEPS, seed=SEED)
    quotes_path = RESULTS / "synth_quotes.csv"
    trades_path = RESULTS / "synth_trades.csv"
    write_quotes_csv(str(quotes_path), quotes)
    write_trades_csv(str(trades_path), trades)
    print(f"wrote {quotes_path} ({len(quotes)} quotes), {trades_path} ({len(trades)} trades)")
    return cli.main(
        [
            "empirics",
            "--quotes", str(quotes_path),
            "--trades", str(trades_path),
            "--out", str(RESULTS / "synth"),
        ]
    )


if __name__ == "__main__":
    sys.exit(main())
