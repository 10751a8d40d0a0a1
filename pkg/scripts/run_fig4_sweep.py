#!/usr/bin/env python3
"""Run the full imbalance-grid sweeps for both intensity frameworks.

Writes results/const_fig4.csv and results/imb_fig4.csv: optimal vs
always-stay value, price improvement, execution mid/duration, stay ratio
and the first-step control for every initial state on the grid.
"""

import pathlib
import sys

from lobplace import cli

FIXTURES = pathlib.Path(__file__).resolve().parents[1] / "src" / "lobplace" / "fixtures"
RESULTS = pathlib.Path(__file__).resolve().parents[1] / "results"


def main() -> int:
    RESULTS.mkdir(exist_ok=True)
    for name in ("const_fig4.json", "imb_fig4.json"):
        out = RESULTS / name.replace(".json", ".csv")
        code = cli.main(
            ["sweep-imbalance", "--config", str(FIXTURES / name), "--out", str(out)]
        )
        if code != 0:
            return code
        print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
