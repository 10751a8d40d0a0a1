#!/usr/bin/env python3
"""Latency-cost curves at the imbalance-0.5 start state, both frameworks.

Writes results/const_fig9.csv and results/imb_fig9.csv with the value
lost per latency factor tau for several imbalance sensitivities.
"""

import pathlib
import sys

from lobplace import cli

FIXTURES = pathlib.Path(__file__).resolve().parents[1] / "src" / "lobplace" / "fixtures"
RESULTS = pathlib.Path(__file__).resolve().parents[1] / "results"


def main() -> int:
    RESULTS.mkdir(exist_ok=True)
    for name in ("const_fig9.json", "imb_fig9.json"):
        out = RESULTS / name.replace(".json", ".csv")
        code = cli.main(["latency", "--config", str(FIXTURES / name), "--out", str(out)])
        if code != 0:
            return code
        print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
