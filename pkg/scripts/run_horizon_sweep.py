#!/usr/bin/env python3
"""Value and stay/cancel shares vs remaining time at initial imbalance 0.5.

Writes results/const_fig8.csv and results/imb_fig8.csv.
"""

import pathlib
import sys

from lobplace import cli

FIXTURES = pathlib.Path(__file__).resolve().parents[1] / "src" / "lobplace" / "fixtures"
RESULTS = pathlib.Path(__file__).resolve().parents[1] / "results"


def main() -> int:
    RESULTS.mkdir(exist_ok=True)
    for name in ("const_fig8.json", "imb_fig8.json"):
        out = RESULTS / name.replace(".json", ".csv")
        code = cli.main(["sweep-horizon", "--config", str(FIXTURES / name), "--out", str(out)])
        if code != 0:
            return code
        print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
