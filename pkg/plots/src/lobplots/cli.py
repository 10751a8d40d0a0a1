"""Entry point: ``plots <spec.json> [spec2.json ...]``."""

from __future__ import annotations

import sys

from .render import SpecError, load_spec, render


def main(argv: list[str] | None = None) -> int:
    args = sys.argv[1:] if argv is None else argv
    if not args or any(a in ("-h", "--help") for a in args):
        print("usage: plots <spec.json> [spec.json ...]", file=sys.stderr)
        return 0 if args else 2
    try:
        for path in args:
            spec = load_spec(path)
            out = render(spec)
            print(out)
    except SpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
