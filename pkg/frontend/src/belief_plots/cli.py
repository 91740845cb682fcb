"""Command-line entry point: render_beliefs <csv> [--out <png>] [--title <s>]."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .reader import EmptyTraceError, SchemaError
from .render import PlotSpec, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="render_beliefs",
        description="Render per-agent belief-evolution panels from a trace CSV",
    )
    parser.add_argument("csv", help="trace CSV (tick,agent,wake,y,belief_0..)")
    parser.add_argument("--out", default=None, help="output PNG (default: <csv>.png)")
    parser.add_argument("--title", default=None, help="figure title")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    csv_path = Path(args.csv)
    out_path = Path(args.out) if args.out else csv_path.with_suffix(".png")
    try:
        out = render(PlotSpec(csv_path=csv_path, out_path=out_path, title=args.title))
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (SchemaError, EmptyTraceError) as exc:
        print(f"invalid trace: {exc}", file=sys.stderr)
        return 2
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
