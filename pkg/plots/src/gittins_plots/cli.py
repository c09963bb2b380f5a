"""plots --kind <k> --in <csv...> --out <img>"""

from __future__ import annotations

import argparse
import sys

from .render import FIGURE_KINDS, FigureSpec, render


def main(argv=None):
    parser = argparse.ArgumentParser(prog="plots", description=__doc__)
    parser.add_argument("--kind", required=True, choices=FIGURE_KINDS)
    parser.add_argument("--in", dest="inputs", nargs="+", required=True, metavar="CSV")
    parser.add_argument("--out", required=True, metavar="IMG")
    parser.add_argument("--labels", nargs="*", default=[])
    parser.add_argument("--delta", type=float, default=None, help="heatmap delta to select")
    parser.add_argument("--title", default=None)
    args = parser.parse_args(argv)
    try:
        spec = FigureSpec(
            inputs=args.inputs,
            kind=args.kind,
            output=args.out,
            labels=args.labels,
            delta=args.delta,
            title=args.title,
        )
        out = render(spec)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(out)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
