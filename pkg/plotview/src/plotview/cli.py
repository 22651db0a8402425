"""Command line: plotview plot --in run_g.csv:g --in run_h.csv:h --out fig.png"""

from __future__ import annotations

import argparse
import sys

from .render import DEFAULT_CHANNEL, PlotSpec, SeriesSpec, render


def _parse_series(arg: str) -> SeriesSpec:
    path, sep, label = arg.rpartition(":")
    if not sep or not path:
        raise ValueError(
            f"expected '<csv>:<label>' with label g or h, got {arg!r}")
    return SeriesSpec(path=path, label=label)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="plotview",
                                 description="Plot qswitch trajectory CSVs")
    sub = ap.add_subparsers(dest="command", required=True)
    plot = sub.add_parser("plot", help="render one figure from CSV inputs")
    plot.add_argument("--in", dest="inputs", action="append", required=True,
                      metavar="CSV:LABEL",
                      help="input file and its initial state (g or h); repeatable")
    plot.add_argument("--channel", default=DEFAULT_CHANNEL)
    plot.add_argument("--out", required=True, help="output image path")
    plot.add_argument("--title", default=None)
    args = ap.parse_args(argv)

    try:
        spec = PlotSpec(inputs=tuple(_parse_series(s) for s in args.inputs),
                        out_path=args.out, channel=args.channel,
                        title=args.title)
        render(spec)
    except (ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
