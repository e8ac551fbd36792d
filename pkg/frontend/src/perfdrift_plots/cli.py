"""plots command line: rate figures and stream density maps from CSV files."""

from __future__ import annotations

import argparse

from .figures import FigureSpec, render_rate_figure, render_stream_density


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="plots", description="Render perfdrift result/stream CSVs as figures")
    sub = parser.add_subparsers(dest="command", required=True)

    rates = sub.add_parser("rates", help="detection rate vs swept parameter, one line per sigma")
    rates.add_argument("--in", dest="input", required=True, help="results CSV")
    rates.add_argument("--out", required=True, help="output figure (.svg default, .png supported)")
    rates.add_argument("--y", default="detection_rate",
                       choices=("detection_rate", "any_rate", "all_rate"))
    rates.add_argument("--title", default=None)

    density = sub.add_parser("density", help="majority-class map over time x feature bins")
    density.add_argument("--in", dest="input", required=True, help="stream CSV")
    density.add_argument("--out", required=True, help="output figure")
    density.add_argument("--bins", type=int, default=50)
    density.add_argument("--bucket", type=int, default=1000)
    density.add_argument("--feature", type=int, default=0)
    density.add_argument("--title", default=None)

    args = parser.parse_args(argv)
    if args.command == "rates":
        out = render_rate_figure(FigureSpec(input_path=args.input, output_path=args.out,
                                            y_column=args.y, title=args.title))
    else:
        out = render_stream_density(args.input, args.out, bins=args.bins,
                                    bucket=args.bucket, feature=args.feature,
                                    title=args.title)
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
