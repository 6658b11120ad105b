"""savac-plot: render solver CSV outputs into figures.

One figure per invocation: ``savac-plot <kind> --in PATH [--in2 PATH]
--out PATH`` with kind one of eoc, rtrack, field, field-with-contour.
The output format follows the --out extension (.png or .svg).  Failures
exit nonzero with a single error line on stderr.
"""

from __future__ import annotations

import argparse
import sys

from .errors import PlotError
from .figures import plot_eoc, plot_field, plot_tracking

KINDS = ("eoc", "rtrack", "field", "field-with-contour")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="savac-plot",
        description="Render solver CSV outputs (convergence ladders, "
                    "tracking studies, field snapshots) to PNG or SVG.",
    )
    parser.add_argument("kind", choices=KINDS, help="figure kind")
    parser.add_argument("--in", dest="in_path", required=True,
                        help="input CSV file")
    parser.add_argument("--in2", dest="in2_path", default=None,
                        help="second CSV: the deterministic field whose "
                             "zero level set is overlaid "
                             "(field-with-contour only)")
    parser.add_argument("--out", dest="out_path", required=True,
                        help="output image, .png or .svg")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.in2_path is not None and args.kind != "field-with-contour":
            raise PlotError("--in2 only applies to field-with-contour")
        if args.kind == "eoc":
            result = plot_eoc(args.in_path, args.out_path)
            for name in ("E_L2", "E_H1", "E_tot"):
                values = " ".join(f"{v:.12e}" for v in result.slopes[name])
                print(f"{name} slopes: {values}")
        elif args.kind == "rtrack":
            result = plot_tracking(args.in_path, args.out_path)
            values = " ".join(f"{v:.12e}" for v in result.slopes)
            print(f"tracking slopes: {values}")
        elif args.kind == "field":
            plot_field(args.in_path, args.out_path)
        else:
            if args.in2_path is None:
                raise PlotError("field-with-contour needs --in2 with the "
                                "contour source field")
            plot_field(args.in_path, args.out_path,
                       contour_path=args.in2_path)
        print(f"wrote {args.out_path}")
        return 0
    except FileNotFoundError as exc:
        print(f"error: input file not found: {exc.filename}", file=sys.stderr)
        return 1
    except PlotError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
