"""render-report --in DIR --out DIR --figs all|comma,separated,list"""

import argparse
import sys

from .figures import FIGURES, ReportSpec, render_report


def main(argv=None):
    ap = argparse.ArgumentParser(prog="render-report", description=__doc__)
    ap.add_argument("--in", dest="indir", required=True, help="run output directory")
    ap.add_argument("--out", dest="outdir", required=True, help="image directory")
    ap.add_argument("--figs", default="all",
                    help=f"'all' or a comma-separated subset of {sorted(FIGURES)}")
    ap.add_argument("--format", default="png")
    args = ap.parse_args(argv)
    figures = list(FIGURES) if args.figs == "all" else args.figs.split(",")
    try:
        spec = ReportSpec(indir=args.indir, outdir=args.outdir,
                          figures=figures, image_format=args.format)
        written = render_report(spec)
    except (ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
