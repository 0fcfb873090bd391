"""Command line entry point: plotkit render <bundle_dir> <out_dir>."""
from __future__ import annotations

import argparse
import sys

from .render import MalformedCsvError, MissingFileError, ReportBundle, render_report


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="plotkit", description=__doc__)
    subs = parser.add_subparsers(dest="command", required=True)
    render = subs.add_parser("render", help="render report figures from a CSV bundle")
    render.add_argument("bundle_dir")
    render.add_argument("out_dir")
    args = parser.parse_args(argv)

    try:
        files = render_report(ReportBundle(args.bundle_dir), args.out_dir)
    except (MissingFileError, MalformedCsvError) as exc:
        print(f"render failed: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {len(files)} figures to {args.out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
