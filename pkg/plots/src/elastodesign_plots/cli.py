"""Command line for rendering run artifacts into figures."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .render import PANELS, ArtifactError, FigureSpec, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="elastodesign-plots",
        description="render design-run artifacts as figures",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    rp = sub.add_parser("render", help="render trace/outline artifacts to an image")
    rp.add_argument("--trace", required=True, help="trace CSV path")
    rp.add_argument("--outline", required=True, help="outline CSV path")
    rp.add_argument("--out", required=True, help="output image path")
    rp.add_argument("--panel", default="all", choices=PANELS)
    args = parser.parse_args(argv)

    try:
        spec = FigureSpec(
            trace=Path(args.trace),
            outline=Path(args.outline),
            out=Path(args.out),
            panel=args.panel,
        )
        for path in (spec.trace, spec.outline):
            if not path.exists():
                raise ArtifactError(f"{path}: file not found")
        out = render(spec)
    except ArtifactError as exc:
        print(f"artifact error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
