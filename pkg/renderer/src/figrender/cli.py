"""Command line entry point: ``render_figures <fig-data-dir> <out-dir>``."""
import argparse
import sys
from pathlib import Path

from .render import FORMATS, FigDataError, render_directory


def build_parser() -> argparse.ArgumentParser:
    """Argument parser for the ``render_figures`` script."""
    parser = argparse.ArgumentParser(
        prog="render_figures",
        description="Render fig-data JSON files into images, one per "
                    "fig*.json found in the input directory.",
    )
    parser.add_argument("fig_data_dir", type=Path,
                        help="directory containing fig*.json files")
    parser.add_argument("out_dir", type=Path,
                        help="directory that receives the images")
    parser.add_argument("--format", choices=FORMATS, default="svg",
                        help="image format (default: svg)")
    return parser


def main(argv=None) -> int:
    """Run the renderer; returns the process exit code.

    0 on success, 2 for missing or schema-invalid fig-data.
    """
    args = build_parser().parse_args(argv)
    try:
        written = render_directory(args.fig_data_dir, args.out_dir,
                                   args.format)
    except (FigDataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
