"""Command-line entry points: extract and convert.

extract pushes an image list through a checkpoint and writes one manifest
plus one feature file per image.  convert turns a directory of VOC XML or
COCO JSON annotations into a ground-truth JSONL.  Exit status 0 on full
success, 1 when any file failed, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .convert import FORMATS, convert
from .errors import VitfeatError
from .extract import DEFAULT_LAYERS, ExtractorConfig, extract

log = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vitfeat",
        description="extract transformer key features / convert annotations")
    sub = parser.add_subparsers(dest="command", required=True)

    ext = sub.add_parser("extract", help="extract per-layer key features")
    ext.add_argument("--checkpoint", required=True, type=Path,
                     help="path to a saved backbone state dict")
    ext.add_argument("--layers", type=int, default=DEFAULT_LAYERS,
                     help="how many of the last layers to export")
    ext.add_argument("--images", required=True, nargs="+", type=Path,
                     metavar="IMAGE")
    ext.add_argument("--out", required=True, type=Path)
    ext.add_argument("--no-crop", action="store_true",
                     help="reject images that are not exact patch multiples")
    ext.add_argument("--heads", type=int, default=None,
                     help="attention head count override")
    ext.set_defaults(func=cmd_extract)

    conv = sub.add_parser("convert", help="convert annotations to JSONL")
    conv.add_argument("--format", required=True, choices=FORMATS)
    conv.add_argument("--in", dest="in_dir", required=True, type=Path)
    conv.add_argument("--out", required=True, type=Path)
    conv.set_defaults(func=cmd_convert)
    return parser


def cmd_extract(args: argparse.Namespace) -> int:
    if args.layers < 1:
        args.parser_error(f"--layers must be >= 1, got {args.layers}")
    if args.heads is not None and args.heads < 1:
        args.parser_error(f"--heads must be >= 1, got {args.heads}")
    config = ExtractorConfig(
        checkpoint=args.checkpoint,
        images=tuple(args.images),
        out_dir=args.out,
        layers=args.layers,
        crop_to_patch_multiple=not args.no_crop,
        num_heads=args.heads)
    written, failures = extract(config)
    log.info("extracted %d image(s) to %s", len(written), args.out)
    return 1 if failures else 0


def cmd_convert(args: argparse.Namespace) -> int:
    count, failures = convert(args.format, args.in_dir, args.out)
    log.info("wrote %d record(s) to %s", count, args.out)
    return 1 if failures else 0


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    args.parser_error = parser.error
    try:
        return args.func(args)
    except VitfeatError as exc:
        log.error("%s", exc)
        return 1
    except OSError as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
