"""Command line for checkpoint conversion and image preprocessing."""

from __future__ import annotations

import argparse
import logging
import sys

from .convert import convert_weights
from .names import GEOMETRIES
from .preprocess import attach_reference_checkpoint, preprocess_images


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="deit-export", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="state dict -> portable weight file")
    p.add_argument("--checkpoint", required=True, help="torch checkpoint path")
    p.add_argument("--preset", required=True, choices=sorted(GEOMETRIES))
    p.add_argument("--out", required=True, help="output .vpkw path")

    p = sub.add_parser("preprocess", help="images -> tensors + manifest + references")
    p.add_argument("--images", required=True, help="directory of image files")
    p.add_argument("--labels", required=True, help='CSV of "filename,label"')
    p.add_argument("--preset", required=True, choices=sorted(GEOMETRIES))
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--count", type=int, default=None, help="limit image count")
    p.add_argument("--checkpoint", default=None,
                   help="source checkpoint for reference predictions")

    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    try:
        if args.command == "convert":
            out = convert_weights(args.checkpoint, args.preset, args.out)
            print(f"wrote {out}")
        else:
            if args.checkpoint:
                attach_reference_checkpoint(args.checkpoint, args.out)
            manifest = preprocess_images(args.images, args.labels, args.preset,
                                         args.out, count=args.count)
            print(f"wrote {manifest}")
        return 0
    except Exception as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
