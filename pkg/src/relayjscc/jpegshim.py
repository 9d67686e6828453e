"""Minimal image compressor CLI backed by Pillow, for machines without a
dedicated codec binary.

Quality levels 1..95 map to JPEG quality; level 96 switches to lossless PNG,
so a budget at or above the lossless size saturates reconstruction quality.

Usage:
    python3 -m relayjscc.jpegshim encode --input in.png --output out.bin --quality 80
    python3 -m relayjscc.jpegshim decode --input out.bin --output rec.png
"""

from __future__ import annotations

import argparse
import sys

from PIL import Image

QUALITY_MIN = 1
QUALITY_MAX = 96
LOSSLESS_QUALITY = 96


def encode(input_path: str, output_path: str, quality: int) -> None:
    if not QUALITY_MIN <= quality <= QUALITY_MAX:
        raise SystemExit(f"quality must be in [{QUALITY_MIN}, {QUALITY_MAX}], got {quality}")
    img = Image.open(input_path).convert("RGB")
    if quality == LOSSLESS_QUALITY:
        img.save(output_path, format="PNG", optimize=True)
    else:
        img.save(output_path, format="JPEG", quality=quality)


def decode(input_path: str, output_path: str) -> None:
    Image.open(input_path).convert("RGB").save(output_path, format="PNG")


def main(argv: list[str] | None = None) -> None:
    parser = argparse.ArgumentParser(prog="jpegshim", description=__doc__)
    sub = parser.add_subparsers(dest="verb", required=True)
    enc = sub.add_parser("encode")
    enc.add_argument("--input", required=True)
    enc.add_argument("--output", required=True)
    enc.add_argument("--quality", type=int, required=True)
    dec = sub.add_parser("decode")
    dec.add_argument("--input", required=True)
    dec.add_argument("--output", required=True)
    args = parser.parse_args(argv)
    if args.verb == "encode":
        encode(args.input, args.output, args.quality)
    else:
        decode(args.input, args.output)


if __name__ == "__main__":
    main(sys.argv[1:])
