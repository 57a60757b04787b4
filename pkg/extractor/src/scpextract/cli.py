"""scpextract CLI: extract embeddings to SCPF, verify existing files."""

from __future__ import annotations

import argparse
import logging
import sys

from scpclust.errors import ScpError

from .backbones import available_backbones
from .errors import ExtractError
from .extract import ExtractJob, extract, verify


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scpextract",
        description="Extract frozen-backbone image embeddings into SCPF files",
    )
    parser.add_argument("--verbose", action="store_true", help="log progress to stdout")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="embed a dataset with a frozen backbone")
    p.add_argument("--data", required=True, help=".npz bundle or image directory")
    p.add_argument("--backbone", default="clip-vit-b32", choices=available_backbones())
    p.add_argument("--views", type=int, default=2, help="augmented views per image")
    p.add_argument("--no-clean", action="store_true", help="skip the clean view")
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--device", default="cpu")
    p.add_argument("--out", default="features.scpf")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(cmd="extract")

    p = sub.add_parser("verify", help="re-validate an SCPF file and print a summary")
    p.add_argument("path")
    p.set_defaults(cmd="verify")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stdout,
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.cmd == "extract":
            job = ExtractJob(
                data=args.data,
                backbone=args.backbone,
                n_aug_views=args.views,
                include_clean=not args.no_clean,
                batch_size=args.batch_size,
                device=args.device,
                out=args.out,
                seed=args.seed,
            )
            ds = extract(job)
            print(
                f"wrote {args.out}: n_items={ds.n_items} n_views={ds.n_views} dim={ds.dim}"
            )
            return 0
        verify(args.path)
        return 0
    except ExtractError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ScpError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
