"""CLI: export-embeddings --dataset data.jsonl --c 5 --out store.piem."""

from __future__ import annotations

import argparse
import sys

from .encoders import DEFAULT_MODEL
from .export import BridgeConfig, export_embeddings


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="export-embeddings",
        description="Export sentence embeddings for a dataset into a PIEM store",
    )
    parser.add_argument("--dataset", required=True, help="JSONL dataset path")
    parser.add_argument("--c", type=int, required=True, help="max candidates (pad target)")
    parser.add_argument("--out", required=True, help="output .piem path")
    parser.add_argument("--pad-token", default="[PAD]")
    parser.add_argument("--encoder", choices=["hf", "hashed"], default="hf")
    parser.add_argument("--model", default=DEFAULT_MODEL, help="encoder model id")
    parser.add_argument("--pool", choices=["mean", "first"], default="mean")
    parser.add_argument("--max-length", type=int, default=512)
    parser.add_argument("--dim", type=int, default=768, help="dimension for --encoder hashed")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    config = BridgeConfig(
        dataset=args.dataset,
        max_candidates=args.c,
        output=args.out,
        pad_token=args.pad_token,
        encoder=args.encoder,
        model_id=args.model,
        max_length=args.max_length,
        pooling=args.pool,
        dim=args.dim,
    )
    try:
        summary = export_embeddings(config)
    except (OSError, ValueError, RuntimeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(
        f"wrote {summary['keys']} vectors (dim {summary['dim']}) "
        f"for {summary['records']} records to {args.out}"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
