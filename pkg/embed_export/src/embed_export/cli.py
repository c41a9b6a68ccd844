"""Command line entry point: export-embeddings."""

from __future__ import annotations

import argparse
import sys

from .exporter import (
    DEFAULT_BATCH_SIZE,
    DEFAULT_DIM,
    ExportError,
    ExportJob,
    export_embeddings,
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="export-embeddings",
        description="Encode an annotated corpus with a pretrained "
        "sentence-embedding model and write the embedding table.",
    )
    parser.add_argument("--corpus", required=True, help="annotated corpus file")
    parser.add_argument(
        "--model", required=True, help="sentence-transformers checkpoint id or path"
    )
    parser.add_argument("--out", required=True, help="embedding table to write")
    parser.add_argument(
        "--dim",
        type=int,
        default=DEFAULT_DIM,
        help="expected embedding width (default %(default)s)",
    )
    parser.add_argument(
        "--batch",
        type=int,
        default=DEFAULT_BATCH_SIZE,
        help="sentences per inference batch (default %(default)s)",
    )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        job = ExportJob(
            args.corpus, args.model, args.out, dim=args.dim, batch_size=args.batch
        )
        count = export_embeddings(job)
    except (ExportError, OSError) as exc:
        print(f"export-embeddings: error: {exc}", file=sys.stderr)
        return 1
    print(
        f"export-embeddings: wrote {count} rows (dim={job.dim}) to {job.output_path}",
        file=sys.stderr,
    )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
