"""CLI: vecextract --words PATH --model ID --layer 0 --out PATH."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .extract import EmptyTokenization, ExtractionRequest, UnknownModel, extract


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vecextract",
        description="Export decontextualized word vectors (subword means at "
                    "one hidden-state layer) in word2vec text format.",
    )
    parser.add_argument("--words", required=True,
                        help="text file, one word per line")
    parser.add_argument("--model", default="bert-base-uncased")
    parser.add_argument("--layer", type=int, default=0,
                        help="0 = embedding-layer output (default)")
    parser.add_argument("--revision", default=None,
                        help="model revision to pin (echoed into the output)")
    parser.add_argument("--batch-size", type=int, default=64)
    parser.add_argument("--out", required=True)
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    request = ExtractionRequest(
        words_path=args.words,
        output_path=args.out,
        model_id=args.model,
        layer=args.layer,
        revision=args.revision,
        batch_size=args.batch_size,
    )
    try:
        path = extract(request)
    except (UnknownModel, EmptyTokenization, ValueError, OSError) as e:
        print(json.dumps({"error": type(e).__name__, "message": str(e)}),
              file=sys.stderr)
        return 2
    print(json.dumps({"out": str(path)}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
