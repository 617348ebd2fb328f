"""Entry point: serve a model over stdio or HTTP.

Examples:
    dfabeam-bridge --model stub --words "cat,politician,dot=." --stdio
    dfabeam-bridge --model hf:gpt2 --words "dog,frisbee" --port 8791
"""

from __future__ import annotations

import argparse
import sys

from .export import export_concept_table
from .models import load_model
from .server import DEFAULT_MAX_BATCH, Bridge, serve_http, serve_stdio


def parse_words(spec: str) -> dict[str, str]:
    """Comma separated words; NAME=WORD pairs name punctuation safely."""
    named: dict[str, str] = {}
    for item in filter(None, (part.strip() for part in spec.split(","))):
        name, _, word = item.partition("=")
        named[name] = word or name
    if not named:
        raise ValueError("no concepts given")
    return named


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="dfabeam-bridge")
    parser.add_argument("--model", default="stub",
                        help="stub | hf:NAME (default stub)")
    parser.add_argument("--words", required=True,
                        help="comma separated concepts, NAME=WORD allowed")
    parser.add_argument("--max-batch", type=int, default=DEFAULT_MAX_BATCH)
    mode = parser.add_mutually_exclusive_group(required=True)
    mode.add_argument("--stdio", action="store_true")
    mode.add_argument("--port", type=int)
    args = parser.parse_args(argv)

    named = parse_words(args.words)
    try:
        model = load_model(args.model, list(named.values()))
    except Exception as exc:
        # answer the handshake with an error payload before giving up
        print(f"model load failed: {exc}", file=sys.stderr)
        if args.stdio:
            import json
            sys.stdout.buffer.write(
                json.dumps({"id": None, "error": f"model load failed: {exc}"})
                .encode() + b"\n")
            sys.stdout.buffer.flush()
        return 1
    table = export_concept_table(model, named)
    bridge = Bridge(model, table, max_batch=args.max_batch)
    print(f"serving {args.model}: vocab {model.vocab_size}, "
          f"concepts {sorted(named)}", file=sys.stderr)
    if args.stdio:
        serve_stdio(bridge)
        return 0
    server = serve_http(bridge, args.port)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.shutdown()
    return 0


if __name__ == "__main__":
    sys.exit(main())
