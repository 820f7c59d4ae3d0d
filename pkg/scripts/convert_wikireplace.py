#!/usr/bin/env python3
"""Convert a WikiReplace-style export into the JSON Lines schema this
toolkit loads.

The source data ships in varying shapes (JSON array or JSONL, differing
field names), so every field name is a flag. Defaults assume one object per
record with the original passage, character offsets for the annotated span,
an ordered candidate list, and the aggregated annotator selections:

    python3 scripts/convert_wikireplace.py source.json out.jsonl \
        --text-field text --span-start-field span_start \
        --span-end-field span_end --candidates-field candidates \
        --majority-field selected_level --all-field all_selected_levels

Records failing validation (span/offset mismatch, out-of-range levels) are
reported and skipped unless --strict is given. Offsets in the source are
assumed to be character (code point) offsets; pass --byte-offsets when the
source counted UTF-8 bytes and they will be converted.
"""

import argparse
import json
import sys

sys.path.insert(0, "src")

from genlevel.corpus import DatasetError, SemanticTypeRegistry, record_from_obj


def iter_source(path):
    with open(path, encoding="utf-8") as fh:
        head = fh.read(1)
        fh.seek(0)
        if head == "[":
            yield from json.load(fh)
        else:
            for line in fh:
                if line.strip():
                    yield json.loads(line)


def byte_to_char_offset(text: str, byte_offset: int) -> int:
    return len(text.encode("utf-8")[:byte_offset].decode("utf-8", errors="ignore"))


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("source")
    ap.add_argument("output")
    ap.add_argument("--id-field", default="id")
    ap.add_argument("--text-field", default="text")
    ap.add_argument("--span-start-field", default="span_start")
    ap.add_argument("--span-end-field", default="span_end")
    ap.add_argument("--span-text-field", default="span_text")
    ap.add_argument("--semantic-type-field", default="semantic_type")
    ap.add_argument("--candidates-field", default="candidates")
    ap.add_argument("--majority-field", default="selected_level")
    ap.add_argument("--all-field", default="all_selected_levels")
    ap.add_argument("--byte-offsets", action="store_true",
                    help="source offsets count UTF-8 bytes, not characters")
    ap.add_argument("--strict", action="store_true",
                    help="abort on the first invalid record")
    args = ap.parse_args()

    registry = SemanticTypeRegistry()
    written = 0
    skipped = 0
    with open(args.output, "w", encoding="utf-8") as out:
        for i, src in enumerate(iter_source(args.source)):
            text = src[args.text_field]
            start = src[args.span_start_field]
            end = src[args.span_end_field]
            if args.byte_offsets:
                start = byte_to_char_offset(text, start)
                end = byte_to_char_offset(text, end)
            span_text = src.get(args.span_text_field) or text[start:end]
            all_levels = src.get(args.all_field) or [src[args.majority_field]]
            obj = {
                "id": str(src.get(args.id_field, f"wr{i:06d}")),
                "text": text,
                "span_start": start,
                "span_end": end,
                "span_text": span_text,
                "semantic_type": str(src.get(args.semantic_type_field, "MISC")),
                "candidates": list(src[args.candidates_field]),
                "majority_level": int(src[args.majority_field]),
                "all_levels": sorted({int(v) for v in all_levels}),
            }
            try:
                record_from_obj(obj, registry)
            except DatasetError as exc:
                if args.strict:
                    print(f"error: {exc}", file=sys.stderr)
                    return 1
                print(f"skipping record {i}: {exc}", file=sys.stderr)
                skipped += 1
                continue
            out.write(json.dumps(obj, ensure_ascii=False) + "\n")
            written += 1
    print(f"wrote {written} records, skipped {skipped}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
