#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
"""Convert a NumGLUE split into the harness dataset format.

Input is either JSON lines or a single JSON array of objects. Records that
carry a "type" field are kept only when it matches --type (default Type_2).
Each output line is {"id", "question", "answer"}; ids come from an "id" field
when present, otherwise "<prefix><index>" in input order.

    python3 tools/convert_numglue.py NumGLUE_test.json -o task2_test.jsonl
"""

import argparse
import json
import sys

QUESTION_KEYS = ("question", "Question", "problem")
ANSWER_KEYS = ("answer", "Answer", "label")


def read_records(text):
    text = text.strip()
    if not text:
        return []
    if text.startswith("["):
        return json.loads(text)
    return [json.loads(line) for line in text.splitlines() if line.strip()]


def first(record, keys):
    for key in keys:
        if key in record:
            return record[key]
    return None


def normalize_answer(value):
    """Numbers stay numbers; "148 grams" stays a string for the loader to split."""
    if isinstance(value, (int, float)):
        return value
    if isinstance(value, dict) and "number" in value:
        # DROP-style answer object
        text = str(value["number"]).strip()
    else:
        text = str(value).strip()
    try:
        number = float(text.replace(",", ""))
    except ValueError:
        return text
    return int(number) if number.is_integer() and "." not in text else number


def convert(records, wanted_type, prefix):
    out = []
    seen = set()
    for index, record in enumerate(records):
        kind = record.get("type")
        if kind is not None and wanted_type and str(kind) != wanted_type:
            continue
        question = first(record, QUESTION_KEYS)
        answer = first(record, ANSWER_KEYS)
        if question is None or answer is None:
            raise ValueError(f"record {index}: no question or answer field")
        item_id = str(record.get("id", f"{prefix}{len(out) + 1:04d}"))
        if item_id in seen:
            raise ValueError(f"record {index}: duplicate id {item_id}")
        seen.add(item_id)
        out.append({"id": item_id, "question": str(question).strip(), "answer": normalize_answer(answer)})
    return out


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("input", help="NumGLUE file (JSON lines or JSON array), '-' for stdin")
    parser.add_argument("-o", "--output", help="output file (default stdout)")
    parser.add_argument("--type", default="Type_2", help="keep records of this type; empty keeps all")
    parser.add_argument("--id-prefix", default="t2-", help="prefix for generated ids")
    args = parser.parse_args(argv)

    if args.input == "-":
        text = sys.stdin.read()
    else:
        with open(args.input, encoding="utf-8") as f:
            text = f.read()
    items = convert(read_records(text), args.type, args.id_prefix)

    lines = "".join(json.dumps(item, ensure_ascii=False) + "\n" for item in items)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as f:
            f.write(lines)
    else:
        sys.stdout.write(lines)
    print(f"{len(items)} items", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
