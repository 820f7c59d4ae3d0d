import json

import pytest

from genlevel.corpus import PiiRecord, SemanticType, SemanticTypeRegistry

TABLE_TEXT = (
    "The person (born August 22, 1935) is a Canadian lawyer and former Senator."
)


@pytest.fixture
def registry():
    return SemanticTypeRegistry()


@pytest.fixture
def datetime_record(registry):
    """The running example: a DATETIME span with three candidates,
    annotators picked level 2."""
    return PiiRecord(
        id="rec1",
        text=TABLE_TEXT,
        span_start=17,
        span_end=32,
        span_text="August 22, 1935",
        semantic_type=SemanticType("DATETIME", registry.code("DATETIME")),
        candidates=("1935", "date in 1930s", "***"),
        majority_level=2,
        all_levels=frozenset({2}),
    )


def record_obj(
    rid="r1",
    text="Alice went home.",
    span=(0, 5),
    span_text="Alice",
    semantic_type="PERSON",
    candidates=("A.", "somebody"),
    majority_level=1,
    all_levels=(1,),
):
    return {
        "id": rid,
        "text": text,
        "span_start": span[0],
        "span_end": span[1],
        "span_text": span_text,
        "semantic_type": semantic_type,
        "candidates": list(candidates),
        "majority_level": majority_level,
        "all_levels": list(all_levels),
    }


def write_jsonl(path, objs):
    with open(path, "w", encoding="utf-8") as fh:
        for obj in objs:
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")
    return path


@pytest.fixture
def dataset_file(tmp_path, datetime_record):
    objs = [
        datetime_record.to_json_obj(),
        record_obj(),
        record_obj(
            rid="r2",
            text="Bob was born in 1990 in Oslo.",
            span=(16, 20),
            span_text="1990",
            semantic_type="DATETIME",
            candidates=("the 1990s", "***", "a year", "long ago"),
            majority_level=3,
            all_levels=(1, 3),
        ),
    ]
    return write_jsonl(tmp_path / "data.jsonl", objs)
