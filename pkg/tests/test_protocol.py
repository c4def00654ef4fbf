import json
from pathlib import Path

import pytest

from latticelm.protocol import (BAD_REQUEST, BatchScoreRequest,
                                BatchScoreResponse, ErrorResponse,
                                ProtocolError, SaveMemsRequest,
                                SaveMemsResponse, ScoreRequest, ScoreResponse,
                                decode, encode)

VECTOR_DIR = Path(__file__).resolve().parent.parent / "conformance"

ALL_KINDS = [
    ScoreRequest(1, ("so", "does"), "it"),
    ScoreRequest(2, (), "</s>", mems_id="m3"),
    BatchScoreRequest(3, ((("a",), "b"), ((), "c")), common_mems_id="m0"),
    SaveMemsRequest(4, ("x", "y")),
    SaveMemsRequest(5, ()),
    ScoreResponse(1, -2.5),
    BatchScoreResponse(3, (-1.0, -0.125)),
    SaveMemsResponse(4, "m9"),
    ErrorResponse(7, "unknown_mems", "no such id"),
    ErrorResponse(None, "bad_request", "oops"),
]


@pytest.mark.parametrize("msg", ALL_KINDS, ids=lambda m: type(m).__name__)
def test_roundtrip_every_kind(msg):
    assert decode(encode(msg)) == msg


def test_frames_are_single_json_lines():
    for msg in ALL_KINDS:
        frame = encode(msg)
        assert frame.endswith(b"\n")
        assert b"\n" not in frame[:-1]
        json.loads(frame)


def test_missing_word_is_bad_request():
    with pytest.raises(ProtocolError) as err:
        decode(b'{"type":"score","id":1,"context":["a"]}\n')
    assert err.value.code == BAD_REQUEST


def test_unknown_type_tag_is_bad_request():
    with pytest.raises(ProtocolError) as err:
        decode(b'{"type":"wat","id":1}\n')
    assert err.value.code == BAD_REQUEST


def test_malformed_json_is_bad_request():
    with pytest.raises(ProtocolError) as err:
        decode(b"{nope\n")
    assert err.value.code == BAD_REQUEST


def test_unknown_fields_ignored_and_key_order_irrelevant():
    frame = b'{"word":"it","extra":42,"id":9,"type":"score","context":[]}\n'
    assert decode(frame) == ScoreRequest(9, (), "it")


def test_whitespace_word_rejected():
    with pytest.raises(ProtocolError):
        decode(b'{"type":"score","id":1,"context":["two words"],"word":"a"}\n')


def test_big_batch_order_preserved():
    items = tuple(((f"w{i}",), f"v{i}") for i in range(1024))
    msg = BatchScoreRequest(1, items)
    decoded = decode(encode(msg))
    assert decoded.items == items
    resp = BatchScoreResponse(1, tuple(-float(i + 1) for i in range(1024)))
    assert decode(encode(resp)) == resp


def test_conformance_frames_decode_to_messages():
    frames = (VECTOR_DIR / "frames.ndjson").read_bytes().splitlines(keepends=True)
    canonical = json.loads((VECTOR_DIR / "messages.json").read_text())
    assert len(frames) == len(canonical)
    for frame, expected in zip(frames, canonical):
        msg = decode(frame)
        # re-encode and compare as canonical JSON objects
        assert json.loads(encode(msg)) == expected
        assert decode(encode(msg)) == msg


def test_conformance_malformed_codes():
    for line in (VECTOR_DIR / "malformed.ndjson").read_text().splitlines():
        case = json.loads(line)
        with pytest.raises(ProtocolError) as err:
            decode(case["frame"].encode("utf-8") + b"\n")
        assert err.value.code == case["code"]
