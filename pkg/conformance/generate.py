"""Regenerate the wire-protocol conformance vectors.

Run from the repository root: python3 conformance/generate.py
Writes frames.ndjson (one valid frame per line), messages.json (canonical
decoded form of each frame, same order) and malformed.ndjson (frame text
paired with the error code it must produce).
"""

import json
from pathlib import Path

import sys
sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from latticelm import protocol  # noqa: E402


def canonical(frame: bytes) -> dict:
    return json.loads(frame.decode("utf-8"))


def main():
    here = Path(__file__).resolve().parent
    msgs = [
        protocol.ScoreRequest(1, ("so", "does"), "it"),
        protocol.ScoreRequest(2, (), "so"),
        protocol.ScoreRequest(3, ("hello", "world"), "</s>", mems_id="m17"),
        protocol.BatchScoreRequest(4, ((("so",), "does"), ((), "sodas"))),
        protocol.BatchScoreRequest(5, ((("a1", "b2"), "</s>"),), common_mems_id="m0"),
        protocol.BatchScoreRequest(
            6, tuple((("w%d" % (i % 7),), "v%d" % i) for i in range(1024))),
        protocol.SaveMemsRequest(7, ("so", "does", "it")),
        protocol.SaveMemsRequest(8, (), mems_id="m3"),
        protocol.ScoreResponse(1, -1.25),
        protocol.ScoreResponse(2, -0.0078125),
        protocol.BatchScoreResponse(4, (-1.0, -2.5)),
        protocol.BatchScoreResponse(6, tuple(-0.001 * (i + 1) for i in range(1024))),
        protocol.SaveMemsResponse(7, "m42"),
        protocol.ErrorResponse(9, "unknown_mems", "unknown mems_id 'm99'"),
        protocol.ErrorResponse(None, "bad_request", "malformed JSON"),
    ]
    frames = [protocol.encode(m) for m in msgs]
    (here / "frames.ndjson").write_bytes(b"".join(frames))
    (here / "messages.json").write_text(
        json.dumps([canonical(f) for f in frames], indent=1, sort_keys=True) + "\n",
        encoding="utf-8")

    malformed = [
        ("not json at all", "bad_request"),
        ('{"type":"score","id":1,"context":[]}', "bad_request"),          # missing word
        ('{"type":"score","context":[],"word":"a"}', "bad_request"),      # missing id
        ('{"type":"nonsense","id":1}', "bad_request"),                    # wrong type tag
        ('{"type":"score","id":1,"context":["two words"],"word":"a"}', "bad_request"),
        ('{"type":"batch","id":2,"items":[]}', "bad_request"),            # empty batch
        ('{"type":"batch","id":2,"items":[{"context":[]}]}', "bad_request"),
        ('["a","list"]', "bad_request"),
        ('{"type":"save_mems","id":3}', "bad_request"),                   # missing context
        ('{"type":"score","id":"x","context":[],"word":"a"}', "bad_request"),
    ]
    (here / "malformed.ndjson").write_text(
        "".join(json.dumps({"frame": frame, "code": code}) + "\n"
                for frame, code in malformed),
        encoding="utf-8")
    print(f"wrote {len(frames)} frames, {len(malformed)} malformed cases")


if __name__ == "__main__":
    main()
