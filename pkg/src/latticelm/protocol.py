"""Newline-delimited JSON message layer for remote LM scoring.

One message per frame: a UTF-8 JSON object terminated by LF. The `type`
field selects the message kind; unknown fields are ignored on decode and
key order is irrelevant. Words travel as strings (symbol translation is a
client duty); the EOS sentinel is the literal string "</s>".
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

EOS_SENTINEL = "</s>"

BAD_REQUEST = "bad_request"
UNKNOWN_MEMS = "unknown_mems"
BATCH_TOO_LARGE = "batch_too_large"

DEFAULT_MAX_BATCH = 1024


class ProtocolError(ValueError):
    def __init__(self, code: str, message: str, req_id: int | None = None):
        self.code = code
        self.message = message
        self.req_id = req_id
        super().__init__(f"{code}: {message}")


@dataclass(frozen=True)
class ScoreRequest:
    id: int
    context: tuple[str, ...]
    word: str
    mems_id: str | None = None


@dataclass(frozen=True)
class BatchScoreRequest:
    id: int
    items: tuple[tuple[tuple[str, ...], str], ...]  # (context, word) pairs
    common_mems_id: str | None = None


@dataclass(frozen=True)
class SaveMemsRequest:
    id: int
    context: tuple[str, ...]
    mems_id: str | None = None


@dataclass(frozen=True)
class ScoreResponse:
    id: int
    logprob: float


@dataclass(frozen=True)
class BatchScoreResponse:
    id: int
    logprobs: tuple[float, ...]


@dataclass(frozen=True)
class SaveMemsResponse:
    id: int
    mems_id: str


@dataclass(frozen=True)
class ErrorResponse:
    id: int | None
    code: str
    message: str = ""


Message = (ScoreRequest | BatchScoreRequest | SaveMemsRequest |
           ScoreResponse | BatchScoreResponse | SaveMemsResponse | ErrorResponse)


def _check_words(words, what: str) -> tuple[str, ...]:
    out = []
    for w in words:
        if not isinstance(w, str) or not w or any(c.isspace() for c in w):
            raise ProtocolError(BAD_REQUEST, f"bad word in {what}: {w!r}")
        out.append(w)
    return tuple(out)


def encode(msg: Message) -> bytes:
    if isinstance(msg, ScoreRequest):
        obj = {"type": "score", "id": msg.id, "context": list(msg.context), "word": msg.word}
        if msg.mems_id is not None:
            obj["mems_id"] = msg.mems_id
    elif isinstance(msg, BatchScoreRequest):
        obj = {"type": "batch", "id": msg.id,
               "items": [{"context": list(ctx), "word": w} for ctx, w in msg.items]}
        if msg.common_mems_id is not None:
            obj["common_mems_id"] = msg.common_mems_id
    elif isinstance(msg, SaveMemsRequest):
        obj = {"type": "save_mems", "id": msg.id, "context": list(msg.context)}
        if msg.mems_id is not None:
            obj["mems_id"] = msg.mems_id
    elif isinstance(msg, ScoreResponse):
        obj = {"type": "score_resp", "id": msg.id, "logprob": msg.logprob}
    elif isinstance(msg, BatchScoreResponse):
        obj = {"type": "batch_resp", "id": msg.id, "logprobs": list(msg.logprobs)}
    elif isinstance(msg, SaveMemsResponse):
        obj = {"type": "save_mems_resp", "id": msg.id, "mems_id": msg.mems_id}
    elif isinstance(msg, ErrorResponse):
        obj = {"type": "error", "id": msg.id, "code": msg.code, "message": msg.message}
    else:
        raise TypeError(f"not a protocol message: {msg!r}")
    return (json.dumps(obj, separators=(",", ":")) + "\n").encode("utf-8")


def _require(obj: dict, key: str, kinds, what: str):
    if key not in obj:
        raise ProtocolError(BAD_REQUEST, f"{what}: missing field {key!r}", obj.get("id"))
    val = obj[key]
    if not isinstance(val, kinds):
        raise ProtocolError(BAD_REQUEST, f"{what}: bad field {key!r}", obj.get("id"))
    return val


def decode(frame: bytes | str) -> Message:
    if isinstance(frame, bytes):
        frame = frame.decode("utf-8", errors="replace")
    try:
        obj = json.loads(frame)
    except json.JSONDecodeError as e:
        raise ProtocolError(BAD_REQUEST, f"malformed JSON: {e}") from None
    if not isinstance(obj, dict):
        raise ProtocolError(BAD_REQUEST, "frame is not a JSON object")
    mtype = obj.get("type")
    req_id = obj.get("id")
    if not isinstance(req_id, int) and mtype != "error":
        raise ProtocolError(BAD_REQUEST, "missing or non-integer id",
                            req_id if isinstance(req_id, int) else None)
    if mtype == "score":
        context = _check_words(_require(obj, "context", list, "score"), "context")
        word = _require(obj, "word", str, "score")
        mems_id = obj.get("mems_id")
        if mems_id is not None and not isinstance(mems_id, str):
            raise ProtocolError(BAD_REQUEST, "bad mems_id", req_id)
        return ScoreRequest(req_id, context, word, mems_id)
    if mtype == "batch":
        raw_items = _require(obj, "items", list, "batch")
        if not raw_items:
            raise ProtocolError(BAD_REQUEST, "batch items must be non-empty", req_id)
        items = []
        for it in raw_items:
            if not isinstance(it, dict):
                raise ProtocolError(BAD_REQUEST, "batch item is not an object", req_id)
            ctx = _check_words(_require(it, "context", list, "batch item"), "context")
            word = _require(it, "word", str, "batch item")
            items.append((ctx, word))
        mems_id = obj.get("common_mems_id")
        if mems_id is not None and not isinstance(mems_id, str):
            raise ProtocolError(BAD_REQUEST, "bad common_mems_id", req_id)
        return BatchScoreRequest(req_id, tuple(items), mems_id)
    if mtype == "save_mems":
        context = _check_words(_require(obj, "context", list, "save_mems"), "context")
        mems_id = obj.get("mems_id")
        if mems_id is not None and not isinstance(mems_id, str):
            raise ProtocolError(BAD_REQUEST, "bad mems_id", req_id)
        return SaveMemsRequest(req_id, context, mems_id)
    if mtype == "score_resp":
        return ScoreResponse(req_id, float(_require(obj, "logprob", (int, float), "score_resp")))
    if mtype == "batch_resp":
        logprobs = _require(obj, "logprobs", list, "batch_resp")
        if not all(isinstance(x, (int, float)) for x in logprobs):
            raise ProtocolError(BAD_REQUEST, "non-numeric logprob", req_id)
        return BatchScoreResponse(req_id, tuple(float(x) for x in logprobs))
    if mtype == "save_mems_resp":
        return SaveMemsResponse(req_id, _require(obj, "mems_id", str, "save_mems_resp"))
    if mtype == "error":
        return ErrorResponse(req_id if isinstance(req_id, int) else None,
                             _require(obj, "code", str, "error"),
                             obj.get("message", ""))
    raise ProtocolError(BAD_REQUEST, f"unknown type tag {mtype!r}", req_id)
