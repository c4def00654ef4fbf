"""Reference LM scoring server backed by an ARPA model.

Speaks the newline-JSON wire protocol over TCP. Conversation memory is a
server-side LRU map from opaque mems_id to a stored word suffix; scoring
prepends <s> to (stored ++ request context) so the stored words behave as
preceding conversation context.
"""

from __future__ import annotations

import json
import socketserver
import sys
import threading
import time
from collections import OrderedDict

from . import arpa, protocol
from .protocol import (BATCH_TOO_LARGE, EOS_SENTINEL, UNKNOWN_MEMS,
                       BatchScoreRequest, BatchScoreResponse, ErrorResponse,
                       ProtocolError, SaveMemsRequest, SaveMemsResponse,
                       ScoreRequest, ScoreResponse)
from .symbols import BOS_SYM

DEFAULT_CAPACITY = 1024
DEFAULT_MEM_LEN = 256


class MemsStore:
    """LRU map mems_id -> stored context words; ids are never reused."""

    def __init__(self, capacity: int = DEFAULT_CAPACITY, mem_len: int = DEFAULT_MEM_LEN):
        self.capacity = capacity
        self.mem_len = mem_len
        self._store: OrderedDict[str, tuple[str, ...]] = OrderedDict()
        self._next_id = 0
        self._lock = threading.Lock()

    def get(self, mems_id: str) -> tuple[str, ...] | None:
        with self._lock:
            if mems_id not in self._store:
                return None
            self._store.move_to_end(mems_id)
            return self._store[mems_id]

    def save(self, context: tuple[str, ...], prior: tuple[str, ...]) -> str:
        stored = (prior + context)[-self.mem_len:] if self.mem_len > 0 else ()
        with self._lock:
            mems_id = f"m{self._next_id}"
            self._next_id += 1
            self._store[mems_id] = stored
            while len(self._store) > self.capacity:
                self._store.popitem(last=False)
            return mems_id


def _resolve_mems(store: MemsStore, mems_id: str | None, req_id: int) -> tuple[str, ...]:
    if mems_id is None:
        return ()
    stored = store.get(mems_id)
    if stored is None:
        raise ProtocolError(UNKNOWN_MEMS, f"unknown mems_id {mems_id!r}", req_id)
    return stored


def _score_one(model: arpa.ArpaModel, prefix: tuple[str, ...],
               context: tuple[str, ...], word: str) -> float:
    history = [BOS_SYM, *prefix, *context]
    return arpa.logprob(model, history, EOS_SENTINEL if word == EOS_SENTINEL else word)


def handle_score(req: ScoreRequest, store: MemsStore, model: arpa.ArpaModel) -> ScoreResponse:
    prefix = _resolve_mems(store, req.mems_id, req.id)
    return ScoreResponse(req.id, _score_one(model, prefix, req.context, req.word))


def handle_batch(req: BatchScoreRequest, store: MemsStore, model: arpa.ArpaModel,
                 max_batch: int = protocol.DEFAULT_MAX_BATCH) -> BatchScoreResponse:
    if len(req.items) > max_batch:
        raise ProtocolError(BATCH_TOO_LARGE,
                            f"batch of {len(req.items)} exceeds max {max_batch}", req.id)
    prefix = _resolve_mems(store, req.common_mems_id, req.id)
    logprobs = tuple(_score_one(model, prefix, ctx, word) for ctx, word in req.items)
    return BatchScoreResponse(req.id, logprobs)


def handle_save_mems(req: SaveMemsRequest, store: MemsStore) -> SaveMemsResponse:
    prior = _resolve_mems(store, req.mems_id, req.id)
    return SaveMemsResponse(req.id, store.save(req.context, prior))


class LmServer:
    """Threaded TCP server; one frame in, one frame out, per request."""

    def __init__(self, model: arpa.ArpaModel, host: str = "127.0.0.1", port: int = 0,
                 capacity: int = DEFAULT_CAPACITY, mem_len: int = DEFAULT_MEM_LEN,
                 max_batch: int = protocol.DEFAULT_MAX_BATCH, log_stream=None):
        self.model = model
        self.store = MemsStore(capacity, mem_len)
        self.max_batch = max_batch
        self.log_stream = log_stream if log_stream is not None else sys.stderr
        outer = self

        class Handler(socketserver.StreamRequestHandler):
            def handle(self):
                for line in self.rfile:
                    if not line.strip():
                        continue
                    response = outer.dispatch(line)
                    try:
                        self.wfile.write(protocol.encode(response))
                        self.wfile.flush()
                    except (BrokenPipeError, ConnectionResetError):
                        return

        class Server(socketserver.ThreadingTCPServer):
            allow_reuse_address = True
            daemon_threads = True

        self._tcp = Server((host, port), Handler)
        self.address = self._tcp.server_address

    def dispatch(self, frame: bytes):
        start = time.perf_counter()
        batch_size = 1
        try:
            msg = protocol.decode(frame)
            if isinstance(msg, ScoreRequest):
                method = "score"
                resp = handle_score(msg, self.store, self.model)
            elif isinstance(msg, BatchScoreRequest):
                method = "batch"
                batch_size = len(msg.items)
                resp = handle_batch(msg, self.store, self.model, self.max_batch)
            elif isinstance(msg, SaveMemsRequest):
                method = "save_mems"
                resp = handle_save_mems(msg, self.store)
            else:
                raise ProtocolError(protocol.BAD_REQUEST,
                                    f"unexpected message {type(msg).__name__}",
                                    getattr(msg, "id", None))
        except ProtocolError as e:
            method = "error"
            resp = ErrorResponse(e.req_id, e.code, e.message)
        latency_us = int((time.perf_counter() - start) * 1e6)
        print(json.dumps({"method": method, "batch_size": batch_size,
                          "latency_us": latency_us}), file=self.log_stream, flush=True)
        return resp

    def serve_forever(self):
        self._serving = True
        self._tcp.serve_forever(poll_interval=0.05)

    def start_background(self) -> threading.Thread:
        thread = threading.Thread(target=self.serve_forever, daemon=True)
        thread.start()
        return thread

    def shutdown(self):
        if getattr(self, "_serving", False):
            self._tcp.shutdown()
        self._tcp.server_close()


def serve(model_path: str, host: str, port: int, capacity: int, mem_len: int,
          max_batch: int) -> int:
    """Blocking entry point used by the CLI `serve` subcommand."""
    import signal

    try:
        with open(model_path, encoding="utf-8") as f:
            model = arpa.parse_arpa(f.read())
    except (OSError, arpa.ArpaFormatError) as e:
        print(f"model load failed: {e}", file=sys.stderr)
        return 2
    try:
        server = LmServer(model, host, port, capacity, mem_len, max_batch)
    except OSError as e:
        print(f"bind failed on {host}:{port}: {e}", file=sys.stderr)
        return 3

    def stop(signum, frame):
        threading.Thread(target=server.shutdown, daemon=True).start()

    signal.signal(signal.SIGINT, stop)
    signal.signal(signal.SIGTERM, stop)
    print(f"listening on {server.address[0]}:{server.address[1]}", file=sys.stderr)
    server.serve_forever()
    return 0
