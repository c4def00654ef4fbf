"""Remote LmBackend over the wire protocol, batched prefetch, and session memory.

A session covers one conversation: utterances are rescored in order, and
after each one the best path is committed to the server as memory for the
next. Prefetch is all-or-nothing (a partial cache would poison strict
mode); the memory commit is best-effort.
"""

from __future__ import annotations

import socket
import time
from dataclasses import dataclass, field

from . import protocol
from .lattice import Lattice, Path
from .lm import (BOS, EOS, HistoryState, LmBackend, LmQuery, ScoreCache,
                 collect_queries)
from .protocol import (BatchScoreRequest, BatchScoreResponse, ErrorResponse,
                       SaveMemsRequest, SaveMemsResponse, ScoreRequest,
                       ScoreResponse)
from .symbols import SymbolTable

EOS_SENTINEL = protocol.EOS_SENTINEL


class RemoteError(ConnectionError):
    pass


@dataclass
class SessionState:
    session_id: str
    current_mems_id: str | None = None
    chain_mems: bool = True  # chain new memory onto the prior mems_id


class Connection:
    """One socket speaking newline-JSON frames, with connect retries."""

    def __init__(self, host: str, port: int, retries: int = 3, backoff: float = 0.2,
                 timeout: float = 30.0):
        self.host = host
        self.port = port
        self._next_id = 0
        last_error: Exception | None = None
        for attempt in range(retries):
            try:
                self._sock = socket.create_connection((host, port), timeout=timeout)
                break
            except OSError as e:
                last_error = e
                if attempt < retries - 1:
                    time.sleep(backoff * (2 ** attempt))
        else:
            raise RemoteError(
                f"cannot connect to {host}:{port} after {retries} attempts: {last_error}")
        self._rfile = self._sock.makefile("rb")

    def close(self):
        try:
            self._rfile.close()
            self._sock.close()
        except OSError:
            pass

    def fresh_id(self) -> int:
        self._next_id += 1
        return self._next_id

    def roundtrip(self, request):
        try:
            self._sock.sendall(protocol.encode(request))
            line = self._rfile.readline()
        except OSError as e:
            raise RemoteError(f"connection to {self.host}:{self.port} lost: {e}") from e
        if not line:
            raise RemoteError(f"connection to {self.host}:{self.port} closed by server")
        response = protocol.decode(line)
        if isinstance(response, ErrorResponse):
            raise RemoteError(f"server error {response.code}: {response.message}")
        if getattr(response, "id", None) != request.id:
            raise RemoteError(f"response id {getattr(response, 'id', None)} "
                              f"does not match request id {request.id}")
        return response


def _context_strings(history: HistoryState, symbols: SymbolTable) -> tuple[str, ...]:
    # BOS is dropped: the server prepends <s> itself. A history either still
    # starts with BOS or already holds order-1 real words, so the server-side
    # history is equivalent after n-gram truncation.
    return tuple(symbols.symbol(w) for w in history.words if w != BOS)


class RemoteBackend(LmBackend):
    def __init__(self, connection: Connection, symbols: SymbolTable,
                 session: SessionState | None = None):
        self.connection = connection
        self.symbols = symbols
        self.session = session

    def _mems_id(self) -> str | None:
        return self.session.current_mems_id if self.session else None

    def _score_word(self, history: HistoryState, word_str: str) -> float:
        req = ScoreRequest(self.connection.fresh_id(),
                           _context_strings(history, self.symbols),
                           word_str, self._mems_id())
        resp = self.connection.roundtrip(req)
        if not isinstance(resp, ScoreResponse):
            raise RemoteError(f"unexpected response {type(resp).__name__}")
        return resp.logprob

    def score(self, history: HistoryState, word: int) -> float:
        return self._score_word(history, self.symbols.symbol(word))

    def score_final(self, history: HistoryState) -> float:
        return self._score_word(history, EOS_SENTINEL)

    def session_commit(self, best_path_words: tuple[int, ...]) -> None:
        if self.session is not None:
            session_commit(Path(tuple(best_path_words), 0.0, 0.0),
                           self.connection, self.symbols, self.session)


def batch_prefetch(lat: Lattice, order: int, connection: Connection,
                   symbols: SymbolTable, session: SessionState | None = None,
                   max_batch: int = protocol.DEFAULT_MAX_BATCH) -> ScoreCache:
    """Collect every lattice query, fetch scores in batches, fill a strict cache.

    Any chunk failure fails the whole prefetch; no partial caches.
    """
    queries = sorted(collect_queries(lat, order),
                     key=lambda q: (q.history.words, q.word))
    cache = ScoreCache(strict=True)
    mems_id = session.current_mems_id if session else None
    for off in range(0, len(queries), max_batch):
        chunk = queries[off:off + max_batch]
        items = tuple(
            (_context_strings(q.history, symbols),
             EOS_SENTINEL if q.word == EOS else symbols.symbol(q.word))
            for q in chunk)
        req = BatchScoreRequest(connection.fresh_id(), items, mems_id)
        resp = connection.roundtrip(req)
        if not isinstance(resp, BatchScoreResponse):
            raise RemoteError(f"unexpected response {type(resp).__name__}")
        if len(resp.logprobs) != len(chunk):
            raise RemoteError("batch response length mismatch")
        for query, logprob in zip(chunk, resp.logprobs):
            cache.fill(query, logprob)
    return cache


def session_commit(best: Path, connection: Connection, symbols: SymbolTable,
                   session: SessionState) -> SessionState:
    """Save the best path as conversation memory; best-effort on failure."""
    words = tuple(symbols.symbol(w) for w in best.words)
    prior = session.current_mems_id if session.chain_mems else None
    try:
        resp = connection.roundtrip(
            SaveMemsRequest(connection.fresh_id(), words, prior))
        if not isinstance(resp, SaveMemsResponse):
            raise RemoteError(f"unexpected response {type(resp).__name__}")
        session.current_mems_id = resp.mems_id
    except RemoteError as e:
        import sys
        print(f"warning: memory commit failed, continuing without: {e}", file=sys.stderr)
    return session
