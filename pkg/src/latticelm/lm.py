"""Deterministic on-demand LM contract and the n-gram history approximation.

An LM state is the last order-1 word ids seen (HistoryState); two states
with equal word sequences are the same LM state. collect_queries walks a
lattice and returns every (history, word) pair the rescorer will ask for,
so all scores can be fetched in one batch and served from a strict cache.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import arpa
from .lattice import EPSILON, Lattice
from .symbols import BOS_SYM, EOS_SYM, SymbolTable

# Reserved marker word ids inside HistoryState / LmQuery. Lattice word ids
# are non-negative (0 = epsilon), so negatives are safe sentinels.
BOS = -1
EOS = -2


@dataclass(frozen=True)
class HistoryState:
    words: tuple[int, ...]
    order: int

    @classmethod
    def initial(cls, order: int) -> "HistoryState":
        if order < 1:
            raise ValueError("order must be >= 1")
        return cls((BOS,), order)


def advance(h: HistoryState, word: int) -> HistoryState:
    """Append `word` and truncate from the left to order-1 words."""
    if word == EPSILON:
        raise ValueError("cannot advance history over epsilon")
    keep = h.order - 1
    words = (h.words + (word,))[-keep:] if keep > 0 else ()
    return HistoryState(words, h.order)


@dataclass(frozen=True)
class LmQuery:
    history: HistoryState
    word: int  # word id, or EOS for final-state queries


class LmBackend:
    """Deterministic scorer: equal (history, word) -> equal score.

    Scores are log probabilities in nats (finite, <= 0). The session hooks
    are no-ops for memoryless backends.
    """

    def score(self, history: HistoryState, word: int) -> float:
        raise NotImplementedError

    def score_final(self, history: HistoryState) -> float:
        raise NotImplementedError

    def session_begin(self, session_id: str) -> None:
        pass

    def session_commit(self, best_path_words: tuple[int, ...]) -> None:
        pass


class ArpaBackend(LmBackend):
    """Local reference backend over an ArpaModel."""

    def __init__(self, model: arpa.ArpaModel, symbols: SymbolTable):
        self.model = model
        self.symbols = symbols

    def _history_strings(self, history: HistoryState) -> list[str]:
        return [BOS_SYM if w == BOS else self.symbols.symbol(w) for w in history.words]

    def score(self, history: HistoryState, word: int) -> float:
        return arpa.logprob(self.model, self._history_strings(history), self.symbols.symbol(word))

    def score_final(self, history: HistoryState) -> float:
        return arpa.logprob(self.model, self._history_strings(history), EOS_SYM)


class CacheMissError(KeyError):
    def __init__(self, query: LmQuery):
        self.query = query
        super().__init__(f"strict cache miss for {query}")


class ScoreCache:
    """Query -> score map. In strict mode a miss is an error, never a fallback."""

    def __init__(self, strict: bool = True):
        self.strict = strict
        self._scores: dict[LmQuery, float] = {}
        self.misses = 0

    def fill(self, query: LmQuery, score: float) -> None:
        self._scores[query] = score

    def lookup(self, query: LmQuery) -> float | None:
        if query in self._scores:
            return self._scores[query]
        self.misses += 1
        if self.strict:
            raise CacheMissError(query)
        return None

    def __len__(self) -> int:
        return len(self._scores)

    def __contains__(self, query: LmQuery) -> bool:
        return query in self._scores


class CachedBackend(LmBackend):
    """Serves scores from a cache; delegates to `inner` only in non-strict mode."""

    def __init__(self, inner: LmBackend | None, cache: ScoreCache):
        self.inner = inner
        self.cache = cache

    def _get(self, query: LmQuery) -> float:
        score = self.cache.lookup(query)
        if score is None:
            if self.inner is None:
                raise CacheMissError(query)
            score = (self.inner.score_final(query.history) if query.word == EOS
                     else self.inner.score(query.history, query.word))
            self.cache.fill(query, score)
        return score

    def score(self, history: HistoryState, word: int) -> float:
        return self._get(LmQuery(history, word))

    def score_final(self, history: HistoryState) -> float:
        return self._get(LmQuery(history, EOS))


def collect_queries(lat: Lattice, order: int) -> set[LmQuery]:
    """Exactly the (history, word) pairs a rescore at this order will issue.

    Forward traversal over (lattice state, HistoryState) pairs; epsilon arcs
    pass the history through unchanged; every reachable final state adds an
    EOS query for its histories.
    """
    adj = lat.arcs_from()
    start = (lat.start, HistoryState.initial(order))
    seen = {start}
    stack = [start]
    queries: set[LmQuery] = set()
    while stack:
        state, hist = stack.pop()
        if state in lat.finals:
            queries.add(LmQuery(hist, EOS))
        for arc in adj[state]:
            if arc.word == EPSILON:
                nxt = (arc.dst, hist)
            else:
                queries.add(LmQuery(hist, arc.word))
                nxt = (arc.dst, advance(hist, arc.word))
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return queries
