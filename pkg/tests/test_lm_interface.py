import random

import pytest

from latticelm.fixtures import fixture_lattice, random_lattice
from latticelm.lm import (BOS, EOS, ArpaBackend, CacheMissError, CachedBackend,
                          HistoryState, LmBackend, LmQuery, ScoreCache,
                          advance, collect_queries)
from latticelm.rescore import rescore


class RecordingBackend(LmBackend):
    """Wraps another backend and records every query issued."""

    def __init__(self, inner):
        self.inner = inner
        self.queries = set()

    def score(self, history, word):
        self.queries.add(LmQuery(history, word))
        return self.inner.score(history, word)

    def score_final(self, history):
        self.queries.add(LmQuery(history, EOS))
        return self.inner.score_final(history)


def test_initial_state():
    h = HistoryState.initial(3)
    assert h.words == (BOS,)
    assert h.order == 3


def test_advance_order3(symbols):
    so, does = symbols.lookup("so"), symbols.lookup("does")
    h = HistoryState.initial(3)
    h = advance(h, so)
    assert h.words == (BOS, so)
    h = advance(h, does)
    assert h.words == (so, does)


def test_advance_order2_single_word():
    h = HistoryState.initial(2)
    for word in (2, 3, 4, 5, 2):
        h = advance(h, word)
        assert h.words == (word,)


def test_advance_rejects_epsilon():
    with pytest.raises(ValueError):
        advance(HistoryState.initial(3), 0)


def test_large_order_keeps_full_prefix():
    h = HistoryState.initial(50)
    words = [2, 3, 4, 5, 2, 3]
    for w in words:
        h = advance(h, w)
    assert h.words == (BOS, *words)


def test_advance_depends_only_on_suffix():
    # two histories sharing their last order-2 words converge after 2 advances
    rng = random.Random(11)
    vocab = [2, 3, 4, 5]
    for _ in range(200):
        order = rng.randint(2, 5)
        a, b = rng.choice(vocab), rng.choice(vocab)
        shared = tuple(rng.choice(vocab) for _ in range(max(0, order - 2)))
        prefix1 = tuple(rng.choice(vocab) for _ in range(rng.randint(0, 3)))
        prefix2 = tuple(rng.choice(vocab) for _ in range(rng.randint(0, 3)))
        h1 = HistoryState(((BOS,) + prefix1 + shared)[-(order - 1):], order)
        h2 = HistoryState(((BOS,) + prefix2 + shared)[-(order - 1):], order)
        assert advance(advance(h1, a), b) == advance(advance(h2, a), b)


def test_collect_queries_fixture(symbols):
    so, does, sodas = (symbols.lookup(w) for w in ("so", "does", "sodas"))
    queries = collect_queries(fixture_lattice(), 3)
    init = HistoryState.initial(3)
    expected = {
        LmQuery(init, so),
        LmQuery(init, sodas),
        LmQuery(advance(init, so), does),
        LmQuery(advance(advance(init, so), does), EOS),
        LmQuery(advance(init, sodas), EOS),
    }
    assert queries == expected


def test_collect_queries_linear_chain():
    from latticelm.lattice import Arc, CostPair, Lattice
    words = [2, 3, 4, 5, 2]
    arcs = tuple(Arc(i, i + 1, w, CostPair(0, 1)) for i, w in enumerate(words))
    lat = Lattice("chain", len(words) + 1, arcs, {len(words): CostPair(0, 0)})
    queries = collect_queries(lat, 3)
    assert len(queries) == len(words) + 1
    assert sum(q.word == EOS for q in queries) == 1


def test_collect_matches_instrumented_rescore(rng, model4, symbols):
    for i in range(40):
        lat = random_lattice(rng, f"u{i}")
        order = rng.choice([2, 3, 4])
        recorder = RecordingBackend(ArpaBackend(model4, symbols))
        rescore(lat, recorder, order)
        assert recorder.queries == collect_queries(lat, order)


def test_strict_cache_prefill_no_misses(rng, model4, symbols):
    backend = ArpaBackend(model4, symbols)
    for i in range(20):
        lat = random_lattice(rng, f"u{i}")
        cache = ScoreCache(strict=True)
        for q in collect_queries(lat, 3):
            score = (backend.score_final(q.history) if q.word == EOS
                     else backend.score(q.history, q.word))
            cache.fill(q, score)
        rescore(lat, CachedBackend(None, cache), 3)
        assert cache.misses == 0


def test_strict_cache_miss_errors():
    cache = ScoreCache(strict=True)
    backend = CachedBackend(None, cache)
    with pytest.raises(CacheMissError):
        backend.score(HistoryState.initial(3), 2)


def test_non_strict_cache_is_transparent(rng, model4, symbols):
    bare = ArpaBackend(model4, symbols)
    cached = CachedBackend(ArpaBackend(model4, symbols), ScoreCache(strict=False))
    for i in range(10):
        lat = random_lattice(rng, f"u{i}")
        from latticelm.lattice import write_lattice
        assert write_lattice(rescore(lat, cached, 3)) == write_lattice(rescore(lat, bare, 3))


def test_non_strict_cache_memoizes(model4, symbols):
    cache = ScoreCache(strict=False)
    backend = CachedBackend(ArpaBackend(model4, symbols), cache)
    h = HistoryState.initial(3)
    first = backend.score(h, 2)
    assert len(cache) == 1
    assert backend.score(h, 2) == first
    assert cache.misses == 1
