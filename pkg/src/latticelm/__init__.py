"""Second-pass word-lattice rescoring with an external language model."""

from .arpa import ArpaModel, logprob, parse_arpa, sentence_logprob, write_arpa
from .lattice import (Arc, CostPair, Lattice, Path, enumerate_paths,
                      parse_lattice, prune, validate, write_lattice)
from .lm import (BOS, EOS, ArpaBackend, CachedBackend, HistoryState, LmQuery,
                 ScoreCache, advance, collect_queries)
from .rescore import WerCounts, best_path, oracle_path, rescore, score_corpus, wer
from .symbols import SymbolTable, parse_symbols, write_symbols

__all__ = [
    "ArpaModel", "logprob", "parse_arpa", "sentence_logprob", "write_arpa",
    "Arc", "CostPair", "Lattice", "Path", "enumerate_paths", "parse_lattice",
    "prune", "validate", "write_lattice",
    "BOS", "EOS", "ArpaBackend", "CachedBackend", "HistoryState", "LmQuery",
    "ScoreCache", "advance", "collect_queries",
    "WerCounts", "best_path", "oracle_path", "rescore", "score_corpus", "wer",
    "SymbolTable", "parse_symbols", "write_symbols",
]
