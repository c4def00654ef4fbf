"""Backoff n-gram language model: ARPA parsing, writing, exact scoring.

Log10 values from the ARPA file are kept as parsed; scores are returned in
nats (log10 * ln 10) so write/parse round-trips reproduce identical scores.
The standard `-99` convention marks entries that must never be predicted
(their backoff weight still applies).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .symbols import BOS_SYM, EOS_SYM, UNK

LN10 = math.log(10.0)
NEVER_PREDICT_LOG10 = -99.0


class ArpaFormatError(ValueError):
    pass


@dataclass
class ArpaModel:
    order: int
    # tables[n]: n-word tuple -> (log10 prob, log10 backoff or None)
    tables: dict[int, dict[tuple[str, ...], tuple[float, float | None]]]
    vocab: set[str] = field(default_factory=set)

    def __post_init__(self):
        if not self.vocab:
            self.vocab = {ng[0] for ng in self.tables.get(1, {})}


def parse_arpa(text: str) -> ArpaModel:
    lines = iter(enumerate(text.splitlines(), 1))
    counts: dict[int, int] = {}
    for lineno, line in lines:
        if line.strip() == "\\data\\":
            break
    else:
        raise ArpaFormatError("missing \\data\\ header")
    tables: dict[int, dict[tuple[str, ...], tuple[float, float | None]]] = {}
    section = None
    for lineno, line in lines:
        line = line.strip()
        if not line:
            continue
        if line.startswith("ngram "):
            try:
                n_str, count_str = line[len("ngram "):].split("=")
                counts[int(n_str)] = int(count_str)
            except ValueError:
                raise ArpaFormatError(f"line {lineno}: bad count line {line!r}") from None
        elif line.endswith("-grams:") and line.startswith("\\"):
            try:
                section = int(line[1:].split("-")[0])
            except ValueError:
                raise ArpaFormatError(f"line {lineno}: bad section header {line!r}") from None
            tables[section] = {}
        elif line == "\\end\\":
            section = None
            break
        else:
            if section is None:
                raise ArpaFormatError(f"line {lineno}: entry outside a section")
            fields = line.split()
            has_backoff = len(fields) == section + 2
            if not (has_backoff or len(fields) == section + 1):
                raise ArpaFormatError(f"line {lineno}: wrong field count for {section}-gram")
            try:
                logprob = float(fields[0])
                backoff = float(fields[-1]) if has_backoff else None
            except ValueError:
                raise ArpaFormatError(f"line {lineno}: non-numeric value") from None
            words = tuple(fields[1:section + 1])
            if words in tables[section]:
                raise ArpaFormatError(f"line {lineno}: duplicate {section}-gram {' '.join(words)}")
            tables[section][words] = (logprob, backoff)
    if not counts:
        raise ArpaFormatError("empty \\data\\ section")
    order = max(counts)
    for n, count in counts.items():
        if len(tables.get(n, {})) != count:
            raise ArpaFormatError(
                f"count mismatch for {n}-grams: header says {count}, "
                f"section has {len(tables.get(n, {}))}")
    for n in range(2, order + 1):
        for words in tables.get(n, {}):
            if words[:-1] not in tables[n - 1]:
                raise ArpaFormatError(
                    f"{n}-gram {' '.join(words)} has no {n - 1}-gram prefix")
    return ArpaModel(order, tables)


def write_arpa(model: ArpaModel) -> str:
    out = ["\\data\\\n"]
    for n in range(1, model.order + 1):
        out.append(f"ngram {n}={len(model.tables.get(n, {}))}\n")
    for n in range(1, model.order + 1):
        out.append(f"\n\\{n}-grams:\n")
        for words in sorted(model.tables.get(n, {})):
            logprob, backoff = model.tables[n][words]
            line = f"{format(logprob, '.17g')}\t{' '.join(words)}"
            if backoff is not None:
                line += f"\t{format(backoff, '.17g')}"
            out.append(line + "\n")
    out.append("\n\\end\\\n")
    return "".join(out)


def _map_oov(model: ArpaModel, word: str) -> str:
    return word if word in model.vocab else UNK


def logprob(model: ArpaModel, history: list[str], word: str) -> float:
    """Backoff score of `word` after `history`, in nats (<= 0).

    Unknown words map to <unk>; histories longer than order-1 are truncated
    to their last order-1 words.
    """
    w = _map_oov(model, word)
    h = tuple(_map_oov(model, x) for x in history[max(0, len(history) - (model.order - 1)):])
    return _score(model, h, w)


def _score(model: ArpaModel, h: tuple[str, ...], w: str) -> float:
    entry = model.tables.get(len(h) + 1, {}).get(h + (w,))
    if entry is not None:
        lp10 = entry[0]
        return -math.inf if lp10 <= NEVER_PREDICT_LOG10 else lp10 * LN10
    if not h:
        raise ArpaFormatError(f"no unigram for {w!r}")
    hist_entry = model.tables.get(len(h), {}).get(h)
    backoff10 = hist_entry[1] if hist_entry is not None and hist_entry[1] is not None else 0.0
    return backoff10 * LN10 + _score(model, h[1:], w)


def sentence_logprob(model: ArpaModel, words: list[str]) -> float:
    """Full left-to-right sentence score including the </s> term, in nats."""
    history = [BOS_SYM]
    total = 0.0
    for w in words:
        total += logprob(model, history, w)
        history.append(w)
    total += logprob(model, history, EOS_SYM)
    return total
