"""Fixture corpus: tiny hand-checkable LM, demo lattice, random lattices.

The fixture LM uses add-one smoothing over a two-sentence corpus so every
probability is an exact fraction that can be recomputed by hand. Random
lattices are layered DAGs with a guaranteed backbone path, stamped with LM
costs by rescoring against the fixture ARPA model.
"""

from __future__ import annotations

import math
import random
from pathlib import Path as FsPath

from . import arpa, lattice
from .rescore import best_path, rescore as rescore_lattice
from .arpa import ArpaModel
from .lattice import Arc, CostPair, Lattice
from .lm import ArpaBackend
from .symbols import BOS_SYM, EOS_SYM, UNK, SymbolTable, parse_symbols, write_symbols

FIXTURE_CORPUS = [["so", "does", "it"], ["sodas", "it"]]

FIXTURE_SYMBOLS_TEXT = """\
<eps> 0
<unk> 1
so 2
does 3
it 4
sodas 5
"""


def fixture_symbols() -> SymbolTable:
    return parse_symbols(FIXTURE_SYMBOLS_TEXT)


def build_addone_arpa(sentences: list[list[str]], order: int,
                      extra_vocab: tuple[str, ...] = ()) -> ArpaModel:
    """Add-one smoothed backoff model; exactly normalized by construction.

    Listed n-grams get p = (count+1) / (context count + V); backoff weights
    absorb the remaining mass against the lower-order distribution.
    """
    pred_vocab = sorted({w for s in sentences for w in s} | {UNK, EOS_SYM} | set(extra_vocab))
    V = len(pred_vocab)
    padded = [[BOS_SYM, *s, EOS_SYM] for s in sentences]
    # unigrams over words + </s> (never <s>)
    uni_counts = {w: 0 for w in pred_vocab}
    for seq in padded:
        for w in seq[1:]:
            uni_counts[w] += 1
    total = sum(uni_counts.values())
    tables: dict[int, dict[tuple[str, ...], tuple[float, float | None]]] = {1: {}}
    for w in pred_vocab:
        tables[1][(w,)] = (math.log10((uni_counts[w] + 1) / (total + V)), None)
    tables[1][(BOS_SYM,)] = (arpa.NEVER_PREDICT_LOG10, None)
    model = ArpaModel(1, tables, set(pred_vocab) | {BOS_SYM})

    for n in range(2, order + 1):
        ngram_counts: dict[tuple[str, ...], int] = {}
        ctx_counts: dict[tuple[str, ...], int] = {}
        for seq in padded:
            for i in range(len(seq) - n + 1):
                gram = tuple(seq[i:i + n])
                ngram_counts[gram] = ngram_counts.get(gram, 0) + 1
                ctx_counts[gram[:-1]] = ctx_counts.get(gram[:-1], 0) + 1
        tables[n] = {}
        for gram, count in ngram_counts.items():
            p = (count + 1) / (ctx_counts[gram[:-1]] + V)
            tables[n][gram] = (math.log10(p), None)
        # backoff weights on the (n-1)-gram contexts that have continuations
        for ctx in ctx_counts:
            listed = [g[-1] for g in ngram_counts if g[:-1] == ctx]
            mass = sum((ngram_counts[ctx + (w,)] + 1) / (ctx_counts[ctx] + V) for w in listed)
            lower_mass = sum(
                math.exp(arpa.logprob(model, list(ctx[1:]), w)) for w in listed)
            bow10 = math.log10((1.0 - mass) / (1.0 - lower_mass))
            lp10, _ = tables[n - 1][ctx]
            tables[n - 1][ctx] = (lp10, bow10)
        model = ArpaModel(n, tables, model.vocab)
    return model


def fixture_arpa(order: int = 2) -> ArpaModel:
    return build_addone_arpa(FIXTURE_CORPUS, order)


def fixture_lattice() -> Lattice:
    """The "so does" vs "sodas" diamond: 3 arcs, one final state."""
    symbols = fixture_symbols()
    so, does, sodas = symbols.lookup("so"), symbols.lookup("does"), symbols.lookup("sodas")
    return Lattice(
        "sodas-utt", 3,
        (Arc(0, 1, so, CostPair(0.5, 1.0)),
         Arc(1, 2, does, CostPair(0.5, 1.0)),
         Arc(0, 2, sodas, CostPair(0.5, 2.3))),
        {2: CostPair(0.0, 0.2)},
    )


def random_lattice(rng: random.Random, utt_id: str, num_states: int | None = None,
                   word_ids: tuple[int, ...] = (2, 3, 4, 5), extra_arcs: int | None = None,
                   eps_prob: float = 0.1, extra_finals: bool = True) -> Lattice:
    """Seeded acyclic lattice with a 0->1->...->n-1 backbone, always valid."""
    n = num_states if num_states is not None else rng.randint(3, 9)
    arcs = []

    def make_arc(src: int, dst: int) -> Arc:
        word = 0 if rng.random() < eps_prob else rng.choice(word_ids)
        return Arc(src, dst, word,
                   CostPair(round(rng.uniform(0.0, 4.0), 6), round(rng.uniform(0.1, 6.0), 6)))

    for i in range(n - 1):
        arc = make_arc(i, i + 1)
        if i == 0 and arc.word == 0:
            arc = Arc(0, 1, rng.choice(word_ids), arc.weight)  # keep at least one word
        arcs.append(arc)
    extra = extra_arcs if extra_arcs is not None else rng.randint(0, 2 * n)
    for _ in range(extra):
        src = rng.randrange(0, n - 1)
        dst = rng.randrange(src + 1, n)
        arcs.append(make_arc(src, dst))
    finals = {n - 1: CostPair(0.0, round(rng.uniform(0.0, 1.0), 6))}
    if extra_finals and n > 3 and rng.random() < 0.3:
        finals[n - 2] = CostPair(0.0, round(rng.uniform(0.0, 2.0), 6))
    lat = Lattice(utt_id, n, tuple(arcs), finals)
    assert not lattice.validate(lat)
    return lat


def stamp_lm_costs(lat: Lattice, model: ArpaModel, symbols: SymbolTable,
                   order: int) -> Lattice:
    """Write exact ARPA scores into every lm_cost (via a rescore pass)."""
    return rescore_lattice(lat, ArpaBackend(model, symbols), order)


def make_fixtures(seed: int, out_dir: str, count: int = 12, stamp_order: int = 2) -> None:
    """Write the fixture corpus tree: symbols, LMs, lattices, manifest."""
    rng = random.Random(seed)
    out = FsPath(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    symbols = fixture_symbols()
    (out / "words.txt").write_text(write_symbols(symbols), encoding="utf-8")
    for order in (2, 4):
        (out / f"lm{order}.arpa").write_text(arpa.write_arpa(fixture_arpa(order)),
                                             encoding="utf-8")
    model = fixture_arpa(stamp_order)

    manifest_lines = []
    demo = stamp_lm_costs(fixture_lattice(), model, symbols, stamp_order)
    (out / "sodas.lat").write_text(lattice.write_lattice(demo), encoding="utf-8")
    ref = " ".join(symbols.symbol(w) for w in best_path(demo).words)
    manifest_lines.append(f"session0\t{demo.utt_id}\t{out / 'sodas.lat'}\t{ref}")

    for i in range(count):
        lat = stamp_lm_costs(random_lattice(rng, f"rand-{i:03d}"), model, symbols, stamp_order)
        path = out / f"rand_{i:03d}.lat"
        path.write_text(lattice.write_lattice(lat), encoding="utf-8")
        # reference: a random complete path's words, so oracle WER is 0
        paths = lattice.enumerate_paths(lat, limit=5000).paths
        candidates = [p for p in paths if p.words] or list(paths)
        ref_words = rng.choice(candidates).words
        ref = " ".join(symbols.symbol(w) for w in ref_words)
        session = f"session{1 + i % 3}"
        manifest_lines.append(f"{session}\t{lat.utt_id}\t{path}\t{ref}")

    manifest_lines.sort(key=lambda line: line.split("\t")[0])  # sessions contiguous
    (out / "manifest.tsv").write_text("\n".join(manifest_lines) + "\n", encoding="utf-8")
