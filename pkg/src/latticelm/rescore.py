"""Composition-based rescoring, best path, oracle path and WER scoring.

Rescoring pairs each lattice state with a bounded LM history, replaces the
first-pass lm_cost on every arc with the backend's score, and keeps every
ac_cost exactly. Best path and oracle path run over the tropical (min, +)
semiring with total tie-breaks for reproducibility.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

from .lattice import (EPSILON, Arc, CostPair, Lattice, Path,
                      topological_order)
from .lm import EOS, HistoryState, LmBackend, LmQuery, advance


class RescoreError(RuntimeError):
    """Backend failure during rescoring, with the offending query attached."""

    def __init__(self, query: LmQuery, cause: Exception):
        self.query = query
        super().__init__(f"backend failed on {query}: {cause}")


@dataclass(frozen=True)
class WerCounts:
    substitutions: int
    insertions: int
    deletions: int
    reference_length: int

    @property
    def errors(self) -> int:
        return self.substitutions + self.insertions + self.deletions

    @property
    def rate(self) -> float:
        if self.reference_length == 0:
            raise ValueError("WER undefined for empty reference")
        return self.errors / self.reference_length

    def __add__(self, other: "WerCounts") -> "WerCounts":
        return WerCounts(
            self.substitutions + other.substitutions,
            self.insertions + other.insertions,
            self.deletions + other.deletions,
            self.reference_length + other.reference_length,
        )


def rescore(lat: Lattice, backend: LmBackend, order: int) -> Lattice:
    """Compose the lattice with the backend's on-demand LM at this order.

    Output states are (lattice state, history) pairs renumbered densely by
    discovery order; epsilon arcs pass the history through with lm_cost 0.
    """
    adj = lat.arcs_from()
    for lst in adj:
        lst.sort(key=lambda a: (a.dst, a.word))
    start = (lat.start, HistoryState.initial(order))
    ids: dict[tuple[int, HistoryState], int] = {start: 0}
    queue = deque([start])
    arcs: list[Arc] = []
    finals: dict[int, CostPair] = {}
    while queue:
        state, hist = queue.popleft()
        sid = ids[(state, hist)]
        if state in lat.finals:
            try:
                final_lp = backend.score_final(hist)
            except Exception as e:
                raise RescoreError(LmQuery(hist, EOS), e) from e
            finals[sid] = CostPair(-final_lp, lat.finals[state].ac)
        for arc in adj[state]:
            if arc.word == EPSILON:
                weight = CostPair(0.0, arc.weight.ac)
                next_hist = hist
            else:
                try:
                    lp = backend.score(hist, arc.word)
                except Exception as e:
                    raise RescoreError(LmQuery(hist, arc.word), e) from e
                weight = CostPair(-lp, arc.weight.ac)
                next_hist = advance(hist, arc.word)
            key = (arc.dst, next_hist)
            if key not in ids:
                ids[key] = len(ids)
                queue.append(key)
            arcs.append(Arc(sid, ids[key], arc.word, weight))
    return Lattice(lat.utt_id, len(ids), tuple(arcs), finals)


def best_path(lat: Lattice, lm_scale: float = 1.0) -> Path:
    """Minimum ac + lm_scale*lm path; ties go to the smallest word sequence."""
    order = topological_order(lat)
    if order is None:
        raise ValueError("lattice has a cycle")
    adj = lat.arcs_from()
    for lst in adj:
        lst.sort(key=lambda a: (a.dst, a.word))
    # best[s] = (cost-to-final, word suffix, chosen arc or None for final stop)
    best: list[tuple[float, tuple[int, ...], Arc | None] | None] = [None] * lat.num_states
    for s in reversed(order):
        choice: tuple[float, tuple[int, ...], Arc | None] | None = None
        if s in lat.finals:
            choice = (lat.finals[s].total(lm_scale), (), None)
        for arc in adj[s]:
            sub = best[arc.dst]
            if sub is None:
                continue
            cost = arc.weight.total(lm_scale) + sub[0]
            words = ((arc.word,) if arc.word != EPSILON else ()) + sub[1]
            if choice is None or (cost, words) < (choice[0], choice[1]):
                choice = (cost, words, arc)
        best[s] = choice
    if best[lat.start] is None:
        raise ValueError("no complete path")
    lm = ac = 0.0
    s = lat.start
    words: list[int] = []
    while True:
        _, _, arc = best[s]  # type: ignore[misc]
        if arc is None:
            w = lat.finals[s]
            return Path(tuple(words), lm + w.lm, ac + w.ac)
        lm += arc.weight.lm
        ac += arc.weight.ac
        if arc.word != EPSILON:
            words.append(arc.word)
        s = arc.dst


def wer(hyp: list[int] | tuple[int, ...], ref: list[int] | tuple[int, ...]) -> WerCounts:
    """Minimal unit-cost alignment counts; substitution preferred on ties."""
    if len(ref) == 0:
        raise ValueError("WER undefined for empty reference")
    n, m = len(hyp), len(ref)
    cost = [[0] * (m + 1) for _ in range(n + 1)]
    op = [[""] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        cost[i][0] = i
        op[i][0] = "I"
    for j in range(1, m + 1):
        cost[0][j] = j
        op[0][j] = "D"
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            diag = cost[i - 1][j - 1] + (0 if hyp[i - 1] == ref[j - 1] else 1)
            dele = cost[i][j - 1] + 1
            ins = cost[i - 1][j] + 1
            # tie preference: substitution/match, then deletion, then insertion
            if diag <= dele and diag <= ins:
                cost[i][j], op[i][j] = diag, ("M" if hyp[i - 1] == ref[j - 1] else "S")
            elif dele <= ins:
                cost[i][j], op[i][j] = dele, "D"
            else:
                cost[i][j], op[i][j] = ins, "I"
    subs = inss = dels = 0
    i, j = n, m
    while i > 0 or j > 0:
        o = op[i][j]
        if o in ("M", "S"):
            subs += o == "S"
            i, j = i - 1, j - 1
        elif o == "D":
            dels += 1
            j -= 1
        else:
            inss += 1
            i -= 1
    return WerCounts(subs, inss, dels, m)


def score_corpus(pairs) -> WerCounts:
    """Sum counts over (hyp, ref) pairs; rate = total errors / total ref length."""
    total = WerCounts(0, 0, 0, 0)
    for hyp, ref in pairs:
        total = total + wer(hyp, ref)
    return total


def oracle_path(lat: Lattice, reference: list[int] | tuple[int, ...]) -> tuple[Path, WerCounts]:
    """Lattice path with minimum edit distance to the reference.

    Dynamic program over (lattice state, reference position); edit-distance
    ties are broken by lower total lattice cost at lm_scale 1.
    """
    order = topological_order(lat)
    if order is None:
        raise ValueError("lattice has a cycle")
    adj = lat.arcs_from()
    for lst in adj:
        lst.sort(key=lambda a: (a.dst, a.word))
    ref = tuple(reference)
    R = len(ref)
    INF = (math.inf, math.inf)
    # value[(s, j)] = (edits, lattice cost); back[(s, j)] = (prev node, op, arc)
    value = {(lat.start, 0): (0.0, 0.0)}
    back: dict[tuple[int, int], tuple[tuple[int, int], str, Arc | None]] = {}

    def relax(node, cand, prev, opname, arc):
        if cand < value.get(node, INF):
            value[node] = cand
            back[node] = (prev, opname, arc)

    for s in order:
        for j in range(R + 1):
            node = (s, j)
            if node not in value:
                continue
            edits, cost = value[node]
            if j < R:
                relax((s, j + 1), (edits + 1, cost), node, "del", None)
            for arc in adj[s]:
                c = cost + arc.weight.total(1.0)
                if arc.word == EPSILON:
                    relax((arc.dst, j), (edits, c), node, "eps", arc)
                else:
                    relax((arc.dst, j), (edits + 1, c), node, "ins", arc)
                    if j < R:
                        sub = 0 if arc.word == ref[j] else 1
                        relax((arc.dst, j + 1), (edits + sub, c), node,
                              "match" if sub == 0 else "sub", arc)
    terminal = None
    terminal_node = None
    for s, w in sorted(lat.finals.items()):
        node = (s, R)
        if node in value:
            edits, cost = value[node]
            cand = (edits, cost + w.total(1.0))
            if terminal is None or cand < terminal:
                terminal, terminal_node = cand, node
    if terminal_node is None:
        raise ValueError("no complete path")
    # backtrace
    words_rev: list[int] = []
    lm = lat.finals[terminal_node[0]].lm
    ac = lat.finals[terminal_node[0]].ac
    subs = inss = dels = 0
    node = terminal_node
    while node != (lat.start, 0):
        prev, opname, arc = back[node]
        if arc is not None:
            lm += arc.weight.lm
            ac += arc.weight.ac
            if arc.word != EPSILON:
                words_rev.append(arc.word)
        subs += opname == "sub"
        inss += opname == "ins"
        dels += opname == "del"
        node = prev
    path = Path(tuple(reversed(words_rev)), lm, ac)
    return path, WerCounts(subs, inss, dels, R)
