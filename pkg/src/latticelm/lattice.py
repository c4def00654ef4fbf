"""Word-lattice data model, text serialization, validation and path utilities.

A lattice is an acyclic weighted automaton over word ids. Every arc carries
a (lm_cost, ac_cost) pair of negative natural-log probabilities (nats), kept
separate so the first-pass LM score can be replaced exactly during rescoring.
State 0 is always the start state; word id 0 is epsilon.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

EPSILON = 0


class LatticeFormatError(ValueError):
    pass


class LatticeInvalidError(ValueError):
    """Raised when a parsed or constructed lattice fails validation."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


def _fmt(x: float) -> str:
    return format(x, ".17g")


@dataclass(frozen=True)
class CostPair:
    lm: float
    ac: float

    def __add__(self, other: "CostPair") -> "CostPair":
        return CostPair(self.lm + other.lm, self.ac + other.ac)

    def total(self, lm_scale: float) -> float:
        return self.ac + lm_scale * self.lm


ZERO_COST = CostPair(0.0, 0.0)


@dataclass(frozen=True)
class Arc:
    src: int
    dst: int
    word: int
    weight: CostPair


@dataclass(frozen=True)
class Lattice:
    utt_id: str
    num_states: int
    arcs: tuple[Arc, ...]
    finals: dict[int, CostPair]

    # start state is always 0 by convention
    @property
    def start(self) -> int:
        return 0

    def arcs_from(self) -> list[list[Arc]]:
        out: list[list[Arc]] = [[] for _ in range(self.num_states)]
        for arc in self.arcs:
            out[arc.src].append(arc)
        return out


@dataclass(frozen=True)
class Path:
    words: tuple[int, ...]
    lm_cost: float
    ac_cost: float

    def total(self, lm_scale: float) -> float:
        return self.ac_cost + lm_scale * self.lm_cost


@dataclass(frozen=True)
class PathEnumeration:
    paths: tuple[Path, ...]
    truncated: bool


def _parse_cost_pair(token: str, where: str) -> CostPair:
    parts = token.split(",")
    if len(parts) != 2:
        raise LatticeFormatError(f"{where}: malformed cost pair {token!r}")
    try:
        lm, ac = float(parts[0]), float(parts[1])
    except ValueError:
        raise LatticeFormatError(f"{where}: malformed cost pair {token!r}") from None
    if not (math.isfinite(lm) and math.isfinite(ac)):
        raise LatticeFormatError(f"{where}: non-finite cost pair {token!r}")
    return CostPair(lm, ac)


def parse_lattice(text: str) -> Lattice:
    """Parse a single lattice from text; validates before returning."""
    lattices = list(iter_lattices(text))
    if len(lattices) != 1:
        raise LatticeFormatError(f"expected exactly one lattice, found {len(lattices)}")
    return lattices[0]


def iter_lattices(text: str) -> Iterator[Lattice]:
    """Parse a file that may hold many blank-line separated lattices."""
    block: list[str] = []
    lineno = 0
    start_line = 1
    for lineno, line in enumerate(text.splitlines(), 1):
        if line.strip():
            if not block:
                start_line = lineno
            block.append(line)
        elif block:
            yield _parse_block(block, start_line)
            block = []
    if block:
        yield _parse_block(block, start_line)


def _parse_block(lines: list[str], start_line: int) -> Lattice:
    header = lines[0].split()
    if len(header) != 2 or header[0] != "utt":
        raise LatticeFormatError(f"line {start_line}: expected `utt <utt-id>` header")
    utt_id = header[1]
    arcs: list[Arc] = []
    finals: dict[int, CostPair] = {}
    max_state = 0
    for off, line in enumerate(lines[1:], 1):
        where = f"line {start_line + off}"
        fields = line.split()
        if len(fields) == 4:
            try:
                src, dst, word = int(fields[0]), int(fields[1]), int(fields[2])
            except ValueError:
                raise LatticeFormatError(f"{where}: non-integer arc field") from None
            if src < 0 or dst < 0 or word < 0:
                raise LatticeFormatError(f"{where}: negative arc field")
            arcs.append(Arc(src, dst, word, _parse_cost_pair(fields[3], where)))
            max_state = max(max_state, src, dst)
        elif len(fields) == 2:
            try:
                state = int(fields[0])
            except ValueError:
                raise LatticeFormatError(f"{where}: non-integer final state") from None
            if state in finals:
                raise LatticeFormatError(f"{where}: duplicate final state {state}")
            finals[state] = _parse_cost_pair(fields[1], where)
            max_state = max(max_state, state)
        else:
            raise LatticeFormatError(f"{where}: expected 4-field arc or 2-field final line")
    lat = Lattice(utt_id, max_state + 1, tuple(arcs), finals)
    violations = validate(lat)
    if violations:
        raise LatticeInvalidError(violations)
    return lat


def write_lattice(lat: Lattice) -> str:
    """Canonical text form: arcs sorted by (src, dst, word), 17-digit costs."""
    out = [f"utt {lat.utt_id}\n"]
    for arc in sorted(lat.arcs, key=lambda a: (a.src, a.dst, a.word)):
        out.append(f"{arc.src} {arc.dst} {arc.word} {_fmt(arc.weight.lm)},{_fmt(arc.weight.ac)}\n")
    for state in sorted(lat.finals):
        w = lat.finals[state]
        out.append(f"{state} {_fmt(w.lm)},{_fmt(w.ac)}\n")
    out.append("\n")
    return "".join(out)


def write_lattices(lattices) -> str:
    return "".join(write_lattice(lat) for lat in lattices)


def structurally_equal(a: Lattice, b: Lattice) -> bool:
    """Equality up to arc ordering (the text form is canonically sorted)."""
    key = lambda arc: (arc.src, arc.dst, arc.word, arc.weight.lm, arc.weight.ac)
    return (a.utt_id == b.utt_id and a.num_states == b.num_states
            and sorted(a.arcs, key=key) == sorted(b.arcs, key=key)
            and a.finals == b.finals)


def topological_order(lat: Lattice) -> list[int] | None:
    """Topological order of states, or None if the lattice has a cycle."""
    indeg = [0] * lat.num_states
    succ: list[list[int]] = [[] for _ in range(lat.num_states)]
    for arc in lat.arcs:
        indeg[arc.dst] += 1
        succ[arc.src].append(arc.dst)
    stack = [s for s in range(lat.num_states) if indeg[s] == 0]
    order = []
    while stack:
        s = stack.pop()
        order.append(s)
        for d in succ[s]:
            indeg[d] -= 1
            if indeg[d] == 0:
                stack.append(d)
    if len(order) != lat.num_states:
        return None
    return order


def validate(lat: Lattice) -> list[str]:
    """Report every invariant violation; empty list means valid."""
    violations = []
    if lat.num_states < 1:
        return ["lattice has no states"]
    for i, arc in enumerate(lat.arcs):
        if not (0 <= arc.src < lat.num_states):
            violations.append(f"arc {i}: src {arc.src} out of range")
        if not (0 <= arc.dst < lat.num_states):
            violations.append(f"arc {i}: dst {arc.dst} out of range")
        if not (math.isfinite(arc.weight.lm) and math.isfinite(arc.weight.ac)):
            violations.append(f"arc {i}: non-finite weight")
    for state in lat.finals:
        if not (0 <= state < lat.num_states):
            violations.append(f"final state {state} out of range")
    if violations:
        return violations
    if not lat.finals:
        violations.append("no final state")
    if topological_order(lat) is None:
        violations.append("cycle detected")
    # forward reachability from start
    succ: list[list[int]] = [[] for _ in range(lat.num_states)]
    pred: list[list[int]] = [[] for _ in range(lat.num_states)]
    for arc in lat.arcs:
        succ[arc.src].append(arc.dst)
        pred[arc.dst].append(arc.src)
    reach = _closure([lat.start], succ)
    coreach = _closure(list(lat.finals), pred)
    for s in range(lat.num_states):
        if s not in reach:
            violations.append(f"state {s} unreachable")
        elif s not in coreach:
            violations.append(f"state {s} not co-reachable")
    return violations


def _closure(seeds: list[int], edges: list[list[int]]) -> set[int]:
    seen = set(seeds)
    stack = list(seeds)
    while stack:
        s = stack.pop()
        for d in edges[s]:
            if d not in seen:
                seen.add(d)
                stack.append(d)
    return seen


def enumerate_paths(lat: Lattice, limit: int = 100000) -> PathEnumeration:
    """All complete start->final paths up to limit, lexicographic by words.

    The truncated flag is set when more than `limit` paths exist; the
    returned list is then an arbitrary subset and should not be relied on.
    """
    adj = lat.arcs_from()
    for lst in adj:
        lst.sort(key=lambda a: (a.dst, a.word))
    paths: list[Path] = []
    truncated = False

    def walk(state: int, words: list[int], lm: float, ac: float) -> bool:
        nonlocal truncated
        if state in lat.finals:
            w = lat.finals[state]
            if len(paths) >= limit:
                truncated = True
                return False
            paths.append(Path(tuple(words), lm + w.lm, ac + w.ac))
        for arc in adj[state]:
            if arc.word != EPSILON:
                words.append(arc.word)
            if not walk(arc.dst, words, lm + arc.weight.lm, ac + arc.weight.ac):
                return False
            if arc.word != EPSILON:
                words.pop()
        return True

    walk(lat.start, [], 0.0, 0.0)
    paths.sort(key=lambda p: (p.words, p.lm_cost, p.ac_cost))
    return PathEnumeration(tuple(paths), truncated)


def _forward_costs(lat: Lattice, lm_scale: float, order: list[int]) -> list[float]:
    alpha = [math.inf] * lat.num_states
    alpha[lat.start] = 0.0
    adj = lat.arcs_from()
    for s in order:
        if alpha[s] == math.inf:
            continue
        for arc in adj[s]:
            c = alpha[s] + arc.weight.total(lm_scale)
            if c < alpha[arc.dst]:
                alpha[arc.dst] = c
    return alpha


def _backward_costs(lat: Lattice, lm_scale: float, order: list[int]) -> list[float]:
    beta = [math.inf] * lat.num_states
    for state, w in lat.finals.items():
        beta[state] = w.total(lm_scale)
    adj = lat.arcs_from()
    for s in reversed(order):
        for arc in adj[s]:
            if beta[arc.dst] == math.inf:
                continue
            c = arc.weight.total(lm_scale) + beta[arc.dst]
            if c < beta[s]:
                beta[s] = c
    return beta


def prune(lat: Lattice, beam: float, lm_scale: float = 1.0) -> Lattice:
    """Keep exactly the states/arcs on a complete path within `beam` of best."""
    if beam < 0:
        raise ValueError("beam must be non-negative")
    order = topological_order(lat)
    assert order is not None
    alpha = _forward_costs(lat, lm_scale, order)
    beta = _backward_costs(lat, lm_scale, order)
    best = beta[lat.start]
    if best == math.inf:
        raise LatticeInvalidError(["no complete path"])
    threshold = best + beam
    kept_arcs = [a for a in lat.arcs
                 if alpha[a.src] + a.weight.total(lm_scale) + beta[a.dst] <= threshold]
    kept_finals = {s: w for s, w in lat.finals.items()
                   if alpha[s] + w.total(lm_scale) <= threshold}
    kept_states = {lat.start} | set(kept_finals)
    for a in kept_arcs:
        kept_states.add(a.src)
        kept_states.add(a.dst)
    renum = {old: new for new, old in enumerate(sorted(kept_states))}
    out = Lattice(
        lat.utt_id,
        len(renum),
        tuple(Arc(renum[a.src], renum[a.dst], a.word, a.weight) for a in kept_arcs),
        {renum[s]: w for s, w in kept_finals.items()},
    )
    violations = validate(out)
    if violations:
        raise LatticeInvalidError(violations)
    return out
